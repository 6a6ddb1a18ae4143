#![no_main]
use libfuzzer_sys::fuzz_target;
use spectral_lab::config::{parse_overrides, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let args: Vec<String> = text.split('\n').map(str::to_string).collect();
    if let Ok(pairs) = parse_overrides(&args) {
        if let Ok(cfg) = RunConfig::default().with_overrides(&pairs) {
            let _ = cfg.validate();
        }
    }
});
