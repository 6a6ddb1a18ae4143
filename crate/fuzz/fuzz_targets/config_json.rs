#![no_main]
use libfuzzer_sys::fuzz_target;
use spectral_lab::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_json(text) {
        if cfg.validate().is_ok() {
            let _ = cfg.construction_params().validate();
            let _ = cfg.system.build();
            let _ = cfg.numerics.grid.resolve(1.0);
        }
    }
});
