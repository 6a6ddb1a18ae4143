#![no_main]
use libfuzzer_sys::fuzz_target;
use spectral_lab::config::parse_alpha;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(a) = parse_alpha(text) {
        assert!(a > 0.0 && a < 1.0);
    }
});
