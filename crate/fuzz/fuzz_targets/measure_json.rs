#![no_main]
use libfuzzer_sys::fuzz_target;
use spectral_lab::io::read_measure_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(nu) = read_measure_json(text) {
        let _ = nu.ids(0.0);
    }
});
