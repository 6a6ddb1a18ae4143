#![no_main]
use libfuzzer_sys::fuzz_target;
use spectral_lab::io::read_bands_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(b) = read_bands_json(text) {
        let _ = b.contains(0.0);
        let _ = b.edge_distance(0.0);
    }
});
