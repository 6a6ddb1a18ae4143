#![no_main]
use libfuzzer_sys::fuzz_target;
use spectral_lab::io::read_measure_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(nu) = read_measure_csv(data) {
        let _ = nu.ids(0.0);
        let _ = nu.total_mass();
    }
});
