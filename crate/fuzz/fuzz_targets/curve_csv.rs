#![no_main]
use libfuzzer_sys::fuzz_target;
use spectral_lab::io::read_curve_csv;

fuzz_target!(|data: &[u8]| {
    let _ = read_curve_csv(data);
});
