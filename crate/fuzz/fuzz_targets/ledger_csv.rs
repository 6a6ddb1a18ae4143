#![no_main]
use libfuzzer_sys::fuzz_target;
use spectral_lab::io::read_ledger_csv;

fuzz_target!(|data: &[u8]| {
    let _ = read_ledger_csv(data);
});
