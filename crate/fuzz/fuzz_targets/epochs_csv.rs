#![no_main]
use libfuzzer_sys::fuzz_target;
use monpol_core::harness::read_epochs_csv;

fuzz_target!(|data: &[u8]| {
    let _ = read_epochs_csv(data);
});
