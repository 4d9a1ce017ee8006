#![no_main]
use libfuzzer_sys::fuzz_target;
use monpol_core::auction::read_outcome_csv;

fuzz_target!(|data: &[u8]| {
    let _ = read_outcome_csv(data);
});
