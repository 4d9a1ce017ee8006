#![no_main]
use libfuzzer_sys::fuzz_target;
use monpol_core::secure::read_report_csv;

fuzz_target!(|data: &[u8]| {
    let _ = read_report_csv(data);
});
