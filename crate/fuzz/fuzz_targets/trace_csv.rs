#![no_main]
use libfuzzer_sys::fuzz_target;
use monpol_core::consensus::read_trace_csv;

fuzz_target!(|data: &[u8]| {
    let _ = read_trace_csv(data);
});
