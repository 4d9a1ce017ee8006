#![no_main]
use libfuzzer_sys::fuzz_target;
use monpol_core::secure::Transcript;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(t) = Transcript::parse(text) {
            let back = Transcript::parse(&t.to_text()).expect("re-parse");
            assert_eq!(back.records.len(), t.records.len());
        }
    }
});
