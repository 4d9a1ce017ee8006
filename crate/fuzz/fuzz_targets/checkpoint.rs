#![no_main]
use libfuzzer_sys::fuzz_target;
use monpol_core::deep_predict::LayeredNetwork;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(net) = LayeredNetwork::from_checkpoint(text) {
            let back = LayeredNetwork::from_checkpoint(&net.to_checkpoint()).expect("re-parse");
            assert_eq!(back.layers(), net.layers());
        }
    }
});
