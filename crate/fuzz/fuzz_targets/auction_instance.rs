#![no_main]
use libfuzzer_sys::fuzz_target;
use monpol_core::auction::AuctionInstance;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(inst) = AuctionInstance::from_toml_str(text) {
            let _ = AuctionInstance::from_toml_str(&inst.to_toml_string()).expect("re-parse");
        }
    }
});
