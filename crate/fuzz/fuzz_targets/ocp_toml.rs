#![no_main]
use libfuzzer_sys::fuzz_target;
use monpol_core::scenario_mpc::ScenarioOcp;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(ocp) = ScenarioOcp::from_toml_str(text) {
            let _ = ScenarioOcp::from_toml_str(&ocp.to_toml_string()).expect("re-parse");
        }
    }
});
