#![no_main]

use libfuzzer_sys::fuzz_target;
use qrloop::chain::CodeSpec;
use qrloop::code_gkp::StategenLevel;
use qrloop::mc_oracle::DependenceModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(level) = text.parse::<StategenLevel>() {
        assert_eq!(level.to_string().parse::<StategenLevel>().unwrap(), level);
    }
    let _ = text.parse::<DependenceModel>();
    if let Ok(code) = serde_json::from_str::<CodeSpec>(text) {
        let _ = code.validate();
        let _ = code.label();
        let back: CodeSpec = serde_json::from_str(&serde_json::to_string(&code).unwrap()).unwrap();
        assert_eq!(back.label(), code.label());
    }
});
