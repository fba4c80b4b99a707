#![no_main]

use libfuzzer_sys::fuzz_target;
use qrloop::config::parse_run_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_run_json(text) {
        let _ = cfg.code.validate();
        let _ = cfg.chain.resolve(1);
    }
});
