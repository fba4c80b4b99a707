#![no_main]

use libfuzzer_sys::fuzz_target;
use qrloop::config::{parse_run_json, parse_run_toml};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = parse_run_toml(text) else {
        return;
    };
    let Ok(rc) = cfg.chain.resolve(cfg.chain.loops.unwrap_or(1)) else {
        return;
    };
    if cfg.code.validate().is_err() {
        return;
    }
    // a valid config survives a JSON round trip and evaluates without panicking
    let json = serde_json::to_string(&cfg).unwrap();
    assert_eq!(parse_run_json(&json).unwrap(), cfg);
    if rc.loops <= 100_000 {
        let _ = qrloop::secret_key_rate(&rc, &cfg.code);
    }
    if let Ok(range) = cfg.optimize.m_range() {
        if range.max - range.min <= 1000 {
            let _ = qrloop::sweep::optimize_m(&rc, &cfg.code, range);
        }
    }
});
