#![no_main]

use libfuzzer_sys::fuzz_target;
use qrloop::config::{parse_sweep_toml, SweepSection};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = parse_sweep_toml(text) else {
        return;
    };
    match &cfg.sweep {
        SweepSection::NmGrid { segments, loops } => {
            let _ = segments.axis().and_then(|a| a.integers("n"));
            let _ = loops.axis().and_then(|a| a.integers("m"));
        }
        SweepSection::Distance { lengths_km } => {
            let _ = lengths_km.axis();
        }
    }
});
