#![no_main]

use libfuzzer_sys::fuzz_target;
use qrloop::sweep::Axis;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(axis) = text.parse::<Axis>() {
        assert!(!axis.values.is_empty());
        assert!(axis.values.iter().all(|v| v.is_finite()));
        assert!(axis.values.windows(2).all(|w| w[0] != w[1]));
        let _ = axis.integers("n");
    }
});
