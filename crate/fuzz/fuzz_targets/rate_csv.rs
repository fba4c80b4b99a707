#![no_main]

use libfuzzer_sys::fuzz_target;
use qrloop::report::{read_rate_csv, RATE_COLUMNS};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = read_rate_csv(text) {
        for row in rows {
            assert!(row.len() <= RATE_COLUMNS.len());
        }
    }
});
