#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsedag::data::{ingest_csv, parse_data_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(x) = parse_data_csv(text, false) {
        assert!(x.iter().all(|v| v.is_finite()));
    }
    let _ = parse_data_csv(text, true);
    let _ = ingest_csv(data, None);
});
