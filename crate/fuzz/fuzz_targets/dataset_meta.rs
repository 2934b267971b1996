#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsedag::DatasetMeta;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(meta) = DatasetMeta::parse_json(text) {
            assert!(meta.n > 0 && meta.d > 0);
        }
    }
});
