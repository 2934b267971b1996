#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsedag::graphs::{parse_edge_list, read_edge_list, write_edge_list};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_edge_list(text);
    }
    // Anything accepted as a matrix must survive a write/read round trip.
    if let Ok(w) = read_edge_list(data, None) {
        let mut buf = Vec::new();
        write_edge_list(&mut buf, &w, 0.0).unwrap();
        let again = read_edge_list(buf.as_slice(), Some(w.d())).unwrap();
        assert_eq!(again, w);
    }
});
