#![no_main]

use kkt2_core::io::parse_point;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(p) = parse_point(text) {
            assert!(!p.x.is_empty());
        }
    }
});
