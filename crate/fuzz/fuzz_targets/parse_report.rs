#![no_main]

use kkt2_core::report::CertificationReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(r) = CertificationReport::from_json(text) {
        let _ = r.to_text();
        let _ = r.exit_code();
        let _ = r.to_json();
    }
});
