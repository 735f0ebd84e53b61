#![no_main]

use kkt2_core::io::parse_problem;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(file) = parse_problem(text) else {
        return;
    };
    // a valid file survives a round trip unchanged
    let again = parse_problem(&file.to_json()).expect("round trip");
    assert_eq!(again.digest(), file.digest());
    let small = file.builtin.is_none_or(|b| b.size <= 64) && file.n.is_none_or(|n| n <= 64);
    if small {
        let _ = file.load();
    }
});
