#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((i, j)) = bathgen::runner::parse_pair(text) {
        assert!(i >= 1 && j >= 1, "pairs are 1-based");
        assert_eq!(bathgen::runner::parse_pair(&format!("{i},{j}")).unwrap(), (i, j));
    }
});
