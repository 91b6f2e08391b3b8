#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(table) = bathgen::runner::parse_table(text) else { return };
    // Accepted tables survive a render/parse round trip unchanged.
    let again = bathgen::runner::parse_table(&table.render()).expect("rendered table must parse");
    assert_eq!(again, table);
});
