#![no_main]

use libfuzzer_sys::fuzz_target;

// Parsing and validation must reject bad input with an error, never a panic,
// and validation must not allocate sector-sized buffers.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = bathgen::runner::parse_config(text) {
            let _ = cfg.validate();
        }
    }
});
