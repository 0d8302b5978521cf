#![no_main]

use foothold_core::io::grid_from_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = grid_from_csv(text);
    }
});
