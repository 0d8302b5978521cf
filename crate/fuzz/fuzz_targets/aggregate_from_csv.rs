#![no_main]

use foothold_core::io::aggregate_from_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = aggregate_from_csv(text);
    }
});
