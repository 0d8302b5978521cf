#![no_main]

use foothold_core::io::read_pgm;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_pgm(data);
});
