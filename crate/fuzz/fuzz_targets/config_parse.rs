#![no_main]

use foothold_core::config::KvConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = KvConfig::parse(text) {
            let _ = cfg.parse_bool("dump_depth", false);
            let _ = cfg.parse_list::<f64>("difficulties");
        }
    }
});
