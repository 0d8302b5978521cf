#![no_main]

use foothold_core::terrain::TerrainSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(spec) = TerrainSpec::parse(text) {
            assert_eq!(TerrainSpec::parse(&spec.to_config().to_text()).ok(), Some(spec));
        }
    }
});
