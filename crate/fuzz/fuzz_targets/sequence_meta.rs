#![no_main]

use libfuzzer_sys::fuzz_target;
use pftrack::bench::SequenceMeta;

fuzz_target!(|data: &[u8]| {
    if let Ok(src) = std::str::from_utf8(data) {
        let _ = SequenceMeta::from_toml_str(src);
    }
});
