#![no_main]

use libfuzzer_sys::fuzz_target;
use pftrack::config::TrackerConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = TrackerConfig::from_toml_str(src) {
        let again = TrackerConfig::from_toml_str(&cfg.to_toml_string()).expect("written config parses");
        assert_eq!(again, cfg);
    }
});
