#![no_main]

use libfuzzer_sys::fuzz_target;
use pftrack::bench::{format_trajectory_csv, parse_trajectory_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_trajectory_csv(src) {
        let again = parse_trajectory_csv(&format_trajectory_csv(&rows)).expect("written trajectory parses");
        assert_eq!(again.len(), rows.len());
    }
});
