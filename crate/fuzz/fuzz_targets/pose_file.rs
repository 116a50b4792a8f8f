#![no_main]

use libfuzzer_sys::fuzz_target;
use pftrack::bench::{format_pose_file, parse_pose_file, PoseUnits};

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    for units in [PoseUnits::Meters, PoseUnits::Millimeters] {
        if let Ok(poses) = parse_pose_file(src, units) {
            let again = parse_pose_file(&format_pose_file(&poses), PoseUnits::Meters).expect("written poses parse");
            assert_eq!(again.len(), poses.len());
        }
    }
});
