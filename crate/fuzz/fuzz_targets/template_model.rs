#![no_main]

use libfuzzer_sys::fuzz_target;
use pftrack::viewpoint::ViewpointModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = ViewpointModel::decode(data) {
        let again = ViewpointModel::decode(&model.encode()).expect("encoded model decodes");
        assert_eq!(again, model);
    }
});
