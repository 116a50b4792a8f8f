#![no_main]

use libfuzzer_sys::fuzz_target;
use pftrack::TriangleMesh;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(mesh) = TriangleMesh::from_obj_str(src) {
        // Whatever parses must survive a write and re-read unchanged.
        let again = TriangleMesh::from_obj_str(&mesh.to_obj_string()).expect("written mesh parses");
        assert_eq!(again.triangles(), mesh.triangles());
        assert_eq!(again.vertices().len(), mesh.vertices().len());
    }
});
