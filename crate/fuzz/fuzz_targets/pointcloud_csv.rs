#![no_main]

use libfuzzer_sys::fuzz_target;
use partial_ot::io::{parse_pointcloud, write_pointcloud};

fuzz_target!(|data: &[u8]| {
    let Ok(cloud) = parse_pointcloud(data) else {
        return;
    };
    assert!(cloud.points().iter().all(|v| v.is_finite()));
    if let Some(labels) = cloud.labels() {
        assert_eq!(labels.len(), cloud.len());
    }
    // Shortest round-trip float formatting makes write-then-parse exact.
    let mut out = Vec::new();
    write_pointcloud(&cloud, &mut out).unwrap();
    let again = parse_pointcloud(out.as_slice()).unwrap();
    assert_eq!(again.points(), cloud.points());
    assert_eq!(again.labels(), cloud.labels());
});
