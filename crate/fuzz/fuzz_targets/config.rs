#![no_main]

use libfuzzer_sys::fuzz_target;
use partial_ot::experiment::ExperimentConfig;
use partial_ot::io::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(map) = parse_config(text) else {
        return;
    };
    assert!(map.keys().all(|k| !k.contains('_') && k.to_lowercase() == *k));
    // Validation may reject the values but must not panic.
    let _ = ExperimentConfig::from_flat(&map, None);
});
