#![no_main]

use libfuzzer_sys::fuzz_target;
use rfdm_core::io::DatasetManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = DatasetManifest::parse(text) {
        let json = m.to_json().unwrap();
        assert_eq!(DatasetManifest::parse(&json).unwrap(), m);
    }
});
