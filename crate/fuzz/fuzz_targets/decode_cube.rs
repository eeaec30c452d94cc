#![no_main]

use libfuzzer_sys::fuzz_target;
use rfdm_core::io::{decode_cube, encode_cube};
use rfdm_core::radar::RadarConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(raw) = decode_cube(data) else { return };
    let [frames, chirps, samples, rx] = raw.dims;
    let config = RadarConfig { n_chirps: chirps, n_samples: samples, n_rx: rx, ..Default::default() };
    // Anything that decodes and attaches must re-encode to the same bytes.
    if frames > 0 && config.validate().is_ok() {
        if let Ok(cube) = raw.into_cube(config) {
            assert_eq!(encode_cube(&cube).unwrap(), data);
        }
    }
});
