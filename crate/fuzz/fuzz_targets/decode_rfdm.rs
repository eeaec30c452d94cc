#![no_main]

use libfuzzer_sys::fuzz_target;
use rfdm_core::io::{decode_rfdm, encode_rfdm};

fuzz_target!(|data: &[u8]| {
    if let Ok(seq) = decode_rfdm(data) {
        assert_eq!(encode_rfdm(&seq).unwrap(), data);
    }
});
