#![no_main]

use libfuzzer_sys::fuzz_target;
use rfdm_core::io::{decode_checkpoint, encode_checkpoint};

fuzz_target!(|data: &[u8]| {
    if let Ok((model, adam)) = decode_checkpoint(data) {
        let again = encode_checkpoint(&model, adam.as_ref()).unwrap();
        assert!(decode_checkpoint(&again).is_ok());
    }
});
