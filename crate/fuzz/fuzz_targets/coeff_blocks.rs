#![no_main]
use libfuzzer_sys::fuzz_target;
use wtfbf::io::{decode_blocks, encode_blocks};

fuzz_target!(|data: &[u8]| {
    if let Ok(coeffs) = decode_blocks(data) {
        let bytes = encode_blocks(&coeffs);
        assert_eq!(bytes, data);
    }
});
