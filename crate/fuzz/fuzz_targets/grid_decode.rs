#![no_main]
use libfuzzer_sys::fuzz_target;
use wtfbf::io::{decode_grid, encode_grid};

fuzz_target!(|data: &[u8]| {
    if let Ok(field) = decode_grid(data) {
        let bytes = encode_grid(&field);
        let again = decode_grid(&bytes).expect("re-encoded grid decodes");
        assert_eq!(again, field);
    }
});
