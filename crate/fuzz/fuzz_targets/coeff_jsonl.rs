#![no_main]
use libfuzzer_sys::fuzz_target;
use wtfbf::io::{decode_jsonl, encode_jsonl};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(coeffs) = decode_jsonl(text) {
        let again = decode_jsonl(&encode_jsonl(&coeffs)).expect("re-encoded coefficients decode");
        assert_eq!(again, coeffs);
    }
});
