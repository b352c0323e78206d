#![no_main]

use gammalab::media::{decode_realization, encode_realization};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = decode_realization(data) {
        assert_eq!(encode_realization(&record), data);
        assert_eq!(record.values.len() as u64, record.window.len() as u64);
    }
});
