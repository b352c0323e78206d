#![no_main]

use gammalab::energy::DisplacementField;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(field) = DisplacementField::from_bytes(data) {
        // The format is canonical: a decoded record re-encodes to its input.
        assert_eq!(field.to_bytes(), data);
    }
});
