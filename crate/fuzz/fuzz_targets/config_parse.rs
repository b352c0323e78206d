#![no_main]

use gammalab::config::{Config, STUDIES};
use gammalab::Error;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match Config::parse(text) {
        Ok(config) => {
            for study in STUDIES {
                let _ = config.require(study);
            }
        }
        Err(Error::Config { message, .. }) => assert!(!message.is_empty()),
        Err(other) => panic!("parse failed with a non-config error: {other}"),
    }
});
