//! Replays the checked-in fuzz corpus through the same checks the fuzz
//! targets make, so decoder regressions show up under `cargo test`.

use std::path::PathBuf;

use gammalab::config::{Config, STUDIES};
use gammalab::energy::DisplacementField;
use gammalab::media::{decode_realization, encode_realization};
use gammalab::Error;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn config_seeds() {
    let mut parsed = 0;
    for (name, bytes) in seeds("config_parse") {
        let Ok(text) = std::str::from_utf8(&bytes) else { continue };
        match Config::parse(text) {
            Ok(c) => {
                parsed += 1;
                let stem = name.trim_end_matches(".toml");
                if STUDIES.contains(&stem) {
                    c.require(stem).unwrap();
                }
            }
            Err(Error::Config { message, .. }) => assert!(!message.is_empty(), "{name}"),
            Err(e) => panic!("{name}: non-config error {e}"),
        }
    }
    assert!(parsed >= STUDIES.len());
}

#[test]
fn field_seeds() {
    for (name, bytes) in seeds("field_decode") {
        if let Ok(f) = DisplacementField::from_bytes(&bytes) {
            assert_eq!(f.to_bytes(), bytes, "{name}");
        }
    }
    let (_, line) = seeds("field_decode").into_iter().find(|(n, _)| n == "line_1d").unwrap();
    assert!(DisplacementField::from_bytes(&line).is_ok());
}

#[test]
fn realization_seeds() {
    let mut decoded = 0;
    for (name, bytes) in seeds("realization_decode") {
        if let Ok(r) = decode_realization(&bytes) {
            decoded += 1;
            assert_eq!(encode_realization(&r), bytes, "{name}");
        }
    }
    assert!(decoded >= 2);
}
