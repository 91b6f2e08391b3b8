//! Replays the fuzz corpus seeds through the fuzz-target properties on stable.

use std::path::Path;

use bathgen::runner::{parse_config, parse_pair, parse_table};

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn config_seeds() {
    for (name, text) in seeds("config_parse") {
        let parsed = parse_config(&text);
        let rejected = matches!(name.as_str(), "zero_modes.toml" | "broken.toml");
        assert_eq!(parsed.is_err(), rejected, "{name}: {parsed:?}");
        if let Ok(cfg) = parsed {
            cfg.validate().unwrap();
        }
    }
}

#[test]
fn csv_seeds() {
    let outcomes: Vec<(String, bool)> = seeds("csv_table")
        .into_iter()
        .map(|(name, text)| {
            let parsed = parse_table(&text);
            if let Ok(table) = &parsed {
                assert_eq!(&parse_table(&table.render()).unwrap(), table, "{name}");
            }
            (name, parsed.is_ok())
        })
        .collect();
    let ok = |n: &str| outcomes.iter().find(|o| o.0 == n).unwrap().1;
    assert!(ok("entropy.csv") && ok("levels.csv"));
    assert!(!ok("ragged.csv") && !ok("nan.csv"));
}

#[test]
fn pair_seeds() {
    for (name, text) in seeds("pair_parse") {
        let parsed = parse_pair(&text);
        match name.as_str() {
            "plain" => assert_eq!(parsed.unwrap(), (1, 2)),
            "spaces" => assert_eq!(parsed.unwrap(), (3, 3)),
            _ => assert!(parsed.is_err(), "{name} should be rejected"),
        }
    }
}
