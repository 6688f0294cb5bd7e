//! Shipped files must match what the library regenerates.
//! Set `DLDR_BLESS=1` to rewrite the reference page after changing the CLI text.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dldr::cli::{reference_page, RunConfig};
use dldr::data::{synthesize, synthetic_header, DatasetId, KneeProtocol};
use dldr::propagate::{MarginalSpec, ModelKind};

const SYNTHETIC_SEED: u64 = 7;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn protocol() -> KneeProtocol {
    KneeProtocol::load(root().join("fixtures/knee_protocol.json")).unwrap()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn shipped_synthetic_data_is_reproducible() {
    let protocol = protocol();
    for id in DatasetId::ALL {
        let set = synthesize(id, &protocol, SYNTHETIC_SEED).unwrap();
        let name = id.name();
        let cases = [
            ("high", set.high.to_csv(Some(&synthetic_header(id, SYNTHETIC_SEED, "high-level lives")))),
            ("low", set.low.to_csv(Some(&synthetic_header(id, SYNTHETIC_SEED, "low-level lives")))),
            ("two_load", set.two_load.to_csv(Some(&synthetic_header(id, SYNTHETIC_SEED, "high-low two-load observations")))),
        ];
        for (what, expected) in cases {
            let shipped = read(root().join(format!("data/synthetic_{name}_{what}.csv")));
            assert!(shipped.starts_with("# SYNTHETIC DATA"), "{name} {what}");
            assert_eq!(shipped, expected, "{name} {what}");
        }
    }
}

#[test]
fn knee_configs_match_protocol() {
    let protocol = protocol();
    for id in DatasetId::ALL {
        let text = read(root().join(format!("configs/knee_{}.json", id.name())));
        let c: RunConfig = serde_json::from_str(&text).unwrap();
        let expected: BTreeMap<String, MarginalSpec> = protocol.specs(id).unwrap();
        assert_eq!(c.model, ModelKind::Dldr);
        assert_eq!(c.params, expected, "{}", id.name());
        assert_eq!(c.n_samples, Some(protocol.n_samples));
        assert_eq!(c.seed.unwrap_or(dldr::cli::DEFAULT_SEED), protocol.seed);
        assert_eq!(c.beta1, protocol.beta1);
    }
}

#[test]
fn every_shipped_config_parses() {
    for entry in std::fs::read_dir(root().join("configs")).unwrap() {
        let p = entry.unwrap().path();
        let v: serde_json::Value = serde_json::from_str(&read(&p)).unwrap();
        assert!(v.get("description").and_then(|d| d.as_str()).is_some(), "{}", p.display());
    }
}

#[test]
fn reference_page_is_current() {
    let path = root().join("docs/config-reference.md");
    let page = reference_page();
    if std::env::var_os("DLDR_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &page).unwrap();
    }
    assert_eq!(read(&path), page, "run with DLDR_BLESS=1 to regenerate");
}
