//! Regenerates the labeled synthetic datasets under `data/` from the
//! built-in constraints and the knee-protocol fixture.
//!
//! ```text
//! cargo run --example synthesize_datasets -- [output-dir]
//! ```

use std::path::PathBuf;

use dldr::data::{synthesize, synthetic_header, DatasetId, KneeProtocol};

const SEED: u64 = 7;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| root.join("data"));
    std::fs::create_dir_all(&out)?;
    let protocol = KneeProtocol::load(root.join("fixtures/knee_protocol.json"))?;
    for id in DatasetId::ALL {
        let set = synthesize(id, &protocol, SEED)?;
        let name = id.name();
        set.high.write_csv(out.join(format!("synthetic_{name}_high.csv")), Some(&synthetic_header(id, SEED, "high-level lives")))?;
        set.low.write_csv(out.join(format!("synthetic_{name}_low.csv")), Some(&synthetic_header(id, SEED, "low-level lives")))?;
        set.two_load.write_csv(out.join(format!("synthetic_{name}_two_load.csv")), Some(&synthetic_header(id, SEED, "high-low two-load observations")))?;
        println!(
            "{name}: {} + {} single-load lives, {} two-load observations",
            set.high.lifetimes.len(),
            set.low.lifetimes.len(),
            set.two_load.len()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
