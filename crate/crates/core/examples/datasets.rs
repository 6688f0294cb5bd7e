//! Built-in constraint tables and the shipped synthetic files for each
//! reference dataset.
//!
//! ```text
//! cargo run --example datasets
//! ```

use std::path::PathBuf;

use dldr::data::{builtin_constraints, load_two_load_csv, DatasetId};

fn main() -> Result<(), dldr::error::Error> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    for id in DatasetId::ALL {
        let t = builtin_constraints(id);
        println!("{} ({}, {} / {} MPa)", id.name(), t.material, t.stress_high_mpa, t.stress_low_mpa);
        println!("  alpha mean {} on {:?}, B mean {} on {:?}", t.alpha.mean, t.alpha.support, t.b.mean, t.b.support);
        println!("  q-ratio mean {} on {:?}", t.q_ratio.mean, t.q_ratio.support);
        println!("  n1 schedule {:?}", t.n1_schedule);
        let two = load_two_load_csv(root.join(format!("synthetic_{}_two_load.csv", id.name())))?;
        println!("  synthetic two-load file: {} observations in {} groups", two.len(), two.groups.len());
    }
    Ok(())
}
