//! Reads a single-level lifetime file, fits a reflected KDE and runs the
//! running standard-deviation convergence check.
//!
//! ```text
//! cargo run --example convergence_check -- [lifetimes.csv]
//! ```

use std::path::PathBuf;

use dldr::cli::DEFAULT_SEED;
use dldr::data::load_single_load_csv;
use dldr::nonparam::{
    convergence_diagnostic, kde_fit, summary_stats, DEFAULT_SHUFFLES, DEFAULT_TAIL_FRACTION, DEFAULT_THRESHOLD,
};

fn main() -> Result<(), dldr::error::Error> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_tanaka_high.csv"));
    let data = load_single_load_csv(&path)?;
    let s = summary_stats(&data.lifetimes)?;
    println!("{} ({} lifetimes at {:?} MPa)", data.material, data.lifetimes.len(), data.stress);
    println!("  mean {:.1}  std {:.1}", s.mean, s.std);

    let kde = kde_fit(&data.lifetimes, Some(0.0), None)?;
    println!("  KDE bandwidth {:.1}, mass on [0, inf) {:.6}", kde.bandwidth(), kde.integrate(0.0, f64::INFINITY));

    for (label, lives) in [("all", &data.lifetimes[..]), ("first 15", &data.lifetimes[..15.min(data.lifetimes.len())])] {
        let r = convergence_diagnostic(lives, DEFAULT_SHUFFLES, DEFAULT_TAIL_FRACTION, DEFAULT_THRESHOLD, DEFAULT_SEED)?;
        println!(
            "  {label:>8}: relative tail fluctuation {:.4} vs threshold {} -> converged {}",
            r.rel_fluctuation, r.threshold, r.converged
        );
    }
    Ok(())
}
