//! Fits DLDR (alpha, B) and the nonlinear q-ratio to the synthetic xie045
//! two-load data, using the single-level file means as the lives.
//!
//! ```text
//! cargo run --example fit_parameters
//! ```

use std::path::PathBuf;

use dldr::damage::{dldr_knee, fit_dldr, fit_qratio, Interval};
use dldr::data::{load_single_load_csv, load_two_load_csv};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() -> Result<(), dldr::error::Error> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let l1 = mean(&load_single_load_csv(root.join("synthetic_xie045_high.csv"))?.lifetimes);
    let l2 = mean(&load_single_load_csv(root.join("synthetic_xie045_low.csv"))?.lifetimes);
    let two = load_two_load_csv(root.join("synthetic_xie045_two_load.csv"))?;
    if let (Some(hi), Some(lo)) = (two.stress_high, two.stress_low) {
        println!("{}: {hi} vs {lo} MPa", two.material);
    }
    println!("lives {l1:.0} (high) and {l2:.0} (low)");

    let means = two.mean_points();
    let ratios: Vec<(f64, f64)> = means.iter().map(|&(n1, n2)| (n1 / l1, n2 / l2)).collect();
    for (g, (b1, b2)) in two.groups.iter().zip(&ratios) {
        println!("  n1 {:>8}: {} specimens, mean ratios ({b1:.3}, {b2:.3})", g.n1, g.observations.len());
    }

    let fit = fit_dldr(&ratios, l1 / l2, Interval::new(0.0, 1.0)?, Interval::new(0.0, 1.0)?)?;
    let k = dldr_knee(fit.params, l1, l2)?;
    println!(
        "DLDR: alpha {:.4}, B {:.4}, sse {:.3e}, knee ({:.3}, {:.3})",
        fit.params.alpha, fit.params.b, fit.sse, k.beta1_knee, k.beta2_knee
    );
    if fit.flat_alpha || fit.flat_b {
        println!("  objective is flat: alpha {} B {}", fit.flat_alpha, fit.flat_b);
    }

    let q = fit_qratio(&means, l1, l2, 1.0e7)?;
    println!("nonlinear (n_e = 1e7): q-ratio {q:.4}");
    Ok(())
}
