//! Remaining life after a first-stage block under the linear, double linear
//! and nonlinear damage rules.
//!
//! ```text
//! cargo run --example damage_rules
//! ```

use dldr::damage::{dldr_knee, dldr_remaining, ldr_remaining, nonlinear_remaining, DldrParams, NonlinearParams};

fn main() -> Result<(), dldr::error::Error> {
    let (life1, life2) = (1.0e5, 4.0e5);
    let k = dldr_knee(DldrParams::new(0.4, 0.6)?, life1, life2)?;
    let q = NonlinearParams::new(1.0e7, 0.63)?;
    println!("lives {life1} (high) and {life2} (low)");
    println!(
        "DLDR knee ({:.4}, {:.4}), sum {:.4} = (N1/N2)^alpha",
        k.beta1_knee,
        k.beta2_knee,
        k.beta1_knee + k.beta2_knee
    );
    println!("{:>8} {:>12} {:>12} {:>12}", "beta1", "linear", "dldr", "nonlinear");
    for i in 0..=10 {
        let n1 = life1 * i as f64 / 10.0;
        println!(
            "{:>8.2} {:>12.1} {:>12.1} {:>12.1}",
            n1 / life1,
            ldr_remaining(n1, life1, life2)?,
            dldr_remaining(n1, life1, life2, k)?,
            nonlinear_remaining(n1, life1, life2, q)?
        );
    }
    Ok(())
}
