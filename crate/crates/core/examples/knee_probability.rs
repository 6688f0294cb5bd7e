//! Conditional probability that the knee falls below the linear line, for
//! each built-in dataset under the knee protocol.
//!
//! ```text
//! cargo run --release --example knee_probability -- [n_samples]
//! ```

use std::path::PathBuf;

use dldr::data::{DatasetId, KneeProtocol};
use dldr::propagate::{conditional_summary, run};

fn main() -> Result<(), dldr::error::Error> {
    let protocol = KneeProtocol::load(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/knee_protocol.json"))?;
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    for id in DatasetId::ALL {
        let model = protocol.model(id)?;
        let r = run(&model, &[], n, protocol.seed)?;
        println!("{} ({n} draws, {:.4} excluded)", id.name(), r.excluded_fraction());
        for &b in &protocol.beta1 {
            let s = conditional_summary(&r, &model, b, None);
            let show = |e: Option<dldr::propagate::Estimate>| match e {
                Some(e) => format!("{:.4} +- {:.4}", e.p, e.se),
                None => "n/a".into(),
            };
            println!(
                "  beta1 {b:.2}: exact {}  counting {}  kde {}",
                show(s.exact),
                show(s.counting),
                show(s.kde)
            );
        }
    }
    Ok(())
}
