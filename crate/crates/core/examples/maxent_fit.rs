//! Maximum-entropy marginals for the built-in tanaka alpha and B records at
//! the middle of their COV range.
//!
//! ```text
//! cargo run --example maxent_fit
//! ```

use dldr::data::{builtin_constraints, DatasetId};
use dldr::distributions::{fit_maxent, MomentConstraints, Univariate, DEFAULT_MAX_ITER, DEFAULT_TOL};
use dldr::rng::stream;

fn main() -> Result<(), dldr::error::Error> {
    let table = builtin_constraints(DatasetId::Tanaka);
    for (name, rec) in [("alpha", table.alpha), ("B", table.b)] {
        let cov = 0.5 * (rec.cov_range[0] + rec.cov_range[1]);
        let c = MomentConstraints::with_mean_std(rec.support[0], rec.support[1], rec.mean, cov * rec.mean.abs())?;
        let d = fit_maxent(&c, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let [l0, l1, l2] = d.lambdas();
        println!("{name}: support {:?}, mean {}, std {:.5}", rec.support, rec.mean, cov * rec.mean.abs());
        println!("  lambdas      {l0:.6e} {l1:.6e} {l2:.6e} ({} Newton steps)", d.iterations());
        println!("  entropy      {:.6}", d.entropy());
        println!("  fitted       mean {:.6} std {:.6}", d.fitted_mean(), d.fitted_std());
        println!(
            "  quantiles    1% {:.5}  50% {:.5}  99% {:.5}",
            d.quantile(0.01)?,
            d.quantile(0.5)?,
            d.quantile(0.99)?
        );
        let s = d.sample(&mut stream(1), 5)?;
        println!("  five draws   {s:.5?}");
    }

    // support alone gives the uniform law: all multipliers vanish but the normalizer
    let u = fit_maxent(&MomentConstraints::bounded(0.0, 1.0)?, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    println!("uniform on [0, 1]: lambdas {:?}", u.lambdas());
    Ok(())
}
