use std::f64::consts::PI;

use statrs::distribution::{Continuous, ContinuousCDF, Exp, Normal};

use dldr::distributions::{fit_maxent, MaxEntDistribution, MomentConstraints, Univariate, DEFAULT_MAX_ITER, DEFAULT_TOL};
use dldr::nonparam::ecdf;
use dldr::quad::integrate1;
use dldr::rng::stream;

fn fit(c: MomentConstraints) -> MaxEntDistribution {
    fit_maxent(&c, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap()
}

fn cases() -> Vec<(&'static str, MaxEntDistribution)> {
    vec![
        ("uniform", fit(MomentConstraints::bounded(0.0, 1.0).unwrap())),
        ("exponential", fit(MomentConstraints::with_mean(0.0, f64::INFINITY, 2.0).unwrap())),
        ("normal", fit(MomentConstraints::with_mean_std(f64::NEG_INFINITY, f64::INFINITY, 0.0, 1.0).unwrap())),
    ]
}

fn entropy(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    integrate1(
        |x| {
            let v = g(x);
            if v > 0.0 { -v * v.ln() } else { 0.0 }
        },
        lo,
        hi,
        &[0.0],
        1e-13,
        1e-12,
    )
}

#[test]
fn entropy_dominates_matched_alternatives() {
    // each alternative shares the support and the constrained moments
    let e1 = Exp::new(1.0).unwrap();
    let e3 = Exp::new(1.0 / 3.0).unwrap();
    let a = Normal::new(-0.6, 0.8).unwrap();
    let b = Normal::new(0.6, 0.8).unwrap();
    let alternatives: [(Box<dyn Fn(f64) -> f64>, f64, f64); 3] = [
        (Box::new(|x| 1.0 + 0.5 * (2.0 * PI * x).cos()), 0.0, 1.0),
        (Box::new(move |x| 0.5 * e1.pdf(x) + 0.5 * e3.pdf(x)), 0.0, f64::INFINITY),
        (Box::new(move |x| 0.5 * a.pdf(x) + 0.5 * b.pdf(x)), f64::NEG_INFINITY, f64::INFINITY),
    ];
    for ((name, d), (g, lo, hi)) in cases().iter().zip(alternatives.iter()) {
        let h_fit = d.entropy_of();
        let h_alt = entropy(g, *lo, *hi);
        assert!(h_fit > h_alt, "{name}: {h_fit} vs alternative {h_alt}");
        assert!((h_fit - d.entropy()).abs() < 1e-9, "{name}: stored entropy disagrees");
    }
    // closed forms: 0, 1 + ln 2, (1 + ln 2π) / 2
    let exact = [0.0, 1.0 + 2f64.ln(), 0.5 * (1.0 + (2.0 * PI).ln())];
    for ((name, d), h) in cases().iter().zip(exact) {
        assert!((d.entropy_of() - h).abs() < 1e-9, "{name}");
    }
}

#[test]
fn samples_pass_ks_at_95_percent() {
    let n = 100_000;
    let crit = 1.358 / (n as f64).sqrt();
    let exp = Exp::new(0.5).unwrap();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let closed: [Box<dyn Fn(f64) -> f64>; 3] = [
        Box::new(|x: f64| x.clamp(0.0, 1.0)),
        Box::new(move |x| exp.cdf(x)),
        Box::new(move |x| normal.cdf(x)),
    ];
    for (k, ((name, d), exact)) in cases().iter().zip(closed.iter()).enumerate() {
        let mut rng = stream(900 + k as u64);
        let s = d.sample(&mut rng, n).unwrap();
        let e = ecdf(&s).unwrap();
        let dn = e.ks_statistic(|x| d.cdf(x));
        assert!(dn < crit, "{name}: D = {dn} vs {crit}");
        assert!(e.ks_statistic(exact) < crit, "{name} against closed form");
    }
}
