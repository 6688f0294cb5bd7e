use std::collections::BTreeMap;

use proptest::prelude::*;

use dldr::damage::{
    dldr_beta2, dldr_knee, dldr_remaining, ldr_remaining, nonlinear_remaining, DldrParams, NonlinearParams,
};
use dldr::data::{parse_single_load, parse_two_load, Group, SingleLoadDataset, TwoLoadDataset};
use dldr::distributions::{fit_maxent, MomentConstraints, Univariate, DEFAULT_MAX_ITER, DEFAULT_TOL};
use dldr::nonparam::{ecdf, kde_fit};
use dldr::propagate::{band_from_result, build_input_model, run, MarginalSpec, ModelKind, FLAG_KNEE_EXCLUDED};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

/// (lo, hi, mean, std) strictly inside the feasible region of a bounded support.
fn bounded_constraints() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-50.0..50.0f64, 0.1..100.0f64, 0.05..0.95f64, 0.05..0.9f64).prop_map(|(lo, w, m, s)| {
        let hi = lo + w;
        let mean = lo + m * w;
        // fraction of the two-point bound sqrt((mean - lo)(hi - mean))
        let std = s * ((mean - lo) * (hi - mean)).sqrt();
        (lo, hi, mean, std)
    })
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn maxent_moment_closure_bounded((lo, hi, mean, std) in bounded_constraints()) {
        let d = fit_maxent(&MomentConstraints::with_mean_std(lo, hi, mean, std).unwrap(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        prop_assert!((d.fitted_mean() - mean).abs() <= 1e-6 * mean.abs().max(hi - lo));
        prop_assert!((d.fitted_std() - std).abs() <= 1e-6 * std);
    }

    #[test]
    fn maxent_moment_closure_half_line(mean in 0.01..1.0e6f64, cov in 0.05..0.95f64) {
        let std = cov * mean;
        let d = fit_maxent(&MomentConstraints::with_mean_std(0.0, f64::INFINITY, mean, std).unwrap(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        prop_assert!((d.fitted_mean() - mean).abs() <= 1e-6 * mean);
        prop_assert!((d.fitted_std() - std).abs() <= 1e-6 * std);
    }

    #[test]
    fn maxent_quantile_round_trip((lo, hi, mean, std) in bounded_constraints()) {
        let d = fit_maxent(&MomentConstraints::with_mean_std(lo, hi, mean, std).unwrap(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        for k in 0..=998 {
            let p = 0.001 + 0.001 * k as f64;
            let x = d.quantile(p).unwrap();
            prop_assert!((d.cdf(x) - p).abs() < 1e-9, "p = {p}: cdf(quantile) = {}", d.cdf(x));
        }
    }
}

fn knee_params() -> impl Strategy<Value = (DldrParams, f64, f64)> {
    (-1.0..1.0f64, 0.01..0.99f64, 1.0e3..1.0e6f64, 1.0e3..1.0e6f64)
        .prop_map(|(a, b, l1, l2)| (DldrParams::new(a, b).unwrap(), l1, l2))
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn knee_sum_identity((p, l1, l2) in knee_params()) {
        let k = dldr_knee(p, l1, l2).unwrap();
        let r = (l1 / l2).powf(p.alpha);
        prop_assert!((k.beta1_knee + k.beta2_knee - r).abs() <= 4.0 * f64::EPSILON * r);
    }

    #[test]
    fn dldr_endpoints_branches_and_monotonicity((p, l1, l2) in knee_params(), xs in prop::collection::vec(0.0..=1.0f64, 2..20)) {
        let k = dldr_knee(p, l1, l2).unwrap();
        prop_assume!(k.inside_unit_square);
        prop_assert_eq!(dldr_beta2(0.0, k).unwrap(), 1.0);
        prop_assert_eq!(dldr_beta2(1.0, k).unwrap(), 0.0);
        prop_assert!((dldr_beta2(k.beta1_knee, k).unwrap() - k.beta2_knee).abs() <= 1e-15);
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        for w in xs.windows(2) {
            prop_assert!(dldr_beta2(w[1], k).unwrap() < dldr_beta2(w[0], k).unwrap());
        }
    }

    #[test]
    fn alpha_zero_collapses_to_ldr(b in 0.001..0.999f64, l1 in 1.0e3..1.0e6f64, l2 in 1.0e3..1.0e6f64, f in 0.0..=1.0f64) {
        let k = dldr_knee(DldrParams::new(0.0, b).unwrap(), l1, l2).unwrap();
        prop_assert!((dldr_beta2(f, k).unwrap() - (1.0 - f)).abs() < 1e-12);
        let n1 = f * l1;
        prop_assert!((dldr_remaining(n1, l1, l2, k).unwrap() - ldr_remaining(n1, l1, l2).unwrap()).abs() <= 1e-12 * l2);
    }

    #[test]
    fn nonlinear_limits_and_monotonicity(l1 in 1.0e3..1.0e5f64, l2 in 1.0e3..1.0e5f64, q in 0.1..5.0f64, fs in prop::collection::vec(0.001..1.0f64, 2..12)) {
        let p = NonlinearParams::new(1.0e7, q).unwrap();
        prop_assert_eq!(nonlinear_remaining(0.0, l1, l2, p).unwrap(), l2);
        prop_assert!(nonlinear_remaining(l1, l1, l2, p).unwrap().abs() <= 1e-9 * l2);
        // the approach to N2 is logarithmic in n1, so check it over decades
        let mut prev = 0.0;
        for e in [3, 6, 12, 24, 48, 96] {
            let v = nonlinear_remaining(10f64.powi(-e) * l1, l1, l2, p).unwrap();
            prop_assert!(v >= prev && v <= l2);
            prev = v;
        }
        let mut fs = fs;
        fs.sort_by(f64::total_cmp);
        fs.dedup();
        for w in fs.windows(2) {
            let (a, b) = (nonlinear_remaining(w[0] * l1, l1, l2, p).unwrap(), nonlinear_remaining(w[1] * l1, l1, l2, p).unwrap());
            // near N2 the decrement can fall below one ulp of N2
            if a < l2 * (1.0 - 1e-12) {
                prop_assert!(b < a);
            } else {
                prop_assert!(b <= a);
            }
        }
    }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn kde_mass_and_support(data in prop::collection::vec(0.0..100.0f64, 5..60), reflect_hi in any::<bool>()) {
        prop_assume!(data.iter().any(|&x| x != data[0]));
        let hi = if reflect_hi { Some(100.0) } else { None };
        let k = kde_fit(&data, Some(0.0), hi).unwrap();
        let top = hi.unwrap_or(f64::INFINITY);
        prop_assert!((k.integrate(0.0, top) - 1.0).abs() < 1e-6);
        prop_assert_eq!(k.pdf(-1e-9), 0.0);
        prop_assert_eq!(k.cdf(0.0), 0.0);
        if let Some(h) = hi {
            prop_assert_eq!(k.pdf(h + 1e-9), 0.0);
            prop_assert!((k.cdf(h) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ecdf_is_a_cdf(data in prop::collection::vec(prop::sample::select(vec![1.0, 2.0, 2.5, 3.0, 7.0]), 1..40)) {
        let e = ecdf(&data).unwrap();
        let n = data.len() as f64;
        prop_assert_eq!(e.eval(0.0), 0.0);
        prop_assert_eq!(e.eval(8.0), 1.0);
        let mut last = 0.0;
        for x in [0.5, 1.0, 1.5, 2.0, 2.5, 2.9, 3.0, 5.0, 7.0] {
            let v = e.eval(x);
            prop_assert!(v >= last);
            let ties = data.iter().filter(|&&d| d == x).count() as f64;
            prop_assert!((v - e.eval(x - 1e-9) - ties / n).abs() < 1e-12);
            last = v;
        }
    }
}

fn point(v: f64) -> MarginalSpec {
    MarginalSpec::PointMass { value: v }
}

proptest! {
    #![proptest_config(config(32))]

    /// Point masses reduce every draw to the deterministic damage outputs.
    #[test]
    fn point_masses_reproduce_damage_exactly((p, l1, l2) in knee_params(), fs in prop::collection::vec(0.0..1.0f64, 1..5)) {
        let specs = BTreeMap::from([
            ("N1".to_string(), point(l1)),
            ("N2".to_string(), point(l2)),
            ("alpha".to_string(), point(p.alpha)),
            ("B".to_string(), point(p.b)),
        ]);
        let m = build_input_model(&specs, ModelKind::Dldr, &BTreeMap::new()).unwrap();
        let n1s: Vec<f64> = fs.iter().map(|f| f * l1).collect();
        let r = run(&m, &n1s, 16, 1).unwrap();
        let k = dldr_knee(p, l1, l2).unwrap();
        for (j, &n1) in n1s.iter().enumerate() {
            for &v in &r.n2[j] {
                if k.inside_unit_square {
                    prop_assert_eq!(v, dldr_remaining(n1, l1, l2, k).unwrap());
                } else {
                    prop_assert!(v.is_nan());
                }
            }
        }
        prop_assert_eq!(r.excluded_count, if k.inside_unit_square { 0 } else { 16 });
    }

    #[test]
    fn exclusion_accounting_and_band_coherence(alpha_mean in -0.5..0.5f64, seed in any::<u64>()) {
        let specs = BTreeMap::from([
            ("N1".to_string(), MarginalSpec::hierarchical(0.0, f64::INFINITY, 5.0e4, 0.05, 0.10)),
            ("N2".to_string(), MarginalSpec::hierarchical(0.0, f64::INFINITY, 1.0e5, 0.05, 0.10)),
            ("alpha".to_string(), MarginalSpec::MaxentFixed { constraints: MomentConstraints::with_mean_std(-1.0, 1.0, alpha_mean, 0.3).unwrap() }),
            ("B".to_string(), MarginalSpec::MaxentFixed { constraints: MomentConstraints::with_mean_std(0.0, 1.0, 0.5, 0.2).unwrap() }),
        ]);
        let m = build_input_model(&specs, ModelKind::Dldr, &BTreeMap::new()).unwrap();
        let grid = [0.0, 1.0e4, 2.0e4, 3.0e4, 4.0e4];
        let r = run(&m, &grid, 2000, seed).unwrap();
        let flagged = r.flags.iter().filter(|f| **f & FLAG_KNEE_EXCLUDED != 0).count();
        prop_assert_eq!(r.excluded_count, flagged);
        let included = (0..r.n_samples).filter(|&i| r.beta1_knee[i] > 0.0 && r.beta1_knee[i] < 1.0 && r.beta2_knee[i] > 0.0 && r.beta2_knee[i] < 1.0).count();
        prop_assert_eq!(r.excluded_count + included, r.n_samples);
        let band = band_from_result(&r, &[0.01, 0.5, 0.99]).unwrap();
        for q in &band.quantiles {
            prop_assert!(q[0] <= q[1] && q[1] <= q[2]);
        }
    }
}

fn material() -> impl Strategy<Value = String> {
    // a leading '#' would read back as a comment line
    "[A-Za-z0-9][A-Za-z0-9 .,%\"-]{0,20}".prop_map(|s| s.trim_end().to_string())
}

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![1.0e-3..1.0e9f64, (1u32..10_000_000).prop_map(f64::from)]
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn single_load_round_trip(material in material(), stress in prop::option::of(positive()), lifetimes in prop::collection::vec(positive(), 1..30)) {
        let d = SingleLoadDataset { material: if stress.is_some() { material } else { "unspecified".into() }, stress, lifetimes };
        prop_assert_eq!(parse_single_load(&d.to_csv(Some("round trip")), "t").unwrap(), d);
    }

    #[test]
    fn two_load_round_trip(material in material(), lo in positive(), groups in prop::collection::btree_map(0u32..1_000_000, prop::collection::vec(positive(), 1..6), 1..6)) {
        let d = TwoLoadDataset {
            material,
            stress_high: Some(lo * 1.5),
            stress_low: Some(lo),
            groups: groups.into_iter().map(|(n1, observations)| Group { n1: f64::from(n1), observations }).collect(),
        };
        prop_assert_eq!(parse_two_load(&d.to_csv(None), "t").unwrap(), d);
    }
}
