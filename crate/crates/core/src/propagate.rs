//! Monte Carlo propagation of input-parameter uncertainty through the damage
//! models, and the statistics computed from the resulting draw table.
//!
//! Each draw samples every input from its own substream
//! ([`crate::rng::substream`] keyed by draw index and [`Param::stream_id`]),
//! so the table is identical for any thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::damage::{beta2_unchecked, knee_from_power, nonlinear_remaining_flagged, NonlinearParams};
use crate::distributions::{fit_maxent, Bound, MaxEntDistribution, MomentConstraints, Univariate, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::nonparam::{kde2_fit, kde_fit, quantile_sorted, silverman_bandwidth, Kde2Density, KdeDensity};
use crate::rng::{open_unit, substream};

/// Number of precomputed members for a hierarchical marginal.
pub const COV_LEVELS: usize = 64;

/// Default conditioning abscissae for knee probabilities.
pub const DEFAULT_BETA1: [f64; 3] = [0.25, 0.50, 0.75];

/// Default band levels (98% band around the median).
pub const DEFAULT_LEVELS: [f64; 3] = [0.01, 0.50, 0.99];

/// Draw flag: knee outside the open unit square (DLDR only).
pub const FLAG_KNEE_EXCLUDED: u8 = 1;
/// Draw flag: some requested n1 exceeds the drawn N1, so n2 = 0 there.
pub const FLAG_FIRST_STAGE_FAILURE: u8 = 2;
/// Draw flag: inputs outside the model domain; affected n2 are NaN.
pub const FLAG_DOMAIN: u8 = 4;
/// Draw flag: nonlinear-rule output clamped to [0, N2].
pub const FLAG_CLAMPED: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ldr,
    Dldr,
    Nonlinear,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ldr" => Ok(ModelKind::Ldr),
            "dldr" => Ok(ModelKind::Dldr),
            "nonlinear" => Ok(ModelKind::Nonlinear),
            _ => Err(Error::invalid(format!("unknown model kind '{s}' (expected ldr, dldr or nonlinear)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ldr => "ldr",
            ModelKind::Dldr => "dldr",
            ModelKind::Nonlinear => "nonlinear",
        }
    }

    pub fn required(self) -> &'static [Param] {
        match self {
            ModelKind::Ldr => &[Param::N1, Param::N2],
            ModelKind::Dldr => &[Param::N1, Param::N2, Param::Alpha, Param::B],
            ModelKind::Nonlinear => &[Param::N1, Param::N2, Param::QRatio],
        }
    }
}

/// Named model inputs. The discriminant is the substream id and never changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    N1 = 0,
    N2 = 1,
    Alpha = 2,
    B = 3,
    QRatio = 4,
}

impl Param {
    pub const ALL: [Param; 5] = [Param::N1, Param::N2, Param::Alpha, Param::B, Param::QRatio];

    pub fn name(self) -> &'static str {
        match self {
            Param::N1 => "N1",
            Param::N2 => "N2",
            Param::Alpha => "alpha",
            Param::B => "B",
            Param::QRatio => "q_ratio",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown parameter '{s}' (expected N1, N2, alpha, B or q_ratio)")))
    }

    pub fn stream_id(self) -> u64 {
        self as u64
    }
}

/// How one input is modeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MarginalSpec {
    /// Gaussian KDE of observed values, reflected at the optional bounds.
    KdeFromData {
        data: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reflect_lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reflect_hi: Option<f64>,
    },
    MaxentFixed { constraints: MomentConstraints },
    /// MaxEnt member whose std is `cov·|mean|` with `cov ~ U[cov_lo, cov_hi]` per draw.
    MaxentHierarchical {
        support: [Bound; 2],
        mean: f64,
        cov_lo: f64,
        cov_hi: f64,
    },
    PointMass { value: f64 },
}

impl MarginalSpec {
    pub fn hierarchical(lo: f64, hi: f64, mean: f64, cov_lo: f64, cov_hi: f64) -> Self {
        MarginalSpec::MaxentHierarchical {
            support: [Bound(lo), Bound(hi)],
            mean,
            cov_lo,
            cov_hi,
        }
    }
}

#[derive(Debug, Clone)]
enum Marginal {
    Point(f64),
    Kde(Box<KdeDensity>),
    Fixed(Box<MaxEntDistribution>),
    Hier {
        cov_lo: f64,
        cov_hi: f64,
        levels: Vec<MaxEntDistribution>,
    },
}

impl Marginal {
    fn build(p: Param, spec: &MarginalSpec) -> Result<Self> {
        let ctx = |e: Error| match e {
            Error::InvalidInput(m) => Error::InvalidInput(format!("{}: {m}", p.name())),
            Error::Infeasible(m) => Error::Infeasible(format!("{}: {m}", p.name())),
            Error::Degenerate(m) => Error::Degenerate(format!("{}: {m}", p.name())),
            other => other,
        };
        match spec {
            MarginalSpec::PointMass { value } => {
                if !value.is_finite() {
                    return Err(Error::invalid(format!("{}: point mass must be finite", p.name())));
                }
                Ok(Marginal::Point(*value))
            }
            MarginalSpec::KdeFromData { data, reflect_lo, reflect_hi } => {
                Ok(Marginal::Kde(Box::new(kde_fit(data, *reflect_lo, *reflect_hi).map_err(ctx)?)))
            }
            MarginalSpec::MaxentFixed { constraints } => Ok(Marginal::Fixed(Box::new(
                fit_maxent(constraints, DEFAULT_TOL, DEFAULT_MAX_ITER).map_err(ctx)?,
            ))),
            MarginalSpec::MaxentHierarchical {
                support,
                mean,
                cov_lo,
                cov_hi,
            } => {
                if !(*cov_lo > 0.0 && cov_lo < cov_hi && *cov_hi < 1.0) {
                    return Err(Error::invalid(format!(
                        "{}: need 0 < cov_lo < cov_hi < 1, got [{cov_lo}, {cov_hi}]",
                        p.name()
                    )));
                }
                if *mean == 0.0 {
                    return Err(Error::invalid(format!("{}: hierarchical COV needs a nonzero mean", p.name())));
                }
                let levels = (0..COV_LEVELS)
                    .into_par_iter()
                    .map(|k| {
                        let cov = level_cov(*cov_lo, *cov_hi, k);
                        let c = MomentConstraints::with_mean_std(support[0].0, support[1].0, *mean, cov * mean.abs())?;
                        fit_maxent(&c, DEFAULT_TOL, DEFAULT_MAX_ITER)
                    })
                    .collect::<Result<Vec<_>>>()
                    .map_err(ctx)?;
                Ok(Marginal::Hier {
                    cov_lo: *cov_lo,
                    cov_hi: *cov_hi,
                    levels,
                })
            }
        }
    }

    /// Value, and for hierarchical marginals the drawn COV and its level.
    fn draw(&self, seed: u64, draw: u64, p: Param) -> (f64, Option<(f64, u8)>) {
        match self {
            Marginal::Point(v) => (*v, None),
            Marginal::Kde(k) => {
                let mut rng = substream(seed, draw, p.stream_id());
                (k.quantile(open_unit(&mut rng)).unwrap_or(f64::NAN), None)
            }
            Marginal::Fixed(d) => {
                let mut rng = substream(seed, draw, p.stream_id());
                (d.quantile(open_unit(&mut rng)).unwrap_or(f64::NAN), None)
            }
            Marginal::Hier { cov_lo, cov_hi, levels } => {
                let mut rng = substream(seed, draw, p.stream_id());
                let u = open_unit(&mut rng);
                let cov = cov_lo + u * (cov_hi - cov_lo);
                let k = ((u * COV_LEVELS as f64) as usize).min(COV_LEVELS - 1);
                let x = levels[k].quantile(open_unit(&mut rng)).unwrap_or(f64::NAN);
                (x, Some((cov, k as u8)))
            }
        }
    }

    /// Density of the value given the stored COV level (ignored unless hierarchical).
    fn pdf(&self, x: f64, level: u8) -> Option<f64> {
        match self {
            Marginal::Point(_) => None,
            Marginal::Kde(k) => Some(k.pdf(x)),
            Marginal::Fixed(d) => Some(d.pdf(x)),
            Marginal::Hier { levels, .. } => Some(levels[level as usize].pdf(x)),
        }
    }

    fn is_hierarchical(&self) -> bool {
        matches!(self, Marginal::Hier { .. })
    }
}

/// COV of level `k`: midpoint of the k-th of [`COV_LEVELS`] equal cells.
pub fn level_cov(cov_lo: f64, cov_hi: f64, k: usize) -> f64 {
    cov_lo + (k as f64 + 0.5) * (cov_hi - cov_lo) / COV_LEVELS as f64
}

/// Validated product-form joint model of the inputs.
#[derive(Debug, Clone)]
pub struct InputJointModel {
    kind: ModelKind,
    marginals: Vec<(Param, Marginal)>,
    specs: BTreeMap<String, MarginalSpec>,
    fixed: BTreeMap<String, f64>,
}

/// Checks the specs for `kind` and fits every MaxEnt marginal.
pub fn build_input_model(
    specs: &BTreeMap<String, MarginalSpec>,
    kind: ModelKind,
    fixed: &BTreeMap<String, f64>,
) -> Result<InputJointModel> {
    let required = kind.required();
    let mut by_param = BTreeMap::new();
    for (name, spec) in specs {
        let p = Param::parse(name)?;
        if !required.contains(&p) {
            return Err(Error::invalid(format!("parameter '{name}' is not used by the {} model", kind.name())));
        }
        by_param.insert(p, spec);
    }
    for p in required {
        if !by_param.contains_key(p) {
            return Err(Error::invalid(format!("{} model needs a marginal for '{}'", kind.name(), p.name())));
        }
    }
    for (k, v) in fixed {
        if k != "n_e" {
            return Err(Error::invalid(format!("unknown fixed constant '{k}'")));
        }
        if !(*v > 0.0 && v.is_finite()) {
            return Err(Error::invalid("n_e must be positive and finite"));
        }
    }
    if kind == ModelKind::Nonlinear && !fixed.contains_key("n_e") {
        return Err(Error::invalid("nonlinear model needs the fixed constant n_e"));
    }
    let marginals = by_param
        .into_iter()
        .map(|(p, s)| Ok((p, Marginal::build(p, s)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(InputJointModel {
        kind,
        marginals,
        specs: specs.clone(),
        fixed: fixed.clone(),
    })
}

impl InputJointModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn specs(&self) -> &BTreeMap<String, MarginalSpec> {
        &self.specs
    }

    pub fn fixed(&self) -> &BTreeMap<String, f64> {
        &self.fixed
    }

    fn marginal(&self, p: Param) -> Option<&Marginal> {
        self.marginals.iter().find(|(q, _)| *q == p).map(|(_, m)| m)
    }
}

/// Named column of the draw table.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// Seeded draw table.
#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub model_kind: ModelKind,
    pub seed: u64,
    pub n_samples: usize,
    pub n1_values: Vec<f64>,
    /// Sampled inputs in [`Param`] order.
    pub inputs: Vec<Column>,
    /// Drawn COV of each hierarchical input, named `cov_<param>`.
    pub covs: Vec<Column>,
    /// Knee coordinates (DLDR only, otherwise empty).
    pub beta1_knee: Vec<f64>,
    pub beta2_knee: Vec<f64>,
    /// `n2[j][i]` is the remaining life of draw `i` after `n1_values[j]`.
    pub n2: Vec<Vec<f64>>,
    /// Bitwise OR of the `FLAG_*` constants per draw.
    pub flags: Vec<u8>,
    /// Draws whose knee lies outside the open unit square.
    pub excluded_count: usize,
    pub warnings: Vec<String>,
    cov_levels: Vec<(Param, Vec<u8>)>,
}

struct Draw {
    inputs: Vec<f64>,
    covs: Vec<(f64, u8)>,
    knee: Option<(f64, f64)>,
    n2: Vec<f64>,
    flags: u8,
}

fn evaluate(model: &InputJointModel, n1_values: &[f64], seed: u64, i: u64) -> Draw {
    let mut inputs = Vec::with_capacity(model.marginals.len());
    let mut covs = Vec::new();
    let mut get = [f64::NAN; 5];
    for (p, m) in &model.marginals {
        let (x, c) = m.draw(seed, i, *p);
        inputs.push(x);
        get[*p as usize] = x;
        if let Some(c) = c {
            covs.push(c);
        }
    }
    let (l1, l2) = (get[0], get[1]);
    let mut flags = 0u8;
    let mut knee = None;
    let lives_ok = l1 > 0.0 && l2 > 0.0 && l1.is_finite() && l2.is_finite();
    if !lives_ok {
        flags |= FLAG_DOMAIN;
    }
    if model.kind == ModelKind::Dldr {
        let k = knee_from_power(get[Param::B as usize], (l1 / l2).powf(get[Param::Alpha as usize]));
        knee = Some((k.beta1_knee, k.beta2_knee));
        if !k.inside_unit_square {
            flags |= FLAG_KNEE_EXCLUDED;
        }
    }
    let n2 = n1_values
        .iter()
        .map(|&n1| {
            if !lives_ok {
                return f64::NAN;
            }
            if n1 > l1 {
                flags |= FLAG_FIRST_STAGE_FAILURE;
                return 0.0;
            }
            match model.kind {
                ModelKind::Ldr => (1.0 - n1 / l1) * l2,
                ModelKind::Dldr => {
                    let (b1k, b2k) = knee.expect("dldr draws carry a knee");
                    if flags & FLAG_KNEE_EXCLUDED != 0 {
                        f64::NAN
                    } else {
                        beta2_unchecked(n1 / l1, b1k, b2k) * l2
                    }
                }
                ModelKind::Nonlinear => {
                    let p = NonlinearParams {
                        n_e: model.fixed["n_e"],
                        q_ratio: get[Param::QRatio as usize],
                    };
                    match nonlinear_remaining_flagged(n1, l1, l2, p) {
                        Ok(o) => {
                            if o.clamped {
                                flags |= FLAG_CLAMPED;
                            }
                            o.n2
                        }
                        Err(_) => {
                            flags |= FLAG_DOMAIN;
                            f64::NAN
                        }
                    }
                }
            }
        })
        .collect();
    Draw {
        inputs,
        covs,
        knee,
        n2,
        flags,
    }
}

/// Draws `n_samples` input vectors and evaluates the model at every `n1`.
pub fn run(model: &InputJointModel, n1_values: &[f64], n_samples: usize, seed: u64) -> Result<PropagationResult> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    if n1_values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::invalid("n1 values must be finite and nonnegative"));
    }
    let mut warnings = Vec::new();
    if n_samples < 1000 {
        warnings.push(format!("n_samples = {n_samples} is below 1000; estimates will be noisy"));
    }
    let draws: Vec<Draw> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| evaluate(model, n1_values, seed, i))
        .collect();

    let inputs = model
        .marginals
        .iter()
        .enumerate()
        .map(|(j, (p, _))| Column {
            name: p.name().to_string(),
            values: draws.iter().map(|d| d.inputs[j]).collect(),
        })
        .collect();
    let hier: Vec<Param> = model
        .marginals
        .iter()
        .filter(|(_, m)| m.is_hierarchical())
        .map(|(p, _)| *p)
        .collect();
    let covs = hier
        .iter()
        .enumerate()
        .map(|(j, p)| Column {
            name: format!("cov_{}", p.name()),
            values: draws.iter().map(|d| d.covs[j].0).collect(),
        })
        .collect();
    let cov_levels = hier
        .iter()
        .enumerate()
        .map(|(j, p)| (*p, draws.iter().map(|d| d.covs[j].1).collect()))
        .collect();
    let (beta1_knee, beta2_knee) = if model.kind == ModelKind::Dldr {
        draws.iter().map(|d| d.knee.expect("dldr draws carry a knee")).unzip()
    } else {
        (Vec::new(), Vec::new())
    };
    let n2 = (0..n1_values.len())
        .map(|j| draws.iter().map(|d| d.n2[j]).collect())
        .collect();
    let flags: Vec<u8> = draws.iter().map(|d| d.flags).collect();
    let excluded_count = flags.iter().filter(|f| *f & FLAG_KNEE_EXCLUDED != 0).count();
    if excluded_count > 0 {
        warnings.push(format!(
            "{excluded_count} of {n_samples} draws have a knee outside the unit square and are excluded from knee statistics"
        ));
    }
    Ok(PropagationResult {
        model_kind: model.kind,
        seed,
        n_samples,
        n1_values: n1_values.to_vec(),
        inputs,
        covs,
        beta1_knee,
        beta2_knee,
        n2,
        flags,
        excluded_count,
        warnings,
        cov_levels,
    })
}

impl PropagationResult {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.inputs
            .iter()
            .chain(self.covs.iter())
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
    }

    pub fn excluded_fraction(&self) -> f64 {
        self.excluded_count as f64 / self.n_samples as f64
    }

    pub fn count_flag(&self, flag: u8) -> usize {
        self.flags.iter().filter(|f| *f & flag != 0).count()
    }

    fn n1_index(&self, n1: f64) -> Result<usize> {
        self.n1_values
            .iter()
            .position(|&v| v == n1)
            .ok_or_else(|| Error::invalid(format!("n1 = {n1} was not part of this run")))
    }

    /// Remaining-life column for `n1`.
    pub fn n2_for(&self, n1: f64) -> Result<&[f64]> {
        Ok(&self.n2[self.n1_index(n1)?])
    }

    fn included_knees(&self) -> Result<Vec<(f64, f64)>> {
        if self.model_kind != ModelKind::Dldr {
            return Err(Error::invalid("knee statistics need a dldr run"));
        }
        Ok(self
            .beta1_knee
            .iter()
            .zip(&self.beta2_knee)
            .zip(&self.flags)
            .filter(|(_, f)| *f & FLAG_KNEE_EXCLUDED == 0)
            .map(|(k, _)| (*k.0, *k.1))
            .collect())
    }

    /// One row per draw; flagged rows keep their values and carry the flag bits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("draw");
        for c in self.inputs.iter().chain(&self.covs) {
            s.push(',');
            s.push_str(&c.name);
        }
        if self.model_kind == ModelKind::Dldr {
            s.push_str(",beta1_knee,beta2_knee");
        }
        for n1 in &self.n1_values {
            let _ = write!(s, ",n2@{n1}");
        }
        s.push_str(",flags\n");
        for i in 0..self.n_samples {
            let _ = write!(s, "{i}");
            for c in self.inputs.iter().chain(&self.covs) {
                let _ = write!(s, ",{}", c.values[i]);
            }
            if self.model_kind == ModelKind::Dldr {
                let _ = write!(s, ",{},{}", self.beta1_knee[i], self.beta2_knee[i]);
            }
            for col in &self.n2 {
                let _ = write!(s, ",{}", col[i]);
            }
            let _ = writeln!(s, ",{}", self.flags[i]);
        }
        s
    }
}

/// 2-D KDE of the included knee coordinates.
pub fn knee_joint_density(r: &PropagationResult) -> Result<Kde2Density> {
    let knees = r.included_knees()?;
    if knees.len() < 1000 {
        return Err(Error::invalid(format!(
            "joint knee density needs at least 1000 included draws, got {}",
            knees.len()
        )));
    }
    kde2_fit(&knees)
}

/// Probability estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub p: f64,
    pub se: f64,
    /// Draws in the window (counting) or effective sample size (weighted estimators).
    pub n: f64,
}

/// `P[β₂,knee ≤ 1 − b | β₁,knee = b]` by the windowed counting and KDE estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KneeProbability {
    pub beta1: f64,
    pub window: f64,
    /// Fraction of windowed draws with β₂,knee ≤ 1 − b (primary).
    pub counting: Estimate,
    /// Conditional slice of the joint KDE integrated up to 1 − b (cross-check).
    pub kde: Estimate,
    pub excluded_fraction: f64,
}

/// Windowed conditional knee probability. The window half-width defaults to
/// the normal-reference bandwidth of the included β₁,knee values.
pub fn conditional_knee_prob(r: &PropagationResult, beta1: f64, window: Option<f64>) -> Result<KneeProbability> {
    if !(beta1 > 0.0 && beta1 < 1.0) {
        return Err(Error::invalid(format!("beta1 must lie in (0, 1), got {beta1}")));
    }
    let knees = r.included_knees()?;
    if knees.len() < 10 {
        return Err(Error::invalid("too few included draws for a conditional probability"));
    }
    let xs: Vec<f64> = knees.iter().map(|k| k.0).collect();
    let window = match window {
        Some(w) if w > 0.0 => w,
        Some(w) => return Err(Error::invalid(format!("window must be positive, got {w}"))),
        None => silverman_bandwidth(&xs)?,
    };
    let limit = 1.0 - beta1;
    let (mut n, mut hits) = (0usize, 0usize);
    for &(x, y) in &knees {
        if (x - beta1).abs() < window {
            n += 1;
            if y <= limit {
                hits += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyWindow { beta1, window });
    }
    let p = hits as f64 / n as f64;
    let counting = Estimate {
        p,
        se: (p * (1.0 - p) / n as f64).sqrt(),
        n: n as f64,
    };
    let joint = kde2_fit(&knees)?;
    let (kp, kse, keff) = joint.conditional_cdf(beta1, limit).ok_or(Error::EmptyWindow { beta1, window })?;
    Ok(KneeProbability {
        beta1,
        window,
        counting,
        kde: Estimate { p: kp, se: kse, n: keff },
        excluded_fraction: r.excluded_fraction(),
    })
}

/// Conditional knee probability with the B integral done per draw.
///
/// With `R = β₁,knee + β₂,knee = (N₁/N₂)^α`, fixing `β₁,knee = b` pins
/// `B = 1 − b/R`, and the event `β₂,knee ≤ 1 − b` is `R ≤ 1`. Each draw
/// contributes weight `f_B(1 − b/R)/R` (the Jacobian of `B ↦ β₁,knee`) when
/// the conditioned knee `(b, R − b)` lies inside the open unit square. The
/// standard error is the delta-method error of the weighted ratio.
pub fn exact_knee_prob(r: &PropagationResult, model: &InputJointModel, beta1: f64) -> Result<Estimate> {
    if r.model_kind != ModelKind::Dldr || model.kind != ModelKind::Dldr {
        return Err(Error::invalid("knee statistics need a dldr run"));
    }
    if !(beta1 > 0.0 && beta1 < 1.0) {
        return Err(Error::invalid(format!("beta1 must lie in (0, 1), got {beta1}")));
    }
    let bm = model.marginal(Param::B).expect("dldr model has B");
    if matches!(bm, Marginal::Point(_)) {
        return Err(Error::invalid("B is a point mass; the conditional density of the knee is singular"));
    }
    let levels = r.cov_levels.iter().find(|(p, _)| *p == Param::B).map(|(_, l)| l.as_slice());
    let mut w = Vec::with_capacity(r.n_samples);
    let mut y = Vec::with_capacity(r.n_samples);
    for i in 0..r.n_samples {
        let big_r = r.beta1_knee[i] + r.beta2_knee[i];
        let other = big_r - beta1;
        let wi = if big_r.is_finite() && other > 0.0 && other < 1.0 {
            let lvl = levels.map_or(0, |l| l[i]);
            bm.pdf(1.0 - beta1 / big_r, lvl).unwrap_or(0.0) / big_r
        } else {
            0.0
        };
        w.push(wi);
        y.push(if big_r <= 1.0 { 1.0 } else { 0.0 });
    }
    let sw: f64 = w.iter().sum();
    if !(sw > 0.0) {
        return Err(Error::EmptyWindow { beta1, window: 0.0 });
    }
    let p = w.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / sw;
    let n = r.n_samples as f64;
    let var = w.iter().zip(&y).map(|(a, b)| (a * (b - p)).powi(2)).sum::<f64>() / (sw * sw) * n / (n - 1.0).max(1.0);
    let sw2: f64 = w.iter().map(|a| a * a).sum();
    Ok(Estimate {
        p,
        se: var.sqrt(),
        n: sw * sw / sw2,
    })
}

/// KDE of one remaining-life column.
#[derive(Debug, Clone)]
pub struct N2Distribution {
    pub density: KdeDensity,
    /// Fraction of draws left out (NaN, knee-excluded or first-stage failures).
    pub omitted_fraction: f64,
}

/// Reflected-at-zero KDE of the n2 values at `n1`, omitting flagged draws.
pub fn n2_distribution(r: &PropagationResult, n1: f64) -> Result<N2Distribution> {
    let j = r.n1_index(n1)?;
    let vals: Vec<f64> = r.n2[j]
        .iter()
        .zip(&r.flags)
        .filter(|(v, f)| v.is_finite() && **f & (FLAG_KNEE_EXCLUDED | FLAG_DOMAIN) == 0 && !(**v == 0.0 && n1 > 0.0 && **f & FLAG_FIRST_STAGE_FAILURE != 0))
        .map(|(v, _)| *v)
        .collect();
    let omitted = 1.0 - vals.len() as f64 / r.n_samples as f64;
    Ok(N2Distribution {
        density: kde_fit(&vals, Some(0.0), None)?,
        omitted_fraction: omitted,
    })
}

/// Empirical quantiles of n2 over an n1 grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandTable {
    pub levels: Vec<f64>,
    pub n1: Vec<f64>,
    /// `quantiles[j][l]`: level `levels[l]` at `n1[j]`.
    pub quantiles: Vec<Vec<f64>>,
    /// Fraction of NaN n2 values left out at each grid point.
    pub omitted_fraction: Vec<f64>,
}

impl BandTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n1");
        for l in &self.levels {
            let _ = write!(s, ",q{l}");
        }
        s.push_str(",omitted_fraction\n");
        for (j, n1) in self.n1.iter().enumerate() {
            let _ = write!(s, "{n1}");
            for q in &self.quantiles[j] {
                let _ = write!(s, ",{q}");
            }
            let _ = writeln!(s, ",{}", self.omitted_fraction[j]);
        }
        s
    }
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() || levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("levels must be strictly increasing probabilities in (0, 1)"));
    }
    Ok(())
}

/// Band quantiles (Hyndman-Fan type 7) computed from an existing run.
pub fn band_from_result(r: &PropagationResult, levels: &[f64]) -> Result<BandTable> {
    check_levels(levels)?;
    let mut quantiles = Vec::with_capacity(r.n1_values.len());
    let mut omitted = Vec::with_capacity(r.n1_values.len());
    for col in &r.n2 {
        let mut v: Vec<f64> = col.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Err(Error::Domain("every draw is undefined at some n1 grid point".into()));
        }
        v.sort_by(f64::total_cmp);
        omitted.push(1.0 - v.len() as f64 / col.len() as f64);
        quantiles.push(levels.iter().map(|&l| quantile_sorted(&v, l)).collect());
    }
    Ok(BandTable {
        levels: levels.to_vec(),
        n1: r.n1_values.clone(),
        quantiles,
        omitted_fraction: omitted,
    })
}

/// Runs the model over `n1_grid` and tabulates the requested quantiles of n2.
pub fn n2_band(model: &InputJointModel, n1_grid: &[f64], levels: &[f64], n_samples: usize, seed: u64) -> Result<BandTable> {
    check_levels(levels)?;
    band_from_result(&run(model, n1_grid, n_samples, seed)?, levels)
}

#[derive(Debug, Clone, Serialize)]
pub struct N2Summary {
    pub n1: f64,
    pub mean: f64,
    pub q01: f64,
    pub q50: f64,
    pub q99: f64,
    pub undefined_fraction: f64,
    pub first_stage_failure_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KneeSummary {
    pub beta1_mean: f64,
    pub beta2_mean: f64,
    /// Included draws with β₁,knee + β₂,knee ≤ 1.
    pub below_ldr_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalSummary {
    pub beta1: f64,
    pub window: Option<f64>,
    pub counting: Option<Estimate>,
    pub kde: Option<Estimate>,
    pub exact: Option<Estimate>,
    pub notes: Vec<String>,
}

/// JSON summary of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub model_kind: ModelKind,
    pub seed: u64,
    pub n_samples: usize,
    pub excluded_count: usize,
    pub excluded_fraction: f64,
    pub domain_flagged: usize,
    pub clamped: usize,
    pub n2: Vec<N2Summary>,
    pub knee: Option<KneeSummary>,
    pub conditional: Vec<ConditionalSummary>,
    pub warnings: Vec<String>,
}

/// Windows holding fewer draws than this get a note in summaries.
pub const MIN_WINDOW_DRAWS: usize = 30;

/// All three conditional estimators at `beta1`; estimators that cannot be
/// formed are null and explained in `notes`.
pub fn conditional_summary(r: &PropagationResult, model: &InputJointModel, beta1: f64, window: Option<f64>) -> ConditionalSummary {
    let mut notes = Vec::new();
    let (window, counting, kde) = match conditional_knee_prob(r, beta1, window) {
        Ok(c) => {
            if (c.counting.n as usize) < MIN_WINDOW_DRAWS {
                notes.push(format!(
                    "only {} draws in the window at beta1 = {beta1}; the windowed estimates are unreliable",
                    c.counting.n
                ));
            }
            (Some(c.window), Some(c.counting), Some(c.kde))
        }
        Err(e) => {
            notes.push(e.to_string());
            (window, None, None)
        }
    };
    let exact = match exact_knee_prob(r, model, beta1) {
        Ok(e) => Some(e),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    ConditionalSummary {
        beta1,
        window,
        counting,
        kde,
        exact,
        notes,
    }
}

/// Quantiles of every n2 column and, for DLDR, knee statistics and the three
/// conditional estimators at each `beta1_values` entry. Estimators that cannot
/// be formed at some abscissa are reported as null with a note.
pub fn summarize(r: &PropagationResult, model: &InputJointModel, beta1_values: &[f64]) -> Result<RunSummary> {
    let mut n2 = Vec::new();
    for (j, n1) in r.n1_values.iter().enumerate() {
        let col = &r.n2[j];
        let mut v: Vec<f64> = col.iter().copied().filter(|x| x.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        let fs = col
            .iter()
            .zip(&r.flags)
            .filter(|(x, f)| **x == 0.0 && **f & FLAG_FIRST_STAGE_FAILURE != 0 && *n1 > 0.0)
            .count();
        let q = |p: f64| if v.is_empty() { f64::NAN } else { quantile_sorted(&v, p) };
        n2.push(N2Summary {
            n1: *n1,
            mean: if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 },
            q01: q(0.01),
            q50: q(0.50),
            q99: q(0.99),
            undefined_fraction: 1.0 - v.len() as f64 / col.len() as f64,
            first_stage_failure_fraction: fs as f64 / col.len() as f64,
        });
    }
    let mut knee = None;
    let mut conditional = Vec::new();
    if r.model_kind == ModelKind::Dldr {
        let k = r.included_knees()?;
        if !k.is_empty() {
            let m = k.len() as f64;
            knee = Some(KneeSummary {
                beta1_mean: k.iter().map(|p| p.0).sum::<f64>() / m,
                beta2_mean: k.iter().map(|p| p.1).sum::<f64>() / m,
                below_ldr_fraction: k.iter().filter(|p| p.0 + p.1 <= 1.0).count() as f64 / m,
            });
        }
        for &b in beta1_values {
            conditional.push(conditional_summary(r, model, b, None));
        }
    }
    Ok(RunSummary {
        model_kind: r.model_kind,
        seed: r.seed,
        n_samples: r.n_samples,
        excluded_count: r.excluded_count,
        excluded_fraction: r.excluded_fraction(),
        domain_flagged: r.count_flag(FLAG_DOMAIN),
        clamped: r.count_flag(FLAG_CLAMPED),
        n2,
        knee,
        conditional,
        warnings: r.warnings.clone(),
    })
}
