//! Deterministic two-level damage models: the linear rule, the double linear
//! rule with its knee point, and the one-parameter logarithmic nonlinear rule,
//! plus least-squares fitting of their parameters from mean data.
//!
//! Cycle counts are positive reals. Logarithms in the nonlinear rule are base 10.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::goldensectionsearch::GoldenSectionSearch;
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One stress level and its single-level fatigue life.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadLevel {
    pub stress: f64,
    pub life: f64,
}

impl LoadLevel {
    pub fn new(stress: f64, life: f64) -> Result<Self> {
        if !(stress > 0.0) || !(life > 0.0 && life.is_finite()) {
            return Err(Error::invalid("stress and life must be positive"));
        }
        Ok(LoadLevel { stress, life })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DldrParams {
    pub alpha: f64,
    pub b: f64,
}

impl DldrParams {
    pub fn new(alpha: f64, b: f64) -> Result<Self> {
        if !alpha.is_finite() || !(0.0..=1.0).contains(&b) {
            return Err(Error::invalid(format!("need finite alpha and b in [0, 1], got ({alpha}, {b})")));
        }
        Ok(DldrParams { alpha, b })
    }
}

/// Junction of the two linear segments in (β₁, β₂) coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KneePoint {
    pub beta1_knee: f64,
    pub beta2_knee: f64,
    /// Both coordinates strictly inside (0, 1).
    pub inside_unit_square: bool,
}

impl KneePoint {
    pub fn new(beta1_knee: f64, beta2_knee: f64) -> Self {
        let open = |v: f64| v > 0.0 && v < 1.0;
        KneePoint {
            beta1_knee,
            beta2_knee,
            inside_unit_square: open(beta1_knee) && open(beta2_knee),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearParams {
    pub n_e: f64,
    pub q_ratio: f64,
}

impl NonlinearParams {
    pub fn new(n_e: f64, q_ratio: f64) -> Result<Self> {
        if !(n_e > 0.0 && n_e.is_finite()) || !(q_ratio > 0.0 && q_ratio.is_finite()) {
            return Err(Error::invalid("n_e and q_ratio must be positive and finite"));
        }
        Ok(NonlinearParams { n_e, q_ratio })
    }
}

/// Applied and remaining cycle ratios with their linear damage sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleRatios {
    pub beta1: f64,
    pub beta2: f64,
    pub damage: f64,
}

impl CycleRatios {
    pub fn from_cycles(n1: f64, life1: f64, n2: f64, life2: f64) -> Result<Self> {
        check_lives(life1, life2)?;
        let beta1 = n1 / life1;
        let beta2 = n2 / life2;
        if !(0.0..=1.0).contains(&beta1) || !(0.0..=1.0).contains(&beta2) {
            return Err(Error::Domain(format!("cycle ratios ({beta1}, {beta2}) outside [0, 1]")));
        }
        Ok(CycleRatios {
            beta1,
            beta2,
            damage: beta1 + beta2,
        })
    }
}

fn check_lives(life1: f64, life2: f64) -> Result<()> {
    if !(life1 > 0.0 && life1.is_finite()) || !(life2 > 0.0 && life2.is_finite()) {
        return Err(Error::invalid(format!("lives must be positive and finite, got ({life1}, {life2})")));
    }
    Ok(())
}

fn check_applied(n1: f64, life1: f64) -> Result<()> {
    if !(n1 >= 0.0) {
        return Err(Error::invalid(format!("applied cycles must be nonnegative, got {n1}")));
    }
    if n1 > life1 {
        return Err(Error::Domain(format!("applied cycles {n1} exceed first-level life {life1}")));
    }
    Ok(())
}

/// Remaining second-level cycles under the linear rule.
pub fn ldr_remaining(n1: f64, life1: f64, life2: f64) -> Result<f64> {
    check_lives(life1, life2)?;
    check_applied(n1, life1)?;
    Ok((1.0 - n1 / life1) * life2)
}

/// Knee point; `β₁ + β₂ = (N₁/N₂)^α` by construction.
pub fn dldr_knee(p: DldrParams, life1: f64, life2: f64) -> Result<KneePoint> {
    check_lives(life1, life2)?;
    let r = (life1 / life2).powf(p.alpha);
    Ok(KneePoint::new((1.0 - p.b) * r, p.b * r))
}

/// Knee from a precomputed ratio power `r = (N₁/N₂)^α`.
pub(crate) fn knee_from_power(b: f64, r: f64) -> KneePoint {
    KneePoint::new((1.0 - b) * r, b * r)
}

/// Remaining-life ratio β₂ after applying β₁ under the two-segment rule.
pub fn dldr_beta2(beta1: f64, k: KneePoint) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta1) {
        return Err(Error::invalid(format!("beta1 must lie in [0, 1], got {beta1}")));
    }
    if !k.inside_unit_square {
        return Err(Error::Domain(format!(
            "knee ({}, {}) outside the open unit square",
            k.beta1_knee, k.beta2_knee
        )));
    }
    Ok(beta2_unchecked(beta1, k.beta1_knee, k.beta2_knee))
}

#[inline]
pub(crate) fn beta2_unchecked(beta1: f64, b1k: f64, b2k: f64) -> f64 {
    if beta1 <= b1k {
        (b2k - 1.0) / b1k * beta1 + 1.0
    } else {
        b2k * (1.0 - beta1) / (1.0 - b1k)
    }
}

pub fn dldr_remaining(n1: f64, life1: f64, life2: f64, k: KneePoint) -> Result<f64> {
    check_lives(life1, life2)?;
    check_applied(n1, life1)?;
    Ok(dldr_beta2(n1 / life1, k)? * life2)
}

/// Nonlinear-rule remaining life together with a flag raised when the raw
/// value left `[0, N₂]` by more than `1e-9·N₂` before clamping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonlinearOutcome {
    pub n2: f64,
    pub clamped: bool,
}

pub fn nonlinear_remaining_flagged(n1: f64, life1: f64, life2: f64, p: NonlinearParams) -> Result<NonlinearOutcome> {
    check_lives(life1, life2)?;
    check_applied(n1, life1)?;
    if life1 >= p.n_e || life2 >= p.n_e {
        return Err(Error::Domain(format!(
            "lives ({life1}, {life2}) must stay below the endurance cycles {}",
            p.n_e
        )));
    }
    if n1 == 0.0 {
        return Ok(NonlinearOutcome { n2: life2, clamped: false });
    }
    let le = p.n_e.log10();
    let r = ((le - life1.log10()) / (le - n1.log10())).powf(p.q_ratio);
    let raw = life2 - 10f64.powf(le - (le - life2.log10()) / r);
    let tol = 1e-9 * life2;
    let clamped = raw < -tol || raw > life2 + tol;
    Ok(NonlinearOutcome {
        n2: raw.clamp(0.0, life2),
        clamped,
    })
}

/// Remaining second-level cycles under the nonlinear rule, clamped to `[0, N₂]`.
pub fn nonlinear_remaining(n1: f64, life1: f64, life2: f64, p: NonlinearParams) -> Result<f64> {
    nonlinear_remaining_flagged(n1, life1, life2, p).map(|o| o.n2)
}

/// Closed interval used as a search box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("interval needs finite lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    fn at(&self, k: usize, n: usize) -> f64 {
        self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64
    }

    fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Result of [`fit_dldr`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DldrFit {
    pub params: DldrParams,
    pub sse: f64,
    /// The objective does not vary with α over the box at the optimum.
    pub flat_alpha: bool,
    /// The objective does not vary with B over the box at the optimum.
    pub flat_b: bool,
}

const GRID: usize = 101;

struct DldrObjective<'a> {
    points: &'a [(f64, f64)],
    n_ratio: f64,
    alpha_box: Interval,
    b_box: Interval,
    /// coordinates held fixed: (alpha, b)
    fixed: (Option<f64>, Option<f64>),
}

impl DldrObjective<'_> {
    fn sse(&self, alpha: f64, b: f64) -> f64 {
        if !self.alpha_box.contains(alpha) || !self.b_box.contains(b) {
            return f64::INFINITY;
        }
        let k = knee_from_power(b, self.n_ratio.powf(alpha));
        if !k.inside_unit_square {
            return f64::INFINITY;
        }
        self.points
            .iter()
            .map(|&(x, y)| (y - beta2_unchecked(x, k.beta1_knee, k.beta2_knee)).powi(2))
            .sum()
    }

    fn sse_at(&self, p: &[f64]) -> f64 {
        let (a, b) = self.unpack(p);
        self.sse(a, b)
    }

    fn unpack(&self, p: &[f64]) -> (f64, f64) {
        let mut it = p.iter().copied();
        let a = self.fixed.0.unwrap_or_else(|| it.next().unwrap_or(f64::NAN));
        let b = self.fixed.1.unwrap_or_else(|| it.next().unwrap_or(f64::NAN));
        (a, b)
    }
}

impl CostFunction for DldrObjective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.sse_at(p))
    }
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// Least-squares (α, B) for mean `(β₁, β₂)` points, given the mean life ratio
/// `N₁/N₂`. A 101×101 scan of the box seeds a Nelder-Mead refinement. Among
/// tied grid minima the one closest to the box center wins; a coordinate along
/// which the objective is flat at the optimum is flagged and left at that node.
pub fn fit_dldr(points: &[(f64, f64)], n_ratio: f64, alpha_box: Interval, b_box: Interval) -> Result<DldrFit> {
    if points.len() < 2 {
        return Err(Error::invalid("fitting needs at least 2 points"));
    }
    if points.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("points must be finite"));
    }
    if points.iter().all(|p| p.0 == points[0].0) {
        return Err(Error::Degenerate("all points share the same beta1".into()));
    }
    if !(n_ratio > 0.0 && n_ratio.is_finite()) {
        return Err(Error::invalid("life ratio must be positive"));
    }
    let mut obj = DldrObjective {
        points,
        n_ratio,
        alpha_box,
        b_box,
        fixed: (None, None),
    };

    let mut table = vec![f64::INFINITY; GRID * GRID];
    for i in 0..GRID {
        for j in 0..GRID {
            table[i * GRID + j] = obj.sse(alpha_box.at(i, GRID), b_box.at(j, GRID));
        }
    }
    let best = table.iter().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::Domain("no parameter pair in the box keeps the knee inside the unit square".into()));
    }
    let center = |i: usize, j: usize| {
        let da = (alpha_box.at(i, GRID) - alpha_box.mid()) / (alpha_box.hi - alpha_box.lo);
        let db = (b_box.at(j, GRID) - b_box.mid()) / (b_box.hi - b_box.lo);
        da * da + db * db
    };
    let (bi, bj) = (0..GRID * GRID)
        .filter(|&k| ties(table[k], best))
        .map(|k| (k / GRID, k % GRID))
        .min_by(|a, b| center(a.0, a.1).total_cmp(&center(b.0, b.1)))
        .expect("a finite minimum exists");

    let flat = |vals: &mut dyn Iterator<Item = f64>| vals.filter(|v| v.is_finite()).all(|v| ties(v, table[bi * GRID + bj]));
    let flat_b = flat(&mut (0..GRID).map(|j| table[bi * GRID + j]));
    let flat_alpha = flat(&mut (0..GRID).map(|i| table[i * GRID + bj]));

    let (mut alpha, mut b) = (alpha_box.at(bi, GRID), b_box.at(bj, GRID));
    if flat_alpha {
        obj.fixed.0 = Some(alpha);
    }
    if flat_b {
        obj.fixed.1 = Some(b);
    }
    let step_a = (alpha_box.hi - alpha_box.lo) / (GRID - 1) as f64;
    let step_b = (b_box.hi - b_box.lo) / (GRID - 1) as f64;
    let mut start = Vec::new();
    let mut steps = Vec::new();
    if !flat_alpha {
        start.push(alpha);
        steps.push(step_a);
    }
    if !flat_b {
        start.push(b);
        steps.push(step_b);
    }
    if !start.is_empty() && best > 0.0 {
        let mut simplex = vec![start.clone()];
        for (d, s) in steps.iter().enumerate() {
            let mut v = start.clone();
            v[d] += s;
            // step toward the box interior so the initial vertex stays feasible
            if !obj.sse_at(&v).is_finite() {
                v[d] -= 2.0 * s;
            }
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-18)
            .map_err(|e| Error::NoConvergence(e.to_string()))?;
        let res = Executor::new(&obj, solver)
            .configure(|s| s.max_iters(2000))
            .run()
            .map_err(|e| Error::NoConvergence(e.to_string()))?;
        if let Some(p) = res.state().get_best_param() {
            if res.state().get_best_cost() <= best {
                let (a, bb) = obj.unpack(p);
                alpha = a;
                b = bb;
            }
        }
    }
    Ok(DldrFit {
        params: DldrParams { alpha, b },
        sse: obj.sse(alpha, b),
        flat_alpha,
        flat_b,
    })
}

impl CostFunction for &DldrObjective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.sse_at(p))
    }
}

pub const Q_BRACKET: (f64, f64) = (0.05, 20.0);

struct QObjective<'a> {
    points: &'a [(f64, f64)],
    life1: f64,
    life2: f64,
    n_e: f64,
}

impl QObjective<'_> {
    fn sse(&self, q: f64) -> f64 {
        let p = NonlinearParams { n_e: self.n_e, q_ratio: q };
        let mut s = 0.0;
        for &(n1, n2) in self.points {
            s += match nonlinear_remaining(n1, self.life1, self.life2, p) {
                Ok(m) if m > 0.0 => (n2.log10() - m.log10()).powi(2),
                _ => f64::INFINITY,
            };
        }
        s
    }
}

impl CostFunction for &QObjective<'_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, q: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.sse(*q))
    }
}

/// Least-squares q-ratio over `log₁₀ n₂` residuals of the nonlinear rule by
/// golden-section search on [`Q_BRACKET`].
pub fn fit_qratio(points: &[(f64, f64)], life1: f64, life2: f64, n_e: f64) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::invalid("q-ratio fitting needs at least one point"));
    }
    check_lives(life1, life2)?;
    NonlinearParams::new(n_e, 1.0)?;
    if life1 >= n_e || life2 >= n_e {
        return Err(Error::Domain("lives must stay below the endurance cycles".into()));
    }
    for &(n1, n2) in points {
        if !(n1 > 0.0 && n1 < life1) || !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::invalid(format!(
                "point ({n1}, {n2}) needs 0 < n1 < N1 and n2 > 0"
            )));
        }
    }
    let obj = QObjective {
        points,
        life1,
        life2,
        n_e,
    };
    let (lo, hi) = Q_BRACKET;
    let solver = GoldenSectionSearch::new(lo, hi)
        .and_then(|s| s.with_tolerance(1e-12))
        .map_err(|e| Error::NoConvergence(e.to_string()))?;
    let res = Executor::new(&obj, solver)
        .configure(|s| s.param(1.0).max_iters(500))
        .run()
        .map_err(|e| Error::NoConvergence(e.to_string()))?;
    let q = *res
        .state()
        .get_best_param()
        .ok_or_else(|| Error::NoConvergence("golden-section search returned no estimate".into()))?;
    let c = |x: f64| obj.sse(x);
    let at_edge = q - lo < 1e-6 * (hi - lo) || hi - q < 1e-6 * (hi - lo);
    // a plateau reaching an edge is as bad as a minimizer sitting on it
    let cq = c(q);
    if at_edge || c(lo) <= cq * (1.0 + 1e-9) || c(hi) <= cq * (1.0 + 1e-9) {
        return Err(Error::NoConvergence(format!(
            "q-ratio minimizer at the bracket edge ({q}); data inconsistent with the model"
        )));
    }
    Ok(q)
}
