//! Maximum-entropy densities under support, mean and standard-deviation
//! constraints.
//!
//! The maximizer of `-∫ f ln f` subject to polynomial moment constraints of
//! order at most two is the truncated exponential family
//! `f(x) = 1[lo,hi](x) exp(-λ0 - λ1 x - λ2 x²)`. The multipliers are found by
//! minimizing the convex dual
//!
//! ```text
//! Φ(λ1, λ2) = ln Z(λ1, λ2) + λ1 m1 + λ2 m2,   Z = ∫ exp(-λ1 x - λ2 x²) dx
//! ```
//!
//! whose gradient is the moment residual and whose Hessian is the moment
//! covariance. `λ0 = ln Z` is eliminated analytically. All integrals are
//! evaluated in the standardized coordinate `z = (x - center) / scale` so that
//! lifetimes of order 1e5 and parameters of order 1e-2 condition equally well.

use std::fmt::Write as _;

use rand::RngCore;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::quad;
use crate::rng::open_unit;

/// Default relative tolerance on the moment residuals.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Newton iteration cap.
pub const DEFAULT_MAX_ITER: usize = 60;

const MAX_HALVINGS: usize = 30;
const PILOT_KNOTS: usize = 256;
const GRID_KNOTS: usize = 2048;
const TAIL_MASS: f64 = 1e-17;
const QUAD_ABS: f64 = 1e-14;
const QUAD_REL: f64 = 1e-13;
const BREAKS: [f64; 15] = [
    -64.0, -32.0, -16.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0,
];

/// A univariate law that can be evaluated and inverted.
pub trait Univariate: Send + Sync {
    fn pdf(&self, x: f64) -> f64;
    fn cdf(&self, x: f64) -> f64;
    /// Inverse CDF for `p` in (0, 1).
    fn quantile(&self, p: f64) -> Result<f64>;
}

/// Support interval plus optional mean/standard-deviation constraints for one
/// scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentConstraints {
    pub support_lo: f64,
    pub support_hi: f64,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl MomentConstraints {
    pub fn new(support_lo: f64, support_hi: f64, mean: Option<f64>, std: Option<f64>) -> Result<Self> {
        let c = MomentConstraints {
            support_lo,
            support_hi,
            mean,
            std,
        };
        c.validate()?;
        Ok(c)
    }

    /// Support only: the maximizer is uniform.
    pub fn bounded(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, None, None)
    }

    pub fn with_mean(lo: f64, hi: f64, mean: f64) -> Result<Self> {
        Self::new(lo, hi, Some(mean), None)
    }

    pub fn with_mean_std(lo: f64, hi: f64, mean: f64, std: f64) -> Result<Self> {
        Self::new(lo, hi, Some(mean), Some(std))
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.support_lo, self.support_hi);
        if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::invalid(format!("bad support [{lo}, {hi}]")));
        }
        if lo >= hi {
            return Err(Error::invalid(format!("support_lo {lo} must be below support_hi {hi}")));
        }
        if let Some(m) = self.mean {
            if !m.is_finite() || m <= lo || m >= hi {
                return Err(Error::invalid(format!("mean {m} must lie strictly inside [{lo}, {hi}]")));
            }
        }
        if let Some(s) = self.std {
            if self.mean.is_none() {
                return Err(Error::invalid("std constraint requires a mean constraint"));
            }
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid(format!("std must be positive, got {s}")));
            }
        }
        let lo_inf = lo.is_infinite();
        let hi_inf = hi.is_infinite();
        if lo_inf && hi_inf && self.std.is_none() {
            return Err(Error::invalid(
                "an unbounded support requires both mean and std for a normalizable density",
            ));
        }
        if (lo_inf || hi_inf) && self.mean.is_none() {
            return Err(Error::invalid("a half-infinite support requires a mean constraint"));
        }
        Ok(())
    }

    fn is_bounded(&self) -> bool {
        self.support_lo.is_finite() && self.support_hi.is_finite()
    }
}

/// Fitted maximum-entropy density.
#[derive(Debug, Clone)]
pub struct MaxEntDistribution {
    constraints: MomentConstraints,
    center: f64,
    scale: f64,
    z_lo: f64,
    z_hi: f64,
    /// Multipliers in the standardized coordinate, including the log-normalizer.
    eta0: f64,
    eta: [f64; 2],
    lambdas: [f64; 3],
    entropy: f64,
    fitted_mean: f64,
    fitted_std: f64,
    iterations: usize,
    knots: Vec<Knot>,
    grid_total: f64,
}

#[derive(Debug, Clone, Copy)]
struct Knot {
    z: f64,
    cdf: f64,
    pdf: f64,
}

/// Moments of the unnormalized standardized density for given multipliers.
struct Moments {
    log_z: f64,
    /// E[z], E[z²], E[z³], E[z⁴]
    m: [f64; 4],
}

struct Standardized {
    z_lo: f64,
    z_hi: f64,
}

impl Standardized {
    /// Maximum of `-η1 z - η2 z²` on the support, or `None` if the density is
    /// not integrable.
    fn exponent_max(&self, eta: [f64; 2]) -> Option<f64> {
        let [e1, e2] = eta;
        let lo_inf = self.z_lo.is_infinite();
        let hi_inf = self.z_hi.is_infinite();
        if e2 < 0.0 && (lo_inf || hi_inf) {
            return None;
        }
        if e2 == 0.0 && ((hi_inf && e1 <= 0.0) || (lo_inf && e1 >= 0.0)) {
            return None;
        }
        let e = |z: f64| -e1 * z - e2 * z * z;
        let mut best = f64::NEG_INFINITY;
        if !lo_inf {
            best = best.max(e(self.z_lo));
        }
        if !hi_inf {
            best = best.max(e(self.z_hi));
        }
        if e2 > 0.0 {
            let v = -e1 / (2.0 * e2);
            if v > self.z_lo && v < self.z_hi {
                best = best.max(e(v));
            }
        }
        Some(best)
    }

    fn breaks(&self, eta: [f64; 2]) -> Vec<f64> {
        let mut b: Vec<f64> = BREAKS.to_vec();
        if eta[1] > 0.0 {
            let v = -eta[0] / (2.0 * eta[1]);
            let w = (0.5 / eta[1]).sqrt();
            for k in [-8.0, -2.0, 0.0, 2.0, 8.0] {
                b.push(v + k * w);
            }
        }
        b
    }

    fn moments(&self, eta: [f64; 2]) -> Option<Moments> {
        let emax = self.exponent_max(eta)?;
        let [e1, e2] = eta;
        let f = |z: f64| {
            let w = (-e1 * z - e2 * z * z - emax).exp();
            let z2 = z * z;
            [w, w * z, w * z2, w * z2 * z, w * z2 * z2]
        };
        let q = quad::integrate(&f, self.z_lo, self.z_hi, &self.breaks(eta), QUAD_ABS, QUAD_REL);
        let i0 = q.value[0];
        if !(i0 > 0.0 && i0.is_finite()) {
            return None;
        }
        Some(Moments {
            log_z: emax + i0.ln(),
            m: [q.value[1] / i0, q.value[2] / i0, q.value[3] / i0, q.value[4] / i0],
        })
    }
}

/// Fits the maximum-entropy density for `c`.
///
/// `tol` bounds the moment residuals in the standardized coordinate (relative
/// to the standard deviation scale); `max_iter` caps the Newton iterations.
pub fn fit_maxent(c: &MomentConstraints, tol: f64, max_iter: usize) -> Result<MaxEntDistribution> {
    c.validate()?;
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::invalid("tol must be positive and max_iter at least 1"));
    }
    check_feasible(c)?;

    let (center, scale) = standardization(c);
    let st = Standardized {
        z_lo: (c.support_lo - center) / scale,
        z_hi: (c.support_hi - center) / scale,
    };
    let dims = match (c.mean, c.std) {
        (Some(_), Some(_)) => 2,
        (Some(_), None) => 1,
        _ => 0,
    };
    let targets = [
        c.mean.map(|m| (m - center) / scale).unwrap_or(0.0),
        match (c.mean, c.std) {
            (Some(m), Some(s)) => ((m - center) / scale).powi(2) + (s / scale).powi(2),
            _ => 0.0,
        },
    ];
    let mut eta = match dims {
        2 => [0.0, 0.5],
        1 if st.z_hi.is_infinite() => [1.0, 0.0],
        1 if st.z_lo.is_infinite() => [-1.0, 0.0],
        _ => [0.0, 0.0],
    };

    let dual = |eta: [f64; 2]| -> Option<(f64, Moments)> {
        let mo = st.moments(eta)?;
        let phi = mo.log_z + eta[0] * targets[0] + eta[1] * targets[1];
        phi.is_finite().then_some((phi, mo))
    };

    let residual = |mo: &Moments| {
        let scaled = |k: usize| (targets[k] - mo.m[k]).abs() / targets[k].abs().max(1.0);
        if dims == 2 {
            scaled(0).max(scaled(1))
        } else {
            scaled(0)
        }
    };

    let (mut phi, mut mo) = dual(eta).ok_or_else(|| Error::Infeasible("initial multipliers not normalizable".into()))?;
    let mut iterations = 0;
    if dims > 0 {
        let mut converged = false;
        while iterations < max_iter {
            let grad = [targets[0] - mo.m[0], targets[1] - mo.m[1]];
            let resid = residual(&mo);
            if resid <= tol {
                converged = true;
                break;
            }
            iterations += 1;

            let var1 = mo.m[1] - mo.m[0] * mo.m[0];
            let step = if dims == 2 {
                let cov12 = mo.m[2] - mo.m[0] * mo.m[1];
                let var2 = mo.m[3] - mo.m[1] * mo.m[1];
                let det = var1 * var2 - cov12 * cov12;
                if !(det > 0.0) {
                    return Err(Error::Infeasible("moment covariance became singular".into()));
                }
                [
                    -(var2 * grad[0] - cov12 * grad[1]) / det,
                    -(-cov12 * grad[0] + var1 * grad[1]) / det,
                ]
            } else {
                if !(var1 > 0.0) {
                    return Err(Error::Infeasible("moment variance vanished".into()));
                }
                [-grad[0] / var1, 0.0]
            };
            let slope = grad[0] * step[0] + grad[1] * step[1];

            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial = [eta[0] + t * step[0], eta[1] + t * step[1]];
                if let Some((p, m)) = dual(trial) {
                    // near the optimum the decrease drops below the rounding of
                    // the dual; then a shrinking moment residual decides
                    let flat = p <= phi + 8.0 * f64::EPSILON * phi.abs().max(1.0);
                    if p <= phi + 1e-4 * t * slope || (flat && residual(&m) < resid) {
                        accepted = Some((trial, p, m));
                        break;
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some((e, p, m)) => {
                    eta = e;
                    phi = p;
                    mo = m;
                }
                None => {
                    return Err(Error::Infeasible(format!(
                        "dual could not be decreased after {MAX_HALVINGS} halvings (residual {resid:.3e})"
                    )))
                }
            }
        }
        if !converged {
            return Err(Error::Infeasible(format!(
                "Newton iteration did not converge in {max_iter} steps; constraints are at or beyond the feasible boundary"
            )));
        }
    }

    let eta0 = mo.log_z;
    let [e1, e2] = eta;
    let lambdas = [
        eta0 + scale.ln() - e1 * center / scale + e2 * center * center / (scale * scale),
        e1 / scale - 2.0 * e2 * center / (scale * scale),
        e2 / (scale * scale),
    ];
    let entropy = eta0 + e1 * mo.m[0] + e2 * mo.m[1] + scale.ln();
    let fitted_mean = center + scale * mo.m[0];
    let fitted_std = scale * (mo.m[1] - mo.m[0] * mo.m[0]).max(0.0).sqrt();

    let mut d = MaxEntDistribution {
        constraints: *c,
        center,
        scale,
        z_lo: st.z_lo,
        z_hi: st.z_hi,
        eta0,
        eta,
        lambdas,
        entropy,
        fitted_mean,
        fitted_std,
        iterations,
        knots: Vec::new(),
        grid_total: 1.0,
    };
    d.build_grid();
    Ok(d)
}

/// Closed-form feasibility: the variance of a law on `[a, b]` with mean `μ` is
/// below `(μ - a)(b - μ)`; on a half line it may not exceed the exponential's.
fn check_feasible(c: &MomentConstraints) -> Result<()> {
    let (Some(m), Some(s)) = (c.mean, c.std) else {
        return Ok(());
    };
    let (lo, hi) = (c.support_lo, c.support_hi);
    if c.is_bounded() {
        let bound = (m - lo) * (hi - m);
        if s * s >= bound {
            return Err(Error::Infeasible(format!(
                "std {s} reaches the two-point bound {:.6e} for mean {m} on [{lo}, {hi}]",
                bound.sqrt()
            )));
        }
    } else if lo.is_finite() && s > m - lo {
        return Err(Error::Infeasible(format!(
            "std {s} exceeds mean - support_lo = {}; no maximizer exists on a half line",
            m - lo
        )));
    } else if hi.is_finite() && s > hi - m {
        return Err(Error::Infeasible(format!(
            "std {s} exceeds support_hi - mean = {}; no maximizer exists on a half line",
            hi - m
        )));
    }
    Ok(())
}

fn standardization(c: &MomentConstraints) -> (f64, f64) {
    let (lo, hi) = (c.support_lo, c.support_hi);
    match (c.mean, c.std) {
        (Some(m), Some(s)) => (m, s),
        (Some(m), None) => {
            if lo.is_finite() && hi.is_finite() {
                (m, (m - lo).min(hi - m))
            } else if lo.is_finite() {
                (lo, m - lo)
            } else {
                (hi, hi - m)
            }
        }
        _ => (lo, hi - lo),
    }
}

impl MaxEntDistribution {
    pub fn constraints(&self) -> &MomentConstraints {
        &self.constraints
    }

    /// `(λ0, λ1, λ2)` of `exp(-λ0 - λ1 x - λ2 x²)`.
    pub fn lambdas(&self) -> [f64; 3] {
        self.lambdas
    }

    /// Entropy in nats from the fitted multipliers and moments.
    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    /// Mean of the fitted density (quadrature).
    pub fn fitted_mean(&self) -> f64 {
        self.fitted_mean
    }

    /// Standard deviation of the fitted density (quadrature).
    pub fn fitted_std(&self) -> f64 {
        self.fitted_std
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Inversion grid as `(x, cdf)` pairs.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        self.knots.iter().map(|k| (self.to_x(k.z), k.cdf)).collect()
    }

    fn to_x(&self, z: f64) -> f64 {
        self.center + self.scale * z
    }

    fn to_z(&self, x: f64) -> f64 {
        (x - self.center) / self.scale
    }

    /// Density of the standardized variable; no support check.
    fn pdf_z(&self, z: f64) -> f64 {
        (-self.eta0 - self.eta[0] * z - self.eta[1] * z * z).exp()
    }

    fn log_pdf_z(&self, z: f64) -> f64 {
        -self.eta0 - self.eta[0] * z - self.eta[1] * z * z
    }

    fn mass_z(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let f = |z: f64| [self.pdf_z(z)];
        quad::integrate(&f, a, b, &BREAKS, 1e-16, 1e-14).value[0]
    }

    fn mode_z(&self) -> f64 {
        let [e1, e2] = self.eta;
        let v = if e2 > 0.0 {
            -e1 / (2.0 * e2)
        } else if e1 > 0.0 {
            self.z_lo
        } else if e1 < 0.0 {
            self.z_hi
        } else {
            0.5 * (self.z_lo + self.z_hi)
        };
        v.clamp(self.z_lo, self.z_hi)
    }

    /// Smallest interval carrying all but `TAIL_MASS` of each tail.
    fn effective_range(&self) -> (f64, f64) {
        let mode = self.mode_z();
        let mut hi = self.z_hi;
        let mut step = 1.0;
        loop {
            let z = mode + step;
            if z >= self.z_hi {
                break;
            }
            if self.mass_z(z, self.z_hi) < TAIL_MASS {
                // shrink back toward the mode to the first point that still qualifies
                let (mut a, mut b) = (mode + step / 2.0, z);
                for _ in 0..40 {
                    let m = 0.5 * (a + b);
                    if self.mass_z(m, self.z_hi) < TAIL_MASS {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                hi = b;
                break;
            }
            step *= 2.0;
        }
        let mut lo = self.z_lo;
        let mut step = 1.0;
        loop {
            let z = mode - step;
            if z <= self.z_lo {
                break;
            }
            if self.mass_z(self.z_lo, z) < TAIL_MASS {
                let (mut a, mut b) = (z, mode - step / 2.0);
                for _ in 0..40 {
                    let m = 0.5 * (a + b);
                    if self.mass_z(self.z_lo, m) < TAIL_MASS {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                lo = a;
                break;
            }
            step *= 2.0;
        }
        (lo, hi)
    }

    fn piece(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let f = |z: f64| [self.pdf_z(z)];
        quad::adaptive(&f, a, b, 1e-17, 1e-14).value[0]
    }

    fn build_grid(&mut self) {
        let (lo, hi) = self.effective_range();

        // pilot pass on an equally spaced grid
        let mut pilot_z = Vec::with_capacity(PILOT_KNOTS);
        let mut pilot_f = Vec::with_capacity(PILOT_KNOTS);
        let mut acc = 0.0;
        for k in 0..PILOT_KNOTS {
            let z = lo + (hi - lo) * k as f64 / (PILOT_KNOTS - 1) as f64;
            if k > 0 {
                acc += self.piece(pilot_z[k - 1], z);
            }
            pilot_z.push(z);
            pilot_f.push(acc);
        }
        let total = acc;

        // equal-probability knots by inverting the pilot
        let mut zs = Vec::with_capacity(GRID_KNOTS);
        zs.push(lo);
        let mut j = 1;
        for k in 1..GRID_KNOTS - 1 {
            let target = total * k as f64 / (GRID_KNOTS - 1) as f64;
            while j < PILOT_KNOTS - 1 && pilot_f[j] < target {
                j += 1;
            }
            let (f0, f1) = (pilot_f[j - 1], pilot_f[j]);
            let w = if f1 > f0 { (target - f0) / (f1 - f0) } else { 0.5 };
            let z = pilot_z[j - 1] + w.clamp(0.0, 1.0) * (pilot_z[j] - pilot_z[j - 1]);
            if z > *zs.last().unwrap() && z < hi {
                zs.push(z);
            }
        }
        zs.push(hi);

        let mut knots = Vec::with_capacity(zs.len());
        let mut acc = 0.0;
        for (k, &z) in zs.iter().enumerate() {
            if k > 0 {
                acc += self.piece(zs[k - 1], z);
            }
            knots.push(Knot {
                z,
                cdf: acc,
                pdf: self.pdf_z(z),
            });
        }
        let total = acc;
        for k in knots.iter_mut() {
            k.cdf /= total;
        }
        knots.last_mut().unwrap().cdf = 1.0;
        // drop knots whose cdf failed to increase (flat far tails)
        knots.dedup_by(|b, a| b.cdf <= a.cdf && b.cdf < 1.0);
        self.grid_total = total;
        self.knots = knots;
    }

    fn cdf_z(&self, z: f64) -> f64 {
        let first = self.knots[0].z;
        let last = self.knots[self.knots.len() - 1].z;
        if z <= first {
            return 0.0;
        }
        if z >= last {
            return 1.0;
        }
        let k = self.knots.partition_point(|kn| kn.z <= z) - 1;
        let kn = self.knots[k];
        (kn.cdf + self.piece(kn.z, z) / self.grid_total).min(1.0)
    }

    fn quantile_z(&self, p: f64) -> f64 {
        let k = self.knots.partition_point(|kn| kn.cdf <= p).clamp(1, self.knots.len() - 1);
        let (a, b) = (self.knots[k - 1], self.knots[k]);
        let dp = b.cdf - a.cdf;
        let dz = b.z - a.z;

        // cubic Hermite interpolation of the inverse, slopes 1/pdf
        let mut z = {
            let t = ((p - a.cdf) / dp).clamp(0.0, 1.0);
            let linear = a.z + t * dz;
            let (h00, h10, h01, h11) = (
                2.0 * t * t * t - 3.0 * t * t + 1.0,
                t * t * t - 2.0 * t * t + t,
                -2.0 * t * t * t + 3.0 * t * t,
                t * t * t - t * t,
            );
            let m0 = dp * self.grid_total / a.pdf;
            let m1 = dp * self.grid_total / b.pdf;
            let h = h00 * a.z + h10 * m0 + h01 * b.z + h11 * m1;
            if h.is_finite() && h > a.z && h < b.z {
                h
            } else {
                linear
            }
        };

        // safeguarded Newton on cdf(z) - p within the knot bracket
        let (mut lo, mut hi) = (a.z, b.z);
        for _ in 0..100 {
            let g = a.cdf + self.piece(a.z, z) / self.grid_total - p;
            if g.abs() <= 1e-13 {
                break;
            }
            if g > 0.0 {
                hi = z;
            } else {
                lo = z;
            }
            if hi - lo <= 4.0 * f64::EPSILON * z.abs().max(1.0) {
                break;
            }
            let f = self.pdf_z(z) / self.grid_total;
            let newton = z - g / f;
            z = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        z
    }

    /// Entropy `-∫ f ln f` by quadrature over the support.
    pub fn entropy_of(&self) -> f64 {
        let f = |z: f64| {
            let p = self.pdf_z(z);
            if p == 0.0 {
                [0.0]
            } else {
                [-p * self.log_pdf_z(z)]
            }
        };
        let q = quad::integrate(&f, self.z_lo, self.z_hi, &BREAKS, 1e-14, 1e-13);
        q.value[0] + self.scale.ln()
    }

    /// `n` draws by inverse transform of open-interval uniforms from `rng`.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        Ok((0..n).map(|_| self.to_x(self.quantile_z(open_unit(rng)))).collect())
    }

    /// JSON document `{support, mean, std, lambdas, entropy}` with 17
    /// significant digits per number.
    pub fn to_json(&self) -> String {
        let c = &self.constraints;
        let mut s = String::from("{\"support\":[");
        s.push_str(&fmt_bound(c.support_lo));
        s.push(',');
        s.push_str(&fmt_bound(c.support_hi));
        s.push_str("],\"mean\":");
        s.push_str(&c.mean.map(fmt17).unwrap_or_else(|| "null".into()));
        s.push_str(",\"std\":");
        s.push_str(&c.std.map(fmt17).unwrap_or_else(|| "null".into()));
        let _ = write!(
            s,
            ",\"lambdas\":[{},{},{}],\"entropy\":{}}}",
            fmt17(self.lambdas[0]),
            fmt17(self.lambdas[1]),
            fmt17(self.lambdas[2]),
            fmt17(self.entropy)
        );
        s
    }
}

impl Univariate for MaxEntDistribution {
    fn pdf(&self, x: f64) -> f64 {
        let c = &self.constraints;
        if !(x >= c.support_lo && x <= c.support_hi) {
            return 0.0;
        }
        self.pdf_z(self.to_z(x)) / self.scale
    }

    fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        self.cdf_z(self.to_z(x))
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("quantile level {p} outside (0, 1)")));
        }
        Ok(self.to_x(self.quantile_z(p)))
    }
}

/// Formats a double with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_bound(x: f64) -> String {
    if x == f64::INFINITY {
        "\"+inf\"".into()
    } else if x == f64::NEG_INFINITY {
        "\"-inf\"".into()
    } else {
        fmt17(x)
    }
}

/// Support bound that may be infinite; serialized as a number or `"-inf"`/`"+inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound(pub f64);

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("+inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(Bound(x)),
            Repr::Str(s) => match s.trim() {
                "+inf" | "inf" | "+∞" | "∞" => Ok(Bound(f64::INFINITY)),
                "-inf" | "−inf" | "-∞" | "−∞" => Ok(Bound(f64::NEG_INFINITY)),
                other => Err(D::Error::custom(format!("unrecognized bound {other:?}"))),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ConstraintsDoc {
    support: [Bound; 2],
    #[serde(default)]
    mean: Option<f64>,
    #[serde(default)]
    std: Option<f64>,
}

impl Serialize for MomentConstraints {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConstraintsDoc {
            support: [Bound(self.support_lo), Bound(self.support_hi)],
            mean: self.mean,
            std: self.std,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MomentConstraints {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ConstraintsDoc::deserialize(d)?;
        MomentConstraints::new(doc.support[0].0, doc.support[1].0, doc.mean, doc.std).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use std::f64::consts::{E, PI};

    fn fit(c: MomentConstraints) -> MaxEntDistribution {
        fit_maxent(&c, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap()
    }

    #[test]
    fn uniform_has_zero_slope_multipliers() {
        let d = fit(MomentConstraints::bounded(0.0, 1.0).unwrap());
        let l = d.lambdas();
        assert_eq!(l[1], 0.0);
        assert_eq!(l[2], 0.0);
        assert!(l[0].abs() < 1e-14);
        assert!((d.pdf(0.5) - 1.0).abs() < 1e-12);
        assert_eq!(d.pdf(1.5), 0.0);
        assert!((d.cdf(0.25) - 0.25).abs() < 1e-12);
        assert!((d.quantile(0.9).unwrap() - 0.9).abs() < 1e-10);
        assert!(d.entropy_of().abs() < 1e-12);
    }

    #[test]
    fn uniform_entropy_is_log_width() {
        let d = fit(MomentConstraints::bounded(-2.0, 3.0).unwrap());
        assert!((d.entropy_of() - 5f64.ln()).abs() < 1e-12);
        assert!((d.lambdas()[0] - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn standard_normal() {
        let d = fit(MomentConstraints::with_mean_std(f64::NEG_INFINITY, f64::INFINITY, 0.0, 1.0).unwrap());
        assert!((d.pdf(0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-10);
        assert!((d.cdf(0.0) - 0.5).abs() < 1e-10);
        assert!(d.quantile(0.5).unwrap().abs() < 1e-9);
        assert!((d.entropy_of() - 0.5 * (2.0 * PI * E).ln()).abs() < 1e-9);
        assert!((d.lambdas()[2] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn exponential_mean_two() {
        let d = fit(MomentConstraints::with_mean(0.0, f64::INFINITY, 2.0).unwrap());
        assert!((d.pdf(0.0) - 0.5).abs() < 1e-12);
        assert!((d.pdf(2.0) - 0.5 * (-1f64).exp()).abs() < 1e-12);
        assert!((d.cdf(2.0) - (1.0 - (-1f64).exp())).abs() < 1e-10);
        assert!((d.quantile(1.0 - (-1f64).exp()).unwrap() - 2.0).abs() < 1e-9);
        assert!((d.entropy() - (1.0 + 2f64.ln())).abs() < 1e-10);
        assert!((d.entropy_of() - (1.0 + 2f64.ln())).abs() < 1e-10);
        assert_eq!(d.lambdas()[2], 0.0);
    }

    #[test]
    fn mirrored_half_line() {
        // (-inf, 0] with mean -2 is the reflected exponential
        let d = fit(MomentConstraints::with_mean(f64::NEG_INFINITY, 0.0, -2.0).unwrap());
        assert!((d.pdf(0.0) - 0.5).abs() < 1e-12);
        assert!((d.cdf(-2.0) - (-1f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn tanaka_alpha_low_cov_moments_close() {
        // support [-1, 1], mean -0.03, std 0.07 * 0.03
        let c = MomentConstraints::with_mean_std(-1.0, 1.0, -0.03, 0.0021).unwrap();
        let d = fit(c);
        assert!((d.fitted_mean() - (-0.03)).abs() / 0.03 < 1e-8);
        assert!((d.fitted_std() - 0.0021).abs() / 0.0021 < 1e-6);
        // independent check: quadrature of the x-space pdf
        let m0 = quad::integrate1(|x| d.pdf(x), -1.0, 1.0, &[-0.03], 1e-15, 1e-13);
        let m1 = quad::integrate1(|x| x * d.pdf(x), -1.0, 1.0, &[-0.03], 1e-15, 1e-13);
        let m2 = quad::integrate1(|x| (x + 0.03).powi(2) * d.pdf(x), -1.0, 1.0, &[-0.03], 1e-15, 1e-13);
        assert!((m0 - 1.0).abs() < 1e-8);
        assert!((m1 + 0.03).abs() < 1e-8 * 0.03);
        assert!((m2.sqrt() - 0.0021).abs() < 1e-6 * 0.0021);
    }

    #[test]
    fn bhatia_davis_bound_is_infeasible() {
        let c = MomentConstraints::with_mean_std(0.0, 1.0, 0.5, 0.5).unwrap();
        assert!(matches!(fit_maxent(&c, DEFAULT_TOL, DEFAULT_MAX_ITER), Err(Error::Infeasible(_))));
        let c = MomentConstraints::with_mean_std(0.0, f64::INFINITY, 1.0, 1.5).unwrap();
        assert!(matches!(fit_maxent(&c, DEFAULT_TOL, DEFAULT_MAX_ITER), Err(Error::Infeasible(_))));
    }

    #[test]
    fn near_boundary_fit_is_u_shaped() {
        // close to, but inside, the two-point bound: λ2 < 0
        let c = MomentConstraints::with_mean_std(0.0, 1.0, 0.5, 0.45).unwrap();
        let d = fit(c);
        assert!(d.lambdas()[2] < 0.0);
        assert!((d.fitted_std() - 0.45).abs() < 1e-6 * 0.45);
    }

    #[test]
    fn newton_cap_reports_infeasible() {
        let c = MomentConstraints::with_mean_std(0.0, 1.0, 0.5, 0.49).unwrap();
        match fit_maxent(&c, DEFAULT_TOL, 2) {
            Err(Error::Infeasible(_)) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn constraint_preconditions() {
        assert!(MomentConstraints::new(1.0, 0.0, None, None).is_err());
        assert!(MomentConstraints::new(0.0, 1.0, Some(1.0), None).is_err());
        assert!(MomentConstraints::new(0.0, 1.0, None, Some(0.1)).is_err());
        assert!(MomentConstraints::new(f64::NEG_INFINITY, f64::INFINITY, Some(0.0), None).is_err());
        assert!(MomentConstraints::new(0.0, f64::INFINITY, None, None).is_err());
        assert!(MomentConstraints::new(0.0, f64::INFINITY, Some(-1.0), None).is_err());
    }

    #[test]
    fn grid_is_strictly_monotone() {
        let d = fit(MomentConstraints::with_mean_std(0.0, 1.0, 0.8, 0.06).unwrap());
        let g = d.grid();
        assert_eq!(g[0].1, 0.0);
        assert_eq!(g[g.len() - 1].1, 1.0);
        assert!(g.len() > 2000);
        for w in g.windows(2) {
            assert!(w[1].0 > w[0].0 && w[1].1 > w[0].1);
        }
    }

    #[test]
    fn sample_rejects_zero_and_is_reproducible() {
        let d = fit(MomentConstraints::bounded(0.0, 1.0).unwrap());
        assert!(d.sample(&mut stream(1), 0).is_err());
        let a = d.sample(&mut stream(9), 50).unwrap();
        let b = d.sample(&mut stream(9), 50).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_document_shape() {
        let d = fit(MomentConstraints::with_mean(0.0, f64::INFINITY, 2.0).unwrap());
        let doc: serde_json::Value = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(doc["support"][1], "+inf");
        assert_eq!(doc["mean"].as_f64(), Some(2.0));
        assert!(doc["std"].is_null());
        assert_eq!(doc["lambdas"].as_array().unwrap().len(), 3);
        assert!(d.to_json().contains("5.0000000000000000e-1"));
    }

    #[test]
    fn constraints_json_round_trip() {
        let c = MomentConstraints::with_mean_std(f64::NEG_INFINITY, 5.0, 1.0, 0.5).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"-inf\""));
        let back: MomentConstraints = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let bad = serde_json::from_str::<MomentConstraints>(r#"{"support":[0,1],"mean":2}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn converges_when_dual_is_flat_to_rounding() {
        // this member stalled on the sufficient-decrease test alone
        let c = MomentConstraints::with_mean_std(0.0, 1.0, 0.8, 0.080_859_375 * 0.8).unwrap();
        let d = fit_maxent(&c, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((d.fitted_mean() - 0.8).abs() < 1e-9);
        assert!((d.fitted_std() / (0.080_859_375 * 0.8) - 1.0).abs() < 1e-8);
    }
}
