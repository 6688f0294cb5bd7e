//! Non-parametric estimators: Gaussian kernel densities in one and two
//! dimensions, the empirical CDF, summary statistics and the running
//! standard-deviation convergence diagnostic.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::Univariate;
use crate::error::{Error, Result};
use crate::rng::{splitmix64, stream};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_677_94;
/// Kernel evaluations beyond this many bandwidths are dropped (mass < 1e-19).
const CUTOFF: f64 = 9.0;

pub(crate) fn phi(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

/// Standard normal CDF.
pub fn norm_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u / std::f64::consts::SQRT_2)
}

/// Sample mean, unbiased standard deviation and coefficient of variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub cov: f64,
}

pub fn summary_stats(samples: &[f64]) -> Result<Summary> {
    if samples.len() < 2 {
        return Err(Error::invalid("summary statistics need at least 2 samples"));
    }
    let (mean, std) = mean_std(samples);
    if mean == 0.0 {
        return Err(Error::invalid("coefficient of variation undefined for zero mean"));
    }
    Ok(Summary {
        mean,
        std,
        cov: std / mean.abs(),
    })
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Linear-interpolation sample quantile of sorted data (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let i = h.floor() as usize;
    if i + 1 >= n {
        return sorted[n - 1];
    }
    sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
}

/// Normal-reference bandwidth `0.9 min(std, IQR/1.34) n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::invalid("bandwidth needs at least 2 samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::Degenerate("samples have zero spread".into()));
    }
    let (_, std) = mean_std(samples);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    if !(spread > 0.0) || !spread.is_finite() {
        return Err(Error::Degenerate("samples have zero spread".into()));
    }
    Ok(0.9 * spread * (samples.len() as f64).powf(-0.2))
}

/// One-dimensional Gaussian KDE with optional reflecting boundaries.
#[derive(Debug, Clone)]
pub struct KdeDensity {
    sorted: Vec<f64>,
    bandwidth: f64,
    support_lo: Option<f64>,
    support_hi: Option<f64>,
    norm: f64,
    /// cdf table for bracketing quantile searches
    table: Vec<(f64, f64)>,
}

/// Fits a KDE with the normal-reference bandwidth.
pub fn kde_fit(samples: &[f64], support_lo: Option<f64>, support_hi: Option<f64>) -> Result<KdeDensity> {
    if samples.len() < 5 {
        return Err(Error::invalid("kernel density estimation needs at least 5 samples"));
    }
    let h = silverman_bandwidth(samples)?;
    KdeDensity::with_bandwidth(samples, h, support_lo, support_hi)
}

impl KdeDensity {
    pub fn with_bandwidth(samples: &[f64], bandwidth: f64, support_lo: Option<f64>, support_hi: Option<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("kernel density estimation needs samples"));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if let (Some(lo), Some(hi)) = (support_lo, support_hi) {
            if lo >= hi {
                return Err(Error::invalid("reflection boundaries must satisfy lo < hi"));
            }
        }
        let mut sorted = samples.to_vec();
        if sorted.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("samples must be finite"));
        }
        sorted.sort_by(f64::total_cmp);
        if support_lo.is_some_and(|lo| sorted[0] < lo) || support_hi.is_some_and(|hi| sorted[sorted.len() - 1] > hi) {
            return Err(Error::invalid("samples fall outside the declared support"));
        }
        let mut k = KdeDensity {
            sorted,
            bandwidth,
            support_lo,
            support_hi,
            norm: 1.0,
            table: Vec::new(),
        };
        k.norm = match support_hi {
            Some(hi) => k.raw_cdf(hi),
            None => 1.0,
        };
        let (a, b) = k.range();
        k.table = (0..=1024)
            .map(|i| {
                let x = a + (b - a) * i as f64 / 1024.0;
                (x, k.cdf(x))
            })
            .collect();
        Ok(k)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Interval carrying all of the estimate's mass up to kernel truncation.
    pub fn range(&self) -> (f64, f64) {
        let h = self.bandwidth;
        let mut a = self.sorted[0] - CUTOFF * h;
        let mut b = self.sorted[self.sorted.len() - 1] + CUTOFF * h;
        if let Some(lo) = self.support_lo {
            a = a.max(lo);
        }
        if let Some(hi) = self.support_hi {
            b = b.min(hi);
        }
        (a, b)
    }

    fn window(&self, t: f64) -> &[f64] {
        let w = CUTOFF * self.bandwidth;
        let i = self.sorted.partition_point(|&x| x < t - w);
        let j = self.sorted.partition_point(|&x| x <= t + w);
        &self.sorted[i..j]
    }

    /// Σ φ((t - xᵢ)/h)
    fn kernel_sum(&self, t: f64) -> f64 {
        self.window(t).iter().map(|&x| phi((t - x) / self.bandwidth)).sum()
    }

    /// Σ Φ((t - xᵢ)/h)
    fn cdf_sum(&self, t: f64) -> f64 {
        if t == f64::INFINITY {
            return self.sorted.len() as f64;
        }
        if t == f64::NEG_INFINITY {
            return 0.0;
        }
        let w = CUTOFF * self.bandwidth;
        let below = self.sorted.partition_point(|&x| x < t - w) as f64;
        below + self.window(t).iter().map(|&x| norm_cdf((t - x) / self.bandwidth)).sum::<f64>()
    }

    fn inside(&self, x: f64) -> bool {
        self.support_lo.is_none_or(|lo| x >= lo) && self.support_hi.is_none_or(|hi| x <= hi)
    }

    fn raw_cdf(&self, x: f64) -> f64 {
        let n = self.sorted.len() as f64;
        let lo = self.support_lo.unwrap_or(f64::NEG_INFINITY);
        let mut s = self.cdf_sum(x) - self.cdf_sum(lo);
        if let Some(lo) = self.support_lo {
            s += self.cdf_sum(lo) - self.cdf_sum(2.0 * lo - x);
        }
        if let Some(hi) = self.support_hi {
            s += self.cdf_sum(2.0 * hi - lo) - self.cdf_sum(2.0 * hi - x);
        }
        s / n
    }

    /// Mass on `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        self.cdf(b) - self.cdf(a)
    }

    /// `(x, pdf)` on `n` equally spaced points over [`range`](Self::range).
    pub fn grid(&self, n: usize) -> Vec<(f64, f64)> {
        let (a, b) = self.range();
        (0..n)
            .map(|i| {
                let x = a + (b - a) * i as f64 / (n.max(2) - 1) as f64;
                (x, self.pdf(x))
            })
            .collect()
    }
}

impl Univariate for KdeDensity {
    fn pdf(&self, x: f64) -> f64 {
        if !self.inside(x) {
            return 0.0;
        }
        let mut s = self.kernel_sum(x);
        if let Some(lo) = self.support_lo {
            s += self.kernel_sum(2.0 * lo - x);
        }
        if let Some(hi) = self.support_hi {
            s += self.kernel_sum(2.0 * hi - x);
        }
        s / (self.sorted.len() as f64 * self.bandwidth * self.norm)
    }

    fn cdf(&self, x: f64) -> f64 {
        if self.support_lo.is_some_and(|lo| x <= lo) {
            return 0.0;
        }
        if self.support_hi.is_some_and(|hi| x >= hi) {
            return 1.0;
        }
        (self.raw_cdf(x) / self.norm).clamp(0.0, 1.0)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("quantile level {p} outside (0, 1)")));
        }
        let k = self.table.partition_point(|&(_, c)| c < p);
        let (mut lo, mut hi) = if k == 0 {
            (self.table[0].0 - CUTOFF * self.bandwidth, self.table[0].0)
        } else if k >= self.table.len() {
            let last = self.table[self.table.len() - 1].0;
            (last, last + CUTOFF * self.bandwidth)
        } else {
            (self.table[k - 1].0, self.table[k].0)
        };
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let g = self.cdf(x) - p;
            if g.abs() <= 1e-12 {
                break;
            }
            if g > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(self.bandwidth) {
                break;
            }
            let newton = x - g / self.pdf(x);
            x = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Ok(x)
    }
}

/// Product-Gaussian KDE over pairs.
#[derive(Debug, Clone)]
pub struct Kde2Density {
    /// pairs sorted by the first coordinate
    pairs: Vec<(f64, f64)>,
    h1: f64,
    h2: f64,
}

/// Density values on a rectangular grid, row-major in `y` then `x`
/// (`values[j * xs.len() + i]` is the density at `(xs[i], ys[j])`).
#[derive(Debug, Clone)]
pub struct Grid2 {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
}

impl Grid2 {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.xs.len() + i]
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        let nx = self.xs.len();
        let ny = self.ys.len();
        let mut total = 0.0;
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let cell = (self.xs[i + 1] - self.xs[i]) * (self.ys[j + 1] - self.ys[j]);
                total += 0.25 * cell * (self.at(i, j) + self.at(i + 1, j) + self.at(i, j + 1) + self.at(i + 1, j + 1));
            }
        }
        total
    }

    /// Grid node with the largest density.
    pub fn argmax(&self) -> (f64, f64) {
        let (k, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bk, bv), (k, &v)| if v > bv { (k, v) } else { (bk, bv) });
        let nx = self.xs.len();
        (self.xs[k % nx], self.ys[k / nx])
    }
}

/// Fits a 2-D product kernel density with per-axis normal-reference bandwidths.
pub fn kde2_fit(pairs: &[(f64, f64)]) -> Result<Kde2Density> {
    if pairs.len() < 10 {
        return Err(Error::invalid("bivariate KDE needs at least 10 pairs"));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let h1 = silverman_bandwidth(&xs)?;
    let h2 = silverman_bandwidth(&ys)?;
    Kde2Density::with_bandwidths(pairs, h1, h2)
}

impl Kde2Density {
    pub fn with_bandwidths(pairs: &[(f64, f64)], h1: f64, h2: f64) -> Result<Self> {
        if !(h1 > 0.0 && h2 > 0.0) {
            return Err(Error::invalid("bandwidths must be positive"));
        }
        let mut pairs = pairs.to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Kde2Density { pairs, h1, h2 })
    }

    pub fn bandwidths(&self) -> (f64, f64) {
        (self.h1, self.h2)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn window(&self, x: f64) -> &[(f64, f64)] {
        let w = CUTOFF * self.h1;
        let i = self.pairs.partition_point(|p| p.0 < x - w);
        let j = self.pairs.partition_point(|p| p.0 <= x + w);
        &self.pairs[i..j]
    }

    pub fn pdf(&self, x: f64, y: f64) -> f64 {
        let s: f64 = self
            .window(x)
            .iter()
            .map(|&(a, b)| phi((x - a) / self.h1) * phi((y - b) / self.h2))
            .sum();
        s / (self.pairs.len() as f64 * self.h1 * self.h2)
    }

    /// Marginal density of the first coordinate.
    pub fn marginal_x(&self, x: f64) -> f64 {
        let s: f64 = self.window(x).iter().map(|&(a, _)| phi((x - a) / self.h1)).sum();
        s / (self.pairs.len() as f64 * self.h1)
    }

    /// `P[Y ≤ y | X = x]` from the ratio of the joint slice to the marginal,
    /// with the slice integrated in closed form through the Gaussian kernel.
    /// Returns `(probability, standard error, effective sample size)`, or
    /// `None` when no pair lies within the kernel reach of `x`.
    pub fn conditional_cdf(&self, x: f64, y: f64) -> Option<(f64, f64, f64)> {
        let win = self.window(x);
        let mut sw = 0.0;
        let mut swv = 0.0;
        let mut terms = Vec::with_capacity(win.len());
        for &(a, b) in win {
            let w = phi((x - a) / self.h1);
            let v = norm_cdf((y - b) / self.h2);
            sw += w;
            swv += w * v;
            terms.push((w, v));
        }
        if !(sw > 0.0) {
            return None;
        }
        let p = swv / sw;
        let var: f64 = terms.iter().map(|&(w, v)| (w * (v - p)).powi(2)).sum::<f64>() / (sw * sw);
        let sw2: f64 = terms.iter().map(|&(w, _)| w * w).sum();
        Some((p, var.sqrt(), sw * sw / sw2))
    }

    /// Bounding box of the pairs widened by `pad` bandwidths.
    pub fn bounds(&self, pad: f64) -> ((f64, f64), (f64, f64)) {
        let xmin = self.pairs[0].0;
        let xmax = self.pairs[self.pairs.len() - 1].0;
        let (ymin, ymax) = self
            .pairs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
        ((xmin - pad * self.h1, xmax + pad * self.h1), (ymin - pad * self.h2, ymax + pad * self.h2))
    }

    /// Density on an `nx × ny` grid covering the data ± 5 bandwidths.
    pub fn grid(&self, nx: usize, ny: usize) -> Grid2 {
        let ((x0, x1), (y0, y1)) = self.bounds(5.0);
        let xs: Vec<f64> = (0..nx).map(|i| x0 + (x1 - x0) * i as f64 / (nx - 1) as f64).collect();
        let ys: Vec<f64> = (0..ny).map(|j| y0 + (y1 - y0) * j as f64 / (ny - 1) as f64).collect();
        let dx = xs[1] - xs[0];
        let norm = 1.0 / (self.pairs.len() as f64 * self.h1 * self.h2);

        // accumulate each pair's separable kernel footprint; rows are independent
        let rows: Vec<Vec<f64>> = (0..ny)
            .into_par_iter()
            .map(|j| {
                let y = ys[j];
                let mut row = vec![0.0; nx];
                for &(a, b) in &self.pairs {
                    let ky = phi((y - b) / self.h2);
                    if ky < 1e-300 || ((y - b) / self.h2).abs() > CUTOFF {
                        continue;
                    }
                    let i0 = (((a - CUTOFF * self.h1) - x0) / dx).floor().max(0.0) as usize;
                    let i1 = ((((a + CUTOFF * self.h1) - x0) / dx).ceil() as usize).min(nx - 1);
                    for (i, slot) in row.iter_mut().enumerate().take(i1 + 1).skip(i0) {
                        *slot += phi((xs[i] - a) / self.h1) * ky;
                    }
                }
                row.iter_mut().for_each(|v| *v *= norm);
                row
            })
            .collect();
        Grid2 {
            xs,
            ys,
            values: rows.into_iter().flatten().collect(),
        }
    }
}

/// Right-continuous empirical CDF.
#[derive(Debug, Clone)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

pub fn ecdf(samples: &[f64]) -> Result<Ecdf> {
    if samples.is_empty() {
        return Err(Error::invalid("empirical CDF needs at least one sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Ecdf { sorted })
}

impl Ecdf {
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Largest absolute gap to a continuous CDF (Kolmogorov-Smirnov statistic).
    pub fn ks_statistic<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Outcome of the running standard-deviation convergence check.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub shuffle_count: usize,
    /// One running-std trajectory per shuffle, indexed by prefix length - 1.
    pub trajectories: Vec<Vec<f64>>,
    pub converged: bool,
    pub rel_fluctuation: f64,
    pub threshold: f64,
    pub tail_fraction: f64,
}

pub const DEFAULT_SHUFFLES: usize = 3;
pub const DEFAULT_TAIL_FRACTION: f64 = 0.2;
pub const DEFAULT_THRESHOLD: f64 = 0.05;

/// Unbiased standard deviation of every prefix (Welford); prefix of length 1 gives 0.
pub fn running_std(samples: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, &x) in samples.iter().enumerate() {
        let n = (k + 1) as f64;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
        out.push(if k == 0 { 0.0 } else { (m2 / (n - 1.0)).max(0.0).sqrt() });
    }
    out
}

/// Shuffles the data `shuffles` times, tracks the running standard deviation,
/// and measures `(max - min) / mean` of each trajectory over its final
/// `tail_fraction`. The dataset is deemed converged when the worst shuffle
/// stays below `threshold`.
pub fn convergence_diagnostic(
    samples: &[f64],
    shuffles: usize,
    tail_fraction: f64,
    threshold: f64,
    seed: u64,
) -> Result<ConvergenceReport> {
    if samples.len() < 10 {
        return Err(Error::invalid("convergence diagnostic needs at least 10 samples"));
    }
    if shuffles == 0 {
        return Err(Error::invalid("at least one shuffle is required"));
    }
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::invalid("tail_fraction must lie in (0, 1)"));
    }
    if !(threshold > 0.0) {
        return Err(Error::invalid("threshold must be positive"));
    }
    let n = samples.len();
    let tail = ((tail_fraction * n as f64).ceil() as usize).clamp(1, n);

    let results: Vec<(Vec<f64>, f64)> = (0..shuffles)
        .into_par_iter()
        .map(|k| {
            let mut data = samples.to_vec();
            let mut rng = stream(splitmix64(seed ^ splitmix64(k as u64)));
            data.shuffle(&mut rng);
            let traj = running_std(&data);
            let window = &traj[n - tail..];
            let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = window.iter().copied().fold(f64::INFINITY, f64::min);
            let mean = window.iter().sum::<f64>() / window.len() as f64;
            let rel = if mean > 0.0 { (max - min) / mean } else { 0.0 };
            (traj, rel)
        })
        .collect();

    let rel_fluctuation = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(ConvergenceReport {
        shuffle_count: shuffles,
        trajectories: results.into_iter().map(|r| r.0).collect(),
        converged: rel_fluctuation < threshold,
        rel_fluctuation,
        threshold,
        tail_fraction,
    })
}
