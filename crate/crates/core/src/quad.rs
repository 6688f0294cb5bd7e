//! Adaptive Gauss-Kronrod (10/21) quadrature on finite, semi-infinite and
//! infinite intervals.
//!
//! Infinite ends are mapped onto a finite parameter range with
//! `x = a + t / (1 - t)` (upper) or `x = b - (1 - t) / t` (lower). Kronrod
//! nodes are interior, so the singular endpoint of the map is never evaluated.
//! Integrands are vector valued so that several moments can share one pass.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_370_555,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const MAX_INTERVALS: usize = 4000;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quad<const N: usize> {
    pub value: [f64; N],
    /// Sum of the per-interval Kronrod-minus-Gauss differences (max over components).
    pub error: f64,
}

/// One 21-point Kronrod panel on a finite interval with its embedded Gauss estimate.
pub fn gk21<const N: usize, F>(f: &F, a: f64, b: f64) -> ([f64; N], f64)
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];

    let fc = f(center);
    for k in 0..N {
        kron[k] = WGK[10] * fc[k];
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for k in 0..N {
            let s = f1[k] + f2[k];
            kron[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut err: f64 = 0.0;
    for k in 0..N {
        kron[k] *= half;
        gauss[k] *= half;
        err = err.max((kron[k] - gauss[k]).abs());
    }
    (kron, err)
}

struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<const N: usize> Eq for Panel<N> {}
impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration over a finite interval.
///
/// Bisects the panel with the largest error estimate until the summed error
/// falls below `max(abs_tol, rel_tol * max_k |value_k|)`.
pub fn adaptive<const N: usize, F>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quad<N>
where
    F: Fn(f64) -> [f64; N],
{
    if a == b {
        return Quad {
            value: [0.0; N],
            error: 0.0,
        };
    }
    let (value, error) = gk21(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;

    loop {
        let scale = total.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if total_err <= abs_tol.max(rel_tol * scale) || heap.len() >= MAX_INTERVALS {
            break;
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(f, worst.a, mid);
        let (v2, e2) = gk21(f, mid, worst.b);
        for k in 0..N {
            total[k] += v1[k] + v2[k] - worst.value[k];
        }
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }

    // re-sum from the panels to shed accumulated rounding from the running updates
    let mut value = [0.0; N];
    let mut error = 0.0;
    for p in heap.iter() {
        for k in 0..N {
            value[k] += p.value[k];
        }
        error += p.error;
    }
    Quad { value, error }
}

/// Integrates over `[lo, hi]` where either end may be infinite, splitting at the
/// interior `breaks` (ignored when outside the interval). Infinite tails are
/// attached to the outermost break points.
pub fn integrate<const N: usize, F>(f: &F, lo: f64, hi: f64, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> Quad<N>
where
    F: Fn(f64) -> [f64; N],
{
    assert!(lo < hi, "integration bounds must satisfy lo < hi");
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    // anchor points for infinite tails
    let left = if lo.is_finite() {
        lo
    } else if let Some(&p) = pts.first() {
        p
    } else if hi.is_finite() {
        hi - 1.0
    } else {
        0.0
    };
    let right = if hi.is_finite() {
        hi
    } else if let Some(&p) = pts.last() {
        p
    } else {
        left.max(if lo.is_finite() { lo + 1.0 } else { left })
    };

    let mut nodes = vec![left];
    nodes.extend(pts.iter().copied().filter(|&x| x > left && x < right));
    if right > left {
        nodes.push(right);
    }

    let mut value = [0.0; N];
    let mut error = 0.0;
    let mut add = |q: Quad<N>| {
        for k in 0..N {
            value[k] += q.value[k];
        }
        error += q.error;
    };
    for w in nodes.windows(2) {
        add(adaptive(f, w[0], w[1], abs_tol, rel_tol));
    }
    if !lo.is_finite() {
        let b = left;
        let g = |t: f64| {
            let x = b - (1.0 - t) / t;
            let jac = 1.0 / (t * t);
            let mut y = f(x);
            for v in y.iter_mut() {
                *v = if *v == 0.0 { 0.0 } else { *v * jac };
            }
            y
        };
        add(adaptive(&g, 0.0, 1.0, abs_tol, rel_tol));
    }
    if !hi.is_finite() {
        let a = right;
        let g = |t: f64| {
            let s = 1.0 - t;
            let x = a + t / s;
            let jac = 1.0 / (s * s);
            let mut y = f(x);
            for v in y.iter_mut() {
                *v = if *v == 0.0 { 0.0 } else { *v * jac };
            }
            y
        };
        add(adaptive(&g, 0.0, 1.0, abs_tol, rel_tol));
    }
    Quad { value, error }
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate1<F>(f: F, lo: f64, hi: f64, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let g = |x: f64| [f(x)];
    integrate(&g, lo, hi, breaks, abs_tol, rel_tol).value[0]
}
