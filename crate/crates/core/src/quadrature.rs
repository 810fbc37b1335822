//! Adaptive Gauss–Kronrod integration and Gauss–Legendre product rules.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: u64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Upper bound on bisections before giving up on `tol`.
pub const MAX_INTERVALS: usize = 20_000;

#[derive(Clone, Copy, Debug)]
struct Interval {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Interval {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (k, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let pair = f(center - half * x) + f(center + half * x);
        kron += w * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    Interval {
        lo,
        hi,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

/// Global adaptive G7–K15 integration of `f` over `[lo, hi]`, splitting the
/// worst interval until the summed `|K15 - G7|` drops to `tol`.
///
/// `breaks` are interior points where `f` has kinks; they start as interval
/// boundaries.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, breaks: &[f64], tol: f64) -> QuadratureResult {
    let mut edges = vec![lo];
    edges.extend(breaks.iter().copied().filter(|&x| x > lo && x < hi));
    edges.push(hi);
    let mut intervals: Vec<Interval> = edges.windows(2).map(|w| kronrod(&mut f, w[0], w[1])).collect();
    let mut evaluations = 15 * intervals.len() as u64;

    loop {
        let error: f64 = intervals.iter().map(|i| i.error).sum();
        if error <= tol || intervals.len() >= MAX_INTERVALS {
            break;
        }
        let worst = (0..intervals.len())
            .max_by(|&i, &j| intervals[i].error.total_cmp(&intervals[j].error))
            .unwrap();
        let Interval { lo, hi, .. } = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            // interval below float resolution; keep what we have
            intervals.push(kronrod(&mut f, lo, hi));
            break;
        }
        intervals.push(kronrod(&mut f, lo, mid));
        intervals.push(kronrod(&mut f, mid, hi));
        evaluations += 30;
    }

    // sum small contributions first
    intervals.sort_by(|a, b| a.value.abs().total_cmp(&b.value.abs()));
    QuadratureResult {
        value: intervals.iter().map(|i| i.value).sum(),
        abs_error_estimate: intervals.iter().map(|i| i.error).sum(),
        evaluations,
    }
}

/// `int_{x_lo}^{x_hi} int_{y_lo(x)}^{y_hi(x)} f(x, y) dy dx` by nesting
/// [`integrate`]. Inner integrals get `tol / (x_hi - x_lo)` each; the
/// reported error adds the outer estimate to the weighted inner ones.
pub fn integrate_2d<F, L, H>(
    f: F,
    x_lo: f64,
    x_hi: f64,
    y_lo: L,
    y_hi: H,
    x_breaks: &[f64],
    tol: f64,
) -> QuadratureResult
where
    F: Fn(f64, f64) -> f64,
    L: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    let inner_tol = 0.5 * tol / (x_hi - x_lo).abs().max(f64::MIN_POSITIVE);
    let mut inner_error = 0.0;
    let mut evaluations = 0;
    let outer = integrate(
        |x| {
            let r = integrate(|y| f(x, y), y_lo(x), y_hi(x), &[], inner_tol);
            inner_error = f64::max(inner_error, r.abs_error_estimate);
            evaluations += r.evaluations;
            r.value
        },
        x_lo,
        x_hi,
        x_breaks,
        0.5 * tol,
    );
    QuadratureResult {
        value: outer.value,
        abs_error_estimate: outer.abs_error_estimate + inner_error * (x_hi - x_lo).abs(),
        evaluations,
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
