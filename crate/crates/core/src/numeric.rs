//! Small numerical kernels: bracketed inversion, adaptive quadrature and the
//! Kolmogorov limiting distribution.

use crate::error::{Error, Result};

/// Solves `g(x) = 0` for a continuous nonincreasing `g` given a bracket with
/// `g(lo) >= 0 >= g(hi)`. Illinois false position with bisection fallback;
/// stops once the bracket is below `rel_tol * max(1, |x|)`.
pub fn solve_decreasing<G>(g: G, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    let mut g_lo = g(lo);
    let mut g_hi = g(hi);
    if !(g_lo >= 0.0 && g_hi <= 0.0) {
        return Err(Error::Numerical(format!(
            "root not bracketed on [{lo}, {hi}]: g = ({g_lo}, {g_hi})"
        )));
    }
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    let mut side = 0i8;
    for iter in 0..400 {
        let width = hi - lo;
        if width <= rel_tol * lo.abs().max(hi.abs()).max(1.0) {
            break;
        }
        // every fourth step bisects so slow secant convergence cannot stall
        let mid = if iter % 4 == 3 || !(g_lo - g_hi).is_finite() {
            0.5 * (lo + hi)
        } else {
            let x = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
            if x > lo && x < hi {
                x
            } else {
                0.5 * (lo + hi)
            }
        };
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid > 0.0 {
            lo = mid;
            g_lo = g_mid;
            if side == 1 {
                g_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = mid;
            g_hi = g_mid;
            if side == -1 {
                g_lo *= 0.5;
            }
            side = -1;
        }
    }
    Ok(0.5 * (lo + hi))
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WEIGHTS_K[7];
    let mut g = fc * GK_WEIGHTS_G[3];
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WEIGHTS_K[i] * s;
        if i % 2 == 1 {
            g += GK_WEIGHTS_G[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: (f64, f64),
        abs_tol: f64,
        rel_tol: f64,
        depth: u32,
    ) -> f64 {
        let (val, err) = whole;
        if depth == 0 || err <= abs_tol.max(rel_tol * val.abs()) {
            return val;
        }
        let m = 0.5 * (a + b);
        let left = gk15(f, a, m);
        let right = gk15(f, m, b);
        recurse(f, a, m, left, 0.5 * abs_tol, rel_tol, depth - 1)
            + recurse(f, m, b, right, 0.5 * abs_tol, rel_tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let whole = gk15(&f, a, b);
    recurse(&f, a, b, whole, abs_tol, rel_tol, 40)
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a one-sample KS statistic `d` on `n` points, with
/// Stephens' small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}
