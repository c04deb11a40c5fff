//! Standard-normal primitives and a univariate maximizer.
//!
//! The CDF goes through a rational Chebyshev approximation of erf/erfc
//! (Cody's coefficients, max absolute error well below 1e-14). The inverse
//! CDF starts from Acklam's rational approximation and polishes with Halley
//! steps against the CDF, which brings the round-trip error to within a few
//! ulps. Callers are expected to clamp probabilities away from {0, 1}
//! themselves; out-of-domain arguments fail loudly instead of saturating.

use crate::{Error, Result};

/// Stopping rule for iterative searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self> {
        if !abs_tol.is_finite() || !rel_tol.is_finite() || abs_tol < 0.0 || rel_tol < 0.0 {
            return Err(Error::domain("tolerances must be finite and non-negative"));
        }
        if abs_tol == 0.0 && rel_tol == 0.0 {
            return Err(Error::domain("abs_tol and rel_tol must not both be zero"));
        }
        if max_iter == 0 {
            return Err(Error::domain("max_iter must be positive"));
        }
        Ok(Tolerance { abs_tol, rel_tol, max_iter })
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs_tol: 1e-10, rel_tol: 1e-10, max_iter: 200 }
    }
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_94;

// Rational coefficients for erf on |x| <= 0.46875.
const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];

// Rational coefficients for erfc on 0.46875 < x <= 4.
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];

// Rational coefficients for the erfc tail, x > 4.
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

const FRAC_1_SQRT_PI: f64 = 5.641_895_835_477_562_9e-1;

fn erf(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        let z = if y > 1e-300 { y * y } else { 0.0 };
        let mut num = ERF_A[4] * z;
        let mut den = z;
        for i in 0..3 {
            num = (num + ERF_A[i]) * z;
            den = (den + ERF_B[i]) * z;
        }
        x * (num + ERF_A[3]) / (den + ERF_B[3])
    } else {
        let sign = x.signum();
        sign * (1.0 - erfc_large(y))
    }
}

fn erfc(x: f64) -> f64 {
    if x < -0.46875 {
        2.0 - erfc(-x)
    } else if x <= 0.46875 {
        1.0 - erf(x)
    } else {
        erfc_large(x)
    }
}

// erfc for x > 0.46875, split at x = 4 per Cody. The exp(-x^2) factor is
// computed as exp(-q^2) * exp(-(x-q)(x+q)) with q = trunc(16x)/16 to keep
// the argument reduction exact.
fn erfc_large(y: f64) -> f64 {
    if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        let r = (num + ERF_C[7]) / (den + ERF_D[7]);
        let ysq = (y * 16.0).trunc() / 16.0;
        let del = (y - ysq) * (y + ysq);
        (-ysq * ysq).exp() * (-del).exp() * r
    } else if y < 26.6 {
        let ysq = 1.0 / (y * y);
        let mut num = ERF_P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + ERF_P[i]) * ysq;
            den = (den + ERF_Q[i]) * ysq;
        }
        let mut r = ysq * (num + ERF_P[4]) / (den + ERF_Q[4]);
        r = (FRAC_1_SQRT_PI - r) / y;
        let yq = (y * 16.0).trunc() / 16.0;
        let del = (y - yq) * (y + yq);
        (-yq * yq).exp() * (-del).exp() * r
    } else {
        0.0
    }
}

/// Standard normal cumulative distribution function.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    Ok(0.5 * erfc(-x / SQRT_2))
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    Ok(FRAC_1_SQRT_2PI * (-0.5 * x * x).exp())
}

// Acklam's rational approximation to the normal quantile (relative error
// below 1.15e-9 across the full domain), used as the starting point for
// Halley refinement.
fn inv_cdf_estimate(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239e0,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838e0,
        -2.549732539343734e0,
        4.374664141464968e0,
        2.938163982698783e0,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996e0,
        3.754408661907416e0,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Standard normal quantile. `p` must lie strictly inside (0, 1); callers
/// clamp reserves away from the boundaries before calling.
pub fn std_normal_inv_cdf(p: f64) -> Result<f64> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(Error::ProbabilityDomain(p));
    }
    let mut x = inv_cdf_estimate(p);
    // Two Halley steps against the CDF; each step roughly cubes the error,
    // so the estimate's 1e-9 becomes a few ulps after the first.
    for _ in 0..2 {
        let f = 0.5 * erfc(-x / SQRT_2) - p;
        let d = FRAC_1_SQRT_2PI * (-0.5 * x * x).exp();
        if d == 0.0 {
            break;
        }
        let u = f / d;
        x -= u / (1.0 + 0.5 * x * u);
    }
    Ok(x)
}

const BRACKET_GRID: usize = 256;

/// Maximize `f` on `[lo, hi]`.
///
/// A coarse grid brackets candidate maxima (interior bumps and both
/// endpoints), then each bracket is refined by golden-section search.
/// Returns `(argmax, max)`. Any non-finite evaluation aborts with the
/// offending abscissa.
pub fn find_max_1d(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: &Tolerance,
) -> Result<(f64, f64)> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::domain("find_max_1d requires finite lo < hi"));
    }
    let eval = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFiniteEvaluation { x })
        }
    };

    let n = BRACKET_GRID;
    let step = (hi - lo) / n as f64;
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = if i == n { hi } else { lo + step * i as f64 };
        xs.push(x);
        ys.push(eval(x)?);
    }

    // Candidate brackets: every grid point at least as good as both
    // neighbours (endpoints count), best-first, capped to keep the cost
    // bounded for bumpy functions.
    let mut candidates: Vec<usize> = (0..=n)
        .filter(|&i| {
            let left_ok = i == 0 || ys[i] >= ys[i - 1];
            let right_ok = i == n || ys[i] >= ys[i + 1];
            left_ok && right_ok
        })
        .collect();
    candidates.sort_by(|&a, &b| ys[b].partial_cmp(&ys[a]).unwrap());
    candidates.truncate(8);

    let mut best_x = xs[0];
    let mut best_y = ys[0];
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        if y > best_y {
            best_x = x;
            best_y = y;
        }
    }

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    for &i in &candidates {
        let mut a = if i == 0 { lo } else { xs[i - 1] };
        let mut b = if i == n { hi } else { xs[i + 1] };
        let mut x1 = b - INV_PHI * (b - a);
        let mut x2 = a + INV_PHI * (b - a);
        let mut f1 = eval(x1)?;
        let mut f2 = eval(x2)?;
        let mut iter = 0;
        while (b - a) > tol.abs_tol + tol.rel_tol * a.abs().max(b.abs()) && iter < tol.max_iter {
            if f1 >= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - INV_PHI * (b - a);
                f1 = eval(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + INV_PHI * (b - a);
                f2 = eval(x2)?;
            }
            iter += 1;
        }
        let (x, y) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        if y > best_y {
            best_x = x;
            best_y = y;
        }
    }

    Ok((best_x, best_y))
}
