//! Special functions used by the decision rules and the error analysis.
//!
//! The Marcum Q-function is evaluated through its non-central chi-squared
//! representation as a Poisson mixture of regularized incomplete gamma
//! functions. Each tail is accumulated separately with the incomplete-gamma
//! recurrence run in its cancellation-free direction, so both the CDF and
//! the survival function keep relative accuracy deep into the tails. One
//! evaluation costs two incomplete-gamma calls plus `O(lambda)` cheap
//! updates.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 10.0 {
        let z = x - 1.0;
        let mut acc = LANCZOS_COEFFS[0];
        for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
            acc += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
    } else {
        // Stirling series; the first omitted term is below 1e-13 for x >= 10.
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        let corr = inv
            * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0))));
        (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + corr
    }
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_prefactor(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let max_iter = 1000 + (20.0 * a.sqrt()) as usize * 10;
    for n in 1..max_iter {
        term *= x / (a + n as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    (sum * gamma_prefactor(a, x)).min(1.0)
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    // Modified Lentz evaluation.
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    let max_iter = 1000 + (20.0 * a.sqrt()) as usize * 10;
    for i in 1..max_iter {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (h * gamma_prefactor(a, x)).clamp(0.0, 1.0)
}

/// Exponentially scaled modified Bessel function of the first kind,
/// `exp(-x) * I_order(x)`.
///
/// Finite for every `x >= 0`, so it can be combined with other exponential
/// factors (as in the Marcum Q integrand) without overflow.
pub fn bessel_i_scaled(order: f64, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(
            "bessel_i",
            format!("x must be >= 0, got {x}"),
        ));
    }
    if !(order >= 0.0) {
        return Err(Error::domain(
            "bessel_i",
            format!("order must be >= 0, got {order}"),
        ));
    }
    if x == 0.0 {
        return Ok(if order == 0.0 { 1.0 } else { 0.0 });
    }
    if x <= 35.0_f64.max(order * order) {
        Ok(bessel_i_series_scaled(order, x))
    } else {
        Ok(bessel_i_asymptotic_scaled(order, x))
    }
}

/// Modified Bessel function of the first kind `I_order(x)` for `x >= 0`.
///
/// Orders are non-negative reals; half-integer orders appear whenever the
/// number of samples per fusion center is odd.
pub fn bessel_i(order: f64, x: f64) -> Result<f64> {
    Ok(bessel_i_scaled(order, x)? * x.exp())
}

fn bessel_i_series_scaled(order: f64, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    let mut term = (order * half.ln() - ln_gamma(order + 1.0) - x).exp();
    let mut sum = term;
    let mut m = 1.0;
    loop {
        term *= q / (m * (m + order));
        sum += term;
        if term <= sum * 1e-17 || m > 10_000.0 {
            break;
        }
        m += 1.0;
    }
    sum
}

fn bessel_i_asymptotic_scaled(order: f64, x: f64) -> f64 {
    let mu = 4.0 * order * order;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

/// CDF of the non-central chi-squared distribution with `dof` degrees of
/// freedom and non-centrality `lambda`, evaluated at `x`.
pub fn noncentral_chi2_cdf(dof: u32, lambda: f64, x: f64) -> Result<f64> {
    Ok(noncentral_chi2_tails(dof, lambda, x)?.0)
}

/// Both tails `(P[Z < x], P[Z >= x])` of the non-central chi-squared
/// distribution, each accurate to a small relative error even when tiny.
pub fn noncentral_chi2_tails(dof: u32, lambda: f64, x: f64) -> Result<(f64, f64)> {
    if dof == 0 {
        return Err(Error::domain("noncentral_chi2_cdf", "dof must be >= 1"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::domain(
            "noncentral_chi2_cdf",
            format!("lambda must be >= 0, got {lambda}"),
        ));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(
            "noncentral_chi2_cdf",
            format!("x must be >= 0, got {x}"),
        ));
    }
    Ok(poisson_gamma_mixture(
        0.5 * dof as f64,
        0.5 * lambda,
        0.5 * x,
    ))
}

/// Generalized Marcum Q-function `Q_m(a, b)` for real `m >= 0.5`.
pub fn marcum_q(m: f64, a: f64, b: f64) -> Result<f64> {
    Ok(marcum_q_tails(m, a, b)?.1)
}

/// `(1 - Q_m(a, b), Q_m(a, b))`, each computed without cancellation.
pub fn marcum_q_tails(m: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    if !(m >= 0.5) {
        return Err(Error::domain(
            "marcum_q",
            format!("m must be >= 0.5, got {m}"),
        ));
    }
    if !(a >= 0.0) || !(b >= 0.0) {
        return Err(Error::domain(
            "marcum_q",
            format!("a and b must be >= 0, got a={a}, b={b}"),
        ));
    }
    if b == 0.0 {
        return Ok((0.0, 1.0));
    }
    if b.is_infinite() {
        return Ok((1.0, 0.0));
    }
    Ok(poisson_gamma_mixture(m, 0.5 * a * a, 0.5 * b * b))
}

/// `(sum_j Pois(j; h) P(shape + j, y), sum_j Pois(j; h) Q(shape + j, y))`.
///
/// The lower sum is accumulated downwards in `j` and the upper sum upwards,
/// the directions in which the incomplete-gamma recurrences only add
/// positive terms.
fn poisson_gamma_mixture(shape: f64, h: f64, y: f64) -> (f64, f64) {
    if y == 0.0 {
        return (0.0, 1.0);
    }
    if y.is_infinite() {
        return (1.0, 0.0);
    }
    if h == 0.0 {
        return (gamma_p(shape, y), gamma_q(shape, y));
    }
    let ln_h = h.ln();
    let ln_y = y.ln();
    // Poisson weights beyond this index are below exp(-745).
    let j_hi = (h + 40.0 * h.sqrt() + 200.0).ceil();

    // Lower tail, j = j_hi down to 0: P(a - 1, y) = P(a, y) + t(a - 1).
    let mut a = shape + j_hi;
    let mut p = gamma_p(a, y);
    let mut ln_w = -h + j_hi * ln_h - ln_gamma(j_hi + 1.0);
    // ln t(a) = a ln y - y - ln Gamma(a + 1)
    let mut ln_t = a * ln_y - y - ln_gamma(a + 1.0);
    let mut lower = ln_w.exp() * p;
    let mut j = j_hi;
    while j > 0.0 {
        ln_t += a.ln() - ln_y;
        a -= 1.0;
        p += ln_t.exp();
        ln_w += j.ln() - ln_h;
        j -= 1.0;
        lower += ln_w.exp() * p;
    }

    // Upper tail, j = 0 up to j_hi: Q(a + 1, y) = Q(a, y) + t(a).
    let mut a = shape;
    let mut q = gamma_q(a, y);
    let mut ln_w = -h;
    let mut ln_t = a * ln_y - y - ln_gamma(a + 1.0);
    let mut upper = ln_w.exp() * q;
    let mut j = 0.0;
    while j < j_hi {
        q += ln_t.exp();
        a += 1.0;
        ln_t += ln_y - a.ln();
        j += 1.0;
        ln_w += ln_h - j.ln();
        upper += ln_w.exp() * q.min(1.0);
    }
    // The smaller tail carries the relative accuracy; the larger one is
    // its complement, which keeps the pair summing to one exactly.
    if lower <= upper {
        let lower = lower.clamp(0.0, 0.5);
        (lower, 1.0 - lower)
    } else {
        let upper = upper.clamp(0.0, 0.5);
        (1.0 - upper, upper)
    }
}

/// Upper tail probability of the standard normal distribution.
pub fn gaussian_q(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Normal approximation of the ratio of two independent Gaussians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioGaussApprox {
    pub mean_z: f64,
    pub sigma_z: f64,
    /// Whether the coefficient-of-variation preconditions that bound the
    /// approximation error hold for the configured `lambda`.
    pub valid: bool,
    pub lambda: f64,
}

impl RatioGaussApprox {
    /// Interval around the mean on which the approximation is guaranteed.
    pub fn guaranteed_interval(&self) -> (f64, f64) {
        let half = self.sigma_z / self.lambda;
        (self.mean_z - half, self.mean_z + half)
    }

    pub fn cdf(&self, z: f64) -> f64 {
        1.0 - gaussian_q((z - self.mean_z) / self.sigma_z)
    }
}

/// Approximate `V1 / V2` for `V_i ~ N(mu_i, sigma_i^2)` by a single normal.
pub fn ratio_gaussian_approx(
    mu1: f64,
    sigma1: f64,
    mu2: f64,
    sigma2: f64,
    lambda: f64,
) -> Result<RatioGaussApprox> {
    if !(mu2 > 0.0) {
        return Err(Error::Degenerate(format!(
            "ratio denominator mean must be positive, got {mu2}"
        )));
    }
    if !(mu1 > 0.0) {
        return Err(Error::Degenerate(format!(
            "ratio numerator mean must be positive, got {mu1}"
        )));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::param(
            "lambda",
            format!("must lie in (0, 1], got {lambda}"),
        ));
    }
    if !(sigma1 >= 0.0 && sigma2 >= 0.0) {
        return Err(Error::param("sigma", "standard deviations must be >= 0"));
    }
    let cv1 = sigma1 / mu1;
    let cv2 = sigma2 / mu2;
    let mean_z = mu1 / mu2;
    let sigma_z = mean_z * (cv1 * cv1 + cv2 * cv2).sqrt();
    let valid = cv1 > 0.0
        && cv1 < lambda
        && cv2 > 0.0
        && cv2 <= (lambda * lambda - cv1 * cv1).sqrt()
        && sigma_z > 0.0;
    Ok(RatioGaussApprox {
        mean_z,
        sigma_z,
        valid,
        lambda,
    })
}
