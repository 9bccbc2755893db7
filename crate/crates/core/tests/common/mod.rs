//! Reference implementations used as test oracles. They are deliberately
//! written differently from the library: plain power series and numerical
//! quadrature of the defining integrals.

#![allow(dead_code)]

/// Gamma function at positive integers and half-integers, by recurrence.
pub fn gamma_half_integer(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    assert!(
        (2.0 * x - twice).abs() < 1e-12 && x > 0.0,
        "unsupported argument {x}"
    );
    let (mut g, mut t) = if twice as i64 % 2 == 0 {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    while t < x - 1e-9 {
        g *= t;
        t += 1.0;
    }
    g
}

/// `exp(-z) I_nu(z)` from the ascending power series, summed in log space.
pub fn bessel_i_scaled_series(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let ln_half = (0.5 * z).ln();
    let mut sum = 0.0;
    let mut k = 0.0_f64;
    // ln Gamma(k + nu + 1) and ln k!, tracked incrementally.
    let mut ln_gamma = gamma_half_integer(nu + 1.0).ln();
    let mut ln_fact = 0.0;
    loop {
        let ln_term = (2.0 * k + nu) * ln_half - ln_fact - ln_gamma - z;
        let term = ln_term.exp();
        sum += term;
        if k > z && term < 1e-18 * sum {
            break;
        }
        k += 1.0;
        ln_fact += k.ln();
        ln_gamma += (k + nu).ln();
    }
    sum
}

/// `I_0(x)` from the first 50 terms of `sum (x/2)^(2m) / (m!)^2`.
pub fn bessel_i0_50_terms(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..50 {
        term *= (0.5 * x) * (0.5 * x) / (m as f64 * m as f64);
        sum += term;
    }
    sum
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    // Split into panels so narrow peaks are not missed by the first probe.
    let panels = 64;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = lo + h;
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = simpson(lo, hi, fa, fm, fb);
            adaptive(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 40)
        })
        .sum()
}

/// `Q_M(a, b)` by quadrature of
/// `int_b^inf x (x/a)^(M-1) exp(-(x^2 + a^2)/2) I_(M-1)(a x) dx`.
pub fn marcum_q_quadrature(m: f64, a: f64, b: f64) -> f64 {
    let nu = m - 1.0;
    let integrand = |x: f64| {
        if x == 0.0 {
            return 0.0;
        }
        if a == 0.0 {
            // Limit a -> 0: x^(2M-1) exp(-x^2/2) / (2^(M-1) Gamma(M)).
            return x.powf(2.0 * m - 1.0) * (-0.5 * x * x).exp()
                / (2f64.powf(nu) * gamma_half_integer(m));
        }
        let z = a * x;
        x * (x / a).powf(nu) * (-0.5 * (x - a) * (x - a)).exp() * bessel_i_scaled_series(nu, z)
    };
    let upper = a.max(b) + 40.0;
    integrate(&integrand, b, upper, 1e-12)
}

/// `erfc(x)` for small `x` from the Maclaurin series of `erf`.
pub fn erfc_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut power = x;
    let mut fact = 1.0;
    for n in 0..80 {
        let term = power / (fact * (2 * n + 1) as f64);
        sum += if n % 2 == 0 { term } else { -term };
        power *= x * x;
        fact *= (n + 1) as f64;
    }
    1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
}

/// Standard normal CDF via the erfc series (valid for moderate `x`).
pub fn normal_cdf_series(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 - 0.5 * erfc_series(x / std::f64::consts::SQRT_2)
    } else {
        0.5 * erfc_series(-x / std::f64::consts::SQRT_2)
    }
}

/// Supremum distance between the empirical CDF of `sorted` and `cdf`,
/// taken over points of `[lo, hi]`.
pub fn ks_on_interval(sorted: &[f64], cdf: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = sorted.len() as f64;
    let below = |x: f64| sorted.partition_point(|&v| v < x) as f64 / n;
    let at_or_below = |x: f64| sorted.partition_point(|&v| v <= x) as f64 / n;
    let mut d: f64 = (below(lo) - cdf(lo))
        .abs()
        .max((at_or_below(hi) - cdf(hi)).abs());
    let start = sorted.partition_point(|&v| v < lo);
    let end = sorted.partition_point(|&v| v <= hi);
    for (i, &x) in sorted[start..end].iter().enumerate() {
        let f = cdf(x);
        let k = (start + i) as f64;
        d = d.max((k / n - f).abs()).max(((k + 1.0) / n - f).abs());
    }
    d
}
