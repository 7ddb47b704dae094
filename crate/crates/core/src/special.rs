//! Special functions: Gamma, log-factorial, incomplete Gamma and binomials.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const INCGAMMA_MAX_ITER: usize = 10_000;

fn lanczos_sum(x: f64) -> f64 {
    let mut acc = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// Gamma function for real arguments (poles at non-positive integers).
pub fn gamma(x: f64) -> Result<f64> {
    if x.is_nan() || (x <= 0.0 && x == x.floor()) {
        return Err(Error::domain("gamma", format!("pole or NaN at x = {x}")));
    }
    if x == x.floor() && x <= 171.0 {
        // exact factorial on the integers
        let mut acc = 1.0;
        let mut k = 2.0;
        while k < x {
            acc *= k;
            k += 1.0;
        }
        return Ok(acc);
    }
    if x < 0.5 {
        let s = (std::f64::consts::PI * x).sin();
        return Ok(std::f64::consts::PI / (s * gamma(1.0 - x)?));
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok((2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z))
}

/// Natural log of |Gamma(x)| for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain("ln_gamma", format!("requires x > 0, got {x}")));
    }
    if x == x.floor() && x <= 256.0 {
        return Ok(log_factorial(x as u64 - 1));
    }
    if x < 0.5 {
        // reflection keeps the Lanczos series in its accurate range
        let s = (std::f64::consts::PI * x).sin();
        return Ok(std::f64::consts::PI.ln() - s.abs().ln() - ln_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(LN_SQRT_2PI + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln())
}

/// ln(n!).
pub fn log_factorial(n: u64) -> f64 {
    if n <= 256 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        // n > 256 is far inside the Lanczos accuracy range
        let z = n as f64;
        let t = z + LANCZOS_G + 0.5;
        LN_SQRT_2PI + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
    }
}

/// Exact binomial coefficient for n <= 60.
pub fn binomial_exact(n: u32, k: u32) -> Result<u64> {
    if k > n {
        return Err(Error::domain("binomial", format!("k = {k} exceeds n = {n}")));
    }
    if n > 60 {
        return Err(Error::domain(
            "binomial",
            format!("exact evaluation limited to n <= 60, got {n}"),
        ));
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    Ok(c as u64)
}

/// Binomial coefficient as a real number; exact integer arithmetic for n <= 60.
pub fn binomial(n: u32, k: u32) -> Result<f64> {
    if n <= 60 {
        return binomial_exact(n, k).map(|c| c as f64);
    }
    if k > n {
        return Err(Error::domain("binomial", format!("k = {k} exceeds n = {n}")));
    }
    let (n, k) = (n as u64, k as u64);
    Ok((log_factorial(n) - log_factorial(k) - log_factorial(n - k))
        .exp()
        .round())
}

/// Regularized pair (P(s, x), Q(s, x)) with P + Q = 1.
///
/// Series for x < s + 1, Lentz continued fraction for Q otherwise.
pub fn regularized_gamma_pq(s: f64, x: f64) -> Result<(f64, f64)> {
    if !(s > 0.0) || !(x >= 0.0) {
        return Err(Error::domain(
            "incomplete_gamma",
            format!("requires s > 0 and x >= 0, got s = {s}, x = {x}"),
        ));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let log_prefactor = -x + s * x.ln() - ln_gamma(s)?;
    if x < s + 1.0 {
        let mut denom = s;
        let mut term = 1.0 / s;
        let mut sum = term;
        for _ in 0..INCGAMMA_MAX_ITER {
            denom += 1.0;
            term *= x / denom;
            sum += term;
            if term.abs() < sum.abs() * f64::EPSILON * 0.5 {
                let p = (sum.ln() + log_prefactor).exp();
                return Ok((p, 1.0 - p));
            }
        }
        Err(Error::domain(
            "incomplete_gamma",
            format!("series failed to converge for s = {s}, x = {x}"),
        ))
    } else {
        let tiny = f64::MIN_POSITIVE / f64::EPSILON;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..INCGAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < f64::EPSILON {
                let q = (h.ln() + log_prefactor).exp();
                return Ok((1.0 - q, q));
            }
        }
        Err(Error::domain(
            "incomplete_gamma",
            format!("continued fraction failed to converge for s = {s}, x = {x}"),
        ))
    }
}

/// Lower incomplete Gamma function γ(s, x) = ∫₀ˣ t^(s−1) e^(−t) dt.
pub fn lower_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    let (p, q) = regularized_gamma_pq(s, x)?;
    let g = gamma(s)?;
    // whichever of P, Q is smaller carries the full relative precision
    Ok(if p <= q { p * g } else { g - q * g })
}

/// CDF of a unit-mean Gamma variable with integer shape `shape`:
/// P(X <= x) = γ(shape, shape·x) / Γ(shape).
pub fn normalized_gamma_cdf(shape: u32, x: f64) -> Result<f64> {
    if shape == 0 {
        return Err(Error::domain("normalized_gamma_cdf", "shape must be >= 1"));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok(regularized_gamma_pq(shape as f64, shape as f64 * x)?.0)
}
