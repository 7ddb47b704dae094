//! Closed forms and quadrature for activity, distance laws, link LOS
//! probability, the interference Laplace transform and the coverage bounds.
//!
//! The analytic engine always uses the cubic-exponential LOS law
//! `exp(−(d/L)³)`; the exact 3GPP law is a simulator option only.

use std::f64::consts::PI;

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_power_tail, QuadResult, QuadratureSettings};
use crate::special::{binomial, ln_gamma, regularized_gamma_pq};

/// AP and UE intensities, per m³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityConfig {
    pub lambda_ap: f64,
    pub lambda_ue: f64,
}

impl DensityConfig {
    pub fn new(lambda_ap: f64, lambda_ue: f64) -> Result<Self> {
        let d = Self { lambda_ap, lambda_ue };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_ap > 0.0) || !self.lambda_ap.is_finite() {
            return Err(Error::config(
                "lambda_ap",
                format!("must be positive, got {}", self.lambda_ap),
            ));
        }
        if !(self.lambda_ue >= 0.0) || !self.lambda_ue.is_finite() {
            return Err(Error::config(
                "lambda_ue",
                format!("must be non-negative, got {}", self.lambda_ue),
            ));
        }
        Ok(())
    }

    /// Probability q that an AP has at least one UE in its Voronoi cell.
    pub fn activity(&self) -> f64 {
        activity_probability(self)
    }

    /// Intensity q·λ_AP of the active APs.
    pub fn active_intensity(&self) -> f64 {
        self.activity() * self.lambda_ap
    }
}

/// q = 1 − (1 + λ_UE/(5λ_AP))^(−5).
///
/// Uses the 3-D Voronoi cell volume law (Gamma with shape 5), evaluated with
/// `ln_1p`/`exp_m1` so that tiny UE-to-AP ratios keep full precision.
pub fn activity_probability(d: &DensityConfig) -> f64 {
    let x = d.lambda_ue / d.lambda_ap;
    -(-5.0 * (x / 5.0).ln_1p()).exp_m1()
}

/// Convert a threshold in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn ball_coefficient(lambda: f64) -> f64 {
    4.0 / 3.0 * PI * lambda
}

/// PDF of the distance to the n-th nearest point of a 3-D PPP with intensity
/// `lambda`: 3(a r³)ⁿ/(r Γ(n)) · e^(−a r³) with a = (4/3)πλ.
pub fn nth_nearest_pdf(n: u32, r: f64, lambda: f64) -> Result<f64> {
    check_distance_law("nth_nearest_pdf", n, r, lambda)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let w = ball_coefficient(lambda) * r * r * r;
    let ln = 3f64.ln() + n as f64 * w.ln() - r.ln() - ln_gamma(n as f64)? - w;
    Ok(ln.exp())
}

/// CDF matching [`nth_nearest_pdf`]: the regularized lower incomplete gamma P(n, a r³).
pub fn nth_nearest_cdf(n: u32, r: f64, lambda: f64) -> Result<f64> {
    check_distance_law("nth_nearest_cdf", n, r, lambda)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let w = ball_coefficient(lambda) * r * r * r;
    Ok(regularized_gamma_pq(n as f64, w)?.0)
}

fn check_distance_law(function: &'static str, n: u32, r: f64, lambda: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::domain(function, "n must be at least 1"));
    }
    if !(r >= 0.0) || r.is_infinite() {
        return Err(Error::domain(function, format!("r must be finite and non-negative, got {r}")));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(function, format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// Probability that the link to the n-th nearest active AP is LOS under the
/// cubic-exponential law: (4πλ̃L³ / (3 + 4πλ̃L³))ⁿ.
pub fn link_los_prob(n: u32, lambda_active: f64, los_scale: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("link_los_prob", "n must be at least 1"));
    }
    if !(lambda_active > 0.0) || !(los_scale > 0.0) {
        return Err(Error::domain(
            "link_los_prob",
            format!("lambda_active and L must be positive, got {lambda_active}, {los_scale}"),
        ));
    }
    let b = 4.0 * PI * lambda_active * los_scale.powi(3);
    // b/(3+b) = 1/(1+3/b); stays accurate for b far from 1 in either direction
    Ok((-(n as f64) * (3.0 / b).ln_1p()).exp())
}

/// Laplace transform value with its quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceEval {
    pub value: f64,
    /// 4πλ̃ times the interference integral, so that `value = exp(−exponent)`.
    pub exponent: f64,
    /// Absolute error bound on `value`.
    pub abs_error: f64,
    pub evaluations: usize,
}

/// Laplace transform E[e^(−sI)] of the interference seen at distance `r`
/// from the serving AP, with interferers beyond `r` at intensity `lambda_active`.
pub fn interference_laplace(
    s: f64,
    r: f64,
    lambda_active: f64,
    params: &ChannelParams,
    quad: &QuadratureSettings,
) -> Result<f64> {
    Ok(interference_laplace_eval(s, r, lambda_active, params, quad)?.value)
}

/// [`interference_laplace`] with diagnostics.
pub fn interference_laplace_eval(
    s: f64,
    r: f64,
    lambda_active: f64,
    params: &ChannelParams,
    quad: &QuadratureSettings,
) -> Result<LaplaceEval> {
    if !(s >= 0.0) || s.is_infinite() {
        return Err(Error::domain("interference_laplace", format!("s must be finite and non-negative, got {s}")));
    }
    if !(r > 0.0) || r.is_infinite() {
        return Err(Error::domain("interference_laplace", format!("r must be positive, got {r}")));
    }
    if !(lambda_active >= 0.0) || lambda_active.is_infinite() {
        return Err(Error::domain(
            "interference_laplace",
            format!("lambda_active must be non-negative, got {lambda_active}"),
        ));
    }
    if s == 0.0 || lambda_active == 0.0 {
        return Ok(LaplaceEval { value: 1.0, exponent: 0.0, abs_error: 0.0, evaluations: 0 });
    }
    let integral = interference_integral(s, r, params, quad)?;
    let scale = 4.0 * PI * lambda_active;
    let exponent = scale * integral.value.max(0.0);
    let value = (-exponent).exp();
    Ok(LaplaceEval {
        value,
        exponent,
        abs_error: value * scale * integral.abs_error,
        evaluations: integral.evaluations,
    })
}

/// ∫_r^∞ [(1 − p̃(x))(1 − g_NL(x)) + p̃(x)(1 − g_L(x))] x² dx
///
/// where g are the fading Laplace transforms at s/PL(x): 1/(1+u) for Rayleigh
/// and (1+v)^(−N) for normalized Gamma. This is the sum of the NLOS integral
/// and the LOS correction integral, kept as one non-negative integrand.
fn interference_integral(
    s: f64,
    r: f64,
    params: &ChannelParams,
    quad: &QuadratureSettings,
) -> Result<QuadResult> {
    let n = params.nakagami_shape as f64;
    let l = params.los_scale;
    let nlos = |x: f64| {
        let u = s / (params.k_nlos * x.powf(params.alpha_nlos));
        u / (1.0 + u)
    };
    let integrand = |x: f64| {
        let p = (-(x / l).powi(3)).exp();
        let nl = nlos(x);
        let los = if p > 0.0 {
            let v = s / (params.k_los * n * x.powf(params.alpha_los));
            -(-n * v.ln_1p()).exp_m1()
        } else {
            0.0
        };
        ((1.0 - p) * nl + p * los) * x * x
    };
    // p̃ underflows to zero past about 8.9 L
    let los_cut = l * 745f64.cbrt();
    // NLOS integrand turns from x² growth to x^(2−α) decay here
    let knee = (s / params.k_nlos).powf(1.0 / params.alpha_nlos);
    let mut breaks: Vec<f64> = [3.0 * l, los_cut, knee]
        .into_iter()
        .filter(|&b| b > r && b.is_finite())
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut total = QuadResult::ZERO;
    let mut a = r;
    for b in breaks {
        total = total.combine(integrate(integrand, a, b, quad, "interference integral")?);
        a = b;
    }
    let tail = if a >= los_cut {
        integrate_power_tail(|x| nlos(x) * x * x, a, params.alpha_nlos - 2.0, quad, "interference tail")?
    } else {
        integrate_power_tail(integrand, a, params.alpha_nlos - 2.0, quad, "interference tail")?
    };
    Ok(total.combine(tail))
}

/// Convergence record of one coverage-bound integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundDiagnostics {
    /// Error estimate of the outer r-integral.
    pub outer_error: f64,
    /// Largest error estimate among the Laplace transforms it evaluated.
    pub max_laplace_error: f64,
    /// Outer error + (2^N_L − 1 + 1)·max Laplace error + truncated tail mass.
    pub total_error: f64,
    pub outer_evaluations: usize,
    pub laplace_evaluations: usize,
    pub subdivisions: usize,
}

/// Lower and upper analytic coverage bounds at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageBounds {
    pub lower: f64,
    pub upper: f64,
    /// Linear SIR threshold.
    pub theta: f64,
    pub densities: DensityConfig,
    pub params: ChannelParams,
    pub lower_diagnostics: BoundDiagnostics,
    pub upper_diagnostics: BoundDiagnostics,
    /// Outer integration limit, meters.
    pub r_max: f64,
}

/// Radius beyond which the serving-distance law with intensity `lambda` keeps mass `eps`.
pub fn serving_distance_cutoff(lambda: f64, eps: f64) -> f64 {
    (3.0 * (1.0 / eps).ln() / (4.0 * PI * lambda)).cbrt()
}

/// Lower and upper coverage bounds for linear threshold `theta`.
///
/// The serving distance follows the nearest-point law at the active
/// intensity λ̃, truncated at [`serving_distance_cutoff`] with
/// `quad.tail_cutoff_epsilon`. The LOS Laplace argument is scaled by N_L in
/// the lower bound and by ζ′ = N_L·(N_L!)^(−1/N_L) in the upper bound.
pub fn coverage_bounds(
    theta: f64,
    d: &DensityConfig,
    params: &ChannelParams,
    quad: &QuadratureSettings,
) -> Result<CoverageBounds> {
    if !(theta > 0.0) || theta.is_infinite() {
        return Err(Error::domain("coverage_bounds", format!("theta must be positive and finite, got {theta}")));
    }
    d.validate()?;
    params.validate()?;
    quad.validate()?;
    let lambda = d.active_intensity();
    if !(lambda > 0.0) {
        return Err(Error::domain(
            "coverage_bounds",
            "active AP intensity is zero (lambda_ue = 0); the bounds are undefined",
        ));
    }
    let n = params.nakagami_shape;
    let lower = bound_integral(theta, lambda, n as f64, params, quad)?;
    let upper = bound_integral(theta, lambda, params.zeta_prime(), params, quad)?;
    let (mut lo, mut up) = (lower.0, upper.0);
    if up < lo {
        let slack = lower.1.total_error + upper.1.total_error;
        if lo - up > slack {
            return Err(Error::Quadrature {
                context: "coverage bounds ordering",
                value: up - lo,
                achieved_error: slack,
                subdivisions: lower.1.subdivisions + upper.1.subdivisions,
            });
        }
        let mid = 0.5 * (lo + up);
        lo = mid;
        up = mid;
    }
    Ok(CoverageBounds {
        lower: lo.clamp(0.0, 1.0),
        upper: up.clamp(0.0, 1.0),
        theta,
        densities: *d,
        params: *params,
        lower_diagnostics: lower.1,
        upper_diagnostics: upper.1,
        r_max: serving_distance_cutoff(lambda, quad.tail_cutoff_epsilon),
    })
}

/// One bound: ∫ [(1−p̃)L_I(θK_NL r^α_NL) + p̃ Σ_l (−1)^(l+1) C(N,l) L_I(η θ K_L r^α_L l)] f(r) dr.
///
/// Integrated in w = (4/3)πλ̃r³, where f(r)dr = e^(−w)dw.
fn bound_integral(
    theta: f64,
    lambda: f64,
    eta: f64,
    params: &ChannelParams,
    quad: &QuadratureSettings,
) -> Result<(f64, BoundDiagnostics)> {
    let n = params.nakagami_shape;
    let coefficients: Vec<f64> = (1..=n)
        .map(|l| {
            let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
            binomial(n, l).map(|c| sign * c)
        })
        .collect::<Result<_>>()?;
    let inner = quad.scaled(0.1);
    let w_max = (1.0 / quad.tail_cutoff_epsilon).ln();
    let mut failure: Option<Error> = None;
    let mut max_err = 0.0f64;
    let mut laplace_evals = 0usize;
    let mut integrand = |w: f64| -> f64 {
        if failure.is_some() || w <= 0.0 {
            return if w <= 0.0 { 1.0 } else { 0.0 };
        }
        let r = (w / ball_coefficient(lambda)).cbrt();
        let mut eval = |s: f64| match interference_laplace_eval(s, r, lambda, params, &inner) {
            Ok(e) => {
                max_err = max_err.max(e.abs_error);
                laplace_evals += 1;
                e.value
            }
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        let p = (-(r / params.los_scale).powi(3)).exp();
        let nlos = eval(theta * params.k_nlos * r.powf(params.alpha_nlos));
        let base = eta * theta * params.k_los * r.powf(params.alpha_los);
        let los: f64 = if p > 0.0 {
            coefficients
                .iter()
                .enumerate()
                .map(|(i, c)| c * eval(base * (i + 1) as f64))
                .sum()
        } else {
            0.0
        };
        ((1.0 - p) * nlos + p * los) * (-w).exp()
    };
    let outer = integrate(&mut integrand, 0.0, w_max, quad, "coverage bound");
    if let Some(e) = failure {
        return Err(e);
    }
    let outer = outer?;
    let amplification = (1u64 << n.min(60)) as f64;
    let diagnostics = BoundDiagnostics {
        outer_error: outer.abs_error,
        max_laplace_error: max_err,
        total_error: outer.abs_error + amplification * max_err + quad.tail_cutoff_epsilon,
        outer_evaluations: outer.evaluations,
        laplace_evaluations: laplace_evals,
        subdivisions: outer.subdivisions,
    };
    Ok((outer.value, diagnostics))
}

/// Coverage of a pure-NLOS Rayleigh network, ∫ L_I(θK_NL r^α_NL) f(r) dr,
/// evaluated with the same quadrature as the bounds but with p̃ ≡ 0.
pub fn nlos_coverage(
    theta: f64,
    d: &DensityConfig,
    params: &ChannelParams,
    quad: &QuadratureSettings,
) -> Result<f64> {
    // a vanishing LOS scale removes every LOS term from the bound integrand
    let pure = ChannelParams { los_scale: f64::MIN_POSITIVE, ..*params };
    let lambda = d.active_intensity();
    if !(lambda > 0.0) {
        return Err(Error::domain("nlos_coverage", "active AP intensity is zero"));
    }
    Ok(bound_integral(theta, lambda, 1.0, &pure, quad)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    /// ∫_1^∞ y²/(1 + y^α/θ) dy as an alternating series, valid for θ < 1.
    fn rayleigh_c(theta: f64, alpha: f64) -> f64 {
        (1..200)
            .map(|k| {
                let k = k as f64;
                let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * theta.powf(k) / (k * alpha - 3.0)
            })
            .sum()
    }

    #[test]
    fn activity_values() {
        let q = |ap, ue| activity_probability(&DensityConfig { lambda_ap: ap, lambda_ue: ue });
        assert_eq!(q(1e-3, 0.0), 0.0);
        assert!((q(1e-2, 1e-2) - (1.0 - 1.2f64.powi(-5))).abs() < 1e-15);
        assert!((q(1e-2, 1e-2) - 0.598_122_427_983_539).abs() < 1e-12);
        assert!(q(1e-5, 1e3) >= 1.0 - 1e-15);
        assert!((q(1.0, 1e-12) - 1e-12).abs() < 1e-22);
    }

    #[test]
    fn nth_pdf_matches_nearest_form() {
        let lam = 1e-3;
        for r in [0.5, 3.0, 6.2, 15.0] {
            let direct = 4.0 * PI * lam * r * r * (-4.0 / 3.0 * PI * lam * r.powi(3)).exp();
            let v = nth_nearest_pdf(1, r, lam).unwrap();
            assert!((v - direct).abs() <= 1e-13 * direct);
        }
        assert_eq!(nth_nearest_pdf(2, 0.0, lam).unwrap(), 0.0);
        assert!(nth_nearest_pdf(0, 1.0, lam).is_err());
        assert!(nth_nearest_pdf(1, -1.0, lam).is_err());
        let r0 = (3.0 / (4.0 * PI * lam)).cbrt();
        assert!((nth_nearest_cdf(1, r0, lam).unwrap() - (1.0 - (-1f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn nth_pdf_normalizes() {
        let q = QuadratureSettings { relative_tolerance: 1e-11, ..quad() };
        for n in [1u32, 2, 5] {
            for lam in [1e-6, 1e-2] {
                // integrate in units of the scale length to keep the map well conditioned
                let scale = (1.0 / ball_coefficient(lam)).cbrt();
                let v2 = crate::quadrature::integrate_to_infinity(
                    |t| scale * nth_nearest_pdf(n, scale * t, lam).unwrap(),
                    0.0,
                    &q,
                    "norm",
                )
                .unwrap();
                assert!((v2.value - 1.0).abs() < 1e-8, "n={n} lam={lam}: {}", v2.value);
            }
        }
    }

    #[test]
    fn link_los_values() {
        let l: f64 = 82.5;
        let half = 3.0 / (4.0 * PI * l.powi(3));
        assert!((half - 4.254e-7).abs() < 5e-10);
        for n in 1..=4 {
            let p = link_los_prob(n, half, l).unwrap();
            assert!((p - 0.5f64.powi(n as i32)).abs() < 1e-14);
        }
        assert!(link_los_prob(3, 1e6, l).unwrap() > 1.0 - 1e-9);
        let mut prev = 1.0;
        for n in 1..6 {
            let p = link_los_prob(n, 1e-6, l).unwrap();
            assert!(p < prev);
            prev = p;
        }
        assert!(link_los_prob(0, 1e-6, l).is_err());
    }

    #[test]
    fn link_los_matches_its_integral() {
        let (l, lam) = (82.5, 1e-5);
        for n in 1..=3u32 {
            let scale = (1.0 / ball_coefficient(lam)).cbrt();
            let q = crate::quadrature::integrate_to_infinity(
                |t| {
                    let r = scale * t;
                    scale * (-(r / l).powi(3)).exp() * nth_nearest_pdf(n, r, lam).unwrap()
                },
                0.0,
                &QuadratureSettings { relative_tolerance: 1e-12, ..quad() },
                "los",
            )
            .unwrap()
            .value;
            let closed = link_los_prob(n, lam, l).unwrap();
            assert!((q - closed).abs() < 1e-9 * closed, "n={n}: {q} vs {closed}");
        }
    }

    #[test]
    fn alzer_sandwich() {
        use crate::special::normalized_gamma_cdf;
        for n in [2u32, 3, 5] {
            let zeta = (-crate::special::log_factorial(n as u64) / n as f64).exp();
            let nf = n as f64;
            for x in [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0] {
                let cdf = normalized_gamma_cdf(n, x).unwrap();
                let lo = (1.0 - (-zeta * nf * x).exp()).powi(n as i32);
                let hi = (1.0 - (-nf * x).exp()).powi(n as i32);
                assert!(lo < cdf || (cdf - lo).abs() < 1e-15, "n={n} x={x}");
                assert!(cdf < hi || (hi - cdf).abs() < 1e-15, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn laplace_basics() {
        let p = ChannelParams::default();
        assert_eq!(interference_laplace(0.0, 10.0, 1e-3, &p, &quad()).unwrap(), 1.0);
        let mut prev = 1.0;
        for k in -2..=4 {
            let s = 10f64.powi(k);
            let v = interference_laplace(s, 10.0, 1e-4, &p, &quad()).unwrap();
            assert!(v > 0.0 && v <= 1.0);
            assert!(v < prev, "s={s}");
            prev = v;
        }
        let near = interference_laplace(1e3, 5.0, 1e-4, &p, &quad()).unwrap();
        let far = interference_laplace(1e3, 50.0, 1e-4, &p, &quad()).unwrap();
        assert!(far >= near);
        assert!(interference_laplace(-1.0, 5.0, 1e-4, &p, &quad()).is_err());
        assert!(interference_laplace(1.0, 0.0, 1e-4, &p, &quad()).is_err());
    }

    #[test]
    fn laplace_pure_nlos_closed_form() {
        // with r past the knee the NLOS integral is a convergent series
        let p = ChannelParams { los_scale: 1e-6, ..Default::default() };
        let (lam, r): (f64, f64) = (1e-4, 20.0);
        let s = 0.1 * p.k_nlos * r.powf(p.alpha_nlos);
        let c = r.powi(3) * rayleigh_c(0.1, p.alpha_nlos);
        let want = (-4.0 * PI * lam * c).exp();
        let got = interference_laplace(s, r, lam, &p, &quad()).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn pure_nlos_coverage_is_density_free() {
        let p = ChannelParams::default();
        let c = rayleigh_c(0.1, p.alpha_nlos);
        let want = 1.0 / (1.0 + 3.0 * c);
        for ap in [1e-5, 1e-3, 1e-1] {
            let d = DensityConfig { lambda_ap: ap, lambda_ue: 1e-2 };
            let v = nlos_coverage(0.1, &d, &p, &quad()).unwrap();
            assert!((v - want).abs() < 1e-8, "ap={ap}: {v} vs {want}");
            let tiny = ChannelParams { los_scale: 1e-6, ..p };
            let b = coverage_bounds(0.1, &d, &tiny, &quad()).unwrap();
            assert!((b.lower - want).abs() < 1e-8 && (b.upper - want).abs() < 1e-8);
        }
    }

    #[test]
    fn bounds_collapse_for_unit_shape() {
        let p = ChannelParams { nakagami_shape: 1, ..Default::default() };
        for ap in [1e-4, 1e-2] {
            for theta_db in [-10.0, 0.0, 10.0] {
                let d = DensityConfig { lambda_ap: ap, lambda_ue: 1e-2 };
                let b = coverage_bounds(db_to_linear(theta_db), &d, &p, &quad()).unwrap();
                assert!((b.upper - b.lower).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn bounds_are_ordered_and_monotone() {
        let p = ChannelParams::default();
        for ap in [1e-5, 1e-3, 1e-1] {
            let d = DensityConfig { lambda_ap: ap, lambda_ue: 1e-2 };
            let mut prev: Option<CoverageBounds> = None;
            for theta_db in [-20.0, -10.0, 0.0, 10.0] {
                let b = coverage_bounds(db_to_linear(theta_db), &d, &p, &quad()).unwrap();
                assert!(0.0 <= b.lower && b.lower <= b.upper && b.upper <= 1.0);
                if let Some(pb) = prev {
                    assert!(b.lower < pb.lower && b.upper < pb.upper);
                }
                prev = Some(b);
            }
        }
        let mut prev = 1.0;
        for ue in [1e-4, 1e-2, 1.0] {
            let d = DensityConfig { lambda_ap: 1e-3, lambda_ue: ue };
            let b = coverage_bounds(0.1, &d, &p, &quad()).unwrap();
            assert!(b.upper < prev, "ue={ue}");
            prev = b.upper;
        }
    }

    #[test]
    fn bounds_reject_bad_input() {
        let p = ChannelParams::default();
        let d = DensityConfig { lambda_ap: 1e-3, lambda_ue: 0.0 };
        assert!(coverage_bounds(0.1, &d, &p, &quad()).is_err());
        let d = DensityConfig { lambda_ap: 1e-3, lambda_ue: 1e-2 };
        assert!(coverage_bounds(0.0, &d, &p, &quad()).is_err());
        assert!(DensityConfig::new(0.0, 1.0).is_err());
        assert!(DensityConfig::new(1.0, -1.0).is_err());
    }

    #[test]
    fn tolerance_halving_stays_within_error() {
        let p = ChannelParams::default();
        let d = DensityConfig { lambda_ap: 1e-3, lambda_ue: 1e-2 };
        let a = coverage_bounds(0.1, &d, &p, &quad()).unwrap();
        let b = coverage_bounds(0.1, &d, &p, &quad().scaled(0.5)).unwrap();
        assert!((a.lower - b.lower).abs() <= a.lower_diagnostics.total_error);
        assert!((a.upper - b.upper).abs() <= a.upper_diagnostics.total_error);
    }
}
