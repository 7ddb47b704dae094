//! LOS/NLOS link states, two-slope path loss and small-scale fading.
//!
//! All distances are in meters. The 3GPP pico-cell LOS law is written with
//! kilometer constants and is converted internally.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};

/// Which LOS-probability law a link uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LosModel {
    /// 0.5 − min(0.5, 5e^(−0.156/d)) + min(0.5, 5e^(−d/0.03)), d in km.
    #[default]
    Exact3gpp,
    /// exp(−(d/L)³) with L = `ChannelParams::los_scale`.
    CubicExponential,
}

/// Propagation constants of the two link states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Linear LOS path loss at 1 m.
    pub k_los: f64,
    /// Linear NLOS path loss at 1 m.
    pub k_nlos: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    /// Nakagami shape of LOS power fading (integer).
    pub nakagami_shape: u32,
    /// Scale L of the cubic-exponential LOS law, meters.
    pub los_scale: f64,
    /// LOS law used by the simulator. The analytic engine always uses the
    /// cubic-exponential law.
    pub los_model: LosModel,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            k_los: 10f64.powf(4.11),
            k_nlos: 10f64.powf(3.29),
            alpha_los: 2.09,
            alpha_nlos: 3.75,
            nakagami_shape: 3,
            los_scale: 82.5,
            los_model: LosModel::Exact3gpp,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_los > 0.0) || !self.k_los.is_finite() {
            return Err(Error::config("k_los", format!("must be positive, got {}", self.k_los)));
        }
        if !(self.k_nlos > 0.0) || !self.k_nlos.is_finite() {
            return Err(Error::config("k_nlos", format!("must be positive, got {}", self.k_nlos)));
        }
        if !(self.alpha_los >= 2.0) {
            return Err(Error::config(
                "alpha_los",
                format!("must be at least 2, got {}", self.alpha_los),
            ));
        }
        if !(self.alpha_los < self.alpha_nlos) {
            return Err(Error::config(
                "alpha_nlos",
                format!(
                    "must exceed alpha_los ({}), got {}",
                    self.alpha_los, self.alpha_nlos
                ),
            ));
        }
        // the NLOS interference integral over R^3 diverges otherwise
        if !(self.alpha_nlos > 3.0) || !self.alpha_nlos.is_finite() {
            return Err(Error::config(
                "alpha_nlos",
                format!("must exceed 3 for finite interference, got {}", self.alpha_nlos),
            ));
        }
        if self.nakagami_shape == 0 {
            return Err(Error::config("nakagami_shape", "must be a positive integer"));
        }
        if !(self.los_scale > 0.0) || !self.los_scale.is_finite() {
            return Err(Error::config(
                "los_scale",
                format!("must be positive, got {}", self.los_scale),
            ));
        }
        Ok(())
    }

    /// LOS probability under the configured simulator law.
    pub fn los_prob(&self, d: f64) -> f64 {
        match self.los_model {
            LosModel::Exact3gpp => exact_los_unchecked(d),
            LosModel::CubicExponential => approx_los_unchecked(d, self.los_scale),
        }
    }

    /// Distance beyond which the configured LOS probability stays below `eps`.
    pub fn los_negligible_beyond(&self, eps: f64) -> f64 {
        match self.los_model {
            // only the 5e^(−d/30 m) term survives at long range
            LosModel::Exact3gpp => (30.0 * (5.0 / eps).ln()).max(70.0),
            LosModel::CubicExponential => approx_los_negligible_beyond(self.los_scale, eps),
        }
    }

    /// ζ′ = N_L · (N_L!)^(−1/N_L).
    pub fn zeta_prime(&self) -> f64 {
        let n = self.nakagami_shape as f64;
        n * (-crate::special::log_factorial(self.nakagami_shape as u64) / n).exp()
    }

    /// Received power gain 1/PL(d) for the given state.
    pub fn inverse_path_loss(&self, d: f64, state: LinkState) -> f64 {
        if state.is_los {
            1.0 / (self.k_los * d.powf(self.alpha_los))
        } else {
            1.0 / (self.k_nlos * d.powf(self.alpha_nlos))
        }
    }
}

/// Distance beyond which exp(−(d/L)³) < eps.
pub fn approx_los_negligible_beyond(los_scale: f64, eps: f64) -> f64 {
    los_scale * (-eps.ln()).max(0.0).cbrt()
}

/// LOS indicator of one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkState {
    pub is_los: bool,
}

impl LinkState {
    pub const LOS: LinkState = LinkState { is_los: true };
    pub const NLOS: LinkState = LinkState { is_los: false };
}

fn exact_los_unchecked(d: f64) -> f64 {
    let d_km = d / 1000.0;
    let p = 0.5 - (5.0 * (-0.156 / d_km).exp()).min(0.5) + (5.0 * (-d_km / 0.03).exp()).min(0.5);
    p.clamp(0.0, 1.0)
}

fn approx_los_unchecked(d: f64, los_scale: f64) -> f64 {
    let u = d / los_scale;
    (-(u * u * u)).exp()
}

/// 3GPP pico-cell LOS probability at distance `d` meters.
pub fn exact_los_prob(d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain("exact_los_prob", format!("distance must be positive, got {d}")));
    }
    Ok(exact_los_unchecked(d))
}

/// Cubic-exponential LOS probability exp(−(d/L)³).
pub fn approx_los_prob(d: f64, los_scale: f64) -> Result<f64> {
    if !(d >= 0.0) || !(los_scale > 0.0) {
        return Err(Error::domain(
            "approx_los_prob",
            format!("requires d >= 0 and L > 0, got d = {d}, L = {los_scale}"),
        ));
    }
    Ok(approx_los_unchecked(d, los_scale))
}

/// Linear path loss K·d^α of a link in the given state.
pub fn path_loss(d: f64, state: LinkState, params: &ChannelParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain("path_loss", format!("distance must be positive, got {d}")));
    }
    Ok(if state.is_los {
        params.k_los * d.powf(params.alpha_los)
    } else {
        params.k_nlos * d.powf(params.alpha_nlos)
    })
}

/// Unit-mean power fading: Gamma(N_L, 1/N_L) on LOS links, Exp(1) on NLOS.
pub fn sample_fading<R: Rng + ?Sized>(state: LinkState, params: &ChannelParams, rng: &mut R) -> f64 {
    if state.is_los {
        let n = params.nakagami_shape.max(1);
        let sum: f64 = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).sum();
        sum / n as f64
    } else {
        rng.sample(Exp1)
    }
}

/// Draw the LOS state of a link of length `d` under the configured law.
pub fn sample_link_state<R: Rng + ?Sized>(d: f64, params: &ChannelParams, rng: &mut R) -> LinkState {
    let u: f64 = rng.random();
    LinkState { is_los: u < params.los_prob(d) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::stats::{ks_two_sample, ks_critical_two_sample, mean_variance};

    #[test]
    fn exact_los_limits_and_midpoint() {
        assert!((exact_los_prob(1e-6).unwrap() - 1.0).abs() < 1e-12);
        assert!(exact_los_prob(1e6).unwrap() < 1e-12);
        // 0.5 − 5e^{−5.2} + 0.5
        let expected = 1.0 - 5.0 * (-5.2f64).exp();
        assert!((exact_los_prob(30.0).unwrap() - expected).abs() < 1e-12);
        assert!((exact_los_prob(30.0).unwrap() - 0.9724).abs() < 1e-4);
        assert!(exact_los_prob(0.0).is_err());
        assert!(exact_los_prob(-1.0).is_err());
    }

    #[test]
    fn approx_los_values() {
        assert_eq!(approx_los_prob(0.0, 82.5).unwrap(), 1.0);
        assert!((approx_los_prob(82.5, 82.5).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!(approx_los_prob(-1.0, 82.5).is_err());
        assert!(approx_los_prob(1.0, 0.0).is_err());
    }

    #[test]
    fn unit_conventions_agree_at_20_and_300_m() {
        for (d, target) in [(20.0, 1.0), (300.0, 0.0)] {
            assert!((exact_los_prob(d).unwrap() - target).abs() < 0.02);
            assert!((approx_los_prob(d, 82.5).unwrap() - target).abs() < 0.02);
        }
    }

    #[test]
    fn approx_tracks_exact_within_calibrated_bound() {
        // dense scan over [1, 300] m; the recorded sup-gap is 0.0696 (at ≈ 69 m,
        // where the 3GPP law has its flat 0.5 plateau)
        let mut sup = 0.0f64;
        let mut d = 1.0;
        while d <= 300.0 {
            let gap = (exact_los_prob(d).unwrap() - approx_los_prob(d, 82.5).unwrap()).abs();
            sup = sup.max(gap);
            d += 0.01;
        }
        assert!(sup < 0.075, "sup gap {sup}");
        assert!(sup > 0.02);
    }

    #[test]
    fn los_laws_are_monotone() {
        let mut prev_exact = 1.0;
        let mut prev_approx = 1.0;
        for i in 1..5000 {
            let d = i as f64 * 0.1;
            let e = exact_los_prob(d).unwrap();
            let a = approx_los_prob(d, 82.5).unwrap();
            assert!((0.0..=1.0).contains(&e) && (0.0..=1.0).contains(&a));
            assert!(e <= prev_exact + 1e-15, "exact rises at {d}");
            assert!(a < prev_approx, "approx not strictly decreasing at {d}");
            prev_exact = e;
            prev_approx = a;
        }
    }

    #[test]
    fn path_loss_table_values() {
        let p = ChannelParams::default();
        assert!((path_loss(1.0, LinkState::LOS, &p).unwrap() / 10f64.powf(4.11) - 1.0).abs() < 1e-14);
        assert!((path_loss(1.0, LinkState::NLOS, &p).unwrap() / 10f64.powf(3.29) - 1.0).abs() < 1e-14);
        let los100 = path_loss(100.0, LinkState::LOS, &p).unwrap();
        assert!((los100.log10() - (4.11 + 2.0 * 2.09)).abs() < 1e-12);
        assert!((los100.log10() - 8.29).abs() < 1e-9);
        assert!(path_loss(0.0, LinkState::LOS, &p).is_err());
    }

    #[test]
    fn nlos_loss_exceeds_los_beyond_one_meter() {
        let p = ChannelParams::default();
        let mut prev = (0.0, 0.0);
        for i in 0..2000 {
            let d = 1.0 + i as f64 * 0.5;
            let l = path_loss(d, LinkState::LOS, &p).unwrap();
            let n = path_loss(d, LinkState::NLOS, &p).unwrap();
            assert!(l > prev.0 && n > prev.1);
            // K_NL < K_L, so the NLOS law only overtakes beyond
            // (K_L/K_NL)^(1/(α_NL−α_L)) ≈ 3.12 m
            if d > 3.2 {
                assert!(n > l, "d = {d}");
            }
            if d < 3.0 {
                assert!(n < l, "d = {d}");
            }
            prev = (l, n);
        }
    }

    #[test]
    fn fading_moments() {
        let p = ChannelParams::default();
        let mut rng = stream(11, Purpose::Sampling, 0);
        let n = 1_000_000;
        let nlos: Vec<f64> = (0..n).map(|_| sample_fading(LinkState::NLOS, &p, &mut rng)).collect();
        let (m, v) = mean_variance(&nlos);
        assert!((m - 1.0).abs() < 0.01 && (v - 1.0).abs() < 0.02, "NLOS {m} {v}");
        let los: Vec<f64> = (0..n).map(|_| sample_fading(LinkState::LOS, &p, &mut rng)).collect();
        let (m, v) = mean_variance(&los);
        assert!((m - 1.0).abs() < 0.01 && (v - 1.0 / 3.0).abs() < 0.01, "LOS {m} {v}");
        assert!(los.iter().chain(&nlos).all(|&h| h > 0.0));
    }

    #[test]
    fn shape_one_los_fading_is_exponential() {
        let p = ChannelParams { nakagami_shape: 1, ..Default::default() };
        let mut r1 = stream(1, Purpose::Sampling, 0);
        let mut r2 = stream(1, Purpose::Sampling, 1);
        let a: Vec<f64> = (0..20_000).map(|_| sample_fading(LinkState::LOS, &p, &mut r1)).collect();
        let b: Vec<f64> = (0..20_000).map(|_| sample_fading(LinkState::NLOS, &p, &mut r2)).collect();
        assert!(ks_two_sample(&a, &b) < ks_critical_two_sample(a.len(), b.len(), 0.01));
    }

    #[test]
    fn fading_laplace_transforms_match_closed_forms() {
        let p = ChannelParams::default();
        let n = 200_000;
        for (state, seed) in [(LinkState::NLOS, 5u64), (LinkState::LOS, 6)] {
            let mut rng = stream(seed, Purpose::Sampling, 0);
            let h: Vec<f64> = (0..n).map(|_| sample_fading(state, &p, &mut rng)).collect();
            for s in [0.1, 1.0, 10.0] {
                let vals: Vec<f64> = h.iter().map(|&x| (-s * x).exp()).collect();
                let (m, v) = mean_variance(&vals);
                let exact = if state.is_los {
                    (1.0 + s / 3.0f64).powi(-3)
                } else {
                    1.0 / (1.0 + s)
                };
                let sigma = (v / n as f64).sqrt();
                assert!((m - exact).abs() < 3.0 * sigma + 1e-12, "{state:?} s={s}: {m} vs {exact}");
            }
        }
    }

    #[test]
    fn validation_rejects_bad_params() {
        assert!(ChannelParams::default().validate().is_ok());
        let bad = ChannelParams { alpha_nlos: 2.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ChannelParams { nakagami_shape: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ChannelParams { k_los: -1.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::Config { ref parameter, .. }) if parameter == "k_los"));
    }

    #[test]
    fn zeta_prime_values() {
        let p = ChannelParams::default();
        // 3 · 6^{-1/3}
        assert!((p.zeta_prime() - 3.0 / 6f64.cbrt()).abs() < 1e-14);
        let p1 = ChannelParams { nakagami_shape: 1, ..p };
        assert_eq!(p1.zeta_prime(), 1.0);
    }
}
