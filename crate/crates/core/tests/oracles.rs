//! Frozen reference values and Monte-Carlo cross-checks between the engines.

use std::f64::consts::PI;

use cov3d_core::analytic::{
    activity_probability, coverage_bounds, db_to_linear, interference_laplace, link_los_prob, nlos_coverage,
};
use cov3d_core::channel::{exact_los_prob, path_loss};
use cov3d_core::geometry::{SimGeometry, TypicalUe, UeSampling};
use cov3d_core::montecarlo::{
    compute_sir, empirical_activity_probability, empirical_interference_laplace, empirical_link_los_prob,
    simulate_coverage,
};
use cov3d_core::{ChannelParams, DensityConfig, LinkState, LosModel, QuadratureSettings};

fn small_geometry(aps: f64) -> SimGeometry {
    SimGeometry {
        min_expected_aps: aps,
        max_expected_aps: aps,
        typical_ue: TypicalUe::Probe,
        ..Default::default()
    }
}

#[test]
fn frozen_closed_form_values() {
    let q = activity_probability(&DensityConfig::new(1e-2, 1e-2).unwrap());
    assert!((q - (1.0 - 1.2f64.powi(-5))).abs() < 1e-15);
    assert!((q - 0.598_122_43).abs() < 1e-8);

    let half = 3.0 / (4.0 * PI * 82.5f64.powi(3));
    assert!((half - 4.2516e-7).abs() < 1e-10);
    for n in 1..=3 {
        assert!((link_los_prob(n, half, 82.5).unwrap() - 0.5f64.powi(n as i32)).abs() < 1e-12);
    }

    assert!((exact_los_prob(30.0).unwrap() - (1.0 - 5.0 * (-5.2f64).exp())).abs() < 1e-12);
    assert!((exact_los_prob(30.0).unwrap() - 0.9724).abs() < 1e-4);

    let p = ChannelParams::default();
    let los_100 = path_loss(100.0, LinkState { is_los: true }, &p).unwrap();
    assert!((los_100.log10() - 8.29).abs() < 1e-9);
}

#[test]
fn frozen_bounds_at_reference_point() {
    // default channel, −10 dB, λ_AP = 1e-3, λ_UE = 1e-2
    let b = coverage_bounds(
        db_to_linear(-10.0),
        &DensityConfig::new(1e-3, 1e-2).unwrap(),
        &ChannelParams::default(),
        &QuadratureSettings::default(),
    )
    .unwrap();
    assert!((b.lower - 0.106_403_59).abs() < 1e-7, "{}", b.lower);
    assert!((b.upper - 0.224_750_39).abs() < 1e-7, "{}", b.upper);
}

#[test]
fn frozen_pure_nlos_coverage() {
    // 1/(1 + 3 Σ (−1)^(k+1) θ^k/(kα − 3)) at θ = 0.1, α = 3.75
    let c = nlos_coverage(
        0.1,
        &DensityConfig::new(1e-4, 1e-2).unwrap(),
        &ChannelParams::default(),
        &QuadratureSettings::default(),
    )
    .unwrap();
    assert!((c - 0.717_528_05).abs() < 1e-7, "{c}");
}

#[test]
fn activity_matches_void_probability() {
    let d = DensityConfig::new(1e-2, 1e-2).unwrap();
    let e = empirical_activity_probability(&d, &small_geometry(2000.0), 6, 5).unwrap();
    assert!(e.proportion.total >= 10_000);
    assert!((e.proportion.p_hat - activity_probability(&d)).abs() < 0.02, "{}", e.proportion.p_hat);
}

#[test]
fn sparse_and_full_samplers_agree() {
    let d = DensityConfig::new(1e-3, 5e-3).unwrap();
    let full = SimGeometry { ue_sampling: UeSampling::Full, ..small_geometry(2000.0) };
    let sparse = SimGeometry { ue_sampling: UeSampling::Sparse, ..small_geometry(2000.0) };
    let a = empirical_activity_probability(&d, &full, 10, 6).unwrap().proportion;
    let b = empirical_activity_probability(&d, &sparse, 10, 7).unwrap().proportion;
    assert!((a.p_hat - b.p_hat).abs() < 4.0 * (a.sigma().powi(2) + b.sigma().powi(2)).sqrt() + 0.005);
}

#[test]
fn link_los_simulation_at_half_probability() {
    let lam = 3.0 / (4.0 * PI * 82.5f64.powi(3));
    let ue = 1e3 * lam / activity_probability(&DensityConfig { lambda_ap: 1.0, lambda_ue: 1e3 });
    let d = DensityConfig::new(ue / 1e3, ue).unwrap();
    let p = ChannelParams::default();
    let e = empirical_link_los_prob(3, &d, &p, &small_geometry(100.0), 4000, 8).unwrap();
    assert!((e.proportion.p_hat - 0.125).abs() < 0.02, "{}", e.proportion.p_hat);
}

#[test]
fn simulated_coverage_inside_bracket() {
    let d = DensityConfig::new(1e-3, 1e-2).unwrap();
    let p = ChannelParams::default();
    let b = coverage_bounds(db_to_linear(-10.0), &d, &p, &QuadratureSettings::default()).unwrap();
    let c = simulate_coverage(-10.0, &d, &p, &small_geometry(500.0), 3000, 9).unwrap();
    assert!(c.p_hat >= b.lower - 3.0 * c.sigma() && c.p_hat <= b.upper + 3.0 * c.sigma(), "{}", c.p_hat);
}

#[test]
fn laplace_matches_simulation_without_los() {
    let p = ChannelParams { los_scale: 1e-6, los_model: LosModel::CubicExponential, ..Default::default() };
    let (lam, r) = (1e-5, 20.0f64);
    let s = 0.1 * p.k_nlos * r.powf(p.alpha_nlos);
    let analytic = interference_laplace(s, r, lam, &p, &QuadratureSettings::default()).unwrap();
    let outer = 400.0f64;
    let mc = empirical_interference_laplace(s, r, outer, lam, &p, 20_000, 10).unwrap();
    // interferers beyond the shell, to first order in s/K_NL
    let c = s / p.k_nlos;
    let far = (-4.0 * PI * lam * c * outer.powf(3.0 - p.alpha_nlos) / (p.alpha_nlos - 3.0)).exp();
    let estimate = mc.mean * far;
    assert!((estimate - analytic).abs() <= 3.0 * mc.std_error + 1e-4, "{estimate} vs {analytic}");
}

#[test]
fn sir_is_deterministic_per_stream() {
    use cov3d_core::geometry::realize_network;
    use cov3d_core::rng::{stream, Purpose};
    let d = DensityConfig::new(1e-3, 1e-2).unwrap();
    let g = small_geometry(300.0);
    let sir = |t| {
        let net = realize_network(&d, &g, &mut stream(3, Purpose::Network, t)).unwrap();
        compute_sir(&net, &ChannelParams::default(), &mut stream(3, Purpose::Channel, t))
    };
    assert_eq!(sir(4).to_bits(), sir(4).to_bits());
    assert_ne!(sir(4).to_bits(), sir(5).to_bits());
}
