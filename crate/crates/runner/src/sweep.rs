//! The three figure sweeps.
//!
//! Points run on the rayon pool and rows come back in sweep order: UE
//! intensity outer, AP (or active-AP) intensity inner. Every point uses the
//! configured seed, so points that share an AP intensity share AP positions
//! and channel draws.

use cov3d_core::analytic::{activity_probability, coverage_bounds, db_to_linear, link_los_prob};
use cov3d_core::geometry::{SimGeometry, TypicalUe};
use cov3d_core::montecarlo::{empirical_activity_probability, empirical_link_los_probs, simulate_sirs};
use cov3d_core::DensityConfig;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::RunError;

/// UE-to-AP intensity ratio of the link LOS sweep; leaves q within 1e-11 of one.
pub const LOS_SWEEP_UE_RATIO: f64 = 1e3;
/// Expected AP count of the link LOS sweep networks.
pub const LOS_SWEEP_APS: f64 = 100.0;

/// A CSV row with a fixed header.
pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn record(&self) -> Vec<String>;
}

/// Shortest round-trip decimal form; locale independent.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Row {
    pub lambda_ap: f64,
    pub lambda_ue: f64,
    pub q_analytic: f64,
    pub q_sim: f64,
    pub ci: f64,
    pub draws: u64,
    /// APs counted across the draws.
    pub cells: u64,
}

impl CsvRow for Fig1Row {
    const HEADER: &'static [&'static str] = &["lambda_ap", "lambda_ue", "q_analytic", "q_sim", "ci", "draws"];
    fn record(&self) -> Vec<String> {
        vec![
            fmt(self.lambda_ap),
            fmt(self.lambda_ue),
            fmt(self.q_analytic),
            fmt(self.q_sim),
            fmt(self.ci),
            self.draws.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Row {
    pub lambda_active: f64,
    pub n: u32,
    pub p_analytic: f64,
    pub p_sim: f64,
    pub ci: f64,
    pub draws: u64,
}

impl CsvRow for Fig2Row {
    const HEADER: &'static [&'static str] = &["lambda_active", "n", "p_analytic", "p_sim", "ci", "draws"];
    fn record(&self) -> Vec<String> {
        vec![
            fmt(self.lambda_active),
            self.n.to_string(),
            fmt(self.p_analytic),
            fmt(self.p_sim),
            fmt(self.ci),
            self.draws.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig3Row {
    pub lambda_ap: f64,
    pub lambda_ue: f64,
    pub theta_db: f64,
    pub cov_lower: f64,
    pub cov_upper: f64,
    pub cov_sim: f64,
    pub ci: f64,
    pub trials: u64,
    pub seed: u64,
    /// Binomial standard error of `cov_sim`.
    pub sigma: f64,
    /// `ok`, or the error that left this row's values as NaN.
    pub status: String,
}

impl CsvRow for Fig3Row {
    const HEADER: &'static [&'static str] = &[
        "lambda_ap", "lambda_ue", "theta_db", "cov_lower", "cov_upper", "cov_sim", "ci", "trials", "seed", "status",
    ];
    fn record(&self) -> Vec<String> {
        vec![
            fmt(self.lambda_ap),
            fmt(self.lambda_ue),
            fmt(self.theta_db),
            fmt(self.cov_lower),
            fmt(self.cov_upper),
            fmt(self.cov_sim),
            fmt(self.ci),
            self.trials.to_string(),
            self.seed.to_string(),
            self.status.clone(),
        ]
    }
}

fn grid_points(cfg: &ExperimentConfig) -> Vec<(f64, f64)> {
    let aps = cfg.sweep.lambda_ap.values();
    cfg.sweep
        .lambda_ue
        .iter()
        .flat_map(|&ue| aps.iter().map(move |&ap| (ap, ue)))
        .collect()
}

/// AP activity probability against AP intensity, one curve per UE intensity.
pub fn run_fig1(cfg: &ExperimentConfig) -> Result<Vec<Fig1Row>, RunError> {
    cfg.validate()?;
    let geom = cfg.geometry.sim_geometry();
    grid_points(cfg)
        .par_iter()
        .map(|&(ap, ue)| {
            let d = DensityConfig::new(ap, ue)?;
            let e = empirical_activity_probability(&d, &geom, cfg.sweep.activity_draws, cfg.seed)?;
            Ok(Fig1Row {
                lambda_ap: ap,
                lambda_ue: ue,
                q_analytic: activity_probability(&d),
                q_sim: e.proportion.p_hat,
                ci: e.proportion.ci_halfwidth,
                draws: e.draws,
                cells: e.proportion.total,
            })
        })
        .collect()
}

/// Densities and geometry that realize active-AP intensity `lambda_active`
/// with every AP active.
pub fn los_sweep_setup(lambda_active: f64, geom: &SimGeometry) -> Result<(DensityConfig, SimGeometry), RunError> {
    let q = activity_probability(&DensityConfig { lambda_ap: 1.0, lambda_ue: LOS_SWEEP_UE_RATIO });
    let ap = lambda_active / q;
    let d = DensityConfig::new(ap, LOS_SWEEP_UE_RATIO * ap)?;
    let g = SimGeometry {
        min_expected_aps: LOS_SWEEP_APS,
        max_expected_aps: LOS_SWEEP_APS,
        typical_ue: TypicalUe::Probe,
        ..*geom
    };
    Ok((d, g))
}

/// Link LOS probability of the n-th nearest active AP against active intensity.
pub fn run_fig2(cfg: &ExperimentConfig) -> Result<Vec<Fig2Row>, RunError> {
    cfg.validate()?;
    let params = cfg.channel.params();
    let orders = &cfg.sweep.los_orders;
    let max_n = *orders.iter().max().expect("validated non-empty");
    let geom = cfg.geometry.sim_geometry();
    let per_point: Vec<Vec<Fig2Row>> = cfg
        .sweep
        .lambda_active
        .values()
        .par_iter()
        .map(|&lam| -> Result<Vec<Fig2Row>, RunError> {
            let (d, g) = los_sweep_setup(lam, &geom)?;
            let sims = empirical_link_los_probs(max_n, &d, &params, &g, cfg.sweep.los_draws, cfg.seed)?;
            orders
                .iter()
                .map(|&n| {
                    let e = &sims[n as usize - 1];
                    Ok(Fig2Row {
                        lambda_active: lam,
                        n,
                        p_analytic: link_los_prob(n, lam, params.los_scale)?,
                        p_sim: e.proportion.p_hat,
                        ci: e.proportion.ci_halfwidth,
                        draws: e.draws,
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

/// One coverage point: analytic bounds and simulated coverage.
///
/// Numerical failures are kept in the row's `status` with NaN values.
pub fn coverage_row(cfg: &ExperimentConfig, ap: f64, ue: f64, trials: u64) -> Result<Fig3Row, RunError> {
    let d = DensityConfig::new(ap, ue)?;
    let params = cfg.channel.params();
    let quad = cfg.quadrature.settings();
    let mut status = Vec::new();
    let (lower, upper) = match coverage_bounds(db_to_linear(cfg.theta_db), &d, &params, &quad) {
        Ok(b) => (b.lower, b.upper),
        Err(e) if e.is_numerical() => {
            status.push(format!("bounds: {e}"));
            (f64::NAN, f64::NAN)
        }
        Err(e) => return Err(e.into()),
    };
    let geom = cfg.geometry.sim_geometry();
    let (sim, ci, sigma) = match simulate_sirs(&d, &params, &geom, trials, cfg.seed) {
        Ok(s) => {
            let c = s.coverage(cfg.theta_db);
            (c.p_hat, c.ci_halfwidth, c.sigma())
        }
        Err(e @ cov3d_core::Error::Degenerate { .. }) | Err(e @ cov3d_core::Error::Quadrature { .. }) => {
            status.push(format!("simulation: {e}"));
            (f64::NAN, f64::NAN, f64::NAN)
        }
        Err(e) => return Err(e.into()),
    };
    Ok(Fig3Row {
        lambda_ap: ap,
        lambda_ue: ue,
        theta_db: cfg.theta_db,
        cov_lower: lower,
        cov_upper: upper,
        cov_sim: sim,
        ci,
        trials,
        seed: cfg.seed,
        sigma,
        status: if status.is_empty() { "ok".to_string() } else { status.join("; ") },
    })
}

/// Coverage bounds and simulated coverage against AP intensity, one curve per UE intensity.
pub fn run_fig3(cfg: &ExperimentConfig) -> Result<Vec<Fig3Row>, RunError> {
    cfg.validate()?;
    grid_points(cfg)
        .par_iter()
        .map(|&(ap, ue)| coverage_row(cfg, ap, ue, cfg.trials))
        .collect()
}
