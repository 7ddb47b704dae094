//! Monte-Carlo estimation of coverage, AP activity and link LOS probability.
//!
//! Trial `t` of a run seeded with `s` draws its network from
//! `stream(s, Network, t)` and its channel from `stream(s, Channel, t)`, and
//! results are gathered in trial order, so the output does not depend on the
//! number of worker threads. Channel draws are made for every AP in index
//! order, active or not, so two runs that share a seed and an AP intensity
//! see the same APs and the same channels whatever the UE intensity.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::analytic::{db_to_linear, DensityConfig};
use crate::channel::{ChannelParams, LinkState};
use crate::error::{Error, Result};
use crate::geometry::{
    ball_volume, mean_nearest_distance, radius_for_count, realize_network, sample_activity,
    NetworkRealization, RegionRadius, SimGeometry, TypicalUe,
};
use crate::quadrature::{integrate, integrate_power_tail, QuadratureSettings};
use crate::rng::{stream, Purpose};
use crate::stats::{normal_halfwidth, proportion_sigma, wilson_interval};

/// Fewest trials accepted by the coverage simulator.
pub const MIN_TRIALS: u64 = 100;

/// A binomial proportion with its 95% interval.
///
/// The half-width is the normal approximation unless fewer than five
/// successes or failures were seen, in which case the Wilson interval is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proportion {
    pub p_hat: f64,
    pub ci_halfwidth: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub successes: u64,
    pub total: u64,
}

impl Proportion {
    pub fn from_counts(successes: u64, total: u64) -> Self {
        let p_hat = if total == 0 { f64::NAN } else { successes as f64 / total as f64 };
        let (ci_low, ci_high, ci_halfwidth) = if successes < 5 || successes + 5 > total {
            let (lo, hi) = wilson_interval(successes, total);
            (lo, hi, 0.5 * (hi - lo))
        } else {
            let h = normal_halfwidth(p_hat, total);
            ((p_hat - h).max(0.0), (p_hat + h).min(1.0), h)
        };
        Self { p_hat, ci_halfwidth, ci_low, ci_high, successes, total }
    }

    /// Binomial standard error at the estimate.
    pub fn sigma(&self) -> f64 {
        proportion_sigma(self.p_hat, self.total)
    }
}

/// Empirical coverage probability P(SIR ≥ θ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageEstimate {
    pub p_hat: f64,
    pub ci_halfwidth: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub covered_count: u64,
    pub seed: u64,
}

impl CoverageEstimate {
    pub fn from_counts(covered_count: u64, trials: u64, seed: u64) -> Self {
        let p = Proportion::from_counts(covered_count, trials);
        Self {
            p_hat: p.p_hat,
            ci_halfwidth: p.ci_halfwidth,
            ci_low: p.ci_low,
            ci_high: p.ci_high,
            trials,
            covered_count,
            seed,
        }
    }

    pub fn sigma(&self) -> f64 {
        proportion_sigma(self.p_hat, self.trials)
    }
}

/// Channel randomness of one AP-to-origin link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDraw {
    /// The link is LOS when this uniform falls below the LOS probability.
    pub los_uniform: f64,
    /// Power fading if the link is LOS: Gamma(N_L, 1/N_L).
    pub fading_los: f64,
    /// Power fading if the link is NLOS: Exp(1).
    pub fading_nlos: f64,
}

impl LinkDraw {
    pub fn state(&self, d: f64, params: &ChannelParams) -> LinkState {
        LinkState { is_los: self.los_uniform < params.los_prob(d) }
    }
}

/// One [`LinkDraw`] per AP, in index order.
pub fn draw_links<R: Rng + ?Sized>(count: usize, params: &ChannelParams, rng: &mut R) -> Vec<LinkDraw> {
    let n = params.nakagami_shape;
    (0..count)
        .map(|_| {
            let los_uniform: f64 = rng.random();
            let first: f64 = rng.sample(Exp1);
            let rest: f64 = (1..n).map(|_| rng.sample::<f64, _>(Exp1)).sum();
            LinkDraw {
                los_uniform,
                fading_los: (first + rest) / n as f64,
                fading_nlos: first,
            }
        })
        .collect()
}

/// Serving power and the interference power of the active non-serving APs.
pub fn received_powers(net: &NetworkRealization, params: &ChannelParams, draws: &[LinkDraw]) -> (f64, f64) {
    let power = |i: usize| {
        let d = net.aps.points[i].norm();
        let draw = &draws[i];
        let state = draw.state(d, params);
        let fading = if state.is_los { draw.fading_los } else { draw.fading_nlos };
        fading * params.inverse_path_loss(d, state)
    };
    let signal = power(net.serving_index);
    let interference = net.interferers().map(|(i, _)| power(i)).sum();
    (signal, interference)
}

/// SIR of the typical UE in `net`; +∞ when no AP interferes.
pub fn compute_sir<R: Rng + ?Sized>(net: &NetworkRealization, params: &ChannelParams, rng: &mut R) -> f64 {
    let draws = draw_links(net.aps.len(), params, rng);
    let (s, i) = received_powers(net, params, &draws);
    if i > 0.0 { s / i } else { f64::INFINITY }
}

/// Geometry of a coverage run after the automatic rules are applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedGeometry {
    pub geometry: SimGeometry,
    pub ap_radius: f64,
    pub ue_radius: f64,
    /// Mean interference per unit active fraction from APs beyond `ap_radius`,
    /// 4πλ_AP ∫_R^∞ E[fading/PL(x)] x² dx under the simulator LOS law.
    pub far_field_per_activity: f64,
    /// Share of the mean interference (beyond the mean nearest distance)
    /// that comes from outside the AP ball.
    pub tail_share: f64,
}

fn mean_gain_integral(from: f64, to: Option<f64>, params: &ChannelParams) -> Result<f64> {
    let quad = QuadratureSettings { relative_tolerance: 1e-7, max_subdivisions: 400, ..Default::default() };
    let g = |x: f64| {
        let p = params.los_prob(x);
        (p / (params.k_los * x.powf(params.alpha_los))
            + (1.0 - p) / (params.k_nlos * x.powf(params.alpha_nlos)))
            * x
            * x
    };
    let los_end = params.los_negligible_beyond(1e-18).max(from);
    let mut total = 0.0;
    let end = to.unwrap_or(f64::INFINITY);
    let mid = los_end.min(end);
    if mid > from {
        total += integrate(g, from, mid, &quad, "mean interference")?.value;
    }
    if end > mid {
        total += match to {
            Some(b) => integrate(g, mid, b, &quad, "mean interference")?.value,
            None => integrate_power_tail(g, mid, params.alpha_nlos - 2.0, &quad, "mean interference tail")?.value,
        };
    }
    Ok(total)
}

/// Apply the automatic radius rules.
///
/// An `Auto` AP radius is the smallest radius that holds at least
/// `min_expected_aps` APs on average and leaves at most `tail_budget` of the
/// mean interference outside the AP ball, capped at `max_expected_aps`.
pub fn resolve_geometry(d: &DensityConfig, params: &ChannelParams, geom: &SimGeometry) -> Result<ResolvedGeometry> {
    geom.validate()?;
    d.validate()?;
    params.validate()?;
    let lambda = d.lambda_ap;
    let r0 = mean_nearest_distance(lambda);
    let total = mean_gain_integral(r0, None, params)?;
    let beyond = |r: f64| -> Result<f64> {
        Ok(if r <= r0 { total } else { total - mean_gain_integral(r0, Some(r), params)? })
    };
    let ap_radius = match geom.ap_region_radius {
        RegionRadius::Fixed(r) => r,
        RegionRadius::Auto => {
            let r_min = radius_for_count(geom.min_expected_aps, lambda);
            let r_cap = radius_for_count(geom.max_expected_aps, lambda);
            if beyond(r_min)? <= geom.tail_budget * total {
                r_min
            } else if beyond(r_cap)? > geom.tail_budget * total {
                r_cap
            } else {
                let (mut lo, mut hi) = (r_min, r_cap);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if beyond(mid)? <= geom.tail_budget * total {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    };
    let expected = lambda * ball_volume(ap_radius);
    if expected > geom.point_cap {
        return Err(Error::config(
            "ap_region_radius",
            format!("expected AP count {expected:.3e} exceeds the cap {:e}", geom.point_cap),
        ));
    }
    let far = mean_gain_integral(ap_radius, None, params)?;
    let resolved = SimGeometry { ap_region_radius: RegionRadius::Fixed(ap_radius), ..*geom };
    Ok(ResolvedGeometry {
        geometry: resolved,
        ap_radius,
        ue_radius: ap_radius + geom.guard_margin(lambda),
        far_field_per_activity: 4.0 * PI * lambda * far,
        tail_share: if total > 0.0 { beyond(ap_radius)? / total } else { 0.0 },
    })
}

/// Per-trial SIRs of a coverage run.
#[derive(Debug, Clone, PartialEq)]
pub struct SirSamples {
    pub sirs: Vec<f64>,
    pub seed: u64,
    pub redraws: u64,
    pub geometry: ResolvedGeometry,
}

impl SirSamples {
    pub fn trials(&self) -> u64 {
        self.sirs.len() as u64
    }

    /// Coverage at a threshold in dB, evaluated on the stored SIRs.
    pub fn coverage(&self, theta_db: f64) -> CoverageEstimate {
        let theta = db_to_linear(theta_db);
        let covered = self.sirs.iter().filter(|&&s| s >= theta).count() as u64;
        CoverageEstimate::from_counts(covered, self.trials(), self.seed)
    }
}

/// Simulate `trials` independent networks and keep the SIR of each.
pub fn simulate_sirs(
    d: &DensityConfig,
    params: &ChannelParams,
    geom: &SimGeometry,
    trials: u64,
    seed: u64,
) -> Result<SirSamples> {
    if trials < MIN_TRIALS {
        return Err(Error::config("trials", format!("must be at least {MIN_TRIALS}, got {trials}")));
    }
    let resolved = resolve_geometry(d, params, geom)?;
    let g = resolved.geometry;
    let results: Vec<(f64, u32)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, u32)> {
            let mut net_rng = stream(seed, Purpose::Network, t);
            let net = realize_network(d, &g, &mut net_rng)?;
            let mut ch_rng = stream(seed, Purpose::Channel, t);
            let draws = draw_links(net.aps.len(), params, &mut ch_rng);
            let (signal, mut interference) = received_powers(&net, params, &draws);
            if g.far_field_compensation {
                interference += empirical_activity(&net) * resolved.far_field_per_activity;
            }
            let sir = if interference > 0.0 { signal / interference } else { f64::INFINITY };
            Ok((sir, net.redraws))
        })
        .collect::<Result<_>>()?;
    let redraws = results.iter().map(|r| r.1 as u64).sum();
    Ok(SirSamples {
        sirs: results.into_iter().map(|r| r.0).collect(),
        seed,
        redraws,
        geometry: resolved,
    })
}

/// Active fraction of the APs within the transmit radius, leaving out the
/// AP the typical UE switched on.
fn empirical_activity(net: &NetworkRealization) -> f64 {
    let (active, n) = net.transmit_region_activity();
    match net.typical_ue {
        TypicalUe::Counted if n > 1 => (active - 1) as f64 / (n - 1) as f64,
        TypicalUe::Counted => 0.0,
        TypicalUe::Probe => active as f64 / n as f64,
    }
}

/// Empirical P(SIR ≥ θ) at `theta_db`.
pub fn simulate_coverage(
    theta_db: f64,
    d: &DensityConfig,
    params: &ChannelParams,
    geom: &SimGeometry,
    trials: u64,
    seed: u64,
) -> Result<CoverageEstimate> {
    Ok(simulate_sirs(d, params, geom, trials, seed)?.coverage(theta_db))
}

/// A pooled proportion together with its sampling bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProportionEstimate {
    pub proportion: Proportion,
    /// Accepted draws.
    pub draws: u64,
    /// Draws thrown away (no AP, or too few active APs).
    pub rejected: u64,
}

/// Fraction of APs with at least one UE in their cell, pooled over `draws`
/// networks with no typical UE.
///
/// APs and UEs are drawn out to the AP radius plus the guard margin; only
/// APs within the AP radius are counted.
pub fn empirical_activity_probability(
    d: &DensityConfig,
    geom: &SimGeometry,
    draws: u64,
    seed: u64,
) -> Result<ProportionEstimate> {
    geom.validate()?;
    d.validate()?;
    let ap_radius = geom.ap_radius(d.lambda_ap);
    let ue_radius = ap_radius + geom.guard_margin(d.lambda_ap);
    let counts: Vec<Option<(u64, u64)>> = (0..draws)
        .into_par_iter()
        .map(|t| -> Result<Option<(u64, u64)>> {
            let mut rng = stream(seed, Purpose::Network, t);
            let draw = sample_activity(
                d,
                ue_radius,
                ue_radius,
                TypicalUe::Probe,
                geom.ue_sampling,
                geom.point_cap,
                &mut rng,
            )?;
            Ok(draw.map(|dr| {
                dr.aps
                    .points
                    .iter()
                    .zip(&dr.active)
                    .filter(|(p, _)| p.norm() <= ap_radius)
                    .fold((0u64, 0u64), |(a, n), (_, &on)| (a + u64::from(on), n + 1))
            }))
        })
        .collect::<Result<_>>()?;
    let (mut active, mut total, mut rejected) = (0, 0, 0);
    for c in &counts {
        match c {
            Some((a, n)) => {
                active += a;
                total += n;
            }
            None => rejected += 1,
        }
    }
    Ok(ProportionEstimate {
        proportion: Proportion::from_counts(active, total),
        draws: draws - rejected,
        rejected,
    })
}

/// Empirical probability that the link to the n-th nearest active AP is
/// LOS under the cubic-exponential law, for n = 1..=`max_n` from the same draws.
///
/// The typical UE does not activate APs here. Draws with fewer than `n`
/// active APs are rejected for that `n`.
pub fn empirical_link_los_probs(
    max_n: u32,
    d: &DensityConfig,
    params: &ChannelParams,
    geom: &SimGeometry,
    draws: u64,
    seed: u64,
) -> Result<Vec<ProportionEstimate>> {
    if max_n == 0 {
        return Err(Error::config("n", "must be at least 1"));
    }
    geom.validate()?;
    params.validate()?;
    let ap_radius = geom.ap_radius(d.lambda_ap);
    let ue_radius = ap_radius + geom.guard_margin(d.lambda_ap);
    let l = params.los_scale;
    let per_draw: Vec<Vec<Option<bool>>> = (0..draws)
        .into_par_iter()
        .map(|t| -> Result<Vec<Option<bool>>> {
            let mut rng = stream(seed, Purpose::Network, t);
            let draw = sample_activity(
                d,
                ap_radius,
                ue_radius,
                TypicalUe::Probe,
                geom.ue_sampling,
                geom.point_cap,
                &mut rng,
            )?;
            let mut dist: Vec<f64> = match draw {
                Some(dr) => dr
                    .aps
                    .points
                    .iter()
                    .zip(&dr.active)
                    .filter(|(_, &a)| a)
                    .map(|(p, _)| p.norm())
                    .collect(),
                None => Vec::new(),
            };
            dist.sort_by(f64::total_cmp);
            let mut los_rng = stream(seed, Purpose::Sampling, t);
            Ok((0..max_n as usize)
                .map(|k| {
                    let u: f64 = los_rng.random();
                    dist.get(k).map(|&r| u < (-(r / l).powi(3)).exp())
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..max_n as usize)
        .map(|k| {
            let (mut los, mut ok) = (0u64, 0u64);
            for row in &per_draw {
                if let Some(v) = row[k] {
                    ok += 1;
                    los += u64::from(v);
                }
            }
            ProportionEstimate {
                proportion: Proportion::from_counts(los, ok),
                draws: ok,
                rejected: draws - ok,
            }
        })
        .collect())
}

/// [`empirical_link_los_probs`] for a single `n`.
pub fn empirical_link_los_prob(
    n: u32,
    d: &DensityConfig,
    params: &ChannelParams,
    geom: &SimGeometry,
    draws: u64,
    seed: u64,
) -> Result<ProportionEstimate> {
    Ok(empirical_link_los_probs(n, d, params, geom, draws, seed)?
        .pop()
        .expect("n ≥ 1 estimates"))
}

/// Sample mean of e^(−sI) with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Monte-Carlo E[e^(−sI)] where I sums fading/PL over a PPP of intensity
/// `lambda_active` in the shell r < |x| ≤ `outer_radius`, with links drawn
/// from the configured LOS law of `params`.
pub fn empirical_interference_laplace(
    s: f64,
    r: f64,
    outer_radius: f64,
    lambda_active: f64,
    params: &ChannelParams,
    realizations: u64,
    seed: u64,
) -> Result<MeanEstimate> {
    params.validate()?;
    if !(r > 0.0 && outer_radius > r && lambda_active > 0.0 && s >= 0.0) {
        return Err(Error::config(
            "r, outer_radius, lambda_active, s",
            "need 0 < r < outer_radius, positive intensity and s ≥ 0",
        ));
    }
    let shell = ball_volume(outer_radius) - ball_volume(r);
    let mean_count = lambda_active * shell;
    let count_law = rand_distr::Poisson::new(mean_count)
        .map_err(|e| Error::config("lambda_active", e.to_string()))?;
    let (r3, big3) = (r.powi(3), outer_radius.powi(3));
    let values: Vec<f64> = (0..realizations)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, Purpose::Interference, t);
            let k: f64 = rand_distr::Distribution::sample(&count_law, &mut rng);
            let mut interference = 0.0;
            for _ in 0..k as u64 {
                let x = (r3 + rng.random::<f64>() * (big3 - r3)).cbrt();
                let draw = draw_links(1, params, &mut rng)[0];
                let state = draw.state(x, params);
                let fading = if state.is_los { draw.fading_los } else { draw.fading_nlos };
                interference += fading * params.inverse_path_loss(x, state);
            }
            (-s * interference).exp()
        })
        .collect();
    let (mean, var) = crate::stats::mean_variance(&values);
    Ok(MeanEstimate {
        mean,
        std_error: (var / values.len() as f64).sqrt(),
        samples: realizations,
    })
}
