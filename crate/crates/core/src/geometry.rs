//! Homogeneous Poisson point processes in balls, nearest-neighbor search and
//! nearest-AP association.
//!
//! An AP is active when at least one UE has it as nearest AP. Two exact
//! samplers decide activity:
//!
//! * **Full** draws the whole UE process in the UE ball and associates every
//!   UE through the grid index.
//! * **Sparse** never materializes the full UE process. For AP `j` the ball
//!   of radius half its nearest-neighbor distance lies inside its Voronoi
//!   cell, so whether that ball holds a UE is a single Bernoulli draw. APs
//!   whose ball came out empty get the UE process sampled, cell by cell of
//!   the grid, only where their Voronoi cell can reach, and the search stops
//!   at the first UE found inside the cell. Voronoi cells are disjoint, so
//!   sampling them independently yields the same law as one joint UE draw.
//!
//! Only the UEs that witness an activation are kept by the sparse sampler.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp1, Poisson};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::analytic::DensityConfig;
use crate::error::{Error, Result};
use crate::special::gamma;

/// Default hard cap on the expected number of points of one sampled process.
pub const DEFAULT_POINT_CAP: f64 = 1e7;

/// A point in R³, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn norm2(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn dist2(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        dx * dx + dy * dy + dz * dz
    }

    pub fn dist(&self, other: &Point3) -> f64 {
        self.dist2(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    fn offset(&self, d: Point3) -> Point3 {
        Point3::new(self.x + d.x, self.y + d.y, self.z + d.z)
    }
}

/// One realization of a homogeneous PPP restricted to a ball about the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PppRealization {
    pub points: Vec<Point3>,
    pub region_radius: f64,
    pub intensity: f64,
}

impl PppRealization {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Expected number of points, intensity · (4/3)πR³.
    pub fn expected_count(&self) -> f64 {
        self.intensity * ball_volume(self.region_radius)
    }
}

pub fn ball_volume(radius: f64) -> f64 {
    4.0 / 3.0 * PI * radius * radius * radius
}

/// Uniform point in the ball of radius `radius` about the origin.
pub fn uniform_in_ball<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point3 {
    let r = radius * rng.random::<f64>().cbrt();
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    Point3::new(r * s * phi.cos(), r * s * phi.sin(), r * z)
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("finite positive Poisson mean");
    dist.sample(rng) as u64
}

/// Sample a homogeneous PPP of `intensity` (per m³) in the ball of `radius` m.
pub fn sample_ppp_ball<R: Rng + ?Sized>(
    intensity: f64,
    radius: f64,
    rng: &mut R,
) -> Result<PppRealization> {
    sample_ppp_ball_capped(intensity, radius, DEFAULT_POINT_CAP, rng)
}

/// [`sample_ppp_ball`] with an explicit cap on the expected point count.
pub fn sample_ppp_ball_capped<R: Rng + ?Sized>(
    intensity: f64,
    radius: f64,
    cap: f64,
    rng: &mut R,
) -> Result<PppRealization> {
    if !(intensity > 0.0) || !intensity.is_finite() {
        return Err(Error::config("intensity", format!("must be positive, got {intensity}")));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::config("radius", format!("must be positive, got {radius}")));
    }
    let mean = intensity * ball_volume(radius);
    if mean > cap {
        return Err(Error::config(
            "intensity, radius",
            format!(
                "expected point count {mean:.3e} (intensity {intensity:e}, radius {radius:e} m) \
                 exceeds the cap {cap:e}"
            ),
        ));
    }
    let n = poisson_count(mean, rng);
    let points = (0..n).map(|_| uniform_in_ball(radius, rng)).collect();
    Ok(PppRealization {
        points,
        region_radius: radius,
        intensity,
    })
}

/// Result of [`nearest_indices`].
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbors {
    /// `(index, distance)` in nondecreasing distance, lower index first on ties.
    pub items: Vec<(usize, f64)>,
    /// Set when fewer than the requested `k` points exist.
    pub truncated: bool,
}

/// The `k` points nearest to `query`.
pub fn nearest_indices(points: &[Point3], query: Point3, k: usize) -> Result<Neighbors> {
    if k == 0 {
        return Err(Error::domain("nearest_indices", "k must be at least 1"));
    }
    if points.is_empty() {
        return Err(Error::domain("nearest_indices", "point list is empty"));
    }
    let truncated = k > points.len();
    let k = k.min(points.len());
    // max-heap on (distance², index) keeps the k best seen so far
    let mut heap: std::collections::BinaryHeap<(OrdF64, usize)> =
        std::collections::BinaryHeap::with_capacity(k + 1);
    for (i, p) in points.iter().enumerate() {
        let key = (OrdF64(p.dist2(&query)), i);
        if heap.len() < k {
            heap.push(key);
        } else if key < *heap.peek().expect("non-empty heap") {
            heap.pop();
            heap.push(key);
        }
    }
    let mut items: Vec<(OrdF64, usize)> = heap.into_vec();
    items.sort();
    Ok(Neighbors {
        items: items.into_iter().map(|(d2, i)| (i, d2.0.sqrt())).collect(),
        truncated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Uniform-grid index over a fixed point set inside the cube [−h, h]³.
#[derive(Debug, Clone)]
pub struct GridIndex {
    half_extent: f64,
    cell: f64,
    dims: usize,
    starts: Vec<u32>,
    coords: Vec<Point3>,
    ids: Vec<u32>,
}

impl GridIndex {
    /// Index `points`, all of which must lie in [−half_extent, half_extent]³.
    /// The grid is sized for about one point per two cells.
    pub fn new(points: &[Point3], half_extent: f64) -> Self {
        let side = 2.0 * half_extent;
        let cube_volume = side * side * side;
        let target_cells = (points.len() as f64 / 0.5).max(1.0) * cube_volume
            / ball_volume(half_extent).max(f64::MIN_POSITIVE);
        let dims = (target_cells.cbrt().ceil() as usize).clamp(1, 400);
        let cell = side / dims as f64;
        let ncells = dims * dims * dims;
        let mut counts = vec![0u32; ncells + 1];
        let cell_ids: Vec<usize> = points
            .iter()
            .map(|p| {
                let (i, j, k) = Self::coords_of(p, half_extent, cell, dims);
                (i * dims + j) * dims + k
            })
            .collect();
        for &c in &cell_ids {
            counts[c + 1] += 1;
        }
        for c in 0..ncells {
            counts[c + 1] += counts[c];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut coords = vec![Point3::ORIGIN; points.len()];
        let mut ids = vec![0u32; points.len()];
        for (idx, (&c, p)) in cell_ids.iter().zip(points).enumerate() {
            let slot = fill[c] as usize;
            coords[slot] = *p;
            ids[slot] = idx as u32;
            fill[c] += 1;
        }
        Self {
            half_extent,
            cell,
            dims,
            starts,
            coords,
            ids,
        }
    }

    fn coords_of(p: &Point3, half: f64, cell: f64, dims: usize) -> (usize, usize, usize) {
        let f = |v: f64| (((v + half) / cell).floor().max(0.0) as usize).min(dims - 1);
        (f(p.x), f(p.y), f(p.z))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    fn cell_coords(&self, p: &Point3) -> (usize, usize, usize) {
        Self::coords_of(p, self.half_extent, self.cell, self.dims)
    }

    fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims + j) * self.dims + k
    }

    fn cell_origin(&self, i: usize, j: usize, k: usize) -> Point3 {
        Point3::new(
            -self.half_extent + i as f64 * self.cell,
            -self.half_extent + j as f64 * self.cell,
            -self.half_extent + k as f64 * self.cell,
        )
    }

    fn scan_cell(&self, c: usize, q: &Point3, exclude: Option<usize>, best: &mut (f64, usize)) {
        let (s, e) = (self.starts[c] as usize, self.starts[c + 1] as usize);
        for slot in s..e {
            let id = self.ids[slot] as usize;
            if Some(id) == exclude {
                continue;
            }
            let d2 = self.coords[slot].dist2(q);
            if d2 < best.0 || (d2 == best.0 && id < best.1) {
                *best = (d2, id);
            }
        }
    }

    /// Indices of the points in the 3×3×3 block of cells around `q`.
    fn block_members(&self, q: &Point3) -> impl Iterator<Item = usize> + '_ {
        let (ci, cj, ck) = self.cell_coords(q);
        let range = |c: usize| c.saturating_sub(1)..=(c + 1).min(self.dims - 1);
        range(ci).flat_map(move |i| {
            range(cj).flat_map(move |j| {
                range(ck).flat_map(move |k| {
                    let c = self.cell_index(i, j, k);
                    (self.starts[c] as usize..self.starts[c + 1] as usize).map(|slot| self.ids[slot] as usize)
                })
            })
        })
    }

    /// Nearest indexed point to `q` as `(index, distance)`; lower index wins ties.
    pub fn nearest(&self, q: &Point3) -> Option<(usize, f64)> {
        self.nearest_excluding(q, None)
    }

    /// Like [`GridIndex::nearest`] but skipping the point with index `exclude`.
    pub fn nearest_excluding(&self, q: &Point3, exclude: Option<usize>) -> Option<(usize, f64)> {
        let available = self.len() - usize::from(exclude.is_some_and(|e| e < self.len()));
        if available == 0 {
            return None;
        }
        let (ci, cj, ck) = self.cell_coords(q);
        let dims = self.dims as isize;
        // q may sit outside the grid cube; ring distances then need the offset
        let lo = self.cell_origin(ci, cj, ck);
        let outside = [
            (lo.x - q.x).max(q.x - (lo.x + self.cell)).max(0.0),
            (lo.y - q.y).max(q.y - (lo.y + self.cell)).max(0.0),
            (lo.z - q.z).max(q.z - (lo.z + self.cell)).max(0.0),
        ];
        let slack = outside[0].max(outside[1]).max(outside[2]);
        // every point beyond the scanned block is at least this much farther
        // than the block's ring count suggests
        let margin = if slack > 0.0 {
            -slack
        } else {
            let face = |v: f64, a: f64| (v - a).min(a + self.cell - v);
            face(q.x, lo.x).min(face(q.y, lo.y)).min(face(q.z, lo.z)).max(0.0)
        };
        let mut best = (f64::INFINITY, usize::MAX);
        for ring in 0..=self.dims as isize {
            let (i0, j0, k0) = (ci as isize, cj as isize, ck as isize);
            for i in (i0 - ring).max(0)..=(i0 + ring).min(dims - 1) {
                let di = (i - i0).abs();
                for j in (j0 - ring).max(0)..=(j0 + ring).min(dims - 1) {
                    let dj = (j - j0).abs();
                    let edge = di == ring || dj == ring;
                    if edge {
                        for k in (k0 - ring).max(0)..=(k0 + ring).min(dims - 1) {
                            let c = self.cell_index(i as usize, j as usize, k as usize);
                            self.scan_cell(c, q, exclude, &mut best);
                        }
                    } else {
                        for k in [k0 - ring, k0 + ring] {
                            if k < 0 || k >= dims || (ring == 0 && k != k0) {
                                continue;
                            }
                            let c = self.cell_index(i as usize, j as usize, k as usize);
                            self.scan_cell(c, q, exclude, &mut best);
                            if ring == 0 {
                                break;
                            }
                        }
                    }
                }
            }
            if best.1 != usize::MAX {
                let reach = (ring as f64 * self.cell + margin).max(0.0);
                if best.0 <= reach * reach {
                    break;
                }
            }
        }
        (best.1 != usize::MAX).then(|| (best.1, best.0.sqrt()))
    }
}

/// How the typical UE at the origin takes part in a realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TypicalUe {
    /// The typical UE is one more user: its nearest AP is active and serves it.
    #[default]
    Counted,
    /// The typical UE observes the network without activating any AP and is
    /// served by the nearest active AP.
    Probe,
}

/// Activity sampler selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UeSampling {
    /// Sparse when UEs outnumber APs by more than [`SPARSE_UE_RATIO`].
    #[default]
    Auto,
    Full,
    Sparse,
}

/// UE-to-AP intensity ratio above which `UeSampling::Auto` picks the sparse sampler.
pub const SPARSE_UE_RATIO: f64 = 4.0;

/// A radius that is either fixed or derived from the densities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RegionRadius {
    #[default]
    Auto,
    Fixed(f64),
}

/// Size and sampling rules of the simulated region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGeometry {
    /// Radius of the AP ball; `Auto` holds `min_expected_aps` on average.
    pub ap_region_radius: RegionRadius,
    /// Extra UE shell beyond the AP ball; `Auto` is three mean nearest-AP distances.
    pub ue_guard_margin: RegionRadius,
    pub min_expected_aps: f64,
    /// Upper limit for the interference-tail rule of the simulator. Equal to
    /// `min_expected_aps` by default, which turns the rule off; the far-field
    /// compensation then carries the interference from beyond the AP ball.
    pub max_expected_aps: f64,
    pub redraw_limit: u32,
    /// Largest share of mean interference allowed to come from beyond the AP ball.
    pub tail_budget: f64,
    /// Add the mean interference of active APs beyond the AP ball to every SIR.
    pub far_field_compensation: bool,
    pub typical_ue: TypicalUe,
    pub ue_sampling: UeSampling,
    pub point_cap: f64,
}

impl Default for SimGeometry {
    fn default() -> Self {
        Self {
            ap_region_radius: RegionRadius::Auto,
            ue_guard_margin: RegionRadius::Auto,
            min_expected_aps: 2000.0,
            max_expected_aps: 2000.0,
            redraw_limit: 100,
            tail_budget: 0.01,
            far_field_compensation: true,
            typical_ue: TypicalUe::Counted,
            ue_sampling: UeSampling::Auto,
            point_cap: DEFAULT_POINT_CAP,
        }
    }
}

impl SimGeometry {
    pub fn validate(&self) -> Result<()> {
        if let RegionRadius::Fixed(r) = self.ap_region_radius {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::config("ap_region_radius", format!("must be positive, got {r}")));
            }
        }
        if let RegionRadius::Fixed(g) = self.ue_guard_margin {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::config("ue_guard_margin", format!("must be non-negative, got {g}")));
            }
        }
        if !(self.min_expected_aps >= 1.0) {
            return Err(Error::config(
                "min_expected_aps",
                format!("must be at least 1, got {}", self.min_expected_aps),
            ));
        }
        if !(self.max_expected_aps >= self.min_expected_aps) {
            return Err(Error::config(
                "max_expected_aps",
                "must be at least min_expected_aps",
            ));
        }
        if self.redraw_limit == 0 {
            return Err(Error::config("redraw_limit", "must be positive"));
        }
        if !(self.tail_budget > 0.0 && self.tail_budget < 1.0) {
            return Err(Error::config("tail_budget", "must lie in (0, 1)"));
        }
        if !(self.point_cap > 0.0) {
            return Err(Error::config("point_cap", "must be positive"));
        }
        Ok(())
    }

    /// AP-ball radius; `Auto` uses the expected-count rule only.
    pub fn ap_radius(&self, lambda_ap: f64) -> f64 {
        match self.ap_region_radius {
            RegionRadius::Fixed(r) => r,
            RegionRadius::Auto => radius_for_count(self.min_expected_aps, lambda_ap),
        }
    }

    /// Guard margin of the UE ball.
    pub fn guard_margin(&self, lambda_ap: f64) -> f64 {
        match self.ue_guard_margin {
            RegionRadius::Fixed(g) => g,
            RegionRadius::Auto => 3.0 * mean_nearest_distance(lambda_ap),
        }
    }
}

/// Radius of the ball holding `count` points of a PPP with `intensity` on average.
pub fn radius_for_count(count: f64, intensity: f64) -> f64 {
    (count / (intensity * 4.0 / 3.0 * PI)).cbrt()
}

/// Mean nearest-point distance Γ(4/3)·((4/3)πλ)^(−1/3) of a 3-D PPP.
pub fn mean_nearest_distance(intensity: f64) -> f64 {
    let g = gamma(4.0 / 3.0).expect("Γ(4/3) is finite");
    g * (4.0 / 3.0 * PI * intensity).powf(-1.0 / 3.0)
}

/// APs, the UEs that decided their activity, and the activity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityDraw {
    pub aps: PppRealization,
    /// All UEs (full sampler) or the witness UEs (sparse sampler). The typical
    /// UE, when counted, is the last entry.
    pub ues: PppRealization,
    pub active: Vec<bool>,
    /// Nearest AP to the origin.
    pub nearest_to_origin: usize,
    pub sampling: UeSampling,
}

impl ActivityDraw {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Nearest active AP to the origin, if any.
    pub fn nearest_active(&self) -> Option<usize> {
        self.aps
            .points
            .iter()
            .enumerate()
            .filter(|(i, _)| self.active[*i])
            .min_by(|a, b| a.1.norm2().total_cmp(&b.1.norm2()).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    }
}

/// One sampled network seen from the typical UE at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    pub aps: PppRealization,
    pub ues: PppRealization,
    pub active: Vec<bool>,
    pub serving_index: usize,
    pub ue_region_radius: f64,
    /// Only active APs within this radius transmit. APs and UEs beyond it,
    /// out to `ue_region_radius`, exist so that activity near the rim is
    /// decided as in an unbounded network.
    pub transmit_radius: f64,
    pub typical_ue: TypicalUe,
    /// Sampler that produced the activity flags (`Full` or `Sparse`).
    pub sampling: UeSampling,
    /// Rejected draws before this one.
    pub redraws: u32,
}

impl NetworkRealization {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn serving_point(&self) -> Point3 {
        self.aps.points[self.serving_index]
    }

    /// Active APs within the transmit radius other than the serving one.
    pub fn interferers(&self) -> impl Iterator<Item = (usize, &Point3)> + '_ {
        let r2 = self.transmit_radius * self.transmit_radius;
        self.aps
            .points
            .iter()
            .enumerate()
            .filter(move |(i, p)| self.active[*i] && *i != self.serving_index && p.norm2() <= r2)
    }

    /// `(active, total)` AP counts within the transmit radius.
    pub fn transmit_region_activity(&self) -> (usize, usize) {
        let r2 = self.transmit_radius * self.transmit_radius;
        self.aps
            .points
            .iter()
            .zip(&self.active)
            .filter(|(p, _)| p.norm2() <= r2)
            .fold((0, 0), |(a, n), (_, &on)| (a + usize::from(on), n + 1))
    }
}

/// Activity flags from nearest-AP association of `ues` (unique nearest,
/// lower index on exact ties).
pub fn activity_from_ues(aps: &[Point3], ues: &[Point3]) -> Vec<bool> {
    let mut active = vec![false; aps.len()];
    if aps.is_empty() {
        return active;
    }
    let half = aps
        .iter()
        .chain(ues)
        .map(|p| p.x.abs().max(p.y.abs()).max(p.z.abs()))
        .fold(1e-9, f64::max);
    let grid = GridIndex::new(aps, half);
    for u in ues {
        if let Some((k, _)) = grid.nearest(u) {
            active[k] = true;
        }
    }
    active
}

fn resolve_sampling(mode: UeSampling, lambda_ap: f64, lambda_ue: f64) -> UeSampling {
    match mode {
        UeSampling::Auto if lambda_ue > SPARSE_UE_RATIO * lambda_ap => UeSampling::Sparse,
        UeSampling::Auto => UeSampling::Full,
        m => m,
    }
}

/// Sample APs and decide their activity; `None` when the AP draw is empty.
///
/// The AP process is drawn first so realizations that share a random stream
/// share AP positions regardless of the UE intensity. With the sparse
/// sampler they also share the UE process, and the active set only grows
/// with the UE intensity.
pub fn sample_activity<R: Rng + ?Sized>(
    densities: &DensityConfig,
    ap_radius: f64,
    ue_radius: f64,
    typical: TypicalUe,
    sampling: UeSampling,
    point_cap: f64,
    rng: &mut R,
) -> Result<Option<ActivityDraw>> {
    densities.validate()?;
    if !(ue_radius >= ap_radius) {
        return Err(Error::config(
            "ue_region_radius",
            format!("UE radius {ue_radius} must be at least the AP radius {ap_radius}"),
        ));
    }
    let aps = sample_ppp_ball_capped(densities.lambda_ap, ap_radius, point_cap, rng)?;
    if aps.is_empty() {
        return Ok(None);
    }
    let grid = GridIndex::new(&aps.points, ue_radius);
    let nearest_to_origin = grid.nearest(&Point3::ORIGIN).expect("non-empty AP set").0;
    let mut active = vec![false; aps.len()];
    if typical == TypicalUe::Counted {
        active[nearest_to_origin] = true;
    }
    let lambda_ue = densities.lambda_ue;
    let sampling = resolve_sampling(sampling, densities.lambda_ap, lambda_ue);
    let mut ue_points = Vec::new();
    if lambda_ue > 0.0 {
        match sampling {
            UeSampling::Sparse => {
                let mut sampler = SparseActivity {
                    aps: &aps.points,
                    grid: &grid,
                    lambda_ue,
                    ue_radius,
                    key: rng.random(),
                    upper_nn: Vec::new(),
                    visit_stamp: Vec::new(),
                    stamp: 0,
                };
                sampler.run(&mut active, &mut ue_points);
            }
            _ => {
                let ues = sample_ppp_ball_capped(lambda_ue, ue_radius, point_cap, rng)?;
                for u in &ues.points {
                    let (k, _) = grid.nearest(u).expect("non-empty AP set");
                    active[k] = true;
                }
                ue_points = ues.points;
            }
        }
    }
    if typical == TypicalUe::Counted {
        ue_points.push(Point3::ORIGIN);
    }
    Ok(Some(ActivityDraw {
        ues: PppRealization {
            points: ue_points,
            region_radius: ue_radius,
            intensity: lambda_ue,
        },
        aps,
        active,
        nearest_to_origin,
        sampling,
    }))
}

/// Neighbors whose bisectors prefilter witness candidates.
const BISECTOR_COUNT: usize = 16;

/// Seed of the stream of AP `j`, or of grid cell `cell` as seen by AP `j`.
fn sub_seed(key: u64, j: usize, cell: Option<usize>) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    let base = mix(key ^ mix(j as u64));
    match cell {
        None => base,
        Some(c) => mix(base ^ mix(!(c as u64))),
    }
}

/// Activity of every AP without realizing the full UE process.
///
/// UEs inside the Voronoi cell of AP j matter to j alone, so each AP gets its
/// own streams. The UE process is realized as a Poisson process in space and
/// an intensity coordinate t, with the UEs at intensity λ being the points
/// with t ≤ λ. Draws sharing a key therefore have nested activity sets as
/// λ_UE grows.
struct SparseActivity<'a> {
    aps: &'a [Point3],
    grid: &'a GridIndex,
    lambda_ue: f64,
    ue_radius: f64,
    key: u64,
    upper_nn: Vec<f64>,
    visit_stamp: Vec<u32>,
    stamp: u32,
}

impl SparseActivity<'_> {
    fn run(&mut self, active: &mut [bool], witnesses: &mut Vec<Point3>) {
        let n = self.aps.len();
        let mut empty_radius = vec![0.0f64; n];
        let mut pending = Vec::new();
        for j in 0..n {
            if active[j] {
                continue;
            }
            let x = self.aps[j];
            let rho = self
                .grid
                .nearest_excluding(&x, Some(j))
                .map_or(f64::INFINITY, |(_, d)| 0.5 * d);
            if x.norm() + rho <= self.ue_radius {
                // first arrival in the inscribed ball, on the intensity axis
                let mut rng = Xoshiro256PlusPlus::seed_from_u64(sub_seed(self.key, j, None));
                let e: f64 = rng.sample(Exp1);
                if e <= self.lambda_ue * ball_volume(rho) {
                    active[j] = true;
                    witnesses.push(x.offset(uniform_in_ball(rho, &mut rng)));
                    continue;
                }
                empty_radius[j] = rho;
            }
            pending.push(j);
        }
        if pending.is_empty() {
            return;
        }
        let dims = self.grid.dims();
        self.upper_nn = vec![f64::NAN; dims * dims * dims];
        self.visit_stamp = vec![0; dims * dims * dims];
        for j in pending {
            if let Some(w) = self.search_witness(j, empty_radius[j]) {
                active[j] = true;
                witnesses.push(w);
            }
        }
    }

    /// Upper bound on the nearest-AP distance of any point in cell `c`.
    fn upper_nn(&mut self, c: usize, lo: &Point3) -> f64 {
        if self.upper_nn[c].is_nan() {
            let h = self.grid.cell_size();
            let center = Point3::new(lo.x + 0.5 * h, lo.y + 0.5 * h, lo.z + 0.5 * h);
            let d = self.grid.nearest(&center).map_or(f64::INFINITY, |(_, d)| d);
            self.upper_nn[c] = d + 0.5 * h * 3f64.sqrt();
        }
        self.upper_nn[c]
    }

    /// Bisector half-spaces between AP j and its nearest neighbors; their
    /// intersection contains the Voronoi cell of j. A point y lies beyond
    /// the bisector with neighbor k when n·y + c > 0.
    fn bisectors(&self, j: usize) -> Vec<(Point3, f64)> {
        let x = self.aps[j];
        let mut near: Vec<(f64, usize)> = self
            .grid
            .block_members(&x)
            .filter(|&k| k != j)
            .map(|k| (self.aps[k].dist2(&x), k))
            .collect();
        if near.len() > BISECTOR_COUNT {
            near.select_nth_unstable_by(BISECTOR_COUNT, |a, b| a.0.total_cmp(&b.0));
            near.truncate(BISECTOR_COUNT);
        }
        let xx = x.norm2();
        near.into_iter()
            .map(|(_, k)| {
                let y = self.aps[k];
                (Point3::new(2.0 * (y.x - x.x), 2.0 * (y.y - x.y), 2.0 * (y.z - x.z)), xx - y.norm2())
            })
            .collect()
    }

    fn search_witness(&mut self, j: usize, empty_radius: f64) -> Option<Point3> {
        let x = self.aps[j];
        let dims = self.grid.dims() as isize;
        let h = self.grid.cell_size();
        let cell_volume = h * h * h;
        let planes = self.bisectors(j);
        let beyond = |y: &Point3| planes.iter().any(|(n, c)| n.x * y.x + n.y * y.y + n.z * y.z + c > 0.0);
        // the whole box lies beyond one bisector
        let box_beyond = |lo: &Point3| {
            planes.iter().any(|(n, c)| {
                let m = |ni: f64, l: f64| (ni * l).min(ni * (l + h));
                m(n.x, lo.x) + m(n.y, lo.y) + m(n.z, lo.z) + c > 0.0
            })
        };
        self.stamp += 1;
        let stamp = self.stamp;
        let start = self.grid.cell_coords(&x);
        let start = (start.0 as isize, start.1 as isize, start.2 as isize);
        let mut queue = VecDeque::new();
        let idx = |i: isize, k: isize, l: isize| ((i * dims + k) * dims + l) as usize;
        self.visit_stamp[idx(start.0, start.1, start.2)] = stamp;
        queue.push_back(start);
        while let Some((ci, cj, ck)) = queue.pop_front() {
            let c = idx(ci, cj, ck);
            let lo = self.grid.cell_origin(ci as usize, cj as usize, ck as usize);
            if box_min_dist(&lo, h, &Point3::ORIGIN) > self.ue_radius {
                continue;
            }
            let bound = self.upper_nn(c, &lo);
            // a cell can meet the Voronoi cell of j only if some point of it
            // is within its own nearest-AP bound of x_j
            if box_min_dist(&lo, h, &x) > bound || box_beyond(&lo) {
                continue;
            }
            for di in -1..=1 {
                for dj in -1..=1 {
                    for dk in -1..=1 {
                        let (ni, nj, nk) = (ci + di, cj + dj, ck + dk);
                        if ni < 0 || nj < 0 || nk < 0 || ni >= dims || nj >= dims || nk >= dims {
                            continue;
                        }
                        let nc = idx(ni, nj, nk);
                        if self.visit_stamp[nc] != stamp {
                            self.visit_stamp[nc] = stamp;
                            queue.push_back((ni, nj, nk));
                        }
                    }
                }
            }
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(sub_seed(self.key, j, Some(c)));
            let mut t = 0.0;
            loop {
                t += rng.sample::<f64, _>(Exp1) / cell_volume;
                if t > self.lambda_ue {
                    break;
                }
                let y = Point3::new(
                    lo.x + h * rng.random::<f64>(),
                    lo.y + h * rng.random::<f64>(),
                    lo.z + h * rng.random::<f64>(),
                );
                if y.norm() > self.ue_radius {
                    continue;
                }
                let d = y.dist(&x);
                if d < empty_radius || d > bound || beyond(&y) {
                    continue;
                }
                if self.grid.nearest(&y).is_some_and(|(k, _)| k == j) {
                    return Some(y);
                }
            }
        }
        None
    }
}

fn box_min_dist(lo: &Point3, h: f64, p: &Point3) -> f64 {
    let gap = |v: f64, a: f64| (a - v).max(v - (a + h)).max(0.0);
    let (dx, dy, dz) = (gap(p.x, lo.x), gap(p.y, lo.y), gap(p.z, lo.z));
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Sample one network realization for the typical UE at the origin.
///
/// APs and UEs are both drawn in the ball of radius AP radius + guard
/// margin; only APs within the AP radius may serve or interfere. Draws with
/// no usable serving AP are redrawn up to `geometry.redraw_limit` times.
pub fn realize_network<R: Rng + ?Sized>(
    densities: &DensityConfig,
    geometry: &SimGeometry,
    rng: &mut R,
) -> Result<NetworkRealization> {
    geometry.validate()?;
    let ap_radius = geometry.ap_radius(densities.lambda_ap);
    let ue_radius = ap_radius + geometry.guard_margin(densities.lambda_ap);
    let mut redraws = 0;
    loop {
        let draw = sample_activity(
            densities,
            ue_radius,
            ue_radius,
            geometry.typical_ue,
            geometry.ue_sampling,
            geometry.point_cap,
            rng,
        )?;
        let serving = draw.as_ref().and_then(|d| match geometry.typical_ue {
            TypicalUe::Counted => Some(d.nearest_to_origin),
            TypicalUe::Probe => d.nearest_active(),
        })
        .filter(|&i| draw.as_ref().is_some_and(|d| d.aps.points[i].norm() <= ap_radius));
        if let (Some(draw), Some(serving_index)) = (draw, serving) {
            return Ok(NetworkRealization {
                aps: draw.aps,
                ues: draw.ues,
                active: draw.active,
                serving_index,
                ue_region_radius: ue_radius,
                transmit_radius: ap_radius,
                typical_ue: geometry.typical_ue,
                sampling: draw.sampling,
                redraws,
            });
        }
        redraws += 1;
        if redraws > geometry.redraw_limit {
            return Err(Error::Degenerate {
                detail: format!(
                    "no usable serving AP with lambda_ap = {:e}, lambda_ue = {:e} in a ball of {ap_radius:.3} m",
                    densities.lambda_ap, densities.lambda_ue
                ),
                redraws,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn brute_nearest(points: &[Point3], q: &Point3, exclude: Option<usize>) -> Option<(usize, f64)> {
        points
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(i, p)| (i, p.dist2(q)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, d2)| (i, d2.sqrt()))
    }

    #[test]
    fn nearest_indices_orders_and_breaks_ties() {
        let pts = [
            Point3::new(3.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 2.0),
        ];
        let r = nearest_indices(&pts, Point3::ORIGIN, 2).unwrap();
        assert_eq!(r.items.iter().map(|x| x.0).collect::<Vec<_>>(), vec![1, 2]);
        assert!(!r.truncated);
        let tie = [Point3::new(1.0, 0.0, 0.0), Point3::new(-1.0, 0.0, 0.0)];
        let r = nearest_indices(&tie, Point3::ORIGIN, 1).unwrap();
        assert_eq!(r.items[0].0, 0);
        let r = nearest_indices(&tie, Point3::ORIGIN, 5).unwrap();
        assert!(r.truncated);
        assert_eq!(r.items.len(), 2);
        assert!(nearest_indices(&tie, Point3::ORIGIN, 0).is_err());
        assert!(nearest_indices(&[], Point3::ORIGIN, 1).is_err());
    }

    #[test]
    fn grid_matches_brute_force() {
        let mut rng = stream(3, Purpose::Sampling, 0);
        let aps = sample_ppp_ball(1e-3, 100.0, &mut rng).unwrap();
        let grid = GridIndex::new(&aps.points, 130.0);
        for _ in 0..2000 {
            let q = uniform_in_ball(130.0, &mut rng);
            assert_eq!(grid.nearest(&q), brute_nearest(&aps.points, &q, None));
        }
        for j in 0..aps.len().min(300) {
            let q = aps.points[j];
            assert_eq!(grid.nearest_excluding(&q, Some(j)), brute_nearest(&aps.points, &q, Some(j)));
        }
        // query outside the indexed cube
        let far = Point3::new(500.0, -20.0, 3.0);
        assert_eq!(grid.nearest(&far), brute_nearest(&aps.points, &far, None));
    }

    #[test]
    fn near_empty_process() {
        let mut rng = stream(4, Purpose::Sampling, 0);
        let empty = (0..1000)
            .filter(|_| sample_ppp_ball(1e-9, 1.0, &mut rng).unwrap().is_empty())
            .count();
        assert_eq!(empty, 1000);
    }

    #[test]
    fn cap_violation_names_parameters() {
        let mut rng = stream(4, Purpose::Sampling, 1);
        let err = sample_ppp_ball(1.0, 1000.0, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Config { ref parameter, .. } if parameter.contains("intensity")));
        assert!(sample_ppp_ball(-1.0, 1.0, &mut rng).is_err());
        assert!(sample_ppp_ball(1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn points_stay_in_ball() {
        let mut rng = stream(5, Purpose::Sampling, 0);
        let r = sample_ppp_ball(1e-2, 20.0, &mut rng).unwrap();
        assert!(r.points.iter().all(|p| p.norm() <= 20.0 && p.is_finite()));
    }

    fn density(ap: f64, ue: f64) -> DensityConfig {
        DensityConfig { lambda_ap: ap, lambda_ue: ue }
    }

    #[test]
    fn lone_typical_ue_activates_only_serving_ap() {
        let geom = SimGeometry { min_expected_aps: 200.0, ..Default::default() };
        let mut rng = stream(6, Purpose::Network, 0);
        for _ in 0..20 {
            let net = realize_network(&density(1e-3, 0.0), &geom, &mut rng).unwrap();
            assert_eq!(net.active_count(), 1);
            assert!(net.active[net.serving_index]);
            assert_eq!(net.ues.points, vec![Point3::ORIGIN]);
            let nearest = nearest_indices(&net.aps.points, Point3::ORIGIN, 1).unwrap();
            assert_eq!(nearest.items[0].0, net.serving_index);
        }
    }

    #[test]
    fn probe_mode_with_no_users_is_degenerate() {
        let geom = SimGeometry {
            min_expected_aps: 50.0,
            typical_ue: TypicalUe::Probe,
            redraw_limit: 3,
            ..Default::default()
        };
        let mut rng = stream(6, Purpose::Network, 1);
        let err = realize_network(&density(1e-3, 0.0), &geom, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Degenerate { redraws: 4, .. }));
    }

    #[test]
    fn full_sampler_activity_is_nearest_association() {
        let geom = SimGeometry {
            min_expected_aps: 300.0,
            ue_sampling: UeSampling::Full,
            ..Default::default()
        };
        let mut rng = stream(7, Purpose::Network, 0);
        let net = realize_network(&density(1e-3, 2e-3), &geom, &mut rng).unwrap();
        assert_eq!(net.sampling, UeSampling::Full);
        assert_eq!(net.active, activity_from_ues(&net.aps.points, &net.ues.points));
        assert!(net.active[net.serving_index]);
        assert_eq!(*net.ues.points.last().unwrap(), Point3::ORIGIN);
    }

    #[test]
    fn sparse_witnesses_certify_activity() {
        let geom = SimGeometry {
            min_expected_aps: 300.0,
            ue_sampling: UeSampling::Sparse,
            ..Default::default()
        };
        let mut rng = stream(8, Purpose::Network, 0);
        for ratio in [0.5, 3.0, 40.0] {
            let net = realize_network(&density(1e-3, ratio * 1e-3), &geom, &mut rng).unwrap();
            assert_eq!(net.sampling, UeSampling::Sparse);
            // every witness lies in the UE ball and its nearest AP is active;
            // every active AP has a witness
            let from_witnesses = activity_from_ues(&net.aps.points, &net.ues.points);
            assert_eq!(from_witnesses, net.active, "ratio {ratio}");
            assert!(net.ues.points.iter().all(|p| p.norm() <= net.ue_region_radius));
        }
    }

    #[test]
    fn sparse_activity_is_nested_in_ue_intensity() {
        for t in 0..5 {
            let mut last: Option<Vec<bool>> = None;
            for ue in [2e-4, 1e-3, 1e-2, 1e-1] {
                let mut rng = stream(10, Purpose::Network, t);
                let d = density(1e-4, ue);
                let draw = sample_activity(&d, 150.0, 200.0, TypicalUe::Probe, UeSampling::Sparse, 1e7, &mut rng)
                    .unwrap()
                    .unwrap();
                if let Some(prev) = &last {
                    assert_eq!(prev.len(), draw.active.len());
                    assert!(prev.iter().zip(&draw.active).all(|(&a, &b)| !a || b), "ue {ue}");
                }
                last = Some(draw.active);
            }
        }
    }

    #[test]
    fn very_dense_users_activate_everything() {
        let geom = SimGeometry { min_expected_aps: 500.0, ..Default::default() };
        let mut rng = stream(9, Purpose::Network, 0);
        let all_active = (0..100)
            .filter(|_| {
                let net = realize_network(&density(1e-4, 1e-4 * 1e4), &geom, &mut rng).unwrap();
                net.active_count() == net.aps.len()
            })
            .count();
        assert!(all_active >= 99);
    }

    #[test]
    fn guard_margin_and_radius_rules() {
        let g = SimGeometry::default();
        let lam = 1e-3;
        let r = g.ap_radius(lam);
        assert!((lam * ball_volume(r) - 2000.0).abs() < 1e-6);
        let expected = 3.0 * 0.892_979_511_569_249_2 * (4.0 / 3.0 * PI * lam).powf(-1.0 / 3.0);
        assert!((g.guard_margin(lam) - expected).abs() < 1e-9);
        let fixed = SimGeometry {
            ap_region_radius: RegionRadius::Fixed(10.0),
            ue_guard_margin: RegionRadius::Fixed(0.0),
            ..g
        };
        assert_eq!(fixed.ap_radius(lam), 10.0);
        assert_eq!(fixed.guard_margin(lam), 0.0);
        let bad = SimGeometry { ap_region_radius: RegionRadius::Fixed(-1.0), ..g };
        assert!(bad.validate().is_err());
    }
}
