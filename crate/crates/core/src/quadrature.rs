//! Globally adaptive Gauss–Kronrod (10/21 point) quadrature with helpers
//! for semi-infinite ranges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Tolerances for every adaptive integral evaluated by the analytic engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    pub max_subdivisions: usize,
    /// Probability mass of the serving-distance law left beyond the
    /// truncation radius of the outer coverage integral.
    pub tail_cutoff_epsilon: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-8,
            absolute_tolerance: 1e-12,
            max_subdivisions: 200,
            tail_cutoff_epsilon: 1e-10,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("relative_tolerance", self.relative_tolerance),
            ("absolute_tolerance", self.absolute_tolerance),
            ("tail_cutoff_epsilon", self.tail_cutoff_epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        if self.relative_tolerance >= 1e-3 {
            return Err(Error::config(
                "relative_tolerance",
                format!("must be below 1e-3, got {}", self.relative_tolerance),
            ));
        }
        if self.tail_cutoff_epsilon >= 1.0 {
            return Err(Error::config("tail_cutoff_epsilon", "must be below 1"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::config("max_subdivisions", "must be positive"));
        }
        Ok(())
    }

    /// Same settings with the relative tolerance scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            relative_tolerance: self.relative_tolerance * factor,
            absolute_tolerance: self.absolute_tolerance * factor,
            ..*self
        }
    }
}

/// Value and diagnostics of one adaptive integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    pub subdivisions: usize,
}

impl QuadResult {
    pub const ZERO: QuadResult = QuadResult {
        value: 0.0,
        abs_error: 0.0,
        evaluations: 0,
        subdivisions: 0,
    };

    pub fn combine(self, other: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + other.value,
            abs_error: self.abs_error + other.abs_error,
            evaluations: self.evaluations + other.evaluations,
            subdivisions: self.subdivisions + other.subdivisions,
        }
    }
}

// Kronrod 21-point abscissae; odd entries are the embedded 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_200_811_414,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// One 21-point Kronrod panel: (estimate, error estimate).
fn kronrod21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    // QUADPACK error rescaling
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrate `f` over the finite interval [a, b].
pub fn integrate<F>(
    mut f: F,
    a: f64,
    b: f64,
    settings: &QuadratureSettings,
    context: &'static str,
) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    if a == b {
        return Ok(QuadResult::ZERO);
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::domain("integrate", format!("bounds must be finite: [{a}, {b}]")));
    }
    let (value, error) = kronrod21(&mut f, a, b);
    let mut evaluations = 21;
    let mut total = value;
    let mut total_err = error;
    let tolerance = |total: f64| {
        settings
            .absolute_tolerance
            .max(settings.relative_tolerance * total.abs())
    };
    if !total.is_finite() {
        return Err(Error::Quadrature {
            context,
            value: total,
            achieved_error: total_err,
            subdivisions: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut subdivisions = 0;
    while total_err > tolerance(total) {
        if subdivisions >= settings.max_subdivisions {
            return Err(Error::Quadrature {
                context,
                value: total,
                achieved_error: total_err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid == worst.a || mid == worst.b {
            // interval exhausted in floating point; accept what we have
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod21(&mut f, worst.a, mid);
        let (v2, e2) = kronrod21(&mut f, mid, worst.b);
        evaluations += 42;
        subdivisions += 1;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        if !total.is_finite() {
            return Err(Error::Quadrature {
                context,
                value: total,
                achieved_error: total_err,
                subdivisions,
            });
        }
    }
    // re-sum to shed the drift of the running updates
    let (value, abs_error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(QuadResult {
        value,
        abs_error,
        evaluations,
        subdivisions,
    })
}

/// Integrate over [a, ∞) with the map x = a + t/(1 − t), t ∈ [0, 1).
///
/// Suited to integrands with exponential or faster decay.
pub fn integrate_to_infinity<F>(
    mut f: F,
    a: f64,
    settings: &QuadratureSettings,
    context: &'static str,
) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    integrate(
        |t| {
            let one_minus = 1.0 - t;
            let x = a + t / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() { v } else { 0.0 }
        },
        0.0,
        1.0,
        settings,
        context,
    )
}

/// Integrate over [a, ∞), a > 0, for integrands decaying like x^(−p), p > 1.
///
/// Uses x = a·t^(−m) with m = 1/(p − 1), which turns a pure x^(−p) tail into
/// a constant in t so the Kronrod panels near t = 0 stay well resolved.
pub fn integrate_power_tail<F>(
    mut f: F,
    a: f64,
    decay_power: f64,
    settings: &QuadratureSettings,
    context: &'static str,
) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    if !(a > 0.0) || !(decay_power > 1.0) {
        return Err(Error::domain(
            "integrate_power_tail",
            format!("requires a > 0 and decay power > 1, got a = {a}, p = {decay_power}"),
        ));
    }
    let m = 1.0 / (decay_power - 1.0);
    integrate(
        |t| {
            if t <= 0.0 {
                return 0.0;
            }
            let x = a * t.powf(-m);
            let jac = a * m * t.powf(-m - 1.0);
            let v = f(x) * jac;
            if v.is_finite() { v } else { 0.0 }
        },
        0.0,
        1.0,
        settings,
        context,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> QuadratureSettings {
        QuadratureSettings {
            relative_tolerance: 1e-12,
            absolute_tolerance: 1e-15,
            max_subdivisions: 500,
            ..Default::default()
        }
    }

    #[test]
    fn kronrod_weights_sum_to_two() {
        let s: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        assert!((s - 2.0).abs() < 1e-14);
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((g - 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_panel_exact_for_high_degree_polynomials() {
        // Kronrod-21 integrates degree <= 31 exactly
        for deg in [0u32, 5, 17, 30] {
            let mut f = |x: f64| x.powi(deg as i32) * (deg as f64 + 1.0);
            let (v, _) = kronrod21(&mut f, 0.0, 1.0);
            assert!((v - 1.0).abs() < 1e-13, "degree {deg}");
        }
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let r = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, &tight(), "peak").unwrap();
        let exact = 2.0 / 1e-2 * (1.0f64 / 1e-2).atan();
        assert!(((r.value - exact) / exact).abs() < 1e-10);
        assert!(r.subdivisions > 0);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let s = tight();
        let a = integrate(|x| x.exp(), 0.0, 1.0, &s, "exp").unwrap().value;
        let b = integrate(|x| x.exp(), 1.0, 0.0, &s, "exp").unwrap().value;
        assert!((a + b).abs() < 1e-14);
    }

    #[test]
    fn infinite_range_exponential() {
        let r = integrate_to_infinity(|x| (-x).exp(), 2.0, &tight(), "exp tail").unwrap();
        assert!((r.value - (-2f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn power_tail_slow_decay() {
        // ∫_2^∞ x^{-1.75} dx = 2^{-0.75} / 0.75
        let r = integrate_power_tail(|x| x.powf(-1.75), 2.0, 1.75, &tight(), "power").unwrap();
        let exact = 2f64.powf(-0.75) / 0.75;
        assert!(((r.value - exact) / exact).abs() < 1e-10);
        // same integrand with a non-pure tail
        let g = |x: f64| x * x / (1.0 + x.powf(3.75));
        let r = integrate_power_tail(g, 1.0, 1.75, &tight(), "mixed").unwrap();
        let near = integrate(g, 1.0, 1e4, &tight(), "mixed-near").unwrap().value;
        let far = 1e4f64.powf(-0.75) / 0.75; // g ~ x^{-1.75} beyond 1e4
        assert!((r.value - (near + far)).abs() < 1e-8);
    }

    #[test]
    fn non_convergence_reports_error() {
        let s = QuadratureSettings {
            max_subdivisions: 3,
            ..tight()
        };
        let err = integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, &s, "oscillatory").unwrap_err();
        match err {
            Error::Quadrature { achieved_error, subdivisions, .. } => {
                assert_eq!(subdivisions, 3);
                assert!(achieved_error > 0.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn settings_validation() {
        assert!(QuadratureSettings::default().validate().is_ok());
        let bad = QuadratureSettings {
            relative_tolerance: 1e-2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
