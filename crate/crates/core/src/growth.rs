//! Exact verification of the solvability hypotheses for measures: the
//! origin-centered growth supremum, the uniform Dini-type integral, the
//! stronger pointwise regularity condition with its implied Dini bound,
//! and fixed-direction vectorization.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::ReportBlock;
use crate::measure::{AtomicMeasure, BallQuery};
use crate::numeric::{norm, CompensatedSum};
use crate::stepsup::{center_ratio_sup_sorted, ratio_sup_over_centers, sorted_jumps, RatioWindow};

/// Default upper integration boundary fraction: the window `[r_min, a|x|]`
/// uses `a = 1/2` unless a caller overrides it.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.5;

/// Operator order data: dimension `n` and order `m` with `0 < m < n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperatorOrderParams {
    n: usize,
    m: usize,
}

impl OperatorOrderParams {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if !(0 < m && m < n) {
            return Err(Error::param(format!("need 0 < m < n, got m={m}, n={n}")));
        }
        Ok(Self { n, m })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.m
    }

    /// The codimension exponent `n - m >= 1`.
    pub fn codim(&self) -> u32 {
        (self.n - self.m) as u32
    }
}

/// Exact origin-growth supremum with its attaining radius.
#[derive(Debug, Clone)]
pub struct GrowthSup {
    pub sup: f64,
    pub radius: f64,
    /// Mass sitting exactly at the origin; when positive the supremum is
    /// reported as +inf since the untruncated ratio diverges as r -> 0.
    pub origin_mass: f64,
}

/// Exact sup of `mu(B[0,r]) / r^(n-m)` over critical radii in
/// `[r_min, r_max]`. `r_max` must reach past the support.
pub fn bp1_sup(
    mu: &AtomicMeasure,
    params: &OperatorOrderParams,
    r_min: f64,
    r_max: f64,
) -> Result<GrowthSup> {
    if mu.dim() != params.n {
        return Err(Error::DimensionMismatch { expected: params.n, got: mu.dim() });
    }
    if !(r_min > 0.0 && r_min <= r_max) {
        return Err(Error::param(format!(
            "need 0 < r_min <= r_max, got [{r_min}, {r_max}]"
        )));
    }
    if r_max < mu.max_norm() {
        return Err(Error::param(format!(
            "r_max {r_max} does not reach the support (max atom distance {})",
            mu.max_norm()
        )));
    }
    let origin = vec![0.0; params.n];
    let origin_mass = mu.ball_mass(&BallQuery::new(origin.clone(), 0.0)?);
    if origin_mass > 0.0 {
        return Ok(GrowthSup { sup: f64::INFINITY, radius: 0.0, origin_mass });
    }
    let win = RatioWindow { weight: 1.0, r_lo: r_min, r_hi: Some(r_max) };
    let best = center_ratio_sup_sorted(mu, &origin, 0.0, params.codim() as f64, &win)
        .expect("window checked nonempty");
    Ok(GrowthSup { sup: best.sup, radius: best.radius, origin_mass: 0.0 })
}

/// How the untrusted region `[0, r_min)` of a Dini integral behaves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BelowResolution {
    /// No atom within `r_min` of the center: the integrand vanishes there.
    Zero,
    /// Atoms below resolution but none at the center: the exact step
    /// integral over the trusted-side formula, reported but not added.
    Finite(f64),
    /// An atom sits exactly at the center; the integral diverges.
    Unbounded,
}

/// Exact Dini-type integral at one center.
#[derive(Debug, Clone)]
pub struct DiniReport {
    pub center: Vec<f64>,
    /// Exact value of the step-function integral over `[r_min, a|x|]`.
    pub value: f64,
    pub below_r_min: BelowResolution,
    pub r_min: f64,
    /// Upper integration boundary `a|x|`.
    pub window_top: f64,
}

impl DiniReport {
    pub fn report(&self) -> ReportBlock {
        let mut b = ReportBlock::new();
        b.push("kind", "dini");
        b.push_point("center", &self.center);
        b.push_f64("value", self.value);
        b.push_f64("rmin", self.r_min);
        b.push_f64("window_top", self.window_top);
        match self.below_r_min {
            BelowResolution::Zero => b.push("below_rmin", "zero"),
            BelowResolution::Finite(v) => {
                b.push("below_rmin", "finite");
                b.push_f64("below_rmin_value", v)
            }
            BelowResolution::Unbounded => {
                b.push("below_rmin", "unbounded -- excluded by resolution semantics")
            }
        };
        b
    }
}

/// Exact closed-form integral of the step function `r -> mu(B[x,r])`
/// against `r^-(n-m+1) dr` over `[lo, hi]`, given the sorted jumps.
fn step_dini_integral(jumps: &[(f64, f64)], q: i32, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    // Breakpoints: lo, then every jump inside (lo, hi], closing at hi.
    // On [r_i, r_{i+1}) the step value is the cumulative mass at r_i.
    let mut acc = CompensatedSum::new();
    let mut level = jumps
        .iter()
        .take_while(|(d, _)| *d <= lo)
        .last()
        .map_or(0.0, |(_, c)| *c);
    let mut r_prev = lo;
    for &(d, cum) in jumps {
        if d <= lo {
            continue;
        }
        if d >= hi {
            break;
        }
        if level > 0.0 {
            acc.add(level * (r_prev.powi(-q) - d.powi(-q)) / q as f64);
        }
        r_prev = d;
        level = cum;
    }
    if level > 0.0 {
        acc.add(level * (r_prev.powi(-q) - hi.powi(-q)) / q as f64);
    }
    acc.value()
}

/// Exact Dini-type integral `int_{r_min}^{a|x|} mu(B[x,r]) r^-(n-m+1) dr`
/// for a nonzero center. The `[0, r_min)` region is classified in the
/// report, never folded into the value.
pub fn dini_integral(
    mu: &AtomicMeasure,
    center: &[f64],
    params: &OperatorOrderParams,
    r_min: f64,
    window_fraction: f64,
) -> Result<DiniReport> {
    if mu.dim() != params.n {
        return Err(Error::DimensionMismatch { expected: params.n, got: mu.dim() });
    }
    if center.len() != params.n {
        return Err(Error::DimensionMismatch { expected: params.n, got: center.len() });
    }
    let nx = norm(center);
    if nx == 0.0 {
        return Err(Error::param("Dini integral requires a nonzero center"));
    }
    if !(window_fraction > 0.0 && window_fraction < 1.0) {
        return Err(Error::param(format!(
            "window fraction must lie in (0, 1), got {window_fraction}"
        )));
    }
    if !(r_min > 0.0) {
        return Err(Error::param(format!("need r_min > 0, got {r_min}")));
    }
    let q = params.codim() as i32;
    let jumps = sorted_jumps(mu, center);
    let top = window_fraction * nx;
    let value = step_dini_integral(&jumps, q, r_min, top);
    let below = match jumps.first() {
        None => BelowResolution::Zero,
        Some(&(d0, _)) if d0 == 0.0 => BelowResolution::Unbounded,
        Some(&(d0, _)) if d0 < r_min => {
            BelowResolution::Finite(step_dini_integral(&jumps, q, d0, r_min.min(top)))
        }
        _ => BelowResolution::Zero,
    };
    Ok(DiniReport { center: center.to_vec(), value, below_r_min: below, r_min, window_top: top })
}

/// Worst Dini value over a set of sample centers.
#[derive(Debug, Clone)]
pub struct UniformDiniReport {
    pub max: f64,
    pub attaining: DiniReport,
    pub samples: usize,
}

/// Evaluates the Dini integral at every sample center and returns the
/// maximum. Pass/fail against a threshold is the caller's decision.
pub fn bp2_uniform(
    mu: &AtomicMeasure,
    params: &OperatorOrderParams,
    samples: &[Vec<f64>],
    r_min: f64,
    window_fraction: f64,
) -> Result<UniformDiniReport> {
    if samples.is_empty() {
        return Err(Error::Empty("need at least one sample center".into()));
    }
    let reports: Vec<DiniReport> = samples
        .par_iter()
        .map(|x| dini_integral(mu, x, params, r_min, window_fraction))
        .collect::<Result<_>>()?;
    let mut best = 0usize;
    for (i, r) in reports.iter().enumerate() {
        if r.value > reports[best].value {
            best = i;
        }
    }
    let attaining = reports[best].clone();
    Ok(UniformDiniReport { max: attaining.value, attaining, samples: samples.len() })
}

/// Pointwise regularity certificate with the Dini bound it implies.
#[derive(Debug, Clone)]
pub struct PointwiseReport {
    /// Exact sup of `mu(B[x, r+delta]) / (|x|^-m r^n)`.
    pub sup: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    /// Constant the certificate was asked to hold with.
    pub c2: f64,
    pub pass: bool,
    /// If the certificate holds with constant C, every Dini integral over
    /// `[r_min, |x|/2]` at a covered center is at most `C * 2^-m / m`.
    pub implied_dini_bound: f64,
    pub admissible_centers: usize,
}

impl PointwiseReport {
    pub fn report(&self) -> ReportBlock {
        let mut b = ReportBlock::new();
        b.push("kind", "pointwise");
        b.push_f64("sup", self.sup);
        b.push_f64("constant", self.c2);
        b.push_point("center", &self.center);
        b.push_f64("radius", self.radius);
        b.push("pass", if self.pass { "true" } else { "false" });
        b.push_f64("implied_dini_bound", self.implied_dini_bound);
        b
    }
}

/// Exact sup of `mu(B[x, r+delta]) / (|x|^-m r^n)` over candidates and
/// critical radii `r in [r_min, |x|/2]`, compared against `c2`.
pub fn pointwise_regularity_check(
    mu: &AtomicMeasure,
    params: &OperatorOrderParams,
    c2: f64,
    candidates: &[Vec<f64>],
    delta: f64,
) -> Result<PointwiseReport> {
    if mu.dim() != params.n {
        return Err(Error::DimensionMismatch { expected: params.n, got: mu.dim() });
    }
    if candidates.is_empty() {
        return Err(Error::Empty("need at least one candidate center".into()));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::param(format!("net spacing must be >= 0, got {delta}")));
    }
    let r_min = mu.r_min();
    let m = params.m as f64;
    let mut sorted: Vec<Vec<f64>> = candidates.to_vec();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let result = ratio_sup_over_centers(mu, &sorted, delta, params.n as f64, |c| {
        let nx = norm(c);
        if nx == 0.0 {
            return None;
        }
        Some(RatioWindow { weight: nx.powf(m), r_lo: r_min, r_hi: Some(0.5 * nx) })
    });
    let implied = c2 * (-m).exp2() / m;
    Ok(PointwiseReport {
        sup: result.sup,
        center: result.center,
        radius: result.radius,
        c2,
        pass: result.sup <= c2 * (1.0 + crate::decay::CERT_SLACK),
        implied_dini_bound: implied,
        admissible_centers: result.admissible_centers,
    })
}

/// A scalar measure pushed onto a fixed covector direction: total
/// variation queries scale the base measure by the covector norm.
#[derive(Debug, Clone)]
pub struct CovectorMeasure {
    base: AtomicMeasure,
    covector: Vec<f64>,
    covector_norm: f64,
}

/// Attaches a nonzero covector `e`, so `|mu_e|(B) = |e| mu(B)`.
pub fn vectorize(mu: &AtomicMeasure, covector: Vec<f64>) -> Result<CovectorMeasure> {
    let e_norm = norm(&covector);
    if !(e_norm.is_finite() && e_norm > 0.0) {
        return Err(Error::param(
            "covector must be nonzero; the vectorized certificate trivializes",
        ));
    }
    Ok(CovectorMeasure { base: mu.clone(), covector, covector_norm: e_norm })
}

impl CovectorMeasure {
    pub fn base(&self) -> &AtomicMeasure {
        &self.base
    }

    pub fn covector(&self) -> &[f64] {
        &self.covector
    }

    pub fn covector_norm(&self) -> f64 {
        self.covector_norm
    }

    /// Total variation of a ball: `|e| * mu(B)`.
    pub fn tv_ball_mass(&self, q: &BallQuery) -> f64 {
        self.covector_norm * self.base.ball_mass(q)
    }

    /// `bp1_sup` of the total variation: exactly `|e|` times the scalar
    /// supremum.
    pub fn tv_bp1_sup(
        &self,
        params: &OperatorOrderParams,
        r_min: f64,
        r_max: f64,
    ) -> Result<GrowthSup> {
        let scalar = bp1_sup(&self.base, params, r_min, r_max)?;
        Ok(GrowthSup {
            sup: self.covector_norm * scalar.sup,
            radius: scalar.radius,
            origin_mass: scalar.origin_mass,
        })
    }

    /// Dini integral of the total variation: `|e|` times the scalar value.
    pub fn tv_dini_integral(
        &self,
        center: &[f64],
        params: &OperatorOrderParams,
        r_min: f64,
        window_fraction: f64,
    ) -> Result<DiniReport> {
        let mut rep = dini_integral(&self.base, center, params, r_min, window_fraction)?;
        rep.value *= self.covector_norm;
        if let BelowResolution::Finite(v) = rep.below_r_min {
            rep.below_r_min = BelowResolution::Finite(v * self.covector_norm);
        }
        Ok(rep)
    }
}
