//! Diameter bounds from curvature lower bounds.
//!
//! Three tests are offered. The `ric_c` test bounds the trace of the
//! `cc` block, the `ric_ab` test bounds `R^{aa}` and `R^{bb}` and compares
//! with the constant-curvature model whose first conjugate time is
//! `t_*(κa, κb)`, and the `tensor` test bounds the horizontal Ricci
//! curvature against the Tanno tensor. Curvature bounds are estimated by
//! sampling unit covectors; they are certificates only for left-invariant
//! models, where curvature does not depend on the base point.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::canonical::{bc_blocks, curvature_blocks, parallel_frame_from};
use crate::error::{ComparisonError, Error, FlowError};
use crate::flow::{first_root, normalize_unit_speed, ExtremalState};
use crate::structure::calculus::{apply_q, curvature_vec};
use crate::structure::ContactModel;

/// Below this `|κa|` the conjugate time is the `κa → 0` limit `2π/√κb`.
pub const KA_ZERO: f64 = 1e-8;
/// Bisection tolerance of [`lq_conjugate_time`].
pub const LQ_TOL: f64 = 1e-10;
/// Largest `|h₀|` in the sampling grid.
pub const H0_MAX: f64 = 10.0;
/// Number of positive `h₀` values, log-spaced over `[1e-3, H0_MAX]`.
pub const H0_LEVELS: usize = 9;
/// Base points sampled for models that are not left-invariant.
pub const SAMPLE_POINTS: usize = 4;
/// Length of the geodesic segment along which curvature is re-evaluated
/// for models that are not left-invariant.
pub const SEGMENT: f64 = 0.5;
/// Seed of the deterministic direction sampler.
pub const SAMPLE_SEED: u64 = 0x5eed;
/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "CONTACTCURV_THREADS";

/// Whether the constant-curvature model with `R^{aa} = κa`, `R^{bb} = κb`
/// has a finite first conjugate time.
pub fn lq_existence(ka: f64, kb: f64) -> bool {
    (kb > 0.0 && 4.0 * ka > -kb * kb) || (kb <= 0.0 && ka > 0.0)
}

/// Determinant whose first positive zero is `t_*(κa, κb)`, up to a
/// positive factor.
pub fn lq_determinant(ka: f64, kb: f64, t: f64) -> f64 {
    let s = (kb * kb + 4.0 * ka).sqrt();
    let lp = ((kb + s) / 2.0).sqrt();
    let m = 2.0 * ka / (s + kb);
    let x = m.abs().sqrt() * t;
    let (c, sinc) = if m >= 0.0 {
        (x.cosh(), if x == 0.0 { 1.0 } else { x.sinh() / x })
    } else {
        (x.cos(), if x == 0.0 { 1.0 } else { x.sin() / x })
    };
    4.0 * (1.0 - (lp * t).cos() * c) - 4.0 * kb * lp / (s + kb) * t * (lp * t).sin() * sinc
}

/// `2 − 2cos s − s sin s`, the `κa → 0` limit in `s = √κb t`.
pub fn lq_determinant_flat_a(s: f64) -> f64 {
    2.0 - 2.0 * s.cos() - s * s.sin()
}

/// First conjugate time `t_*(κa, κb)` of the constant-curvature model.
pub fn lq_conjugate_time(ka: f64, kb: f64) -> Result<f64, ComparisonError> {
    if !lq_existence(ka, kb) || !ka.is_finite() || !kb.is_finite() {
        return Err(ComparisonError::NoConjugateTime { ka, kb });
    }
    if ka.abs() <= KA_ZERO && kb > 0.0 {
        return Ok(2.0 * PI / kb.sqrt());
    }
    let scale = (ka.abs() + kb.abs() + 1.0).sqrt();
    let step = 0.01f64.min(0.01 / scale);
    // Conjugate times shrink like 1/√κ; 10⁶ steps cover well past the first one.
    let t_max = step * 1e6;
    let f = |t: f64| Ok::<f64, FlowError>(lq_determinant(ka, kb, t));
    match first_root(f, step, t_max, step, LQ_TOL) {
        Ok(Some(t)) => Ok(t),
        _ => Err(ComparisonError::NoConjugateTime { ka, kb }),
    }
}

/// Which diameter test a [`BMReport`] comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    RicC,
    RicAb,
    Tensor,
}

impl BoundMethod {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ric_c" => Some(Self::RicC),
            "ric_ab" => Some(Self::RicAb),
            "tensor" => Some(Self::Tensor),
            _ => None,
        }
    }

    /// Names of the sampled quantities, in [`BMSample::values`] order.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Self::RicC => &["ric_c"],
            Self::RicAb => &["ric_a", "ric_b"],
            Self::Tensor => &["ric_minus_holomorphic", "q_norm_sq"],
        }
    }
}

/// One sampled covector (or, for the tensor test, horizontal unit vector).
#[derive(Clone, Debug, Serialize)]
pub struct BMSample {
    pub point: usize,
    /// Reeb component of the covector; zero for the tensor test.
    pub h0: f64,
    /// Time along the geodesic at which curvature was evaluated.
    pub t: f64,
    /// Horizontal unit direction in frame components.
    pub direction: Vec<f64>,
    pub values: Vec<f64>,
}

/// Outcome of a diameter test.
#[derive(Clone, Debug, Serialize)]
pub struct BMReport {
    pub method: BoundMethod,
    pub model: String,
    /// Named certified constants: `kc`, or `ka`, `kb`, or `k1`, `k2`.
    pub constants: BTreeMap<String, f64>,
    pub diameter_bound: f64,
    /// Smallest observed value of each sampled quantity.
    pub min_observed: Vec<f64>,
    /// Largest observed value of each sampled quantity.
    pub max_observed: Vec<f64>,
    pub n_samples: usize,
    pub pass: bool,
    /// `true` for left-invariant models; otherwise the constants are
    /// sampled evidence, not a proof.
    pub certified: bool,
    pub note: String,
    #[serde(skip)]
    pub samples: Vec<BMSample>,
}

impl BMReport {
    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }

    /// Per-sample margins above the observed minimum, as CSV.
    pub fn margins_csv(&self) -> String {
        let cols = self.method.columns();
        let mut out = String::from("point,h0,t");
        for c in cols {
            out += &format!(",{c},{c}_margin");
        }
        out.push('\n');
        for s in &self.samples {
            out += &format!("{},{},{}", s.point, s.h0, s.t);
            for (k, v) in s.values.iter().enumerate() {
                out += &format!(",{},{}", v, v - self.min_observed[k]);
            }
            out.push('\n');
        }
        out
    }
}

/// Runs `f` on a pool capped by `CONTACTCURV_THREADS` when set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// `count` deterministic unit vectors in `R^m`: equally spaced angles
/// for `m = 2`, otherwise the coordinate axes `±e_i` followed by
/// normalized Gaussian draws from a fixed seed.
pub fn sphere_directions(m: usize, count: usize) -> Vec<DVector<f64>> {
    if m == 2 {
        return (0..count)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / count as f64;
                DVector::from_vec(vec![a.cos(), a.sin()])
            })
            .collect();
    }
    let mut out = Vec::with_capacity(count);
    for k in 0..(2 * m).min(count) {
        let mut v = DVector::zeros(m);
        v[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
        out.push(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    while out.len() < count {
        let v = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let norm: f64 = v.norm();
        if norm > 1e-6 {
            out.push(v / norm);
        }
    }
    out
}

/// `{0} ∪ {±10^e}` with `H0_LEVELS` exponents evenly spaced from −3 to `log₁₀ H0_MAX`.
pub fn h0_grid() -> Vec<f64> {
    let top = H0_MAX.log10();
    let mut out = vec![0.0];
    for k in 0..H0_LEVELS {
        let e = -3.0 + (top + 3.0) * k as f64 / (H0_LEVELS - 1) as f64;
        let v = 10f64.powf(e);
        out.push(v);
        out.push(-v);
    }
    out
}

fn sample_points(model: &dyn ContactModel) -> Vec<Vec<f64>> {
    if model.left_invariant() {
        vec![model.base_point()]
    } else {
        model.sample_points(SAMPLE_POINTS, &mut ChaCha8Rng::seed_from_u64(SAMPLE_SEED))
    }
}

fn sample_times(model: &dyn ContactModel) -> Vec<f64> {
    if model.left_invariant() {
        vec![0.0]
    } else {
        vec![0.0, SEGMENT]
    }
}

/// Unit covector with Reeb component `h0` and horizontal part `dir`.
fn covector(x: &[f64], h0: f64, dir: &DVector<f64>) -> Result<ExtremalState, Error> {
    let mut h = vec![h0];
    h.extend(dir.iter());
    Ok(normalize_unit_speed(&ExtremalState::new(x.to_vec(), h))?)
}

/// Evaluates `eval` at every (point, h₀, direction, time) of the grid.
fn scan_covectors<F>(model: &dyn ContactModel, n_dirs: usize, eval: F) -> Result<Vec<BMSample>, Error>
where
    F: Fn(&ExtremalState, &[f64]) -> Result<Vec<Vec<f64>>, Error> + Sync,
{
    let points = sample_points(model);
    let times = sample_times(model);
    let dirs = sphere_directions(2 * model.d(), n_dirs);
    let grid: Vec<(usize, f64, usize)> = (0..points.len())
        .flat_map(|p| h0_grid().into_iter().flat_map(move |h0| (0..n_dirs).map(move |k| (p, h0, k))))
        .collect();
    let rows = with_pool(|| {
        grid.par_iter()
            .map(|&(p, h0, k)| {
                let state = covector(&points[p], h0, &dirs[k])?;
                let values = eval(&state, &times)?;
                Ok(times
                    .iter()
                    .zip(values)
                    .map(|(&t, values)| BMSample { point: p, h0, t, direction: dirs[k].iter().copied().collect(), values })
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    Ok(rows.into_iter().flatten().collect())
}

fn extremes(samples: &[BMSample], k: usize) -> (f64, f64) {
    samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.values[k]), hi.max(s.values[k])))
}

fn note(certified: bool) -> String {
    if certified {
        "left-invariant model: sampled minima over the covector grid".into()
    } else {
        "sampled evidence, not a proof".into()
    }
}

fn report(
    method: BoundMethod,
    model: &dyn ContactModel,
    constants: Vec<(&str, f64)>,
    diameter_bound: f64,
    samples: Vec<BMSample>,
) -> BMReport {
    let cols = method.columns().len();
    let (min_observed, max_observed) = (0..cols).map(|k| extremes(&samples, k)).unzip();
    BMReport {
        method,
        model: model.name(),
        constants: constants.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        diameter_bound,
        min_observed,
        max_observed,
        n_samples: samples.len(),
        pass: true,
        certified: model.left_invariant(),
        note: note(model.left_invariant()),
        samples,
    }
}

fn require_d_gt_1(model: &dyn ContactModel) -> Result<(), Error> {
    if model.d() < 2 {
        return Err(ComparisonError::Precondition(format!("test needs d > 1, model has d = {}", model.d())).into());
    }
    Ok(())
}

fn frame_span(times: &[f64]) -> f64 {
    times.iter().copied().fold(0.0, f64::max).max(1e-2)
}

/// Diameter bound `π/√κc` with `(2d − 2)κc = min tr R^{cc}`.
pub fn bound_ric_c(model: &dyn ContactModel, n_samples: usize) -> Result<BMReport, Error> {
    require_d_gt_1(model)?;
    let samples = scan_covectors(model, n_samples, |state, times| {
        let frame = parallel_frame_from(model, state, frame_span(times), None)?;
        times.iter().map(|&t| Ok(vec![bc_blocks(&frame, t)?.2.trace()])).collect()
    })?;
    let (min, _) = extremes(&samples, 0);
    let kc = min / (2 * model.d() - 2) as f64;
    if !(kc > 0.0) {
        return Err(ComparisonError::HypothesisFails(format!("min Ric^c = {min} is not positive")).into());
    }
    Ok(report(BoundMethod::RicC, model, vec![("kc", kc)], PI / kc.sqrt(), samples))
}

/// Diameter bound `t_*(κa, κb)` with `κa = min R^{aa}`, `κb = min R^{bb}`.
pub fn bound_ric_ab(model: &dyn ContactModel, n_samples: usize) -> Result<BMReport, Error> {
    let samples = scan_covectors(model, n_samples, |state, times| {
        let frame = parallel_frame_from(model, state, frame_span(times), None)?;
        times
            .iter()
            .map(|&t| {
                let b = curvature_blocks(&frame, t)?;
                Ok(vec![b.raa, b.rbb])
            })
            .collect()
    })?;
    let (ka, _) = extremes(&samples, 0);
    let (kb, _) = extremes(&samples, 1);
    let t = lq_conjugate_time(ka, kb).map_err(|_| {
        ComparisonError::HypothesisFails(format!("(ka, kb) = ({ka}, {kb}) admits no finite conjugate time"))
    })?;
    Ok(report(BoundMethod::RicAb, model, vec![("ka", ka), ("kb", kb)], t, samples))
}

/// Diameter bound `π/√(κ1 − κ2)` with `(2d − 2)κ1 = min[Ric(X) − R(X,JX,JX,X)]`
/// and `(2d − 2)κ2 = max ‖Q(X,X)‖²` over unit horizontal `X`.
pub fn bound_tensor(model: &dyn ContactModel, n_samples: usize) -> Result<BMReport, Error> {
    require_d_gt_1(model)?;
    let n = model.n();
    let points = sample_points(model);
    let dirs = sphere_directions(2 * model.d(), n_samples);
    let per_point = with_pool(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(p, x)| {
                let fc = model.calculus(x, 1)?;
                let ops = fc.curvature_ops()?;
                let q = fc.q()?;
                let j = fc.j();
                let basis: Vec<DVector<f64>> = (0..n).map(|k| DVector::from_fn(n, |i, _| (i == k) as u8 as f64)).collect();
                Ok(dirs
                    .iter()
                    .map(|dir| {
                        let mut v = DVector::zeros(n);
                        v.rows_mut(1, n - 1).copy_from(dir);
                        let jv = &j * &v;
                        let ric: f64 = basis.iter().map(|e| curvature_vec(&ops, &v, e, e, &v)).sum();
                        let hol = curvature_vec(&ops, &v, &jv, &jv, &v);
                        let qn = apply_q(&q, n, &v, &v).norm_squared();
                        BMSample { point: p, h0: 0.0, t: 0.0, direction: dir.iter().copied().collect(), values: vec![ric - hol, qn] }
                    })
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    let samples: Vec<BMSample> = per_point.into_iter().flatten().collect();
    let scale = (2 * model.d() - 2) as f64;
    let k1 = extremes(&samples, 0).0 / scale;
    let k2 = extremes(&samples, 1).1 / scale;
    if !(k1 > k2 && k2 >= 0.0) {
        return Err(ComparisonError::HypothesisFails(format!("need k1 > k2 >= 0, got k1 = {k1}, k2 = {k2}")).into());
    }
    Ok(report(BoundMethod::Tensor, model, vec![("k1", k1), ("k2", k2)], PI / (k1 - k2).sqrt(), samples))
}

/// Dispatches on `method`.
pub fn bound(model: &dyn ContactModel, method: BoundMethod, n_samples: usize) -> Result<BMReport, Error> {
    match method {
        BoundMethod::RicC => bound_ric_c(model, n_samples),
        BoundMethod::RicAb => bound_ric_ab(model, n_samples),
        BoundMethod::Tensor => bound_tensor(model, n_samples),
    }
}
