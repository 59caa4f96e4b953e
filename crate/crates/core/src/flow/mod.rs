//! Normal geodesics, their linearization, the canonical Jacobi system and
//! conjugate times.
//!
//! Extremals are written in frame coordinates `(x, h)` with
//! `h_α = ⟨λ, X_α(x)⟩`. The Hamiltonian `H = ½ Σ_{i≥1} h_i²` generates
//! `ẋ = Σ_i h_i X_i(x)`, `ḣ_α = Σ_{i,β} h_i c_{iα}^β h_β`.
//!
//! Tangent vectors to `T*M` are expanded in the lifted frame
//! `(X̃_0..X̃_{2d}, ∂_{h_0}..∂_{h_{2d}})`, where `X̃_μ` moves the base point
//! along `X_μ` at fixed `h`. In these coordinates the variational equation of
//! the flow is `u̇ = N(t) u` (see [`linearization`]) and the symplectic form
//! is given by [`lifted_symplectic_form`].

mod dop853_tableau;
pub mod ode;

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::FlowError;
use crate::structure::{ContactModel, Jet};
pub use ode::{dop853, OdeOptions, OdeSolution, OdeStats};

/// A covector in frame coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct ExtremalState {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
}

impl ExtremalState {
    pub fn new(x: Vec<f64>, h: Vec<f64>) -> Self {
        Self { x, h }
    }

    pub(crate) fn pack(&self) -> Vec<f64> {
        self.x.iter().chain(&self.h).copied().collect()
    }

    pub(crate) fn unpack(y: &[f64], m: usize) -> Self {
        Self { x: y[..m].to_vec(), h: y[m..].to_vec() }
    }

    /// Horizontal momenta `h_1..h_{2d}`, i.e. the tangent vector in the frame.
    pub fn tangent(&self) -> Vec<f64> {
        let mut t = self.h.clone();
        t[0] = 0.0;
        t
    }
}

/// `½ Σ_{i≥1} h_i²`.
pub fn hamiltonian(state: &ExtremalState) -> f64 {
    0.5 * state.h.iter().skip(1).map(|v| v * v).sum::<f64>()
}

/// Rescales the whole covector so that `2H = 1`.
pub fn normalize_unit_speed(state: &ExtremalState) -> Result<ExtremalState, FlowError> {
    let two_h = 2.0 * hamiltonian(state);
    if two_h <= 0.0 || !two_h.is_finite() {
        return Err(FlowError::TrivialCovector);
    }
    let s = 1.0 / two_h.sqrt();
    Ok(ExtremalState { x: state.x.clone(), h: state.h.iter().map(|v| v * s).collect() })
}

pub(crate) fn check_dims(model: &dyn ContactModel, state: &ExtremalState) -> Result<(), FlowError> {
    if state.x.len() != model.chart_dim() {
        return Err(FlowError::DimensionMismatch { expected: model.chart_dim(), found: state.x.len() });
    }
    if state.h.len() != model.n() {
        return Err(FlowError::DimensionMismatch { expected: model.n(), found: state.h.len() });
    }
    Ok(())
}

/// `ḣ_α = Σ_{i,β} h_i c_{iα}^β h_β`.
fn momentum_rhs(c: &[f64], n: usize, h: &[f64], out: &mut [f64]) {
    for a in 0..n {
        let mut s = 0.0;
        for i in 1..n {
            if h[i] == 0.0 {
                continue;
            }
            for b in 0..n {
                s += h[i] * c[(i * n + a) * n + b] * h[b];
            }
        }
        out[a] = s;
    }
}

pub(crate) fn geodesic_rhs(model: &dyn ContactModel, y: &[f64], dy: &mut [f64]) {
    let m = model.chart_dim();
    let n = model.n();
    let (x, h) = y.split_at(m);
    let frame = model.frame(x);
    for r in 0..m {
        dy[r] = (1..n).map(|i| frame[(r, i)] * h[i]).sum();
    }
    momentum_rhs(&model.c(x), n, h, &mut dy[m..]);
}

/// A normal extremal on `[0, T]` with dense output.
#[derive(Clone, Debug)]
pub struct GeodesicRecord {
    pub model: String,
    pub d: usize,
    pub chart_dim: usize,
    pub initial: ExtremalState,
    pub t_end: f64,
    pub solution: OdeSolution,
}

impl GeodesicRecord {
    pub fn n(&self) -> usize {
        2 * self.d + 1
    }

    /// Extremal at time `t`.
    pub fn state(&self, t: f64) -> Result<ExtremalState, FlowError> {
        Ok(ExtremalState::unpack(&self.solution.eval(t)?, self.chart_dim))
    }

    pub fn stats(&self) -> OdeStats {
        self.solution.stats
    }

    /// `max |H(t) − H(0)|` over the accepted steps and `samples` uniform times.
    pub fn energy_drift(&self, samples: usize) -> f64 {
        let h0 = hamiltonian(&self.initial);
        let mut worst: f64 = 0.0;
        for y in &self.solution.ys {
            worst = worst.max((hamiltonian(&ExtremalState::unpack(y, self.chart_dim)) - h0).abs());
        }
        for k in 0..=samples {
            let t = self.t_end * k as f64 / samples.max(1) as f64;
            if let Ok(s) = self.state(t) {
                worst = worst.max((hamiltonian(&s) - h0).abs());
            }
        }
        worst
    }

    /// Writes `t,x0..,h0..` rows at the given times with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W, times: &[f64]) -> Result<(), FlowError> {
        let io = |e: std::io::Error| FlowError::IntegrationFailure { t: 0.0, reason: format!("write failed: {e}") };
        let mut w = std::io::BufWriter::new(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.chart_dim).map(|i| format!("x{i}")));
        header.extend((0..self.n()).map(|i| format!("h{i}")));
        writeln!(w, "{}", header.join(",")).map_err(io)?;
        for &t in times {
            let s = self.state(t)?;
            let row: Vec<String> =
                std::iter::once(t).chain(s.x.iter().copied()).chain(s.h.iter().copied()).map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", row.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Integrates the normal extremal from `state` over `[0, t_end]` with
/// `rtol = atol = tol`.
pub fn flow(model: &dyn ContactModel, state: &ExtremalState, t_end: f64, tol: f64) -> Result<GeodesicRecord, FlowError> {
    flow_with(model, state, t_end, &OdeOptions::with_tol(tol))
}

/// [`flow`] with explicit integrator options.
pub fn flow_with(
    model: &dyn ContactModel,
    state: &ExtremalState,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<GeodesicRecord, FlowError> {
    check_dims(model, state)?;
    if hamiltonian(state) <= 0.0 {
        return Err(FlowError::TrivialCovector);
    }
    let solution = dop853(|_, y, dy| geodesic_rhs(model, y, dy), 0.0, &state.pack(), t_end, opts)?;
    Ok(GeodesicRecord {
        model: model.name(),
        d: model.d(),
        chart_dim: model.chart_dim(),
        initial: state.clone(),
        t_end,
        solution,
    })
}

/// Endpoint of the geodesic with initial covector `h` at `x0` after time `t`.
pub fn exp_map(model: &dyn ContactModel, x0: &[f64], h: &[f64], t: f64) -> Result<Vec<f64>, FlowError> {
    let state = ExtremalState::new(x0.to_vec(), h.to_vec());
    check_dims(model, &state)?;
    if t == 0.0 || hamiltonian(&state) == 0.0 {
        return Ok(x0.to_vec());
    }
    let rec = flow_with(model, &state, t, &OdeOptions::default())?;
    Ok(rec.state(t)?.x)
}

/// Variational matrix `N` of the extremal flow in lifted coordinates
/// `(v, w)`: a field carried by the flow satisfies `u̇ = N u`.
pub fn linearization(jet: &Jet, h: &[f64]) -> DMatrix<f64> {
    let n = jet.n;
    let mut nm = DMatrix::zeros(2 * n, 2 * n);
    for g in 0..n {
        for mu in 0..n {
            let s: f64 = (1..n).map(|i| h[i] * jet.c(i, mu, g)).sum();
            nm[(g, mu)] = -s;
        }
        if g >= 1 {
            nm[(g, n + g)] = 1.0;
        }
    }
    for b in 0..n {
        for mu in 0..n {
            let mut s = 0.0;
            if jet.order() >= 1 {
                for i in 1..n {
                    for dl in 0..n {
                        s += h[i] * h[dl] * jet.dc(mu, i, b, dl);
                    }
                }
            }
            nm[(n + b, mu)] = s;
            let mut w = 0.0;
            if mu >= 1 {
                w += (0..n).map(|dl| jet.c(mu, b, dl) * h[dl]).sum::<f64>();
            }
            w += (1..n).map(|i| h[i] * jet.c(i, b, mu)).sum::<f64>();
            nm[(n + b, n + mu)] = w;
        }
    }
    nm
}

/// Matrix `S` with `σ(u, u') = uᵀ S u'` in lifted coordinates:
/// `σ(X̃_μ, X̃_ν) = −Σ_α h_α c_{μν}^α`, `σ(∂_μ, X̃_ν) = δ_{μν}`, `σ(∂, ∂) = 0`.
pub fn lifted_symplectic_form(jet: &Jet, h: &[f64]) -> DMatrix<f64> {
    let n = jet.n;
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for mu in 0..n {
        for nu in 0..n {
            s[(mu, nu)] = -(0..n).map(|a| h[a] * jet.c(mu, nu, a)).sum::<f64>();
        }
        s[(n + mu, mu)] = 1.0;
        s[(mu, n + mu)] = -1.0;
    }
    s
}

/// Geodesic together with a bundle of solutions of the variational equation.
#[derive(Clone, Debug)]
pub struct VariationalRecord {
    pub n: usize,
    pub chart_dim: usize,
    /// Number of transported vectors.
    pub m: usize,
    pub solution: OdeSolution,
}

impl VariationalRecord {
    /// Extremal and the `2n × m` matrix of transported vectors at `t`.
    pub fn at(&self, t: f64) -> Result<(ExtremalState, DMatrix<f64>), FlowError> {
        let y = self.solution.eval(t)?;
        let base = self.chart_dim + self.n;
        let state = ExtremalState::unpack(&y[..base], self.chart_dim);
        Ok((state, DMatrix::from_column_slice(2 * self.n, self.m, &y[base..])))
    }
}

/// Integrates the extremal from `state` together with the vectors `u0`
/// (columns, lifted coordinates) under the variational equation.
pub fn variational_flow(
    model: &dyn ContactModel,
    state: &ExtremalState,
    u0: &DMatrix<f64>,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<VariationalRecord, FlowError> {
    check_dims(model, state)?;
    let n = model.n();
    let m = model.chart_dim();
    if u0.nrows() != 2 * n {
        return Err(FlowError::DimensionMismatch { expected: 2 * n, found: u0.nrows() });
    }
    let k = u0.ncols();
    let order = model.max_jet_order().min(1);
    let mut y0 = state.pack();
    y0.extend(u0.iter());
    let base = m + n;
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        geodesic_rhs(model, &y[..base], &mut dy[..base]);
        let jet = match model.jet(&y[..m], order) {
            Ok(j) => j,
            Err(_) => {
                dy[base..].iter_mut().for_each(|v| *v = f64::NAN);
                return;
            }
        };
        let nm = linearization(&jet, &y[m..base]);
        let u = DMatrix::from_column_slice(2 * n, k, &y[base..]);
        dy[base..].copy_from_slice((nm * u).as_slice());
    };
    let solution = dop853(rhs, 0.0, &y0, t_end, opts)?;
    Ok(VariationalRecord { n, chart_dim: m, m: k, solution })
}

/// `C₁ = E_{ab}` and `C₂ = diag(0, 1, ..., 1)` in the ordering `(a, b, c_1..c_{2d−1})`.
pub fn structural_matrices(d: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = 2 * d + 1;
    let mut c1 = DMatrix::zeros(n, n);
    c1[(0, 1)] = 1.0;
    let mut c2 = DMatrix::identity(n, n);
    c2[(0, 0)] = 0.0;
    (c1, c2)
}

/// Fundamental solution of `ṗ = −C₁ᵀp − R(t)q`, `q̇ = C₂p + C₁q` with
/// `p(0) = I`, `q(0) = 0`.
#[derive(Clone, Debug)]
pub struct JacobiSolution {
    pub d: usize,
    pub solution: OdeSolution,
}

impl JacobiSolution {
    fn n(&self) -> usize {
        2 * self.d + 1
    }

    /// `(P(t), Q(t))`.
    pub fn at(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>), FlowError> {
        let n = self.n();
        let y = self.solution.eval(t)?;
        Ok((DMatrix::from_column_slice(n, n, &y[..n * n]), DMatrix::from_column_slice(n, n, &y[n * n..])))
    }

    pub fn det_q(&self, t: f64) -> Result<f64, FlowError> {
        Ok(self.at(t)?.1.determinant())
    }
}

/// Integrates the canonical Jacobi system on `[0, t_end]` for a curvature
/// profile `r(t)` given in the canonical ordering `(a, b, c...)`.
pub fn jacobi_fundamental<F>(d: usize, t_end: f64, r: F, opts: &OdeOptions) -> Result<JacobiSolution, FlowError>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let n = 2 * d + 1;
    jacobi_from(d, 0.0, t_end, &DMatrix::identity(n, n), &DMatrix::zeros(n, n), r, opts)
}

/// The Jacobi system on `[t0, t1]` from `(P, Q)(t0) = (p0, q0)`.
fn jacobi_from<F>(
    d: usize,
    t0: f64,
    t1: f64,
    p0: &DMatrix<f64>,
    q0: &DMatrix<f64>,
    r: F,
    opts: &OdeOptions,
) -> Result<JacobiSolution, FlowError>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let n = 2 * d + 1;
    let (c1, c2) = structural_matrices(d);
    let c1t = c1.transpose();
    let mut y0 = p0.as_slice().to_vec();
    y0.extend_from_slice(q0.as_slice());
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let p = DMatrix::from_column_slice(n, n, &y[..n * n]);
        let q = DMatrix::from_column_slice(n, n, &y[n * n..]);
        let rt = r(t);
        let dp = -&c1t * &p - rt * &q;
        let dq = &c2 * &p + &c1 * &q;
        dy[..n * n].copy_from_slice(dp.as_slice());
        dy[n * n..].copy_from_slice(dq.as_slice());
    };
    Ok(JacobiSolution { d, solution: dop853(rhs, t0, &y0, t1, opts)? })
}

/// Replaces the columns of `[Q; P]` by an orthonormal basis of their span,
/// via `[Q; P] R⁻¹` with `R` upper triangular with positive diagonal, so
/// the sign of `det Q` is kept.
fn orthonormalize_lagrangian(p: &DMatrix<f64>, q: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = p.nrows();
    let mut stacked = DMatrix::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(q);
    stacked.view_mut((n, 0), (n, n)).copy_from(p);
    let qr = stacked.qr();
    let mut basis = qr.q();
    let r = qr.r();
    for k in 0..n {
        if r[(k, k)] < 0.0 {
            basis.column_mut(k).neg_mut();
        }
    }
    (basis.view((n, 0), (n, n)).into_owned(), basis.view((0, 0), (n, n)).into_owned())
}

/// [`jacobi_fundamental`] over the time span of a geodesic.
pub fn jacobi_integrate<F>(geo: &GeodesicRecord, r: F) -> Result<JacobiSolution, FlowError>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    jacobi_fundamental(geo.d, geo.t_end, r, &OdeOptions::default())
}

/// Smallest `t ∈ (t_min, t_max]` where `f` changes sign, or where `|f|` has
/// a local minimum below `1e-12` times its running maximum, refined by
/// bisection to `tol`. `f` is scanned on a grid of spacing `step`.
pub fn first_root<F>(f: F, t_min: f64, t_max: f64, step: f64, tol: f64) -> Result<Option<f64>, FlowError>
where
    F: Fn(f64) -> Result<f64, FlowError>,
{
    let bisect = |mut lo: f64, mut flo: f64, mut hi: f64| -> Result<f64, FlowError> {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid)?;
            if fm == 0.0 {
                return Ok(mid);
            }
            if (fm > 0.0) == (flo > 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let steps = ((t_max - t_min) / step).ceil().max(1.0) as usize;
    let mut t_prev = t_min;
    let mut f_prev = f(t_min)?;
    let mut running_max = f_prev.abs();
    let mut before_prev: Option<f64> = None;
    for k in 1..=steps {
        let t = (t_min + k as f64 * step).min(t_max);
        let ft = f(t)?;
        if ft == 0.0 {
            return Ok(Some(t));
        }
        if (ft > 0.0) != (f_prev > 0.0) && f_prev != 0.0 {
            return Ok(Some(bisect(t_prev, f_prev, t)?));
        }
        if let Some(fpp) = before_prev {
            let a = f_prev.abs();
            if a < fpp.abs() && a < ft.abs() && a < 1e-12 * running_max {
                // Touching zero without a sign change: minimize |f| by golden section.
                let (mut lo, mut hi) = (t_prev - step, t);
                let g = 0.5 * (5f64.sqrt() - 1.0);
                while hi - lo > tol {
                    let m1 = hi - g * (hi - lo);
                    let m2 = lo + g * (hi - lo);
                    if f(m1)?.abs() < f(m2)?.abs() {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                return Ok(Some(0.5 * (lo + hi)));
            }
        }
        running_max = running_max.max(ft.abs());
        before_prev = Some(f_prev);
        t_prev = t;
        f_prev = ft;
    }
    Ok(None)
}

/// Scan spacing for conjugate-time detection.
pub const CONJUGATE_SCAN_STEP: f64 = 1e-2;
/// Bisection tolerance for conjugate times.
pub const CONJUGATE_TOL: f64 = 1e-8;

/// First conjugate time along the extremal from `state`.
///
/// The exponential map is critical at `t` exactly when the images of the
/// vertical directions under the linearized flow have degenerate
/// projection to `M`; the determinant of that `n × n` projection is scanned
/// for zeros on `(t_min, t_max]`.
pub fn first_conjugate_time(
    model: &dyn ContactModel,
    state: &ExtremalState,
    t_max: f64,
    t_min: f64,
) -> Result<Option<f64>, FlowError> {
    let n = model.n();
    let mut u0 = DMatrix::zeros(2 * n, n);
    for mu in 0..n {
        u0[(n + mu, mu)] = 1.0;
    }
    let rec = variational_flow(model, state, &u0, t_max, &OdeOptions::default())?;
    let det = |t: f64| -> Result<f64, FlowError> {
        let (_, u) = rec.at(t)?;
        Ok(u.view((0, 0), (n, n)).determinant())
    };
    first_root(det, t_min, t_max, CONJUGATE_SCAN_STEP, CONJUGATE_TOL)
}

/// Length of the windows after which [`jacobi_conjugate_time`]
/// re-orthonormalizes the solution.
pub const JACOBI_WINDOW: f64 = 1.0;

/// First zero of `det Q(t)` for the canonical Jacobi system with curvature `r(t)`.
///
/// The solution is integrated window by window and its columns are
/// re-orthonormalized in between, so exponential growth of the Jacobi
/// fields does not swamp the sign of the determinant.
pub fn jacobi_conjugate_time<F>(d: usize, r: F, t_max: f64, t_min: f64, tol: f64) -> Result<Option<f64>, FlowError>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let n = 2 * d + 1;
    let opts = OdeOptions::with_tol(1e-12);
    let (mut p, mut q) = (DMatrix::identity(n, n), DMatrix::zeros(n, n));
    let mut t0 = 0.0;
    while t0 < t_max {
        let t1 = (t0 + JACOBI_WINDOW).min(t_max);
        let sol = jacobi_from(d, t0, t1, &p, &q, &r, &opts)?;
        let lo = t_min.max(t0);
        if t1 > lo {
            if let Some(t) = first_root(|t| sol.det_q(t), lo, t1, CONJUGATE_SCAN_STEP, tol)? {
                return Ok(Some(t));
            }
        }
        let (p1, q1) = sol.at(t1)?;
        (p, q) = orthonormalize_lagrangian(&p1, &q1);
        t0 = t1;
    }
    Ok(None)
}
