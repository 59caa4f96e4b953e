//! Contact sub-Riemannian structures given in frame form.
//!
//! A model supplies an orthonormal frame `X_0, X_1, ..., X_{2d}` (`X_0` the
//! Reeb field) and the structure functions `c_{αβ}^γ` defined by
//! `[X_α, X_β] = Σ_γ c_{αβ}^γ X_γ`, together with their frame-directional
//! derivatives. Everything about the Tanno connection is then algebraic in
//! these functions; see [`calculus::FrameCalculus`].
//!
//! Sign conventions: `ω(X_0) = 1`, `g(X, JY) = dω(X, Y)` and
//! `dω(X, Y) = −ω([X, Y])` on horizontal fields, so `J X_i = Σ_j c_{ij}^0 X_j`.

pub mod calculus;
pub mod dual;
pub mod file;
pub mod models;
pub mod random;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

pub use calculus::FrameCalculus;
pub use models::{builtin_model, generic3d, heisenberg, hopf_sphere, Generic3dParams, LeftInvariantModel};

use crate::error::StructureError;

/// Structure functions and their frame derivatives at one point.
///
/// Layouts: `c[(a*n + b)*n + g] = c_{ab}^g`,
/// `dc[((m*n + a)*n + b)*n + g] = X_m(c_{ab}^g)`,
/// `d2c[(((r*n + m)*n + a)*n + b)*n + g] = X_r X_m (c_{ab}^g)`.
#[derive(Clone, Debug)]
pub struct Jet {
    pub n: usize,
    pub c: Vec<f64>,
    pub dc: Option<Vec<f64>>,
    pub d2c: Option<Vec<f64>>,
    /// Structure functions are constant; all derivatives vanish.
    pub constant: bool,
}

impl Jet {
    pub fn constant(n: usize, c: Vec<f64>) -> Self {
        Self { n, c, dc: None, d2c: None, constant: true }
    }

    /// Highest derivative order available.
    pub fn order(&self) -> usize {
        if self.constant {
            usize::MAX
        } else if self.d2c.is_some() {
            2
        } else if self.dc.is_some() {
            1
        } else {
            0
        }
    }

    #[inline]
    pub fn c(&self, a: usize, b: usize, g: usize) -> f64 {
        self.c[(a * self.n + b) * self.n + g]
    }

    #[inline]
    pub fn dc(&self, m: usize, a: usize, b: usize, g: usize) -> f64 {
        match &self.dc {
            Some(v) => v[((m * self.n + a) * self.n + b) * self.n + g],
            None => {
                debug_assert!(self.constant, "first derivatives requested but not provided");
                0.0
            }
        }
    }

    #[inline]
    pub fn d2c(&self, r: usize, m: usize, a: usize, b: usize, g: usize) -> f64 {
        let n = self.n;
        match &self.d2c {
            Some(v) => v[(((r * n + m) * n + a) * n + b) * n + g],
            None => {
                debug_assert!(self.constant, "second derivatives requested but not provided");
                0.0
            }
        }
    }
}

/// A contact sub-Riemannian structure in frame form.
pub trait ContactModel: Send + Sync + std::fmt::Debug {
    fn name(&self) -> String;
    /// Half the horizontal rank; the manifold has dimension `2d + 1`.
    fn d(&self) -> usize;
    fn n(&self) -> usize {
        2 * self.d() + 1
    }
    /// Number of chart coordinates.
    fn chart_dim(&self) -> usize;
    /// Structure functions are constant.
    fn left_invariant(&self) -> bool;
    fn base_point(&self) -> Vec<f64>;
    /// Frame in chart coordinates: column `α` holds the components of `X_α`.
    fn frame(&self, x: &[f64]) -> DMatrix<f64>;
    /// Structure functions `c_{αβ}^γ` (layout as in [`Jet`]).
    fn c(&self, x: &[f64]) -> Vec<f64>;
    /// Highest derivative order of `c` the model can supply.
    fn max_jet_order(&self) -> usize;
    /// Structure functions with derivatives up to `order`.
    fn jet(&self, x: &[f64], order: usize) -> Result<Jet, StructureError>;

    /// Deterministic sample of points around the base point.
    fn sample_points(&self, count: usize, rng: &mut dyn rand::RngCore) -> Vec<Vec<f64>> {
        let base = self.base_point();
        let mut pts = vec![base.clone()];
        while pts.len() < count {
            pts.push(base.iter().map(|b| b + rng.gen_range(-0.5..0.5)).collect());
        }
        pts
    }

    /// Frame calculus at `x` with derivatives up to `order`.
    fn calculus(&self, x: &[f64], order: usize) -> Result<FrameCalculus, StructureError> {
        Ok(FrameCalculus::new(self.jet(x, order)?))
    }
}

/// Evaluates one structure function.
pub fn structure_function(model: &dyn ContactModel, x: &[f64], a: usize, b: usize, g: usize) -> f64 {
    let n = model.n();
    model.c(x)[(a * n + b) * n + g]
}

/// Maximum violation of each model invariant over a set of points.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub points: usize,
    pub antisymmetry: f64,
    pub reeb_condition: f64,
    /// `max |J² + I|` over horizontal entries.
    pub compatibility: f64,
    /// Jacobi identity residual; `None` if derivatives are unavailable.
    pub jacobi: Option<f64>,
    /// Finite-difference Lie brackets of the chart frame against `c`.
    pub frame_brackets: Option<f64>,
    pub tol: f64,
    pub bracket_tol: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.antisymmetry <= self.tol
            && self.reeb_condition <= self.tol
            && self.compatibility <= self.tol
            && self.jacobi.map_or(true, |j| j <= self.tol)
            && self.frame_brackets.map_or(true, |f| f <= self.bracket_tol)
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |name: &str, v: Option<f64>, tol: f64| {
            if let Some(v) = v {
                if !(v <= tol) {
                    out.push(format!("{name} residual {v:.3e} exceeds {tol:.1e}"));
                }
            }
        };
        check("antisymmetry", Some(self.antisymmetry), self.tol);
        check("reeb", Some(self.reeb_condition), self.tol);
        check("compatibility", Some(self.compatibility), self.tol);
        check("jacobi", self.jacobi, self.tol);
        check("frame brackets", self.frame_brackets, self.bracket_tol);
        out
    }
}

/// Algebraic residuals of the structure constants at one point.
pub fn algebraic_residuals(jet: &Jet) -> (f64, f64, f64, Option<f64>) {
    let n = jet.n;
    let mut anti: f64 = 0.0;
    let mut reeb: f64 = 0.0;
    for a in 0..n {
        reeb = reeb.max(jet.c(a, 0, 0).abs());
        for b in 0..n {
            for g in 0..n {
                anti = anti.max((jet.c(a, b, g) + jet.c(b, a, g)).abs());
            }
        }
    }
    let fc = FrameCalculus::new(jet.clone());
    let j = fc.j();
    let j2 = &j * &j;
    let mut compat: f64 = 0.0;
    for i in 1..n {
        for k in 1..n {
            let id = if i == k { 1.0 } else { 0.0 };
            compat = compat.max((j2[(i, k)] + id).abs());
        }
    }
    let jacobi = if jet.order() >= 1 {
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for g in 0..n {
                    for e in 0..n {
                        let mut s = 0.0;
                        for (x, y, z) in [(a, b, g), (b, g, a), (g, a, b)] {
                            // [X_x, [X_y, X_z]] = X_x(c_{yz}^e) + Σ_δ c_{yz}^δ c_{xδ}^e
                            s += jet.dc(x, y, z, e);
                            for dl in 0..n {
                                s += jet.c(y, z, dl) * jet.c(x, dl, e);
                            }
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        Some(worst)
    } else {
        None
    };
    (anti, reeb, compat, jacobi)
}

/// Compares central-difference Lie brackets of the chart frame with `c`.
pub fn frame_bracket_residual(model: &dyn ContactModel, x: &[f64]) -> f64 {
    let n = model.n();
    let m = model.chart_dim();
    let h = 1e-5;
    let f0 = model.frame(x);
    // jac[k] = ∂F/∂x_k
    let jac: Vec<DMatrix<f64>> = (0..m)
        .map(|k| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            (model.frame(&xp) - model.frame(&xm)) / (2.0 * h)
        })
        .collect();
    let c = model.c(x);
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let mut br = DVector::zeros(m);
            for k in 0..m {
                br += jac[k].column(b) * f0[(k, a)] - jac[k].column(a) * f0[(k, b)];
            }
            let mut expect = DVector::zeros(m);
            for g in 0..n {
                expect += f0.column(g) * c[(a * n + b) * n + g];
            }
            worst = worst.max((br - expect).amax());
        }
    }
    worst
}

/// Classification tolerance: tighter for constant structure functions.
pub fn flag_tolerance(model: &dyn ContactModel) -> f64 {
    if model.left_invariant() {
        1e-9
    } else {
        1e-6
    }
}

/// Checks every model invariant at the given points.
pub fn validate(model: &dyn ContactModel, points: &[Vec<f64>]) -> ValidationReport {
    let tol = flag_tolerance(model);
    let order = model.max_jet_order().min(1);
    let mut rep = ValidationReport {
        points: points.len(),
        antisymmetry: 0.0,
        reeb_condition: 0.0,
        compatibility: 0.0,
        jacobi: None,
        frame_brackets: None,
        tol,
        bracket_tol: 1e-6,
    };
    for x in points {
        let jet = match model.jet(x, order) {
            Ok(j) => j,
            Err(_) => model.jet(x, 0).expect("order-0 jet is always available"),
        };
        let (a, r, c, j) = algebraic_residuals(&jet);
        rep.antisymmetry = rep.antisymmetry.max(a);
        rep.reeb_condition = rep.reeb_condition.max(r);
        rep.compatibility = rep.compatibility.max(c);
        if let Some(j) = j {
            rep.jacobi = Some(rep.jacobi.unwrap_or(0.0).max(j));
        }
        let fb = frame_bracket_residual(model, x);
        // Relative to the size of the structure functions.
        let scale = jet.c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        rep.frame_brackets = Some(rep.frame_brackets.unwrap_or(0.0).max(fb / scale));
    }
    rep
}

/// Classification flags with the residual magnitudes that decided them.
#[derive(Clone, Debug, Serialize)]
pub struct Flags {
    pub is_k_type: bool,
    pub is_cr: bool,
    pub is_sasakian: bool,
    pub is_yang_mills: bool,
    pub tau_norm: f64,
    pub q_norm: f64,
    pub yang_mills_residual: f64,
    pub tol: f64,
}

/// Tanno-connection tensors at one point, horizontal blocks only
/// (index `i` here is frame index `i + 1`).
#[derive(Clone, Debug, Serialize)]
pub struct TannoData {
    pub point: Vec<f64>,
    /// `gamma[i][j][k] = Γ_{ij}^k`.
    pub gamma: Vec<Vec<Vec<f64>>>,
    pub tau: Vec<Vec<f64>>,
    pub j: Vec<Vec<f64>>,
    /// `q[i][j][k]`: `Q(X_i, X_j) = Σ_k q[i][j][k] X_k`.
    pub q: Vec<Vec<Vec<f64>>>,
    pub flags: Flags,
}

fn horizontal_block(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = m.nrows();
    (1..n).map(|r| (1..n).map(|c| m[(r, c)]).collect()).collect()
}

fn horizontal_rank3(v: &[f64], n: usize) -> Vec<Vec<Vec<f64>>> {
    (1..n)
        .map(|i| (1..n).map(|j| (1..n).map(|k| v[(i * n + j) * n + k]).collect()).collect())
        .collect()
}

/// Frobenius norm of a rank-3 array.
pub fn norm3(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// All Tanno tensors at `x` plus the structure classification.
pub fn tanno_tensors(model: &dyn ContactModel, x: &[f64]) -> Result<TannoData, StructureError> {
    let order = model.max_jet_order().min(1);
    let fc = model.calculus(x, order)?;
    let n = fc.n;
    let tol = flag_tolerance(model);
    let tau = fc.tau();
    let q = fc.q()?;
    let tau_norm = tau.norm();
    let q_norm = norm3(&q);
    let ym = yang_mills_from(&fc)?;
    Ok(TannoData {
        point: x.to_vec(),
        gamma: horizontal_rank3(&fc.christoffel(), n),
        tau: horizontal_block(&tau),
        j: horizontal_block(&fc.j()),
        q: horizontal_rank3(&q, n),
        flags: Flags {
            is_k_type: tau_norm <= tol,
            is_cr: q_norm <= tol,
            is_sasakian: tau_norm <= tol && q_norm <= tol,
            is_yang_mills: ym.tau_form.amax() <= tol && ym.torsion_form.amax() <= tol,
            tau_norm,
            q_norm,
            yang_mills_residual: ym.tau_form.amax(),
            tol,
        },
    })
}

/// Horizontal Christoffel symbols at `x`, `Γ_{ij}^k` at `[(i*n + j)*n + k]`.
pub fn christoffel(model: &dyn ContactModel, x: &[f64]) -> Vec<f64> {
    FrameCalculus::new(model.jet(x, 0).expect("order-0 jet")).christoffel()
}

/// `R(X_i, X_j, X_k, X_l)` of the Tanno connection.
pub fn tanno_curvature(
    model: &dyn ContactModel,
    x: &[f64],
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<f64, StructureError> {
    model.calculus(x, 1)?.curvature(i, j, k, l)
}

/// `∇_{X_μ} τ` (`order` 1) or `(∇²τ)(X_ν, X_μ)` (`order` 2, `direction = (ν, μ)`).
pub fn covariant_derivative_tau(
    model: &dyn ContactModel,
    x: &[f64],
    direction: (usize, usize),
    order: usize,
) -> Result<DMatrix<f64>, StructureError> {
    let fc = model.calculus(x, order)?;
    match order {
        1 => fc.cov_tau(direction.1),
        2 => fc.cov2_tau(direction.0, direction.1),
        _ => Err(StructureError::InvalidParams(format!("derivative order {order} not in {{1, 2}}"))),
    }
}

/// `∇_{X_μ} Q` laid out like [`FrameCalculus::q`].
pub fn covariant_derivative_q(model: &dyn ContactModel, x: &[f64], mu: usize) -> Result<Vec<f64>, StructureError> {
    model.calculus(x, 2)?.cov_q(mu)
}

/// The two forms whose vanishing characterizes Yang-Mills structures.
#[derive(Clone, Debug)]
pub struct YangMills {
    /// `Σ_i (∇_{X_i} τ)(X_i)`.
    pub tau_form: DVector<f64>,
    /// `Σ_i (∇_{X_i} T)(X_i, X_β)` as a matrix, column `β`.
    pub torsion_form: DMatrix<f64>,
    /// `|tau_form + torsion_form[:, 0]|`; the two must agree since
    /// `Σ_i (∇_i T)(X_i, X_0) = −Σ_i (∇_i τ)(X_i)` and the horizontal columns vanish.
    pub gap: f64,
    pub is_yang_mills: bool,
}

fn yang_mills_from(fc: &FrameCalculus) -> Result<YangMills, StructureError> {
    let n = fc.n;
    let mut tau_form = DVector::zeros(n);
    for i in 1..n {
        tau_form += fc.cov_tau(i)?.column(i);
    }
    let mut torsion_form = DMatrix::zeros(n, n);
    for b in 0..n {
        let mut col = DVector::zeros(n);
        for i in 1..n {
            col += fc.cov_torsion(i, i, b)?;
        }
        torsion_form.set_column(b, &col);
    }
    let mut gap = (&tau_form + torsion_form.column(0)).amax();
    for b in 1..n {
        gap = gap.max(torsion_form.column(b).amax());
    }
    let tol = 1e-9;
    Ok(YangMills {
        is_yang_mills: tau_form.amax() <= tol && torsion_form.amax() <= tol,
        tau_form,
        torsion_form,
        gap,
    })
}

pub fn yang_mills_residual(model: &dyn ContactModel, x: &[f64]) -> Result<YangMills, StructureError> {
    let mut ym = yang_mills_from(&model.calculus(x, 1)?)?;
    let tol = flag_tolerance(model);
    ym.is_yang_mills = ym.tau_form.amax() <= tol && ym.torsion_form.amax() <= tol;
    Ok(ym)
}

/// Largest component of `[J, J](X_i, X_j) + dω(X_i, X_j) X_0` over frame
/// pairs; zero on Sasakian structures. Diagnostic only.
pub fn nijenhuis_residual(model: &dyn ContactModel, x: &[f64]) -> Result<f64, StructureError> {
    let fc = model.calculus(x, 1)?;
    let n = fc.n;
    let jm = fc.j();
    let jet = fc.jet();
    let e = |k: usize| DVector::from_fn(n, |r, _| if r == k { 1.0 } else { 0.0 });
    // X_p applied to the components of J X_i.
    let dj_col = |p: usize, i: usize| DVector::from_fn(n, |k, _| if k == 0 { 0.0 } else { jet.dc(p, i, k, 0) });
    // [A, B] for fields with components a, b and derivative columns da(p) = X_p(a).
    let bracket = |a: &DVector<f64>, da: &dyn Fn(usize) -> DVector<f64>, b: &DVector<f64>, db: &dyn Fn(usize) -> DVector<f64>| {
        let mut out = DVector::zeros(n);
        for p in 0..n {
            for q in 0..n {
                let w = a[p] * b[q];
                if w != 0.0 {
                    for g in 0..n {
                        out[g] += w * jet.c(p, q, g);
                    }
                }
            }
            out += db(p) * a[p] - da(p) * b[p];
        }
        out
    };
    let zero = |_p: usize| DVector::<f64>::zeros(n);
    let mut worst: f64 = 0.0;
    for i in 1..n {
        for k in 1..n {
            let (xi, xk) = (e(i), e(k));
            let (jxi, jxk) = (&jm * &xi, &jm * &xk);
            let djxi = |p: usize| dj_col(p, i);
            let djxk = |p: usize| dj_col(p, k);
            let mut r = &jm * &jm * bracket(&xi, &zero, &xk, &zero) + bracket(&jxi, &djxi, &jxk, &djxk)
                - &jm * bracket(&jxi, &djxi, &xk, &zero)
                - &jm * bracket(&xi, &zero, &jxk, &djxk);
            r[0] -= jet.c(i, k, 0);
            worst = worst.max(r.amax());
        }
    }
    Ok(worst)
}
