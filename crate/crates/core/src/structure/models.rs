//! Concrete models: left-invariant structures on Lie groups, the standard
//! contact sphere, and a finite-difference wrapper for user frames.

use nalgebra::DMatrix;
use rand::Rng;

use super::dual::{Dual, Scalar};
use super::{algebraic_residuals, ContactModel, Jet};
use crate::error::StructureError;

/// Left-invariant structure given by constant structure constants.
///
/// Chart: exponential coordinates of the first kind, `x ↦ exp(Σ x^α e_α)`.
/// The left-invariant field `X_β` has coordinate components
/// `g(ad_x)^{-1} e_β` with `g(A) = (I − e^{−A})/A`. The chart is global for
/// nilpotent algebras and degenerates where `ad_x` has an eigenvalue in
/// `2πi·Z∖{0}` otherwise.
#[derive(Clone, Debug)]
pub struct LeftInvariantModel {
    name: String,
    d: usize,
    c: Vec<f64>,
}

impl LeftInvariantModel {
    /// Builds a model from a full `n×n×n` constant array, checking every
    /// invariant (antisymmetry, Reeb condition, compatibility, Jacobi).
    pub fn new(name: impl Into<String>, d: usize, c: Vec<f64>) -> Result<Self, StructureError> {
        let n = 2 * d + 1;
        if d == 0 || c.len() != n * n * n {
            return Err(StructureError::InvalidModel(format!(
                "expected {} structure constants for d = {d}, got {}",
                n * n * n,
                c.len()
            )));
        }
        let m = Self { name: name.into(), d, c };
        let (anti, reeb, compat, jacobi) = algebraic_residuals(&Jet::constant(n, m.c.clone()));
        let tol = 1e-9;
        let mut problems = Vec::new();
        if anti > tol {
            problems.push(format!("antisymmetry residual {anti:.3e}"));
        }
        if reeb > tol {
            problems.push(format!("Reeb condition residual {reeb:.3e}"));
        }
        if compat > tol {
            problems.push(format!("compatibility |J²+I| = {compat:.3e}"));
        }
        if let Some(j) = jacobi.filter(|j| *j > tol) {
            problems.push(format!("Jacobi identity residual {j:.3e}"));
        }
        if problems.is_empty() {
            Ok(m)
        } else {
            Err(StructureError::InvalidModel(problems.join("; ")))
        }
    }

    /// Builds a model without checking invariants (for diagnostics).
    pub fn new_unchecked(name: impl Into<String>, d: usize, c: Vec<f64>) -> Self {
        Self { name: name.into(), d, c }
    }

    pub fn constants(&self) -> &[f64] {
        &self.c
    }

    /// Matrix of `ad_v`: `(ad_v)[γ][β] = Σ_α v^α c_{αβ}^γ`.
    pub fn ad(&self, v: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            if v[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                for g in 0..n {
                    m[(g, b)] += v[a] * self.c[(a * n + b) * n + g];
                }
            }
        }
        m
    }
}

/// `(I − e^{−A})/A`, read off the exponential of `[[−A, I], [0, 0]]`.
fn dexp_factor(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(-a));
    big.view_mut((0, n), (n, n)).fill_with_identity();
    big.exp().view((0, n), (n, n)).into_owned()
}

impl ContactModel for LeftInvariantModel {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn d(&self) -> usize {
        self.d
    }
    fn chart_dim(&self) -> usize {
        self.n()
    }
    fn left_invariant(&self) -> bool {
        true
    }
    fn base_point(&self) -> Vec<f64> {
        vec![0.0; self.n()]
    }
    fn frame(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        if x.iter().all(|v| *v == 0.0) {
            return DMatrix::identity(n, n);
        }
        let g = dexp_factor(&self.ad(x));
        g.try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN))
    }
    fn c(&self, _x: &[f64]) -> Vec<f64> {
        self.c.clone()
    }
    fn max_jet_order(&self) -> usize {
        usize::MAX
    }
    fn jet(&self, _x: &[f64], _order: usize) -> Result<Jet, StructureError> {
        Ok(Jet::constant(self.n(), self.c.clone()))
    }
}

fn set_pair(c: &mut [f64], n: usize, a: usize, b: usize, g: usize, v: f64) {
    c[(a * n + b) * n + g] = v;
    c[(b * n + a) * n + g] = -v;
}

/// Heisenberg group `H_{2d+1}`: `[X_i, X_{i+d}] = X_0`, all other brackets zero.
pub fn heisenberg(d: usize) -> Result<LeftInvariantModel, StructureError> {
    if d == 0 {
        return Err(StructureError::InvalidParams("d must be at least 1".into()));
    }
    let n = 2 * d + 1;
    let mut c = vec![0.0; n * n * n];
    for i in 1..=d {
        set_pair(&mut c, n, i, i + d, 0, 1.0);
    }
    LeftInvariantModel::new(format!("heisenberg({d})"), d, c)
}

/// Free brackets of a three-dimensional left-invariant model with
/// `[X_1, X_2] = X_0 + p X_1 + q X_2` (`p = c12_1`, `q = c12_2`).
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Generic3dParams {
    pub c12_1: f64,
    pub c12_2: f64,
    pub c10_1: f64,
    pub c10_2: f64,
    pub c20_1: f64,
    pub c20_2: f64,
}

impl Generic3dParams {
    /// Parses `key=value` pairs separated by commas, e.g. `c10_1=0.5,c20_2=-0.5`.
    pub fn parse(s: &str) -> Result<Self, StructureError> {
        let mut p = Self::default();
        for item in s.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| StructureError::InvalidParams(format!("expected key=value, got `{item}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| StructureError::InvalidParams(format!("bad number in `{item}`")))?;
            match k.trim() {
                "c12_1" => p.c12_1 = v,
                "c12_2" => p.c12_2 = v,
                "c10_1" => p.c10_1 = v,
                "c10_2" => p.c10_2 = v,
                "c20_1" => p.c20_1 = v,
                "c20_2" => p.c20_2 = v,
                other => {
                    return Err(StructureError::InvalidParams(format!("unknown generic3d parameter `{other}`")))
                }
            }
        }
        Ok(p)
    }

    /// Brackets `[X_1, X_0] = a X_1 + b X_2`, `[X_2, X_0] = e X_1 − a X_2`,
    /// `[X_1, X_2] = X_0`, which satisfy the Jacobi identity for all `(a, b, e)`.
    pub fn unimodular(a: f64, b: f64, e: f64) -> Self {
        Self { c10_1: a, c10_2: b, c20_1: e, c20_2: -a, ..Self::default() }
    }
}

/// Three-dimensional left-invariant model from free bracket parameters.
pub fn generic3d(p: Generic3dParams) -> Result<LeftInvariantModel, StructureError> {
    let n = 3;
    let mut c = vec![0.0; 27];
    set_pair(&mut c, n, 1, 2, 0, 1.0);
    set_pair(&mut c, n, 1, 2, 1, p.c12_1);
    set_pair(&mut c, n, 1, 2, 2, p.c12_2);
    set_pair(&mut c, n, 1, 0, 1, p.c10_1);
    set_pair(&mut c, n, 1, 0, 2, p.c10_2);
    set_pair(&mut c, n, 2, 0, 1, p.c20_1);
    set_pair(&mut c, n, 2, 0, 2, p.c20_2);
    LeftInvariantModel::new("generic3d", 1, c).map_err(|e| match e {
        StructureError::InvalidModel(m) => StructureError::InvalidParams(m),
        other => other,
    })
}

/// Complex number over a generic scalar.
#[derive(Clone, Copy, Debug)]
struct Cx<S> {
    re: S,
    im: S,
}

impl<S: Scalar> Cx<S> {
    fn new(re: S, im: S) -> Self {
        Self { re, im }
    }
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
    fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }
    fn times_i(self) -> Self {
        Self::new(-self.im, self.re)
    }
    fn scale(self, s: S) -> Self {
        Self::new(self.re * s, self.im * s)
    }
}

/// Hermitian product `Σ a_k conj(b_k)`.
fn herm<S: Scalar>(a: &[Cx<S>], b: &[Cx<S>]) -> Cx<S> {
    a.iter().zip(b).fold(Cx::new(S::zero(), S::zero()), |acc, (x, y)| acc.add(x.mul(y.conj())))
}

fn cnorm<S: Scalar>(a: &[Cx<S>]) -> S {
    herm(a, a).re.sqrt()
}

/// Standard contact sphere `S^{2d+1} ⊂ C^{d+1}` with the round metric on the
/// contact distribution and Reeb field `X_0 = −2 i z`, in ambient real
/// coordinates `(Re z_0, Im z_0, ..., Re z_d, Im z_d)`.
///
/// Frames are radially invariant. For `d = 1` the frame
/// `X_1 = (−z̄_1, z̄_0)`, `X_2 = i X_1` is invariant under `SU(2)`, so the
/// structure functions are constant. For `d ≥ 2` no global frame exists; the
/// horizontal frame `u_k, i u_k` is built from fixed reference vectors and is
/// singular on a small set away from the base point `(0, ..., 0, 1)`.
#[derive(Clone, Debug)]
pub struct SphereModel {
    d: usize,
}

impl SphereModel {
    pub fn new(d: usize) -> Result<Self, StructureError> {
        if d == 0 {
            return Err(StructureError::InvalidParams("d must be at least 1".into()));
        }
        Ok(Self { d })
    }

    fn reference_vectors(&self) -> Vec<Vec<Cx<f64>>> {
        let m = self.d + 1;
        (0..self.d)
            .map(|k| {
                (0..m)
                    .map(|j| {
                        // Fixed generic vectors, mostly supported on the first d slots.
                        let base = if j == k { 1.0 } else { 0.0 };
                        let jitter = if j < self.d { 0.1 * ((j + 2 * k + 1) as f64).sin() } else { 0.0 };
                        Cx::new(base + jitter, 0.05 * ((3 * j + k) as f64).cos())
                    })
                    .collect()
            })
            .collect()
    }

    /// Frame fields at `x` as `n` ambient vectors.
    fn frame_generic<S: Scalar>(&self, x: &[S]) -> Vec<Vec<S>> {
        let d = self.d;
        let m = d + 1;
        let norm = x.iter().fold(S::zero(), |a, v| a + *v * *v).sqrt();
        let z: Vec<Cx<S>> = (0..m).map(|k| Cx::new(x[2 * k] / norm, x[2 * k + 1] / norm)).collect();
        let us: Vec<Vec<Cx<S>>> = if d == 1 {
            vec![vec![z[1].conj().scale(S::cst(-1.0)), z[0].conj()]]
        } else {
            let refs = self.reference_vectors();
            let mut us: Vec<Vec<Cx<S>>> = Vec::with_capacity(d);
            for r in refs {
                let mut v: Vec<Cx<S>> = r.iter().map(|c| Cx::new(S::cst(c.re), S::cst(c.im))).collect();
                for basis in std::iter::once(&z).chain(us.iter()) {
                    let p = herm(&v, basis);
                    v = v.iter().zip(basis.iter()).map(|(a, b)| a.sub(b.mul(p))).collect();
                }
                let nv = cnorm(&v);
                us.push(v.into_iter().map(|a| a.scale(S::cst(1.0) / nv)).collect());
            }
            us
        };
        let flat = |v: &[Cx<S>]| v.iter().flat_map(|c| [c.re, c.im]).collect::<Vec<S>>();
        let mut fields = Vec::with_capacity(2 * d + 1);
        fields.push(flat(&z.iter().map(|c| c.times_i().scale(S::cst(-2.0))).collect::<Vec<_>>()));
        for u in &us {
            fields.push(flat(u));
        }
        for u in &us {
            fields.push(flat(&u.iter().map(|c| c.times_i()).collect::<Vec<_>>()));
        }
        fields
    }

    /// Structure functions at `y`, via one extra dual level for the Jacobians.
    fn structure_generic<S: Scalar>(&self, y: &[S]) -> Vec<S> {
        let n = 2 * self.d + 1;
        let m = y.len();
        let f = self.frame_generic(y);
        // jac[k][α][i] = ∂_k (X_α)_i
        let jac: Vec<Vec<Vec<S>>> = (0..m)
            .map(|k| {
                let yd: Vec<Dual<S>> = y
                    .iter()
                    .enumerate()
                    .map(|(i, v)| Dual::new(*v, S::cst(if i == k { 1.0 } else { 0.0 })))
                    .collect();
                self.frame_generic(&yd).into_iter().map(|col| col.into_iter().map(|v| v.e).collect()).collect()
            })
            .collect();
        let sq: Vec<S> = f.iter().map(|v| v.iter().fold(S::zero(), |a, x| a + *x * *x)).collect();
        let mut c = vec![S::zero(); n * n * n];
        for a in 0..n {
            for b in (a + 1)..n {
                let br: Vec<S> = (0..m)
                    .map(|i| {
                        let mut s = S::zero();
                        for k in 0..m {
                            s += jac[k][b][i] * f[a][k] - jac[k][a][i] * f[b][k];
                        }
                        s
                    })
                    .collect();
                for g in 0..n {
                    let dot = br.iter().zip(&f[g]).fold(S::zero(), |acc, (p, q)| acc + *p * *q);
                    let v = dot / sq[g];
                    c[(a * n + b) * n + g] = v;
                    c[(b * n + a) * n + g] = -v;
                }
            }
        }
        c
    }
}

impl ContactModel for SphereModel {
    fn name(&self) -> String {
        format!("hopf_sphere({})", self.d)
    }
    fn d(&self) -> usize {
        self.d
    }
    fn chart_dim(&self) -> usize {
        2 * self.d + 2
    }
    fn left_invariant(&self) -> bool {
        self.d == 1
    }
    fn base_point(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.chart_dim()];
        x[2 * self.d] = 1.0;
        x
    }
    fn frame(&self, x: &[f64]) -> DMatrix<f64> {
        let f = self.frame_generic(x);
        DMatrix::from_fn(self.chart_dim(), self.n(), |i, a| f[a][i])
    }
    fn c(&self, x: &[f64]) -> Vec<f64> {
        self.structure_generic(x)
    }
    fn max_jet_order(&self) -> usize {
        2
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<Jet, StructureError> {
        let n = self.n();
        let c = self.structure_generic(x);
        if self.d == 1 {
            return Ok(Jet::constant(n, c));
        }
        if order > 2 {
            return Err(StructureError::MissingDerivatives { requested: order, available: 2 });
        }
        let fx = self.frame_generic(x);
        let mut jet = Jet { n, c, dc: None, d2c: None, constant: false };
        if order >= 1 {
            let mut dc = Vec::with_capacity(n * n * n * n);
            for mu in 0..n {
                let y: Vec<Dual<f64>> = x.iter().zip(&fx[mu]).map(|(a, b)| Dual::new(*a, *b)).collect();
                dc.extend(self.structure_generic(&y).into_iter().map(|v| v.e));
            }
            jet.dc = Some(dc);
        }
        if order >= 2 {
            type D2 = Dual<Dual<f64>>;
            let mut d2c = Vec::with_capacity(n * n * n * n * n);
            let r_inf: D2 = Dual::new(Dual::new(0.0, 1.0), Dual::new(0.0, 0.0));
            for nu in 0..n {
                // y(s) = x + s X_ν(x), with s carried by the outer dual part.
                let y: Vec<D2> = x
                    .iter()
                    .zip(&fx[nu])
                    .map(|(a, b)| Dual::new(Dual::new(*a, 0.0), Dual::new(*b, 0.0)))
                    .collect();
                let fy = self.frame_generic(&y);
                for mu in 0..n {
                    // z(s, r) = y(s) + r X_μ(y(s)), with r carried by the inner part.
                    let z: Vec<D2> = y.iter().zip(&fy[mu]).map(|(a, b)| *a + r_inf * *b).collect();
                    d2c.extend(self.structure_generic(&z).into_iter().map(|v| v.e.e));
                }
            }
            jet.d2c = Some(d2c);
        }
        Ok(jet)
    }
    fn sample_points(&self, count: usize, rng: &mut dyn rand::RngCore) -> Vec<Vec<f64>> {
        let base = self.base_point();
        let mut pts = vec![base.clone()];
        while pts.len() < count {
            let v: Vec<f64> = base.iter().map(|b| b + rng.gen_range(-0.4..0.4)).collect();
            let nrm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            pts.push(v.iter().map(|a| a / nrm).collect());
        }
        pts
    }
}

/// Hopf sphere model `S^{2d+1}`.
pub fn hopf_sphere(d: usize) -> Result<SphereModel, StructureError> {
    SphereModel::new(d)
}

/// A frame and structure functions supplied without derivatives.
pub trait FrameFunctions: Send + Sync + std::fmt::Debug {
    fn d(&self) -> usize;
    fn chart_dim(&self) -> usize;
    fn base_point(&self) -> Vec<f64>;
    fn frame(&self, x: &[f64]) -> DMatrix<f64>;
    fn c(&self, x: &[f64]) -> Vec<f64>;
}

/// Supplies `X_μ(c)` by central differences along integral curves of the
/// frame (step `1e-5`); second derivatives are unavailable. Accuracy of the
/// derivatives is about `1e-4` relative in the worst case.
#[derive(Debug)]
pub struct FiniteDifferenceModel<F: FrameFunctions> {
    pub inner: F,
    pub step: f64,
}

impl<F: FrameFunctions> FiniteDifferenceModel<F> {
    pub fn new(inner: F) -> Self {
        Self { inner, step: 1e-5 }
    }

    /// Point reached by following `X_μ` for time `s` (one RK4 step).
    fn follow(&self, x: &[f64], mu: usize, s: f64) -> Vec<f64> {
        let field = |y: &[f64]| -> Vec<f64> { self.inner.frame(y).column(mu).iter().copied().collect() };
        let add = |y: &[f64], k: &[f64], h: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + h * b).collect() };
        let k1 = field(x);
        let k2 = field(&add(x, &k1, s / 2.0));
        let k3 = field(&add(x, &k2, s / 2.0));
        let k4 = field(&add(x, &k3, s));
        (0..x.len()).map(|i| x[i] + s / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
    }
}

impl<F: FrameFunctions> ContactModel for FiniteDifferenceModel<F> {
    fn name(&self) -> String {
        "finite-difference".into()
    }
    fn d(&self) -> usize {
        self.inner.d()
    }
    fn chart_dim(&self) -> usize {
        self.inner.chart_dim()
    }
    fn left_invariant(&self) -> bool {
        false
    }
    fn base_point(&self) -> Vec<f64> {
        self.inner.base_point()
    }
    fn frame(&self, x: &[f64]) -> DMatrix<f64> {
        self.inner.frame(x)
    }
    fn c(&self, x: &[f64]) -> Vec<f64> {
        self.inner.c(x)
    }
    fn max_jet_order(&self) -> usize {
        1
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<Jet, StructureError> {
        if order > 1 {
            return Err(StructureError::MissingDerivatives { requested: order, available: 1 });
        }
        let n = self.n();
        let c = self.inner.c(x);
        let dc = if order == 1 {
            let h = self.step;
            let mut dc = Vec::with_capacity(n * n * n * n);
            for mu in 0..n {
                let cp = self.inner.c(&self.follow(x, mu, h));
                let cm = self.inner.c(&self.follow(x, mu, -h));
                dc.extend(cp.iter().zip(&cm).map(|(p, m)| (p - m) / (2.0 * h)));
            }
            Some(dc)
        } else {
            None
        };
        Ok(Jet { n, c, dc, d2c: None, constant: false })
    }
}

/// Builtin model by name: `heisenberg`, `hopf_sphere`, `generic3d`.
pub fn builtin_model(
    name: &str,
    d: usize,
    params: Option<Generic3dParams>,
) -> Result<Box<dyn ContactModel>, StructureError> {
    match name {
        "heisenberg" => Ok(Box::new(heisenberg(d)?)),
        "hopf_sphere" | "hopf" => Ok(Box::new(hopf_sphere(d)?)),
        "generic3d" => {
            if d != 1 {
                return Err(StructureError::InvalidParams("generic3d has d = 1".into()));
            }
            Ok(Box::new(generic3d(params.unwrap_or_default())?))
        }
        other => Err(StructureError::UnknownModel(other.to_string())),
    }
}

/// Names of the builtin model families.
pub const BUILTIN_NAMES: [&str; 3] = ["heisenberg", "hopf_sphere", "generic3d"];
