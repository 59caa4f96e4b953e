//! Tanno-connection calculus in an orthonormal frame at a single point.
//!
//! Index 0 is the Reeb field, indices `1..=2d` the horizontal frame. Every
//! endomorphism is stored as an `n×n` matrix acting on frame components
//! (`A X_i = Σ_k A[k][i] X_k`); horizontal endomorphisms have zero row and
//! column 0. The connection is encoded by the matrices
//! `W_μ[k][e] = ω_{μe}^k` with `∇_{X_μ} X_e = Σ_k ω_{μe}^k X_k`.

use nalgebra::{DMatrix, DVector};

use super::Jet;
use crate::error::StructureError;

/// Connection data and its frame derivatives at one point.
#[derive(Clone, Debug)]
pub struct FrameCalculus {
    pub d: usize,
    pub n: usize,
    jet: Jet,
    w: Vec<DMatrix<f64>>,
    /// `dw[ν][μ] = X_ν(W_μ)`.
    dw: Option<Vec<Vec<DMatrix<f64>>>>,
}

fn connection_from(n: usize, c: impl Fn(usize, usize, usize) -> f64) -> Vec<DMatrix<f64>> {
    (0..n)
        .map(|mu| {
            let mut w = DMatrix::zeros(n, n);
            for e in 1..n {
                for k in 1..n {
                    w[(k, e)] = if mu == 0 {
                        0.5 * (c(k, 0, e) - c(e, 0, k))
                    } else {
                        0.5 * (c(mu, e, k) + c(k, mu, e) + c(k, e, mu))
                    };
                }
            }
            w
        })
        .collect()
}

fn j_from(n: usize, c: impl Fn(usize, usize, usize) -> f64) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(n, n);
    for i in 1..n {
        for k in 1..n {
            j[(k, i)] = c(i, k, 0);
        }
    }
    j
}

fn tau_from(n: usize, c: impl Fn(usize, usize, usize) -> f64) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(n, n);
    for i in 1..n {
        for k in 1..n {
            t[(k, i)] = 0.5 * (c(k, 0, i) + c(i, 0, k));
        }
    }
    t
}

fn comm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

impl FrameCalculus {
    pub fn new(jet: Jet) -> Self {
        let n = jet.n;
        let d = (n - 1) / 2;
        let w = connection_from(n, |a, b, g| jet.c(a, b, g));
        let dw = if jet.constant {
            Some(vec![vec![DMatrix::zeros(n, n); n]; n])
        } else {
            jet.dc.as_ref().map(|_| {
                (0..n)
                    .map(|nu| connection_from(n, |a, b, g| jet.dc(nu, a, b, g)))
                    .collect()
            })
        };
        Self { d, n, jet, w, dw }
    }

    pub fn jet(&self) -> &Jet {
        &self.jet
    }

    pub fn c(&self, a: usize, b: usize, g: usize) -> f64 {
        self.jet.c(a, b, g)
    }

    fn need(&self, order: usize) -> Result<(), StructureError> {
        let available = self.jet.order();
        if available < order {
            return Err(StructureError::MissingDerivatives { requested: order, available });
        }
        Ok(())
    }

    /// Connection matrix `W_μ`.
    pub fn w(&self, mu: usize) -> &DMatrix<f64> {
        &self.w[mu]
    }

    /// `Σ_μ v^μ W_μ`, the matrix of `∇_V` on constant-component fields.
    pub fn w_along(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for mu in 0..self.n {
            if v[mu] != 0.0 {
                m += &self.w[mu] * v[mu];
            }
        }
        m
    }

    /// `X_ν(W_μ)`.
    pub fn dw(&self, nu: usize, mu: usize) -> Result<&DMatrix<f64>, StructureError> {
        self.need(1)?;
        Ok(&self.dw.as_ref().unwrap()[nu][mu])
    }

    /// Contact endomorphism `J`.
    pub fn j(&self) -> DMatrix<f64> {
        j_from(self.n, |a, b, g| self.c(a, b, g))
    }

    fn dj(&self, nu: usize) -> DMatrix<f64> {
        j_from(self.n, |a, b, g| self.jet.dc(nu, a, b, g))
    }

    fn ddj(&self, rho: usize, nu: usize) -> DMatrix<f64> {
        j_from(self.n, |a, b, g| self.jet.d2c(rho, nu, a, b, g))
    }

    /// Pseudo-Hermitian torsion `τ(X_i) = T(X_0, X_i)`.
    pub fn tau(&self) -> DMatrix<f64> {
        tau_from(self.n, |a, b, g| self.c(a, b, g))
    }

    fn dtau(&self, nu: usize) -> DMatrix<f64> {
        tau_from(self.n, |a, b, g| self.jet.dc(nu, a, b, g))
    }

    fn ddtau(&self, rho: usize, nu: usize) -> DMatrix<f64> {
        tau_from(self.n, |a, b, g| self.jet.d2c(rho, nu, a, b, g))
    }

    /// Horizontal Christoffel symbols `Γ_{ij}^k`, stored at `[(i*n + j)*n + k]`.
    pub fn christoffel(&self) -> Vec<f64> {
        let n = self.n;
        let mut g = vec![0.0; n * n * n];
        for i in 1..n {
            for j in 1..n {
                for k in 1..n {
                    g[(i * n + j) * n + k] = self.w[i][(k, j)];
                }
            }
        }
        g
    }

    /// Torsion `T(X_a, X_b)` as a component vector.
    pub fn torsion(&self, a: usize, b: usize) -> DVector<f64> {
        DVector::from_fn(self.n, |g, _| {
            self.w[a][(g, b)] - self.w[b][(g, a)] - self.c(a, b, g)
        })
    }

    /// Curvature operator `R(X_a, X_b)` as a matrix: entry `[d][c]` is
    /// `R(X_a, X_b, X_c, X_d) = g(R(X_a,X_b)X_c, X_d)`.
    pub fn curvature_op(&self, a: usize, b: usize) -> Result<DMatrix<f64>, StructureError> {
        self.need(1)?;
        let dw = self.dw.as_ref().unwrap();
        let mut r = &dw[a][b] - &dw[b][a] + comm(&self.w[a], &self.w[b]);
        for e in 0..self.n {
            let ce = self.c(a, b, e);
            if ce != 0.0 {
                r -= &self.w[e] * ce;
            }
        }
        Ok(r)
    }

    /// All curvature operators, `ops[a][b] = R(X_a, X_b)`.
    pub fn curvature_ops(&self) -> Result<Vec<Vec<DMatrix<f64>>>, StructureError> {
        (0..self.n)
            .map(|a| (0..self.n).map(|b| self.curvature_op(a, b)).collect())
            .collect()
    }

    /// `R(X_i, X_j, X_k, X_l)`.
    pub fn curvature(&self, i: usize, j: usize, k: usize, l: usize) -> Result<f64, StructureError> {
        Ok(self.curvature_op(i, j)?[(l, k)])
    }

    /// Covariant derivative `∇_{X_μ} A` of a (1,1)-tensor given its matrix and `X_μ(A)`.
    fn cov_11(&self, mu: usize, a: &DMatrix<f64>, xa: &DMatrix<f64>) -> DMatrix<f64> {
        xa + comm(&self.w[mu], a)
    }

    /// `∇_{X_μ} τ`.
    pub fn cov_tau(&self, mu: usize) -> Result<DMatrix<f64>, StructureError> {
        self.need(1)?;
        Ok(self.cov_11(mu, &self.tau(), &self.dtau(mu)))
    }

    /// `∇_{X_μ} J`; vanishes identically for the Tanno connection only on CR structures.
    pub fn cov_j(&self, mu: usize) -> Result<DMatrix<f64>, StructureError> {
        self.need(1)?;
        Ok(self.cov_11(mu, &self.j(), &self.dj(mu)))
    }

    /// `X_ν(∇_{X_μ} A)` for `A ∈ {J, τ}`, from `X_ν A` and `X_ν X_μ A`.
    fn d_cov_11(
        &self,
        nu: usize,
        mu: usize,
        a: &DMatrix<f64>,
        da_nu: &DMatrix<f64>,
        dda: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let dw = &self.dw.as_ref().unwrap()[nu][mu];
        dda + comm(dw, a) + comm(&self.w[mu], da_nu)
    }

    /// Second covariant derivative `(∇²τ)(X_ν, X_μ) = ∇_ν(∇_μ τ) − ∇_{∇_ν X_μ} τ`.
    pub fn cov2_tau(&self, nu: usize, mu: usize) -> Result<DMatrix<f64>, StructureError> {
        self.need(2)?;
        let tau = self.tau();
        let inner = self.cov_tau(mu)?;
        let x_inner =
            self.d_cov_11(nu, mu, &tau, &self.dtau(nu), &self.ddtau(nu, mu));
        let mut r = x_inner + comm(&self.w[nu], &inner);
        for e in 0..self.n {
            let om = self.w[nu][(e, mu)];
            if om != 0.0 {
                r -= self.cov_tau(e)? * om;
            }
        }
        Ok(r)
    }

    /// Tanno tensor components: `Q(X_i, X_j) = Σ_k q[(i*n + j)*n + k] X_k`,
    /// `Q(X, Y) = (∇_Y J) X`.
    pub fn q(&self) -> Result<Vec<f64>, StructureError> {
        let n = self.n;
        let mut q = vec![0.0; n * n * n];
        for j in 0..n {
            let nj = self.cov_j(j)?;
            for i in 0..n {
                for k in 0..n {
                    q[(i * n + j) * n + k] = nj[(k, i)];
                }
            }
        }
        Ok(q)
    }

    /// `X_ν(Q_{ij}^k)` laid out like [`Self::q`].
    fn dq(&self, nu: usize) -> Result<Vec<f64>, StructureError> {
        self.need(2)?;
        let n = self.n;
        let j = self.j();
        let mut q = vec![0.0; n * n * n];
        for jj in 0..n {
            let m = self.d_cov_11(nu, jj, &j, &self.dj(nu), &self.ddj(nu, jj));
            for i in 0..n {
                for k in 0..n {
                    q[(i * n + jj) * n + k] = m[(k, i)];
                }
            }
        }
        Ok(q)
    }

    /// `(∇_{X_ν} Q)` laid out like [`Self::q`].
    pub fn cov_q(&self, nu: usize) -> Result<Vec<f64>, StructureError> {
        let n = self.n;
        let q = self.q()?;
        let dq = self.dq(nu)?;
        let w = &self.w[nu];
        let at = |i: usize, j: usize, k: usize| q[(i * n + j) * n + k];
        let mut out = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = dq[(i * n + j) * n + k];
                    for m in 0..n {
                        v += w[(k, m)] * at(i, j, m) - w[(m, i)] * at(m, j, k) - w[(m, j)] * at(i, m, k);
                    }
                    out[(i * n + j) * n + k] = v;
                }
            }
        }
        Ok(out)
    }

    /// `(∇_{X_μ} T)(X_a, X_b)` for the full torsion tensor.
    pub fn cov_torsion(&self, mu: usize, a: usize, b: usize) -> Result<DVector<f64>, StructureError> {
        self.need(1)?;
        let dw = &self.dw.as_ref().unwrap()[mu];
        let dt = |a: usize, b: usize| {
            DVector::from_fn(self.n, |g, _| {
                dw[a][(g, b)] - dw[b][(g, a)] - self.jet.dc(mu, a, b, g)
            })
        };
        let mut r = dt(a, b) + &self.w[mu] * self.torsion(a, b);
        for e in 0..self.n {
            let wa = self.w[mu][(e, a)];
            let wb = self.w[mu][(e, b)];
            if wa != 0.0 {
                r -= self.torsion(e, b) * wa;
            }
            if wb != 0.0 {
                r -= self.torsion(a, e) * wb;
            }
        }
        Ok(r)
    }
}

/// Bilinear helpers on component vectors.
pub fn apply_q(q: &[f64], n: usize, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for i in 0..n {
        if x[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if y[j] == 0.0 {
                continue;
            }
            for k in 0..n {
                out[k] += x[i] * y[j] * q[(i * n + j) * n + k];
            }
        }
    }
    out
}

/// `R(X, Y)` for vector arguments, from the operators on frame pairs.
pub fn curvature_op_vec(ops: &[Vec<DMatrix<f64>>], x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    let n = x.len();
    let mut r = DMatrix::zeros(n, n);
    for a in 0..n {
        if x[a] == 0.0 {
            continue;
        }
        for b in 0..n {
            if y[b] == 0.0 || a == b {
                continue;
            }
            r += &ops[a][b] * (x[a] * y[b]);
        }
    }
    r
}

/// `R(X, Y, Z, W)`.
pub fn curvature_vec(
    ops: &[Vec<DMatrix<f64>>],
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    w: &DVector<f64>,
) -> f64 {
    w.dot(&(curvature_op_vec(ops, x, y) * z))
}
