//! Random left-invariant contact structures for property tests.
//!
//! The Lie algebra is a three-dimensional unimodular contact algebra plus
//! `d − 1` copies of the affine algebra `[f_1, f_2] = λ f_2`. A contact form
//! is chosen on the sum, the horizontal frame is made symplectic for `dθ`
//! and then moved by a random symplectic matrix, which changes the metric
//! while keeping `J` standard.

use nalgebra::DMatrix;
use rand::Rng;

use super::models::LeftInvariantModel;
use crate::error::StructureError;

/// Bracket table `[e_u, e_v] = Σ_w k[(u*n + v)*n + w] e_w` of an algebra.
struct Algebra {
    n: usize,
    k: Vec<f64>,
}

impl Algebra {
    fn set(&mut self, u: usize, v: usize, w: usize, val: f64) {
        let n = self.n;
        self.k[(u * n + v) * n + w] = val;
        self.k[(v * n + u) * n + w] = -val;
    }

    fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for u in 0..n {
            for v in 0..n {
                let s = x[u] * y[v];
                if s == 0.0 {
                    continue;
                }
                for w in 0..n {
                    out[w] += s * self.k[(u * n + v) * n + w];
                }
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Draws a random left-invariant model of dimension `2d + 1`.
pub fn random_left_invariant(d: usize, rng: &mut impl Rng) -> Result<LeftInvariantModel, StructureError> {
    if d == 0 {
        return Err(StructureError::InvalidParams("d must be at least 1".into()));
    }
    for _ in 0..32 {
        if let Ok(m) = try_random(d, rng) {
            return Ok(m);
        }
    }
    Err(StructureError::InvalidModel("could not draw a nondegenerate random model".into()))
}

fn try_random(d: usize, rng: &mut impl Rng) -> Result<LeftInvariantModel, StructureError> {
    let n = 2 * d + 1;
    let mut alg = Algebra { n, k: vec![0.0; n * n * n] };
    let (a, b, e) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    alg.set(1, 2, 0, 1.0);
    alg.set(1, 0, 1, a);
    alg.set(1, 0, 2, b);
    alg.set(2, 0, 1, e);
    alg.set(2, 0, 2, -a);
    let mut theta = vec![0.0; n];
    theta[0] = 1.0;
    for k in 1..d {
        let (f1, f2) = (1 + 2 * k, 2 + 2 * k);
        let lambda = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        alg.set(f1, f2, f2, lambda);
        theta[f2] = rng.gen_range(0.5..1.5);
    }

    // Reeb vector: kernel of dθ, normalized by θ(R) = 1.
    let m = DMatrix::from_fn(n, n, |u, v| {
        let mut eu = vec![0.0; n];
        let mut ev = vec![0.0; n];
        eu[u] = 1.0;
        ev[v] = 1.0;
        -dot(&theta, &alg.bracket(&eu, &ev))
    });
    let svd = m.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| StructureError::InvalidModel("SVD failed".into()))?;
    let (imin, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
    if smin > 1e-10 {
        return Err(StructureError::InvalidModel("dθ has no kernel".into()));
    }
    let mut reeb: Vec<f64> = vt.row(imin).iter().copied().collect();
    let tr = dot(&theta, &reeb);
    if tr.abs() < 1e-8 {
        return Err(StructureError::InvalidModel("θ is not a contact form".into()));
    }
    reeb.iter_mut().for_each(|v| *v /= tr);

    // Basis of ker θ.
    let piv = (0..n).max_by(|&i, &j| theta[i].abs().total_cmp(&theta[j].abs())).unwrap();
    let mut pool: Vec<Vec<f64>> = (0..n)
        .filter(|&u| u != piv)
        .map(|u| {
            let mut v = vec![0.0; n];
            v[u] = 1.0;
            v[piv] = -theta[u] / theta[piv];
            v
        })
        .collect();

    // Symplectic Gram–Schmidt for Ω(u, v) = θ([u, v]).
    let omega = |x: &[f64], y: &[f64]| dot(&theta, &alg.bracket(x, y));
    let mut us = Vec::with_capacity(d);
    let mut vs = Vec::with_capacity(d);
    while !pool.is_empty() {
        let u = pool.remove(0);
        let (jbest, wbest) = pool
            .iter()
            .enumerate()
            .map(|(j, w)| (j, omega(&u, w)))
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .ok_or_else(|| StructureError::InvalidModel("odd symplectic pool".into()))?;
        if wbest.abs() < 1e-8 {
            return Err(StructureError::InvalidModel("dθ degenerate on ker θ".into()));
        }
        let v: Vec<f64> = pool.remove(jbest).iter().map(|x| x / wbest).collect();
        for w in pool.iter_mut() {
            let (wv, wu) = (omega(w, &v), omega(w, &u));
            for i in 0..n {
                w[i] += -wv * u[i] + wu * v[i];
            }
        }
        us.push(u);
        vs.push(v);
    }

    // Random symplectic change of horizontal frame: P = exp(Ω₀ S).
    let h = 2 * d;
    let mut s = DMatrix::<f64>::zeros(h, h);
    for i in 0..h {
        for j in i..h {
            let x = rng.gen_range(-0.3..0.3);
            s[(i, j)] = x;
            s[(j, i)] = x;
        }
    }
    let mut omega0 = DMatrix::<f64>::zeros(h, h);
    for i in 0..d {
        omega0[(i, i + d)] = 1.0;
        omega0[(i + d, i)] = -1.0;
    }
    let p = (omega0 * s).exp();
    let y = DMatrix::from_fn(n, h, |r, c| if c < d { us[c][r] } else { vs[c - d][r] });
    let yp = y * p;

    let mut frame = DMatrix::<f64>::zeros(n, n);
    frame.column_mut(0).copy_from_slice(&reeb);
    frame.view_mut((0, 1), (n, h)).copy_from(&yp);
    let inv = frame.clone().try_inverse().ok_or_else(|| StructureError::InvalidModel("singular frame".into()))?;

    let cols: Vec<Vec<f64>> = (0..n).map(|c| frame.column(c).iter().copied().collect()).collect();
    let mut c = vec![0.0; n * n * n];
    for al in 0..n {
        for be in 0..n {
            let br = nalgebra::DVector::from_vec(alg.bracket(&cols[al], &cols[be]));
            let coords = &inv * br;
            for g in 0..n {
                c[(al * n + be) * n + g] = coords[g];
            }
        }
    }
    LeftInvariantModel::new(format!("random({d})"), d, c)
}
