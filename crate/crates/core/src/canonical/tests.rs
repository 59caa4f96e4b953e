use super::*;
use crate::flow::{flow, normalize_unit_speed};
use crate::structure::random::random_left_invariant;
use crate::structure::{generic3d, heisenberg, hopf_sphere, Generic3dParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit_state(model: &dyn ContactModel, h: &[f64]) -> ExtremalState {
    normalize_unit_speed(&ExtremalState::new(model.base_point(), h.to_vec())).unwrap()
}

fn cr_model() -> impl ContactModel {
    generic3d(Generic3dParams::unimodular(0.5, 0.3, -0.2)).unwrap()
}

fn random_model(d: usize, seed: u64) -> impl ContactModel {
    random_left_invariant(d, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn covector(n: usize, k: u64) -> Vec<f64> {
    (0..n).map(|i| ((i as f64 + 1.3) * (k as f64 + 0.7)).sin()).collect()
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.abs().max()
}

#[test]
fn heisenberg_adapted_frame() {
    let m = heisenberg(1).unwrap();
    let o = adapted_frame(&m, &ExtremalState::new(vec![0.0; 3], vec![0.7, 1.0, 0.0]), None).unwrap();
    assert_eq!(o.column(2).as_slice(), &[0.0, 1.0, 0.0]);
    assert_eq!(o.column(1).as_slice(), &[0.0, 0.0, -1.0]);
}

#[test]
fn adapted_frame_is_orthonormal_and_rejects_trivial_covector() {
    let m = random_model(3, 4);
    let s = unit_state(&m, &covector(7, 1));
    let o = adapted_frame(&m, &s, None).unwrap();
    assert!((o.transpose() * &o - DMatrix::identity(7, 7)).abs().max() < 1e-14);
    let j = m.calculus(&s.x, 0).unwrap().j();
    assert!(max_abs(&(o.column(1) + &j * o.column(6))) < 1e-14);
    let zero = ExtremalState::new(m.base_point(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert!(matches!(adapted_frame(&m, &zero, None), Err(Error::Flow(FlowError::TrivialCovector))));
}

#[test]
fn seed_rotation_changes_only_middle_vectors() {
    let m = heisenberg(2).unwrap();
    let s = unit_state(&m, &[0.3, 0.2, -0.5, 0.7, 0.1]);
    let rot = DMatrix::from_fn(4, 4, |i, j| ((i * 4 + j) as f64 * 0.37).cos()).qr().q();
    let a = adapted_frame(&m, &s, None).unwrap();
    let b = adapted_frame(&m, &s, Some(&rot)).unwrap();
    assert_eq!(a.column(1), b.column(1));
    assert_eq!(a.column(4), b.column(4));
    assert!((b.transpose() * &b - DMatrix::identity(5, 5)).abs().max() < 1e-14);
}

#[test]
fn splitting_of_heisenberg() {
    let m = heisenberg(1).unwrap();
    let s = ExtremalState::new(vec![0.0; 3], vec![0.7, 1.0, 0.0]);
    let (xa, xb, sc) = canonical_splitting(&m, &s).unwrap();
    assert_eq!(xa.as_slice(), &[1.0, -0.7, 0.0]);
    assert_eq!(xb.as_slice(), &[0.0, 0.0, -1.0]);
    assert_eq!(sc.len(), 1);
    let m2 = heisenberg(2).unwrap();
    let (_, _, sc) = canonical_splitting(&m2, &unit_state(&m2, &[0.1, 1.0, 0.0, 0.5, 0.0])).unwrap();
    assert_eq!(sc.len(), 3);
}

#[test]
fn heisenberg_blocks() {
    for d in 1..=3 {
        let m = heisenberg(d).unwrap();
        let h0 = 0.8;
        let mut h = vec![0.0; 2 * d + 1];
        h[0] = h0;
        h[1] = 0.6;
        h[2 * d] = 0.8;
        let geo = flow(&m, &ExtremalState::new(vec![0.0; 2 * d + 1], h), 2.0, 1e-12).unwrap();
        let frame = parallel_frame(&m, &geo).unwrap();
        let b = curvature_blocks(&frame, 1.3).unwrap();
        assert!((b.rbb - h0 * h0).abs() < 1e-12);
        assert!(b.raa.abs() < 1e-12 && b.rac.iter().all(|v| v.abs() < 1e-12));
        assert!(b.rbc.iter().all(|v| v.abs() < 1e-12));
        for i in 0..2 * d - 1 {
            for j in 0..2 * d - 1 {
                let want = if i == j && i < 2 * d - 2 { 0.25 * h0 * h0 } else { 0.0 };
                assert!((b.rcc[i][j] - want).abs() < 1e-10, "{d} {i} {j} {}", b.rcc[i][j]);
            }
        }
        assert_eq!(b.aa_ac_mode, AaAcMode::Closed);
    }
}

#[test]
fn hopf_and_heisenberg_ricci() {
    let m = hopf_sphere(1).unwrap();
    let s = unit_state(&m, &[0.0, 1.0, 0.0]);
    let frame = parallel_frame_from(&m, &s, 1.0, None).unwrap();
    let b = curvature_blocks(&frame, 0.0).unwrap();
    assert!((b.ricci.b - 4.0).abs() < 1e-10 && b.ricci.a.abs() < 1e-10, "{:?}", b.ricci);

    let m = heisenberg(2).unwrap();
    let s = unit_state(&m, &[1.0, 0.0, 1.0, 0.0, 0.0]);
    let frame = parallel_frame_from(&m, &s, 1.0, None).unwrap();
    let b = curvature_blocks(&frame, 0.5).unwrap();
    assert!((b.ricci.c - 0.5).abs() < 1e-10, "{:?}", b);
    assert_eq!(ricci(&CurvatureBlocks::from_parts(
        0.0,
        0.0,
        &DVector::zeros(1),
        0.0,
        &DVector::zeros(1),
        &DMatrix::zeros(1, 1),
        AaAcMode::Closed
    )), (0.0, 0.0, 0.0));
}

#[test]
fn moving_frame_invariants() {
    let m = heisenberg(2).unwrap();
    let s = ExtremalState::new(vec![0.0; 5], vec![1.0, 0.6, 0.0, 0.0, 0.8]);
    let frame = parallel_frame_from(&m, &s, 10.0, None).unwrap();
    for k in 0..=20 {
        let p = frame.at(0.5 * k as f64).unwrap();
        assert!((p.frame.transpose() * &p.frame - DMatrix::identity(5, 5)).abs().max() < 1e-8);
        for j in 1..5 {
            let want = if j == 4 { 1.0 } else { 0.0 };
            assert!((p.a[j] - want).abs() < 1e-10);
        }
    }
    for (model, h) in [
        (Box::new(random_model(2, 9)) as Box<dyn ContactModel>, covector(5, 3)),
        (Box::new(hopf_sphere(2).unwrap()), covector(5, 4)),
    ] {
        let s = unit_state(model.as_ref(), &h);
        let frame = parallel_frame_from(model.as_ref(), &s, 2.0, None).unwrap();
        let p = frame.at(1.7).unwrap();
        let jm = model.calculus(&p.state.x, 0).unwrap().j();
        assert!((p.frame.transpose() * &p.frame - DMatrix::identity(5, 5)).abs().max() < 1e-8);
        assert!(max_abs(&(p.frame.column(1) + &jm * p.frame.column(4))) < 1e-8);
        // Transport law via differences of the dense frame.
        let e = 1e-3;
        let f = |k: f64| frame.at(1.7 + k * e).unwrap().frame;
        let fd = (f(-2.0) - f(-1.0) * 8.0 + f(1.0) * 8.0 - f(2.0)) / (12.0 * e);
        assert!((&fd - p.frame_derivative()).abs().max() < 1e-7, "{}", fd - p.frame_derivative());
    }
}

/// Oracle: the frame formulas for `F_b`, `F_a` against differentiating the
/// defining relations `F_b = −Ė_b`, `F_a = −Ḟ_b + R_bb E_b + Σ R_bc E_c`.
#[test]
fn frame_formulas_match_definitions() {
    let models: Vec<Box<dyn ContactModel>> =
        vec![Box::new(cr_model()), Box::new(random_model(2, 5)), Box::new(hopf_sphere(2).unwrap()), Box::new(random_model(3, 6))];
    for (k, model) in models.iter().enumerate() {
        let n = model.n();
        let s = unit_state(model.as_ref(), &covector(n, k as u64));
        let frame = parallel_frame_from(model.as_ref(), &s, 1.0, None).unwrap();
        let patch = frame.local_patch(0.4, 1e-3).unwrap();
        let c = patch.centre();
        let fb = -patch.derivative(|p| Ok(p.e_fields()[1].clone())).unwrap();
        assert!(max_abs(&(&fb - c.f_b())) < 1e-8, "F_b, model {k}: {}", max_abs(&(&fb - c.f_b())));

        let fb_dot = patch.derivative(|p| Ok(p.f_b())).unwrap();
        let (rbb, rbc, rcc) = c.bb_bc_cc().unwrap();
        let fb_ = c.f_b();
        assert!((patch.sigma(&fb_dot, &fb_) - rbb).abs() < 1e-7, "Rbb, model {k}: {} vs {rbb}", patch.sigma(&fb_dot, &fb_));
        let e = c.e_fields();
        let fcs: Vec<_> = (2..n).map(|j| -patch.derivative(|p| Ok(p.e_fields()[j].clone())).unwrap()).collect();
        for j in 0..n - 2 {
            assert!((patch.sigma(&fb_dot, &fcs[j]) - rbc[j]).abs() < 1e-7, "Rbc, model {k}");
        }
        for i in 0..n - 2 {
            let fci_dot = -patch.second_derivative(|p| Ok(p.e_fields()[i + 2].clone())).unwrap();
            for j in 0..n - 2 {
                let num = patch.sigma(&fci_dot, &fcs[j]);
                assert!((num - rcc[(i, j)]).abs() < 1e-6, "Rcc, model {k} ({i},{j}): {num} vs {}", rcc[(i, j)]);
            }
        }

        let mut fa = -fb_dot + &e[1] * rbb;
        for j in 0..n - 2 {
            fa += &e[j + 2] * rbc[j];
        }
        let diff = max_abs(&(&fa - c.f_a().unwrap()));
        assert!(diff < 1e-7, "F_a, model {k}: {diff}\n{}", &fa - c.f_a().unwrap());

        // Darboux normalization of the frame.
        let mut fs = vec![fa.clone(), fb_.clone()];
        fs.extend(fcs.iter().cloned());
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((patch.sigma(&e[i], &fs[j]) - want).abs() < 1e-7, "σ(E,F) {i} {j}");
                assert!(patch.sigma(&fs[i], &fs[j]).abs() < 1e-6, "σ(F,F) {i} {j}");
            }
        }
    }
}

#[test]
fn numerical_aa_ac_matches_closed_form_on_cr_models() {
    let models: Vec<Box<dyn ContactModel>> = vec![Box::new(cr_model()), Box::new(hopf_sphere(2).unwrap())];
    for (k, model) in models.iter().enumerate() {
        let s = unit_state(model.as_ref(), &covector(model.n(), 7 + k as u64));
        let frame = parallel_frame_from(model.as_ref(), &s, 3.0, None).unwrap();
        for t in [0.0, 0.7, 1.9] {
            let p = frame.at(t).unwrap();
            let (raa, rac) = p.aa_ac_closed().unwrap();
            let (naa, nac) = numerical_aa_ac(&frame, t).unwrap();
            assert!((raa - naa).abs() < 1e-6, "model {k} t {t}: {raa} vs {naa}");
            assert!(max_abs(&(rac - nac)) < 1e-6, "model {k} t {t}");
        }
    }
}

#[test]
fn assembled_matrix_structure() {
    for (d, seed) in [(1, 1), (2, 2), (3, 3)] {
        let m = random_model(d, seed);
        let s = unit_state(&m, &covector(2 * d + 1, seed));
        let frame = parallel_frame_from(&m, &s, 1.0, None).unwrap();
        let b = curvature_blocks(&frame, 0.3).unwrap();
        let r = &b.assembled;
        assert_eq!(r[(0, 1)], 0.0);
        assert_eq!(r[(1, 0)], 0.0);
        assert!((r - r.transpose()).abs().max() < 1e-12);
        let tangent = r.column(2 * d).abs().max();
        assert!(tangent < 1e-8, "d = {d}: {tangent}");
        assert!((b.ricci.c - (0..2 * d - 1).map(|i| b.rcc[i][i]).sum::<f64>()).abs() < 1e-15);
    }
}

#[test]
fn blocks_serialize_with_report_keys() {
    let m = heisenberg(1).unwrap();
    let frame = parallel_frame_from(&m, &ExtremalState::new(vec![0.0; 3], vec![1.0, 1.0, 0.0]), 1.0, None).unwrap();
    let v = serde_json::to_value(curvature_blocks(&frame, 0.5).unwrap()).unwrap();
    for key in ["t", "Raa", "Rac", "Rbb", "Rbc", "Rcc", "ricci", "aa_ac_mode", "xa_convention"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["aa_ac_mode"], "closed");
    assert_eq!(v["xa_convention"], "step7");
}


/// Master oracle: flow-carried vertical fields, projected to `M`, equal the
/// solutions of the canonical Jacobi system mapped through the canonical
/// horizontal frame `(X_a, X_b, X_{c_j})`.
#[test]
fn jacobi_fields_match_linearized_flow() {
    use crate::flow::{jacobi_fundamental, variational_flow};
    let models: Vec<Box<dyn ContactModel>> = vec![Box::new(cr_model()), Box::new(random_model(2, 12))];
    for (k, model) in models.iter().enumerate() {
        let n = model.n();
        let t_end = 1.2;
        let s = unit_state(model.as_ref(), &covector(n, 20 + k as u64));
        let frame = parallel_frame_from(model.as_ref(), &s, t_end, None).unwrap();
        let jac = jacobi_fundamental(
            model.d(),
            t_end,
            |t| curvature_blocks(&frame, t).unwrap().assembled,
            &OdeOptions::with_tol(1e-10),
        )
        .unwrap();
        let mut u0 = DMatrix::zeros(2 * n, n);
        for mu in 0..n {
            u0[(n + mu, mu)] = 1.0;
        }
        let var = variational_flow(model.as_ref(), &s, &u0, t_end, &OdeOptions::with_tol(1e-12)).unwrap();
        let p0 = frame.at(0.0).unwrap();
        let e0 = DMatrix::from_fn(n, n, |r, c| p0.e_fields()[c][n + r]);
        let e0_inv = e0.try_inverse().unwrap();
        for t in [0.4, 0.8, 1.2] {
            let p = frame.at(t).unwrap();
            let mut fh = p.frame.clone();
            let mut xa = unit(n, 0);
            for i in 1..n {
                xa -= p.col(i) * p.a[i];
            }
            fh.set_column(0, &xa);
            let (_, q) = jac.at(t).unwrap();
            let predicted = fh * q * &e0_inv;
            let (_, u) = var.at(t).unwrap();
            let actual = u.view((0, 0), (n, n)).into_owned();
            let err = (&predicted - &actual).abs().max();
            assert!(err < 1e-6, "model {k}, t = {t}: {err}");
        }
    }
}

#[test]
fn seed_rotations_leave_canonical_scalars_unchanged() {
    let model = random_model(2, 14);
    let s = unit_state(&model, &covector(5, 2));
    let base = curvature_blocks(&parallel_frame_from(&model, &s, 1.0, None).unwrap(), 0.6).unwrap();
    let scalars = |b: &CurvatureBlocks| {
        let rcc = DMatrix::from_fn(3, 3, |i, j| b.rcc[i][j]);
        let mut spec: Vec<f64> = rcc.symmetric_eigenvalues().iter().copied().collect();
        spec.sort_by(f64::total_cmp);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (b.raa, b.rbb, b.ricci.c, spec, norm(&b.rac), norm(&b.rbc))
    };
    let want = scalars(&base);
    let rot = DMatrix::from_fn(4, 4, |i, j| ((i * 7 + j * 3) as f64 * 0.61).sin()).qr().q();
    let rotated = curvature_blocks(&parallel_frame_from(&model, &s, 1.0, Some(&rot)).unwrap(), 0.6).unwrap();
    let got = scalars(&rotated);
    assert!((want.0 - got.0).abs() < 1e-8 && (want.1 - got.1).abs() < 1e-8 && (want.2 - got.2).abs() < 1e-8);
    assert!(want.3.iter().zip(&got.3).all(|(a, b)| (a - b).abs() < 1e-8));
    assert!((want.4 - got.4).abs() < 1e-8 && (want.5 - got.5).abs() < 1e-8);
}

/// `R(X,Z,Y,X) − R(X,Y,Z,X) = g(X,JZ)g(X,τY) + g(Z,JY)g(X,τX) + g(Y,JX)g(X,τZ)`
/// for horizontal `X, Y, Z`.
#[test]
fn curvature_asymmetry_identity() {
    let models: Vec<Box<dyn ContactModel>> =
        vec![Box::new(cr_model()), Box::new(random_model(2, 3)), Box::new(hopf_sphere(2).unwrap())];
    for model in &models {
        let n = model.n();
        let fc = model.calculus(&model.base_point(), 1).unwrap();
        let ops = fc.curvature_ops().unwrap();
        let (j, tau) = (fc.j(), fc.tau());
        for k in 0..4u64 {
            let hv = |o: u64| tangent_of(&covector(n, k * 3 + o));
            let (x, y, z) = (hv(0), hv(1), hv(2));
            let lhs = curvature_vec(&ops, &x, &z, &y, &x) - curvature_vec(&ops, &x, &y, &z, &x);
            let rhs = x.dot(&(&j * &z)) * x.dot(&(&tau * &y))
                + z.dot(&(&j * &y)) * x.dot(&(&tau * &x))
                + y.dot(&(&j * &x)) * x.dot(&(&tau * &z));
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        }
    }
}
