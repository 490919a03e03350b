use super::*;
use crate::geometry::{Ball, SurrogatePoint};
use crate::mesh::CellClassification;
use crate::tensor_basis::LagrangeBasis1D;
use crate::verification::{assemble_by_probing, naive_apply};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_vec(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    inf_norm(&d) / inf_norm(b).max(1e-300)
}

fn ball_op(dim: usize, cells: usize, config: OperatorConfig) -> SbmOperator {
    let mesh = CartesianMesh::new(&vec![-1.3; dim], &vec![1.3; dim], &vec![cells; dim]).unwrap();
    let ball = Ball::new(&vec![0.02; dim], 1.0).unwrap();
    SbmOperator::new(mesh, &ball, config).unwrap()
}

fn config(degree: usize, disc: Discretization, mode: ExtensionMode) -> OperatorConfig {
    OperatorConfig {
        degree,
        discretization: disc,
        extension: mode,
        ..OperatorConfig::default()
    }
}

#[test]
fn penalty_formulas() {
    assert_eq!(sigma_gamma(4.0, 0.5, 1), 32.0);
    assert_eq!(sigma_gamma(4.0, 0.25, 1), 2.0 * sigma_gamma(4.0, 0.5, 1));
    let ratio = sigma_f(2.0, 0.3, 3) / sigma_f(2.0, 0.3, 2);
    assert!((ratio - (4.0f64 / 3.0).powi(2)).abs() < 1e-14);
}

#[test]
fn config_validation() {
    let bad = [
        OperatorConfig { degree: 0, ..Default::default() },
        OperatorConfig { beta: 0.0, ..Default::default() },
        OperatorConfig { gamma_f: -1.0, ..Default::default() },
        OperatorConfig { threads: 0, ..Default::default() },
    ];
    for c in bad {
        assert!(c.validate().is_err());
    }
    let json = r#"{"degree": 2, "discretization": "dg", "extension": "taylor_first_order"}"#;
    let c: OperatorConfig = serde_json::from_str(json).unwrap();
    assert_eq!(c.degree, 2);
    assert_eq!(c.discretization, Discretization::Dg);
    assert!(serde_json::from_str::<OperatorConfig>(r#"{"degre": 2}"#).is_err());
}

/// Dense local stiffness by direct quadrature over basis-function pairs.
fn local_stiffness(p: usize, dim: usize, h: &[f64]) -> Vec<f64> {
    let basis = LagrangeBasis1D::gauss_lobatto(p);
    let quad = gauss_quadrature_1d(p + 1);
    let n = p + 1;
    let npc = n.pow(dim as u32);
    let nq = quad.len();
    let idx = |lin: usize, m: usize| {
        let mut v = [0; MAX_DIM];
        let mut r = lin;
        for x in v.iter_mut().take(dim) {
            *x = r % m;
            r /= m;
        }
        v
    };
    let grad = |i: usize, x: &[f64]| -> [f64; MAX_DIM] {
        let ii = idx(i, n);
        let mut g = [0.0; MAX_DIM];
        for k in 0..dim {
            g[k] = (0..dim)
                .map(|l| {
                    if l == k {
                        basis.derivative(ii[l], x[l]) / h[l]
                    } else {
                        basis.value(ii[l], x[l])
                    }
                })
                .product();
        }
        g
    };
    let vol: f64 = h.iter().product();
    let mut k = vec![0.0; npc * npc];
    for q in 0..nq.pow(dim as u32) {
        let qi = idx(q, nq);
        let x: Vec<f64> = (0..dim).map(|l| quad.nodes()[qi[l]]).collect();
        let w: f64 = vol * (0..dim).map(|l| quad.weights()[qi[l]]).product::<f64>();
        for i in 0..npc {
            let gi = grad(i, &x);
            for j in 0..npc {
                let gj = grad(j, &x);
                k[i * npc + j] += w * (0..dim).map(|l| gi[l] * gj[l]).sum::<f64>();
            }
        }
    }
    k
}

#[test]
fn cell_kernel_matches_dense_stiffness() {
    let mut rng = StdRng::seed_from_u64(21);
    for (dim, p) in [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2)] {
        let op = ball_op(dim, 6, config(p, Discretization::Cg, ExtensionMode::DirectPointEval));
        let h = op.mesh().h().to_vec();
        let k = local_stiffness(p, dim, &h);
        let npc = (p + 1).pow(dim as u32);
        // constant input gives zero
        let c = CellTensor::new(p, dim, vec![1.7; npc]).unwrap();
        let (w, _) = op.cell_kernel(&c).unwrap();
        assert!(inf_norm(w.as_slice()) < 1e-13);
        // linear input against the dense matrix
        let lin = CellTensor::interpolate(op.shape_matrices().basis(), dim, |r| r[0]);
        for u in [lin, CellTensor::new(p, dim, random_vec(&mut rng, npc)).unwrap()] {
            let (w, _) = op.cell_kernel(&u).unwrap();
            let want: Vec<f64> = (0..npc)
                .map(|i| (0..npc).map(|j| k[i * npc + j] * u.as_slice()[j]).sum())
                .collect();
            assert!(rel_diff(w.as_slice(), &want) < 1e-13);
        }
    }
}

#[test]
fn bilinear_unit_square_stiffness() {
    let k = local_stiffness(1, 2, &[1.0, 1.0]);
    assert!((k[0] - 2.0 / 3.0).abs() < 1e-14);
    assert!((k[3] + 1.0 / 3.0).abs() < 1e-14);
    assert!((k[1] + 1.0 / 6.0).abs() < 1e-14);
}

fn first_interior_face(op: &SbmOperator) -> usize {
    op.faces().iter().position(|f| !f.is_surrogate()).unwrap()
}

#[test]
fn interior_face_kernel_basic_properties() {
    let op = ball_op(2, 6, config(2, Discretization::Dg, ExtensionMode::DirectPointEval));
    let fi = first_interior_face(&op);
    let c = CellTensor::new(2, 2, vec![0.8; 9]).unwrap();
    let (w1, w2, _) = op.interior_face_kernel(fi, &c, &c).unwrap();
    assert!(inf_norm(w1.as_slice()) < 1e-13 && inf_norm(w2.as_slice()) < 1e-13);
    let z = CellTensor::zeros(2, 2);
    let (w1, w2, _) = op.interior_face_kernel(fi, &z, &z).unwrap();
    assert!(w1.as_slice().iter().chain(w2.as_slice()).all(|&v| v == 0.0));

    let cg = ball_op(2, 6, config(2, Discretization::Cg, ExtensionMode::DirectPointEval));
    assert!(matches!(
        cg.interior_face_kernel(fi, &c, &c),
        Err(SbmError::Misconfigured(_))
    ));
}

#[test]
fn interior_face_kernel_matches_two_cell_oracle() {
    // two active cells sharing one face; naive_apply with only that face
    // contributes the SIPG face matrix
    let mut rng = StdRng::seed_from_u64(5);
    let mesh = CartesianMesh::new(&[0.0, 0.0], &[4.0, 4.0], &[4, 4]).unwrap();
    let mut flags = vec![false; 16];
    flags[5] = true;
    flags[6] = true;
    let class = CellClassification::from_flags(flags).unwrap();
    let ball = Ball::new(&[2.0, 1.5], 1.6).unwrap();
    let op = SbmOperator::with_classification(
        mesh,
        class,
        &ball,
        config(2, Discretization::Dg, ExtensionMode::DirectPointEval),
    )
    .unwrap();
    let fi = first_interior_face(&op);
    let u: Vec<f64> = random_vec(&mut rng, op.n_dofs());
    let (face_only, _) = op.apply_terms(&u, Terms::INTERIOR_FACES).unwrap();
    let u1 = op.layout().gather(&u, 5).unwrap();
    let u2 = op.layout().gather(&u, 6).unwrap();
    let (w1, w2, _) = op.interior_face_kernel(fi, &u1, &u2).unwrap();
    let mut want = vec![0.0; op.n_dofs()];
    op.layout().scatter_add(&w1, 5, &mut want).unwrap();
    op.layout().scatter_add(&w2, 6, &mut want).unwrap();
    assert!(rel_diff(&face_only, &want) < 1e-14);
    // oracle: naive minus cells minus surrogate faces
    let naive = naive_apply(&op, &u).unwrap();
    let (rest, _) = op
        .apply_terms(
            &u,
            Terms {
                cells: true,
                interior_faces: false,
                surrogate_faces: true,
            },
        )
        .unwrap();
    let oracle: Vec<f64> = naive.iter().zip(&rest).map(|(a, b)| a - b).collect();
    assert!(rel_diff(&want, &oracle) < 1e-12);
}

fn surrogate_point<'a>(shift: &'a [f64], reference: &'a [f64]) -> SurrogatePoint<'a> {
    SurrogatePoint {
        x_tilde: reference,
        normal: reference,
        shift,
        reference,
        g: 0.0,
        weight: 1.0,
    }
}

#[test]
fn extension_modes_on_polynomials() {
    let basis = LagrangeBasis1D::gauss_lobatto(2);
    // unit cell at the origin so physical and reference coordinates agree
    let lin = CellTensor::interpolate(&basis, 2, |x| x[0]);
    let x_tilde = [1.0, 0.4];
    let d = [0.3, 0.0];
    let r = [1.3, 0.4];
    let trace = TraceData {
        value: 1.0,
        gradient: &[1.0, 0.0],
    };
    for mode in [ExtensionMode::DirectPointEval, ExtensionMode::TaylorFirstOrder] {
        let (e, _) = extension(mode, &lin, &basis, trace, &surrogate_point(&d, &r));
        assert!((e - (x_tilde[0] + 0.3)).abs() < 1e-14);
        // zero shift returns the trace
        let (e0, _) = extension(mode, &lin, &basis, trace, &surrogate_point(&[0.0, 0.0], &x_tilde));
        assert!((e0 - 1.0).abs() < 1e-14);
    }
    // quadratic u = x² + y: Taylor error is |d|², direct is exact
    let quad = CellTensor::interpolate(&basis, 2, |x| x[0] * x[0] + x[1]);
    let exact = |x: &[f64]| x[0] * x[0] + x[1];
    let grad = [2.0 * x_tilde[0], 1.0];
    let tr = TraceData {
        value: exact(&x_tilde),
        gradient: &grad,
    };
    let mut errors = Vec::new();
    for scale in [0.4, 0.2] {
        let d = [scale, 0.3 * scale];
        let x = [x_tilde[0] + d[0], x_tilde[1] + d[1]];
        let (t, _) = extension(ExtensionMode::TaylorFirstOrder, &quad, &basis, tr, &surrogate_point(&d, &x));
        let (e, _) = extension(ExtensionMode::DirectPointEval, &quad, &basis, tr, &surrogate_point(&d, &x));
        assert!((e - exact(&x)).abs() < 1e-12);
        errors.push((t - exact(&x)).abs());
    }
    let ratio = errors[0] / errors[1];
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn surrogate_kernel_counters_and_linearity() {
    let op = ball_op(3, 6, config(3, Discretization::Dg, ExtensionMode::DirectPointEval));
    let fi = op.faces().iter().position(|f| f.is_surrogate()).unwrap();
    let z = CellTensor::zeros(3, 3);
    let (w, ops) = op.surrogate_face_kernel(fi, &z).unwrap();
    assert!(w.as_slice().iter().all(|&v| v == 0.0));
    assert_eq!(ops.point_evaluations, 16);
    assert_eq!(ops.point_eval.coefficient, 16 * 64);
    assert!(op.surrogate_face_kernel(first_interior_face(&op), &z).is_err());
}

#[test]
fn zero_input_and_linearity() {
    let mut rng = StdRng::seed_from_u64(3);
    for disc in [Discretization::Cg, Discretization::Dg] {
        let op = ball_op(2, 8, config(2, disc, ExtensionMode::DirectPointEval));
        let n = op.n_dofs();
        assert!(op.apply(&vec![0.0; n]).unwrap().iter().all(|&v| v == 0.0));
        let u = random_vec(&mut rng, n);
        let v = random_vec(&mut rng, n);
        let (a, b) = (0.7, -1.9);
        let combo: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let au = op.apply(&u).unwrap();
        let av = op.apply(&v).unwrap();
        let lhs = op.apply(&combo).unwrap();
        let rhs: Vec<f64> = au.iter().zip(&av).map(|(x, y)| a * x + b * y).collect();
        assert!(rel_diff(&lhs, &rhs) < 1e-13);
        assert!(op.apply(&u[1..]).is_err());
    }
}

#[test]
fn linear_patch_test() {
    for dim in [2, 3] {
        for disc in [Discretization::Cg, Discretization::Dg] {
            for mode in [ExtensionMode::DirectPointEval, ExtensionMode::TaylorFirstOrder] {
                let op = ball_op(dim, if dim == 2 { 10 } else { 6 }, config(2, disc, mode));
                let u = op.interpolate(|x| x[0]);
                let b = op.assemble_rhs(|_| 0.0, |x| x[0]);
                let au = op.apply(&u).unwrap();
                let res: Vec<f64> = au.iter().zip(&b).map(|(a, c)| a - c).collect();
                assert!(inf_norm(&res) < 1e-11, "d={dim} {disc} {mode:?}: {}", inf_norm(&res));
            }
        }
    }
}

#[test]
fn rhs_of_unit_source_on_single_cell() {
    let mesh = CartesianMesh::new(&[0.0, 0.0], &[1.0, 1.0], &[1, 1]).unwrap();
    let class = CellClassification::from_flags(vec![true]).unwrap();
    let ball = Ball::new(&[0.5, 0.5], 0.9).unwrap();
    let op = SbmOperator::with_classification(mesh, class, &ball, config(1, Discretization::Cg, ExtensionMode::DirectPointEval))
        .unwrap();
    let b = op.assemble_rhs(|_| 1.0, |_| 0.0);
    for v in b {
        assert!((v - 0.25).abs() < 1e-15);
    }
    let zero = op.assemble_rhs(|_| 0.0, |_| 0.0);
    assert!(zero.iter().all(|&v| v == 0.0));
}

#[test]
fn thread_counts_agree() {
    let mut rng = StdRng::seed_from_u64(9);
    let mut op = ball_op(2, 12, config(2, Discretization::Dg, ExtensionMode::DirectPointEval));
    let u = random_vec(&mut rng, op.n_dofs());
    let (w1, c1) = op.apply_with_counts(&u).unwrap();
    for t in [2, 3, 4] {
        op.set_threads(t).unwrap();
        let (wt, ct) = op.apply_with_counts(&u).unwrap();
        assert!(rel_diff(&wt, &w1) < 1e-13);
        assert_eq!(ct, c1);
        let again = op.apply(&u).unwrap();
        assert!(again.iter().zip(&wt).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn diagonal_matches_probed_matrix() {
    for disc in [Discretization::Cg, Discretization::Dg] {
        for mode in [ExtensionMode::DirectPointEval, ExtensionMode::TaylorFirstOrder] {
            let op = ball_op(2, 6, config(2, disc, mode));
            let m = assemble_by_probing(&op).unwrap();
            let d = op.diagonal();
            assert!(rel_diff(&d, &m.diagonal()) < 1e-12);
        }
    }
}

#[test]
fn sub_operator_symmetry() {
    let op = ball_op(2, 6, config(2, Discretization::Dg, ExtensionMode::DirectPointEval));
    let n = op.n_dofs();
    let mut rng = StdRng::seed_from_u64(1);
    let u = random_vec(&mut rng, n);
    let v = random_vec(&mut rng, n);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (fu, _) = op.apply_terms(&u, Terms::INTERIOR_FACES).unwrap();
    let (fv, _) = op.apply_terms(&v, Terms::INTERIOR_FACES).unwrap();
    assert!((dot(&fu, &v) - dot(&u, &fv)).abs() < 1e-12 * dot(&fu, &v).abs().max(1.0));
    let (su, _) = op.apply_terms(&u, Terms::SURROGATE_FACES).unwrap();
    let (sv, _) = op.apply_terms(&v, Terms::SURROGATE_FACES).unwrap();
    assert!((dot(&su, &v) - dot(&u, &sv)).abs() > 1e-6);
}

#[test]
fn matches_naive_and_probed_operator() {
    let mut rng = StdRng::seed_from_u64(77);
    for disc in [Discretization::Cg, Discretization::Dg] {
        for mode in [ExtensionMode::DirectPointEval, ExtensionMode::TaylorFirstOrder] {
            let op = ball_op(2, 6, config(2, disc, mode));
            let m = assemble_by_probing(&op).unwrap();
            for _ in 0..3 {
                let u = random_vec(&mut rng, op.n_dofs());
                let w = op.apply(&u).unwrap();
                assert!(rel_diff(&w, &m.matvec(&u)) < 1e-12);
                assert!(rel_diff(&w, &naive_apply(&op, &u).unwrap()) < 1e-12);
            }
        }
    }
}

#[test]
fn counters_are_deterministic_and_exported() {
    let op = ball_op(2, 8, config(2, Discretization::Dg, ExtensionMode::DirectPointEval));
    let u = vec![1.0; op.n_dofs()];
    let (_, a) = op.apply_with_counts(&u).unwrap();
    let (_, b) = op.apply_with_counts(&u).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.cells.count as usize, op.classification().n_active());
    let n_sur = op.faces().iter().filter(|f| f.is_surrogate()).count();
    assert_eq!(a.surrogate_faces.count as usize, n_sur);
    assert_eq!(a.interior_faces.count as usize, op.faces().len() - n_sur);
    let mut buf = Vec::new();
    a.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("entity_kind,count,ops_total,ops_per_entity\n"));
    assert_eq!(text.lines().count(), 5);
}
