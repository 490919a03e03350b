use super::*;
use crate::geometry::precompute_surrogate_data;
use crate::tensor_basis::gauss_quadrature_1d;

#[test]
fn slope_of_power_law() {
    let x = [2.0, 3.0, 5.0, 9.0];
    let y: Vec<f64> = x.iter().map(|v: &f64| 7.0 * v.powf(2.5)).collect();
    assert!((loglog_slope(&x, &y) - 2.5).abs() < 1e-12);
}

#[test]
fn median_of_samples() {
    assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
}

#[test]
fn entity_counts_are_deterministic() {
    for d in [2, 3] {
        assert_eq!(entity_ops(d, 3).unwrap(), entity_ops(d, 3).unwrap());
    }
}

#[test]
fn surrogate_count_ratio_between_degrees() {
    let r = entity_ops(3, 3).unwrap().surrogate_face.total() as f64
        / entity_ops(3, 2).unwrap().surrogate_face.total() as f64;
    let model = (4.0f64 / 3.0).powi(5);
    assert!((r / model - 1.0).abs() <= 0.25, "{r} vs {model}");
}

#[test]
fn count_slopes_follow_complexity_model() {
    for d in [2usize, 3] {
        let df = d as f64;
        let (_, s) = op_count_slopes(d, 2..=8).unwrap();
        assert!((s.cell - (df + 1.0)).abs() <= 0.3, "d={d} cell {}", s.cell);
        assert!(s.interior_face >= df - 0.3 && s.interior_face <= df + 0.5, "d={d} face {}", s.interior_face);
        // lower-order phases still weigh in at small p; the surrogate
        // slope approaches 2d − 1 from below
        let (_, high) = op_count_slopes(d, 8..=15).unwrap();
        assert!(s.surrogate_face < high.surrogate_face && high.surrogate_face < 2.0 * df - 1.0);
        assert!((high.surrogate_face - (2.0 * df - 1.0)).abs() <= 0.3, "d={d} {}", high.surrogate_face);
        assert!((high.surrogate_point_eval - (2.0 * df - 1.0)).abs() <= 0.3);
    }
}

#[test]
fn entity_records_normalize_and_flag() {
    let recs = bench_entity_kernels(2, 1..=2, 3).unwrap();
    assert_eq!(recs.len(), 6);
    let base = recs.iter().find(|r| r.kind == BenchKind::Cell && r.p == 1).unwrap();
    assert_eq!(base.normalized, Some(1.0));
    assert!(recs.iter().all(|r| !r.reliable && r.median_seconds > 0.0));
    let recs = bench_entity_kernels(2, [2], MIN_RELIABLE_REPS).unwrap();
    assert!(recs.iter().all(|r| r.reliable && r.normalized.is_none()));
    assert!(bench_entity_kernels(2, [0], 3).is_err());
}

#[test]
fn bench_csv_schema() {
    let recs = bench_entity_kernels(3, [1], 2).unwrap();
    let mut buf = Vec::new();
    write_bench_csv(&mut buf, &recs).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "kind,d,p,threads,reps,median_seconds,ops,mem_doubles,dofs_per_sec"
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn throughput_rows_per_thread_count() {
    let mut op = synthetic_operator(2, 2).unwrap();
    let recs = bench_throughput(&mut op, 4, &[1, 2, 3]).unwrap();
    assert_eq!(recs.iter().map(|r| r.threads).collect::<Vec<_>>(), vec![1, 2, 3]);
    for r in &recs {
        let v = r.dofs_per_sec.unwrap();
        assert!(v.is_finite() && v > 0.0);
    }
    assert_eq!(op.config().threads, 1);
}

#[test]
fn throughput_is_steady_when_doubling_applications() {
    // timing based and the test harness runs tests concurrently, so allow
    // repeated attempts
    let mut op = synthetic_operator(2, 3).unwrap();
    let ok = (0..20).any(|_| {
        let a = bench_throughput(&mut op, 50, &[1]).unwrap()[0].dofs_per_sec.unwrap();
        let b = bench_throughput(&mut op, 100, &[1]).unwrap()[0].dofs_per_sec.unwrap();
        (b / a - 1.0).abs() < 0.10
    });
    assert!(ok);
}

#[test]
fn memory_counts_match_data_model() {
    for d in [2, 3] {
        let op = synthetic_operator(d, 2).unwrap();
        let m = memory_report(&op);
        assert_eq!(m.reals_per_point, 4 * d + 2);
        assert_eq!(m.surrogate_reals, m.surrogate_points * (4 * d + 2));
        assert_eq!(m.surrogate_points, m.surrogate_faces * 3usize.pow(d as u32 - 1));
    }
    let op = synthetic_operator(3, 1).unwrap();
    assert_eq!(memory_report(&op).reals_per_point, 14);
    // no surrogate faces, no geometric data
    let mesh = CartesianMesh::new(&[0.0, 0.0], &[1.0, 1.0], &[2, 2]).unwrap();
    let ball = Ball::new(&[0.5, 0.5], 0.3).unwrap();
    let empty = precompute_surrogate_data(&mesh, &[], &ball, &gauss_quadrature_1d(3), |_| 0.0).unwrap();
    assert_eq!(empty.stored_reals(), 0);
}

#[test]
fn memory_per_dof_drops_under_refinement() {
    let ball = Ball::new(&[0.0, 0.0], 1.0).unwrap();
    let per_dof: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let mesh = CartesianMesh::new(&[-1.3, -1.3], &[1.3, 1.3], &[n, n]).unwrap();
            let op = SbmOperator::new(mesh, &ball, OperatorConfig::default()).unwrap();
            memory_report(&op).reals_per_dof
        })
        .collect();
    assert!(per_dof[0] > per_dof[1] && per_dof[1] > per_dof[2], "{per_dof:?}");
}

#[test]
fn init_benchmark_reports_finite_throughput() {
    let mesh = CartesianMesh::new(&[-1.3, -1.3], &[1.3, 1.3], &[16, 16]).unwrap();
    let ball = Ball::new(&[0.0, 0.0], 1.0).unwrap();
    let rep = init_benchmark(&mesh, &ball, OperatorConfig::default(), 3).unwrap();
    let v = rep.record.dofs_per_sec.unwrap();
    assert!(v.is_finite() && v > 0.0);
    assert!(rep.init_over_apply.is_finite() && rep.init_over_apply > 0.0);
    assert!(!rep.record.reliable);
    let far = Ball::new(&[10.0, 10.0], 1.0).unwrap();
    assert!(matches!(
        init_benchmark(&mesh, &far, OperatorConfig::default(), 1),
        Err(SbmError::NoActiveCells)
    ));
}
