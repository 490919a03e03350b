//! Kernel microbenchmarks, apply throughput, initialization cost, memory
//! accounting and operation-count scaling.
//!
//! Timings are medians over repetitions after five discarded warmup runs.
//! Only the counters are deterministic; every timing is machine dependent.

use std::fmt;
use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Result, SbmError};
use crate::geometry::{Ball, LevelSet};
use crate::mesh::{CartesianMesh, Discretization};
use crate::operator::{KernelScratch, OperatorConfig, SbmOperator, SurrogateOps};

pub const WARMUP: usize = 5;
/// Timing records with fewer repetitions are flagged unreliable.
pub const MIN_RELIABLE_REPS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchKind {
    Cell,
    InteriorFace,
    SurrogateFace,
    FullApply,
    Init,
}

impl fmt::Display for BenchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchKind::Cell => "cell",
            BenchKind::InteriorFace => "interior_face",
            BenchKind::SurrogateFace => "surrogate_face",
            BenchKind::FullApply => "full_apply",
            BenchKind::Init => "init",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub kind: BenchKind,
    pub d: usize,
    pub p: usize,
    pub threads: usize,
    pub reps: usize,
    pub median_seconds: f64,
    /// Counted operations of one timed unit.
    pub ops: u64,
    /// Stored reals of precomputed geometric data.
    pub mem_doubles: usize,
    pub dofs_per_sec: Option<f64>,
    /// Median time relative to the p=1 cell kernel of the same sweep.
    pub normalized: Option<f64>,
    pub reliable: bool,
}

pub const BENCH_CSV_HEADER: [&str; 9] = [
    "kind",
    "d",
    "p",
    "threads",
    "reps",
    "median_seconds",
    "ops",
    "mem_doubles",
    "dofs_per_sec",
];

pub fn write_bench_csv<W: Write>(writer: W, records: &[BenchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(BENCH_CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.kind.to_string(),
            r.d.to_string(),
            r.p.to_string(),
            r.threads.to_string(),
            r.reps.to_string(),
            r.median_seconds.to_string(),
            r.ops.to_string(),
            r.mem_doubles.to_string(),
            r.dofs_per_sec.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

/// Median wall time of `f` over `reps` runs, after [`WARMUP`] discarded runs.
pub fn time_median(reps: usize, mut f: impl FnMut()) -> f64 {
    for _ in 0..WARMUP {
        f();
    }
    let mut samples: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .collect();
    median(&mut samples)
}

/// Small DG ball configuration that has cells, interior faces and
/// surrogate faces; used for single-entity measurements.
pub fn synthetic_operator(d: usize, p: usize) -> Result<SbmOperator> {
    let mesh = CartesianMesh::new(&vec![-1.3; d], &vec![1.3; d], &vec![6; d])?;
    let ball = Ball::new(&vec![0.013; d], 1.0)?;
    let config = OperatorConfig {
        degree: p,
        discretization: Discretization::Dg,
        ..OperatorConfig::default()
    };
    SbmOperator::new(mesh, &ball, config)
}

/// Per-entity operation counts of one kernel call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntityOps {
    pub p: usize,
    pub cell: u64,
    pub interior_face: u64,
    pub surrogate_face: SurrogateOps,
}

struct Entities {
    interior: usize,
    surrogate: usize,
}

fn pick_entities(op: &SbmOperator) -> Result<Entities> {
    let interior = op.faces().iter().position(|f| !f.is_surrogate());
    let surrogate = op.faces().iter().position(|f| f.is_surrogate());
    match (interior, surrogate) {
        (Some(interior), Some(surrogate)) => Ok(Entities {
            interior,
            surrogate,
        }),
        _ => Err(SbmError::InvalidGeometry(
            "benchmark configuration needs interior and surrogate faces".into(),
        )),
    }
}

fn test_vector(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.5).collect()
}

/// Counts of a single cell, interior-face and surrogate-face kernel call.
pub fn entity_ops(d: usize, p: usize) -> Result<EntityOps> {
    let op = synthetic_operator(d, p)?;
    let e = pick_entities(&op)?;
    let ctx = op.kernels();
    let npc = ctx.dofs_per_cell();
    let u = test_vector(npc);
    let (mut w1, mut w2) = (vec![0.0; npc], vec![0.0; npc]);
    let mut s = KernelScratch::new(&ctx.sm, d);
    let cell = ctx.cell(&u, &mut w1, &mut s);
    let f = &op.faces()[e.interior];
    let interior_face = ctx.interior_face(f.axis, &u, &u, &mut w1, &mut w2, &mut s);
    let f = &op.faces()[e.surrogate];
    let k = op.surrogate_index(e.surrogate).expect("surrogate face");
    let data = op.surrogate_data();
    let surrogate_face = ctx.surrogate_face(f.axis, f.side, &u, |q| data.point(k, q), &mut w1, &mut s);
    Ok(EntityOps {
        p,
        cell,
        interior_face,
        surrogate_face,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Fitted slopes of per-entity counts against `p + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpCountSlopes {
    pub cell: f64,
    pub interior_face: f64,
    /// Whole surrogate-face kernel.
    pub surrogate_face: f64,
    /// Point evaluations of `E u_h` inside the surrogate-face kernel.
    pub surrogate_point_eval: f64,
}

pub fn op_count_slopes(d: usize, degrees: impl IntoIterator<Item = usize>) -> Result<(Vec<EntityOps>, OpCountSlopes)> {
    let rows: Vec<EntityOps> = degrees
        .into_iter()
        .map(|p| entity_ops(d, p))
        .collect::<Result<_>>()?;
    let n: Vec<f64> = rows.iter().map(|r| (r.p + 1) as f64).collect();
    let slope = |f: &dyn Fn(&EntityOps) -> u64| {
        let y: Vec<f64> = rows.iter().map(|r| f(r) as f64).collect();
        loglog_slope(&n, &y)
    };
    let slopes = OpCountSlopes {
        cell: slope(&|r| r.cell),
        interior_face: slope(&|r| r.interior_face),
        surrogate_face: slope(&|r| r.surrogate_face.total()),
        surrogate_point_eval: slope(&|r| r.surrogate_face.point_eval.total()),
    };
    Ok((rows, slopes))
}

/// Times the cell, interior-face and surrogate-face kernels on single
/// entities for each degree, pinned to the calling thread. Records are
/// normalized to the p=1 cell time when p=1 is part of the sweep.
pub fn bench_entity_kernels(
    d: usize,
    degrees: impl IntoIterator<Item = usize>,
    reps: usize,
) -> Result<Vec<BenchRecord>> {
    let mut records = Vec::new();
    for p in degrees {
        if !(1..=15).contains(&p) {
            return Err(SbmError::InvalidConfig(format!("degree {p} outside 1..=15")));
        }
        let op = synthetic_operator(d, p)?;
        let e = pick_entities(&op)?;
        let ctx = op.kernels();
        let npc = ctx.dofs_per_cell();
        let u = test_vector(npc);
        let (mut w1, mut w2) = (vec![0.0; npc], vec![0.0; npc]);
        let mut s = KernelScratch::new(&ctx.sm, d);
        let ops = entity_ops(d, p)?;
        let mem = op.surrogate_data().stored_reals() / op.surrogate_data().n_faces().max(1);

        let t_cell = time_median(reps, || {
            black_box(ctx.cell(black_box(&u), &mut w1, &mut s));
        });
        let f = op.faces()[e.interior];
        let t_int = time_median(reps, || {
            black_box(ctx.interior_face(f.axis, black_box(&u), &u, &mut w1, &mut w2, &mut s));
        });
        let f = op.faces()[e.surrogate];
        let k = op.surrogate_index(e.surrogate).expect("surrogate face");
        let data = op.surrogate_data();
        let t_sur = time_median(reps, || {
            black_box(ctx.surrogate_face(f.axis, f.side, black_box(&u), |q| data.point(k, q), &mut w1, &mut s));
        });
        for (kind, t, ops, mem) in [
            (BenchKind::Cell, t_cell, ops.cell, 0),
            (BenchKind::InteriorFace, t_int, ops.interior_face, 0),
            (BenchKind::SurrogateFace, t_sur, ops.surrogate_face.total(), mem),
        ] {
            records.push(BenchRecord {
                kind,
                d,
                p,
                threads: 1,
                reps,
                median_seconds: t,
                ops,
                mem_doubles: mem,
                dofs_per_sec: None,
                normalized: None,
                reliable: reps >= MIN_RELIABLE_REPS,
            });
        }
    }
    let base = records
        .iter()
        .find(|r| r.kind == BenchKind::Cell && r.p == 1)
        .map(|r| r.median_seconds);
    if let Some(base) = base {
        for r in &mut records {
            r.normalized = Some(r.median_seconds / base);
        }
    }
    Ok(records)
}

/// DoFs per second of `n_apply` consecutive applications at each thread
/// count. Only active DoFs exist in the layout, so they are what is counted.
pub fn bench_throughput(
    op: &mut SbmOperator,
    n_apply: usize,
    thread_counts: &[usize],
) -> Result<Vec<BenchRecord>> {
    let n_apply = n_apply.max(1);
    let u = test_vector(op.n_dofs());
    let (_, counts) = op.apply_with_counts(&u)?;
    let original = op.config().threads;
    let mut out = Vec::with_capacity(thread_counts.len());
    for &t in thread_counts {
        op.set_threads(t)?;
        for _ in 0..WARMUP.min(n_apply) {
            black_box(op.apply(&u)?);
        }
        let mut samples = Vec::with_capacity(n_apply);
        let start = Instant::now();
        for _ in 0..n_apply {
            let t0 = Instant::now();
            black_box(op.apply(black_box(&u))?);
            samples.push(t0.elapsed().as_secs_f64());
        }
        let total = start.elapsed().as_secs_f64();
        out.push(BenchRecord {
            kind: BenchKind::FullApply,
            d: op.dim(),
            p: op.config().degree,
            threads: t,
            reps: n_apply,
            median_seconds: median(&mut samples),
            ops: counts.total_ops(),
            mem_doubles: op.surrogate_data().stored_reals(),
            dofs_per_sec: Some((op.n_dofs() * n_apply) as f64 / total),
            normalized: None,
            reliable: n_apply >= MIN_RELIABLE_REPS,
        });
    }
    op.set_threads(original)?;
    Ok(out)
}

/// Thread counts for throughput sweeps: 1 and the hardware maximum.
pub fn default_thread_counts() -> Vec<usize> {
    let max = std::thread::available_parallelism().map_or(1, |n| n.get());
    if max > 1 {
        vec![1, max]
    } else {
        vec![1]
    }
}

/// Stored precomputed data. Surrogate faces store `4d + 2` reals per
/// quadrature point; interior cells share one set of shape matrices,
/// quadrature and cell metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryReport {
    pub d: usize,
    pub p: usize,
    pub dofs: usize,
    pub surrogate_faces: usize,
    pub surrogate_points: usize,
    pub reals_per_point: usize,
    pub surrogate_reals: usize,
    pub shared_reals: usize,
    pub total_reals: usize,
    pub reals_per_dof: f64,
}

pub fn memory_report(op: &SbmOperator) -> MemoryReport {
    let data = op.surrogate_data();
    let d = op.dim();
    let n = op.config().degree + 1;
    let surrogate_reals = data.stored_reals();
    // N and D matrices, quadrature nodes and weights, cell size
    let shared_reals = 2 * n * n + 2 * n + d;
    let total = surrogate_reals + shared_reals;
    MemoryReport {
        d,
        p: op.config().degree,
        dofs: op.n_dofs(),
        surrogate_faces: data.n_faces(),
        surrogate_points: data.n_points(),
        reals_per_point: if data.n_points() > 0 { surrogate_reals / data.n_points() } else { 4 * d + 2 },
        surrogate_reals,
        shared_reals,
        total_reals: total,
        reals_per_dof: total as f64 / op.n_dofs() as f64,
    }
}

pub const MEMORY_CSV_HEADER: [&str; 10] = [
    "d",
    "p",
    "dofs",
    "surrogate_faces",
    "surrogate_points",
    "reals_per_point",
    "surrogate_reals",
    "shared_reals",
    "total_reals",
    "reals_per_dof",
];

pub fn write_memory_csv<W: Write>(writer: W, reports: &[MemoryReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(MEMORY_CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.d.to_string(),
            r.p.to_string(),
            r.dofs.to_string(),
            r.surrogate_faces.to_string(),
            r.surrogate_points.to_string(),
            r.reals_per_point.to_string(),
            r.surrogate_reals.to_string(),
            r.shared_reals.to_string(),
            r.total_reals.to_string(),
            r.reals_per_dof.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Initialization cost next to apply cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitReport {
    pub record: BenchRecord,
    pub apply_seconds: f64,
    /// Initialization time in units of one operator application.
    pub init_over_apply: f64,
}

/// Times classification, face collection and projection precompute (the
/// full operator setup) and one subsequent application.
pub fn init_benchmark(
    mesh: &CartesianMesh,
    levelset: &dyn LevelSet,
    config: OperatorConfig,
    reps: usize,
) -> Result<InitReport> {
    let build = || SbmOperator::new(mesh.clone(), levelset, config);
    let op = build()?;
    let reps = reps.max(1);
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        black_box(build()?);
        samples.push(t.elapsed().as_secs_f64());
    }
    let init = median(&mut samples);
    let u = test_vector(op.n_dofs());
    let apply_seconds = time_median(reps, || {
        black_box(op.apply(black_box(&u)).expect("sized input"));
    });
    let record = BenchRecord {
        kind: BenchKind::Init,
        d: op.dim(),
        p: config.degree,
        threads: config.threads,
        reps,
        median_seconds: init,
        ops: 0,
        mem_doubles: op.surrogate_data().stored_reals(),
        dofs_per_sec: Some(op.n_dofs() as f64 / init),
        normalized: None,
        reliable: reps >= MIN_RELIABLE_REPS,
    };
    Ok(InitReport {
        record,
        apply_seconds,
        init_over_apply: init / apply_seconds,
    })
}

#[cfg(test)]
mod tests;
