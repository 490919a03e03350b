//! Argument parsing, config overrides and the four subcommands.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::bench::{
    bench_entity_kernels, bench_throughput, default_thread_counts, init_benchmark, memory_report,
    op_count_slopes, write_bench_csv, write_memory_csv,
};
use crate::error::{Result, SbmError};
use crate::geometry::manufactured_poisson_2d;
use crate::mesh::{
    classify_cells, collect_faces, weighted_partition, write_partition_csv, ActivationCriterion,
    Discretization, Partition,
};
use crate::operator::{ExtensionMode, SbmOperator};
use crate::solver::SolverMethod;

use super::config::{Command, RunConfig, Shape};
use super::convergence::{convergence_study, solve_manufactured, write_convergence_csv, LevelResult};
use super::vtk::{sample_on_lattice, write_vtk};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    /// Observed rates outside the configured band.
    OutOfBand = 1,
    Usage = 2,
    Numerical = 3,
}

impl Exit {
    /// Classifies a library error.
    pub fn of(err: &SbmError) -> Self {
        match err {
            SbmError::InvalidConfig(_)
            | SbmError::InvalidGeometry(_)
            | SbmError::DimensionMismatch(_)
            | SbmError::Misconfigured(_)
            | SbmError::Json(_) => Exit::Usage,
            _ => Exit::Numerical,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sbm", version, about = "Matrix-free shifted boundary method for the Poisson problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Manufactured-solution convergence study on uniformly refined meshes.
    Convergence(Overrides),
    /// Single solve on the finest mesh with VTK export.
    Solve(Overrides),
    /// Kernel timings, operation counts, throughput and memory.
    Bench(Overrides),
    /// Weighted partition report on the finest mesh.
    Partition(Overrides),
}

impl Sub {
    fn split(self) -> (Command, Overrides) {
        match self {
            Sub::Convergence(o) => (Command::Convergence, o),
            Sub::Solve(o) => (Command::Solve, o),
            Sub::Bench(o) => (Command::Bench, o),
            Sub::Partition(o) => (Command::Partition, o),
        }
    }
}

fn serde_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

/// Flags that override keys of the JSON config.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(short = 'd', long = "dim")]
    pub d: Option<usize>,
    #[arg(short = 'p', long = "degree")]
    pub p: Option<usize>,
    /// cg | dg
    #[arg(long, value_parser = serde_enum::<Discretization>)]
    pub discretization: Option<Discretization>,
    /// direct_point_eval | taylor_first_order
    #[arg(long, value_parser = serde_enum::<ExtensionMode>)]
    pub extension: Option<ExtensionMode>,
    /// strict_interior | center_inside
    #[arg(long, value_parser = serde_enum::<ActivationCriterion>)]
    pub criterion: Option<ActivationCriterion>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma_f: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// ball | union_of_balls
    #[arg(long, value_parser = serde_enum::<Shape>)]
    pub shape: Option<Shape>,
    /// Cells per axis on the coarsest mesh.
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub levels: Option<usize>,
    /// sparse_lu | gmres
    #[arg(long, value_parser = serde_enum::<SolverMethod>)]
    pub solver: Option<SolverMethod>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub parts: Option<usize>,
    /// Timing repetitions for `bench`.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub p_max: Option<usize>,
    /// Output directory.
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, c: &mut RunConfig) {
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$src.clone() { c.$($dst).+ = v; })*
            };
        }
        set!(
            d => d, p => p, discretization => discretization, extension => extension,
            criterion => criterion, beta => beta, gamma_f => gamma_f, threads => threads,
            shape => geometry.shape, cells => mesh.cells, levels => mesh.levels,
            solver => solver.method, tol => solver.tol, parts => parts,
            reps => bench.repetitions, p_max => bench.p_max, out => output_dir,
        );
    }
}

/// Loads the config, applies flag overrides and validates.
pub fn resolve(command: Command, o: &Overrides) -> Result<RunConfig> {
    let mut c = match &o.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(declared) = c.command {
        if declared != command {
            return Err(SbmError::InvalidConfig(format!(
                "config is for `{declared:?}` but the `{command:?}` subcommand was given"
            )));
        }
    }
    o.apply(&mut c);
    c.command = Some(command);
    c.validate()?;
    Ok(c)
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (command, overrides) = cli.command.split();
    let result = resolve(command, &overrides).and_then(|c| match command {
        Command::Convergence => cmd_convergence(&c),
        Command::Solve => cmd_solve(&c).map(|_| Exit::Success),
        Command::Bench => cmd_bench(&c).map(|_| Exit::Success),
        Command::Partition => cmd_partition(&c).map(|_| Exit::Success),
    });
    match result {
        Ok(code) => code as i32,
        Err(e) => {
            eprintln!("error: {e}");
            Exit::of(&e) as i32
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

#[derive(Serialize)]
struct Metadata<'a> {
    h: &'static str,
    config: &'a RunConfig,
}

fn write_metadata(c: &RunConfig) -> Result<()> {
    let meta = Metadata {
        h: "cell edge length",
        config: c,
    };
    let mut w = create(&c.output_dir, "metadata.json")?;
    serde_json::to_writer_pretty(&mut w, &meta)?;
    writeln!(w)?;
    Ok(())
}

/// Writes `convergence.csv`. Non-convergence of any level is a numerical
/// failure; otherwise the final rate decides between success and
/// [`Exit::OutOfBand`].
pub fn cmd_convergence(c: &RunConfig) -> Result<Exit> {
    let levelset = c.levelset()?;
    let levels = convergence_study(
        &c.sequence(),
        levelset.as_ref(),
        c.operator(),
        &c.solver,
        &manufactured_poisson_2d(),
    )?;
    write_metadata(c)?;
    write_convergence_csv(create(&c.output_dir, "convergence.csv")?, &levels)?;
    print_levels(&levels);
    if let Some(bad) = levels.iter().find(|l| !l.converged) {
        return Err(SbmError::NotConverged {
            iterations: bad.iterations,
            residual: bad.residual,
        });
    }
    let [lo, hi] = c.rate_band();
    match levels.last().and_then(|l| l.rate) {
        Some(rate) if !(lo..=hi).contains(&rate) => {
            eprintln!("final rate {rate:.3} outside [{lo}, {hi}]");
            Ok(Exit::OutOfBand)
        }
        _ => Ok(Exit::Success),
    }
}

fn print_levels(levels: &[LevelResult]) {
    println!("{:>5} {:>6} {:>10} {:>8} {:>12} {:>7}", "level", "cells", "h", "dofs", "l2_error", "rate");
    for l in levels {
        let rate = l.rate.map(|r| format!("{r:.3}")).unwrap_or_default();
        println!(
            "{:>5} {:>6} {:>10.4e} {:>8} {:>12.4e} {:>7}",
            l.level, l.cells_per_axis, l.h, l.dofs, l.l2_error, rate
        );
    }
}

/// Summary of [`cmd_solve`], also written as `solve_summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub dofs: usize,
    pub active_cells: usize,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub seconds: f64,
    pub l2_error: f64,
}

/// Solves on the finest mesh of the sequence and writes `solution.vtk` and
/// `solve_summary.csv`.
pub fn cmd_solve(c: &RunConfig) -> Result<SolveSummary> {
    let levelset = c.levelset()?;
    let mesh = c.sequence().mesh(c.mesh.levels - 1)?;
    let run = solve_manufactured(mesh, levelset.as_ref(), c.operator(), &c.solver, &manufactured_poisson_2d())?;
    let summary = SolveSummary {
        dofs: run.operator.n_dofs(),
        active_cells: run.operator.classification().n_active(),
        iterations: run.report.iterations,
        residual: run.report.residual,
        converged: run.report.converged,
        seconds: run.report.seconds,
        l2_error: run.l2_error,
    };
    write_metadata(c)?;
    let field = sample_on_lattice(&run.operator, &run.solution)?;
    write_vtk(create(&c.output_dir, "solution.vtk")?, &field, "u")?;
    let mut w = csv::Writer::from_writer(create(&c.output_dir, "solve_summary.csv")?);
    w.serialize(&summary)?;
    w.flush()?;
    println!(
        "dofs={} iterations={} residual={:.3e} l2_error={:.6e}",
        summary.dofs, summary.iterations, summary.residual, summary.l2_error
    );
    if !summary.converged {
        return Err(SbmError::NotConverged {
            iterations: summary.iterations,
            residual: summary.residual,
        });
    }
    Ok(summary)
}

/// Writes `bench.csv` (entity kernels for `p_min..=p_max`, throughput and
/// initialization on the finest mesh), `memory.csv` and `op_counts.csv`.
pub fn cmd_bench(c: &RunConfig) -> Result<()> {
    let b = &c.bench;
    let mut records = bench_entity_kernels(c.d, b.p_min..=b.p_max, b.repetitions)?;
    let levelset = c.levelset()?;
    let mesh = c.sequence().mesh(c.mesh.levels - 1)?;
    let init = init_benchmark(&mesh, levelset.as_ref(), c.operator(), b.repetitions.min(5))?;
    let mut op = SbmOperator::new(mesh, levelset.as_ref(), c.operator())?;
    records.extend(bench_throughput(&mut op, b.n_apply, &default_thread_counts())?);
    records.push(init.record.clone());
    write_bench_csv(create(&c.output_dir, "bench.csv")?, &records)?;
    write_memory_csv(create(&c.output_dir, "memory.csv")?, &[memory_report(&op)])?;

    let (rows, slopes) = op_count_slopes(c.d, b.p_min.max(2)..=b.p_max.max(3))?;
    let mut w = csv::Writer::from_writer(create(&c.output_dir, "op_counts.csv")?);
    w.write_record(["p", "cell", "interior_face", "surrogate_face", "surrogate_point_eval"])?;
    for r in &rows {
        w.write_record([
            r.p.to_string(),
            r.cell.to_string(),
            r.interior_face.to_string(),
            r.surrogate_face.total().to_string(),
            r.surrogate_face.point_eval.total().to_string(),
        ])?;
    }
    w.flush()?;
    write_metadata(c)?;
    info!("init/apply = {:.1}", init.init_over_apply);
    println!(
        "count slopes: cell {:.2}, interior face {:.2}, surrogate face {:.2}",
        slopes.cell, slopes.interior_face, slopes.surrogate_face
    );
    Ok(())
}

/// Partitions the active cells of the finest mesh and writes
/// `partition.csv`.
pub fn cmd_partition(c: &RunConfig) -> Result<Partition> {
    let levelset = c.levelset()?;
    let mesh = c.sequence().mesh(c.mesh.levels - 1)?;
    let class = classify_cells(&mesh, levelset.as_ref(), c.criterion)?;
    let faces = collect_faces(&mesh, &class);
    let part = weighted_partition(&class, &faces, c.d, c.parts);
    write_partition_csv(create(&c.output_dir, "partition.csv")?, &part)?;
    write_metadata(c)?;
    println!(
        "parts={} max={} avg={:.1} imbalance={:.4}",
        part.n_parts(),
        part.max_weight(),
        part.average_weight(),
        part.imbalance()
    );
    Ok(part)
}
