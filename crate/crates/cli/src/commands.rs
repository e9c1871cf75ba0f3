use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use h2kit::basisops::compress;
use h2kit::construct::{construct_h2, KappaField, KernelSpec};
use h2kit::dist::{dist_apply, dist_compress, kind, DistributedH2, Trace};
use h2kit::fdsolver::{solve_fd, FdConfig, FracProblem, MgOperator, Preconditioner};
use h2kit::geometry::PointCloud;
use h2kit::io::{load, save};
use h2kit::matvec::{apply, h2_matvec, random_vectors, sampled_difference, sampled_error};
use h2kit::{H2Error, H2Matrix, Result};

use crate::table::{list, sci, Table};
use crate::{Cli, Command, Common, FieldName, KernelName, Outcome, PrecondName};

/// Fraction of rows sampled for accuracy checks.
const SAMPLE: f64 = 0.1;

pub fn run(cli: &Cli) -> Result<Outcome> {
    let c = &cli.common;
    match &cli.command {
        Command::Build { kernel, n, m, eta, p, length, beta, field, out } => {
            build(c, *kernel, *n, *m, *eta, *p, *length, *beta, *field, out)
        }
        Command::Inspect { matrix } => inspect(c, &load(matrix)?),
        Command::Matvec { matrix, nv, reps, tol } => matvec(c, &load(matrix)?, *nv, *reps, *tol),
        Command::Compress { matrix, tau, out, tol } => compress_cmd(c, &load(matrix)?, *tau, out.as_deref(), *tol),
        Command::DistMatvec { matrix, ranks, nv } => dist_matvec_cmd(c, &load(matrix)?, *ranks, *nv),
        Command::DistCompress { matrix, ranks, tau, out } => dist_compress_cmd(c, &load(matrix)?, *ranks, *tau, out.as_deref()),
        Command::SolveFd { n, beta, tau, ranks, rtol, maxit, precond, c_scale, field, eta, p } => {
            let mut problem = FracProblem::new(*n, *beta)?.with_field(field_of(*field));
            if let Some(s) = c_scale {
                problem = problem.with_c_scale(*s);
            }
            let cfg = FdConfig {
                eta: *eta,
                p: *p,
                tau: (*tau > 0.0).then_some(*tau),
                ranks: *ranks,
                rtol: *rtol,
                maxit: *maxit,
                preconditioner: match precond {
                    PrecondName::Mg => Preconditioner::Multigrid(MgOperator::Correction),
                    PrecondName::MgDiag => Preconditioner::Multigrid(MgOperator::DiagPlusCorrection),
                    PrecondName::Jacobi => Preconditioner::Jacobi,
                    PrecondName::None => Preconditioner::None,
                },
                seed: c.seed,
                ..FdConfig::default()
            };
            solve(c, &problem, &cfg)
        }
    }
}

fn field_of(f: FieldName) -> KappaField {
    match f {
        FieldName::Bump => KappaField::Bump,
        FieldName::Constant => KappaField::Constant,
    }
}

fn check(c: &Common, ok: bool, msg: impl FnOnce() -> String) -> Outcome {
    if c.check && !ok {
        Outcome::CheckFailed(msg())
    } else {
        Outcome::Ok
    }
}

#[allow(clippy::too_many_arguments)]
fn build(
    c: &Common,
    kernel: KernelName,
    n: usize,
    m: usize,
    eta: f64,
    p: usize,
    length: f64,
    beta: f64,
    field: FieldName,
    out: &Path,
) -> Result<Outcome> {
    let (points, spec) = match kernel {
        KernelName::Exp2d => (PointCloud::test_family(2, n, 1.0)?, KernelSpec::Exp { length }),
        KernelName::Exp3d => (PointCloud::test_family(3, n, 1.0)?, KernelSpec::Exp { length }),
        KernelName::FdFrac => {
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                return Err(H2Error::InvalidArgument(format!("fd-frac needs a square point count, got {n}")));
            }
            let problem = FracProblem::new(side, beta)?.with_field(field_of(field));
            (problem.interior_points(), problem.kernel())
        }
    };
    let t = Instant::now();
    let a = construct_h2(points, &spec, m, eta, p)?;
    let elapsed = t.elapsed();
    save(&a, out)?;
    let mem = a.memory_report();
    println!("built {} x {} matrix, depth {}, rank {}, C_sp {}", a.rows(), a.cols(), a.depth(), a.row_ranks()[0], a.sparsity_constant());
    println!("memory: {} bytes ({} low-rank, {} dense)", mem.total_bytes, mem.lowrank_bytes, mem.dense_bytes);

    let mut t = Table::new(&["kernel", "n", "m", "eta", "p", "depth", "sparsity", "lowrank_bytes", "dense_bytes", "total_bytes", "time_s"], !c.no_timings);
    let name = format!("{kernel:?}").to_lowercase();
    let row = vec![
        name,
        a.rows().to_string(),
        m.to_string(),
        eta.to_string(),
        p.to_string(),
        a.depth().to_string(),
        a.sparsity_constant().to_string(),
        mem.lowrank_bytes.to_string(),
        mem.dense_bytes.to_string(),
        mem.total_bytes.to_string(),
        t.secs(elapsed),
    ];
    t.push(row);
    t.write(c.csv.as_deref())?;
    Ok(Outcome::Ok)
}

fn inspect(c: &Common, a: &H2Matrix) -> Result<Outcome> {
    let mem = a.memory_report();
    println!("rows {} cols {} depth {} leaf size {} eta {}", a.rows(), a.cols(), a.depth(), a.row_tree().leaf_size(), a.eta());
    match a.kernel() {
        Some(k) => println!("kernel {k:?}"),
        None => println!("kernel unknown"),
    }
    println!("sparsity constant {}", a.sparsity_constant());
    println!("dense blocks {}", a.dense().len());
    println!("memory: basis {} coupling {} dense {} total {} bytes", mem.basis_bytes, mem.coupling_bytes, mem.dense_bytes, mem.total_bytes);
    let mut t = Table::new(&["level", "nodes", "row_rank", "col_rank", "lowrank_blocks", "dense_blocks"], !c.no_timings);
    println!("level nodes row_rank col_rank lowrank_blocks");
    for l in 0..=a.depth() {
        let blocks = a.coupling(l).len();
        let dense = if l == a.depth() { a.dense().len() } else { 0 };
        println!("{l:5} {:5} {:8} {:8} {blocks:14}", 1usize << l, a.row_ranks()[l], a.col_ranks()[l]);
        t.push(vec![
            l.to_string(),
            (1usize << l).to_string(),
            a.row_ranks()[l].to_string(),
            a.col_ranks()[l].to_string(),
            blocks.to_string(),
            dense.to_string(),
        ]);
    }
    t.write(c.csv.as_deref())?;
    Ok(Outcome::Ok)
}

/// Sampled error against the kernel when the matrix is small enough and its
/// kernel is known.
fn oracle_error(c: &Common, a: &H2Matrix, nv: usize) -> Result<Option<f64>> {
    match a.kernel() {
        Some(k) if a.rows() <= c.oracle_cap => Ok(Some(sampled_error(a, &k, SAMPLE, nv, c.seed)?)),
        _ => Ok(None),
    }
}

fn matvec(c: &Common, a: &H2Matrix, nv: usize, reps: usize, tol: f64) -> Result<Outcome> {
    if nv == 0 || reps == 0 {
        return Err(H2Error::InvalidArgument("nv and reps must be positive".into()));
    }
    let x = random_vectors(a.cols(), nv, c.seed);
    let mut y = vec![0.0; a.rows() * nv];
    let mut best = Duration::MAX;
    for _ in 0..reps {
        let t = Instant::now();
        h2_matvec(a, &x, nv, 1.0, 0.0, &mut y)?;
        best = best.min(t.elapsed());
    }
    let flops = a.matvec_flops(nv);
    let rate = flops as f64 / best.as_secs_f64().max(1e-12);
    let err = oracle_error(c, a, nv)?;
    println!("N {} nv {nv}: best of {reps} {:.3} ms, {:.3} GFlop/s", a.rows(), best.as_secs_f64() * 1e3, rate * 1e-9);
    match err {
        Some(e) => println!("sampled relative error {e:.3e}"),
        None => println!("sampled error skipped"),
    }
    let mut t = Table::new(&["n", "nv", "reps", "flops", "time_s", "flop_rate", "sampled_error"], !c.no_timings);
    let row = vec![a.rows().to_string(), nv.to_string(), reps.to_string(), flops.to_string(), t.secs(best), t.rate(rate), err.map(sci).unwrap_or_default()];
    t.push(row);
    t.write(c.csv.as_deref())?;
    Ok(match err {
        Some(e) => check(c, e <= tol, || format!("sampled error {e:.3e} above {tol:.1e}")),
        None if c.check => Outcome::CheckFailed("no dense oracle for this matrix".into()),
        None => Outcome::Ok,
    })
}

fn compress_cmd(c: &Common, a: &H2Matrix, tau: f64, out: Option<&Path>, tol: f64) -> Result<Outcome> {
    let t0 = Instant::now();
    let b = compress(a, tau)?;
    let elapsed = t0.elapsed();
    if let Some(out) = out {
        save(&b, out)?;
    }
    let diff = sampled_difference(a, &b, SAMPLE, 1, c.seed)?;
    let (m0, m1) = (a.memory_report(), b.memory_report());
    println!("ranks {} -> {}", list(a.row_ranks()), list(b.row_ranks()));
    println!("low-rank memory {} -> {} bytes ({:.2}x), sampled difference {diff:.3e}", m0.lowrank_bytes, m1.lowrank_bytes, m0.lowrank_bytes as f64 / m1.lowrank_bytes.max(1) as f64);
    let mut t = Table::new(
        &["level", "row_rank_before", "row_rank_after", "col_rank_before", "col_rank_after", "lowrank_bytes_before", "lowrank_bytes_after", "sampled_difference", "time_s"],
        !c.no_timings,
    );
    for l in 0..=a.depth() {
        let row = vec![
            l.to_string(),
            a.row_ranks()[l].to_string(),
            b.row_ranks()[l].to_string(),
            a.col_ranks()[l].to_string(),
            b.col_ranks()[l].to_string(),
            m0.lowrank_bytes.to_string(),
            m1.lowrank_bytes.to_string(),
            sci(diff),
            t.secs(elapsed),
        ];
        t.push(row);
    }
    t.write(c.csv.as_deref())?;
    Ok(check(c, diff <= tol, || format!("sampled difference {diff:.3e} above {tol:.1e}")))
}

fn kind_name(k: u32) -> &'static str {
    match k {
        kind::GATHER => "gather",
        kind::SCATTER => "scatter",
        kind::EXCHANGE => "exchange",
        kind::DENSE => "dense",
        kind::GRAM => "gram",
        kind::FACTOR => "factor",
        kind::BLOCKS => "blocks",
        kind::MAP => "map",
        kind::RANKS => "ranks",
        kind::FLAG => "flag",
        kind::HALO => "halo",
        kind::VECTOR => "vector",
        kind::REDUCE => "reduce",
        _ => "other",
    }
}

/// (receiving rank, kind, level) -> (messages, values).
fn received(trace: &Trace) -> BTreeMap<(usize, u32, usize), (usize, usize)> {
    let mut out = BTreeMap::new();
    for m in trace.messages() {
        let e = out.entry((m.dst, m.kind(), m.level())).or_insert((0, 0));
        e.0 += 1;
        e.1 += m.len;
    }
    out
}

/// One row per receiving rank, message kind and level.
fn message_table(c: &Common, trace: &Trace, nranks: usize, extra: (&'static str, String), elapsed: Duration) -> Table {
    let mut t = Table::new(&["ranks", "rank", "kind", "level", "messages", "values", "bytes", extra.0, "time_s"], !c.no_timings);
    for ((rank, k, level), (count, values)) in received(trace) {
        let row = vec![
            nranks.to_string(),
            rank.to_string(),
            kind_name(k).to_string(),
            level.to_string(),
            count.to_string(),
            values.to_string(),
            (values * std::mem::size_of::<f64>()).to_string(),
            extra.1.clone(),
            t.secs(elapsed),
        ];
        t.push(row);
    }
    t
}

fn dist_matvec_cmd(c: &Common, a: &H2Matrix, ranks: usize, nv: usize) -> Result<Outcome> {
    if nv == 0 {
        return Err(H2Error::InvalidArgument("nv must be positive".into()));
    }
    let d = DistributedH2::distribute(a, ranks)?;
    let x = random_vectors(a.cols(), nv, c.seed);
    let t0 = Instant::now();
    let (y, trace) = dist_apply(&d, &x, nv)?;
    let elapsed = t0.elapsed();
    let want = apply(a, &x, nv)?;
    let diff = y.iter().zip(&want).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let total: usize = trace.messages().map(|m| m.len).sum();
    println!("P {ranks} nv {nv}: {} messages, {total} values, max difference to single rank {diff:e}", trace.messages().count());
    let t = message_table(c, &trace, ranks, ("max_abs_difference", sci(diff)), elapsed);
    t.write(c.csv.as_deref())?;
    Ok(check(c, diff == 0.0, || format!("distributed product differs from the single-rank one by {diff:e}")))
}

fn dist_compress_cmd(c: &Common, a: &H2Matrix, ranks: usize, tau: f64, out: Option<&Path>) -> Result<Outcome> {
    let d = DistributedH2::distribute(a, ranks)?;
    let t0 = Instant::now();
    let (dc, trace) = dist_compress(&d, tau)?;
    let elapsed = t0.elapsed();
    let got = dc.to_h2()?;
    if let Some(out) = out {
        save(&got, out)?;
    }
    let single = compress(a, tau)?;
    let same_ranks = got.row_ranks() == single.row_ranks() && got.col_ranks() == single.col_ranks();
    let diff = sampled_difference(&single, &got, SAMPLE, 1, c.seed)?;
    println!("P {ranks}: ranks {} (single rank {}), sampled difference {diff:e}", list(got.row_ranks()), list(single.row_ranks()));
    let t = message_table(c, &trace, ranks, ("sampled_difference", sci(diff)), elapsed);
    t.write(c.csv.as_deref())?;
    Ok(check(c, same_ranks && diff <= 1e-12, || format!("ranks equal: {same_ranks}, sampled difference {diff:e}")))
}

fn solve(c: &Common, problem: &FracProblem, cfg: &FdConfig) -> Result<Outcome> {
    let rep = solve_fd(problem, cfg)?;
    let res = &rep.solution.pcg;
    let s = &rep.setup;
    println!("n {} (N = {}), P {}, beta {}, tau {:?}", problem.n, problem.size(), cfg.ranks, problem.beta, cfg.tau);
    if !c.no_timings {
        println!(
            "setup: K build {:.3} s, compression {:.3} s, D {:.3} s, C {:.3} s, preconditioner {:.3} s",
            s.k_build.as_secs_f64(),
            s.compression.as_secs_f64(),
            s.d_assembly.as_secs_f64(),
            s.c_assembly.as_secs_f64(),
            s.preconditioner.as_secs_f64()
        );
        println!("solve: {:.3} s, {:.3} ms per iteration", rep.solve.as_secs_f64(), rep.time_per_iteration().as_secs_f64() * 1e3);
    }
    println!(
        "PCG {} after {} iterations, relative residual {:.3e}",
        if res.converged { "converged" } else { "did not converge" },
        res.iterations,
        res.residuals.last().copied().unwrap_or(0.0)
    );

    let mut t = Table::new(&["section", "name", "index", "value"], !c.no_timings);
    let put = |t: &mut Table, section: &str, name: &str, index: String, value: String| {
        t.push(vec![section.into(), name.into(), index, value]);
    };
    for (name, d) in [
        ("k_build_s", s.k_build),
        ("compression_s", s.compression),
        ("d_assembly_s", s.d_assembly),
        ("c_assembly_s", s.c_assembly),
        ("preconditioner_s", s.preconditioner),
    ] {
        let v = t.secs(d);
        put(&mut t, "setup", name, String::new(), v);
    }
    let v = t.secs(rep.solve);
    put(&mut t, "solve", "solve_s", String::new(), v);
    let v = t.secs(rep.time_per_iteration());
    put(&mut t, "solve", "per_iteration_s", String::new(), v);
    put(&mut t, "solve", "iterations", String::new(), res.iterations.to_string());
    put(&mut t, "solve", "converged", String::new(), res.converged.to_string());
    put(&mut t, "solve", "min_probe", String::new(), sci(rep.solution.min_probe));
    for (l, r) in rep.k_ranks.iter().enumerate() {
        put(&mut t, "k_ranks", "rank", l.to_string(), r.to_string());
    }
    for (i, r) in res.residuals.iter().enumerate() {
        put(&mut t, "residual", "relative", i.to_string(), sci(*r));
    }
    t.write(c.csv.as_deref())?;
    Ok(check(c, res.converged, || format!("PCG stopped after {} iterations", res.iterations)))
}
