//! Subcommand implementations.

use std::path::Path;

use ampkit::coupled::CouplingEnsemble;
use ampkit::rng::derive_seed;
use ampkit::se::{
    find_bp_threshold, se_fixed_point, se_trajectory, se_trajectory_coupled, CoupledSeParams, SePrior,
    SeParams, StateEvolution,
};
use ampkit::sparc::{
    build_code_operator, capacity, decode, max_rate_with_success, rate_gap_db, run_instance, section_encode,
    sweep_rates, transmit, Message,
};
use ampkit::{GaussBernoulliPrior, TransformKind};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Bench, CodeRun, CodeSweep, CsPhase, CsRun, Experiment, ExperimentConfig, OperatorKind, SePhase};
use crate::cs::{cs_instance, is_complex, CsInstance};
use crate::error::CliError;
use crate::output::{names, Cell, OutputDir};

type Res<T> = Result<T, CliError>;

/// Runs the experiment in `config` and writes its files into `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Res<OutputDir> {
    let mut dir = OutputDir::create(out, config)?;
    match &config.experiment {
        Experiment::CsRun(c) => cs_run(config, c, &mut dir)?,
        Experiment::CsPhase(c) => cs_phase(config, c, &mut dir)?,
        Experiment::SePhase(c) => se_phase(c, &mut dir)?,
        Experiment::Bench(c) => bench(config, c, &mut dir)?,
        Experiment::CodeRun(c) => code_run(config, c, &mut dir)?,
        Experiment::CodeSweep(c) => code_sweep(c, config, &mut dir)?,
    }
    Ok(dir)
}

fn median(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

fn ensemble_or_full(e: &Option<CouplingEnsemble>, alpha: f64) -> CouplingEnsemble {
    let mut e = e.unwrap_or(CouplingEnsemble::full(alpha));
    e.alpha = alpha;
    e
}

#[derive(Serialize)]
struct CsRunSummary<'a> {
    instances: &'a [CsInstance],
    median_final_mse: f64,
}

fn cs_run(config: &ExperimentConfig, c: &CsRun, dir: &mut OutputDir) -> Res<()> {
    let n = c.n.expect("resolved");
    let ensemble = ensemble_or_full(&c.ensemble, c.alpha);
    let runs: Vec<CsInstance> = config
        .seeds
        .par_iter()
        .map(|&s| cs_instance(c.operator, &ensemble, n, &c.prior, &c.amp, s))
        .collect::<Result<_, _>>()?;
    let blocks = ensemble.l_c;

    let mut header: Vec<String> = ["instance", "iteration", "mse", "delta_max"].map(String::from).to_vec();
    header.extend(names("block_mse_", blocks));
    let mut trace = dir.csv("trace.csv", &header)?;
    for (i, r) in runs.iter().enumerate() {
        for rec in &r.trace.records {
            let mut row = vec![Cell::U(i as u64), Cell::U(rec.iteration as u64), Cell::Opt(rec.mse), Cell::F(rec.delta_max)];
            row.extend(rec.block_mse.iter().map(|&e| Cell::F(e)));
            trace.row(&row)?;
        }
    }
    trace.finish()?;

    if c.state_evolution {
        let steps = runs.iter().map(|r| r.iterations).max().unwrap_or(0);
        let (prior, scale) = if is_complex(c.operator) {
            (SePrior::Complex(c.prior), 2.0)
        } else {
            (SePrior::Real(c.prior), 1.0)
        };
        let se = StateEvolution::new(prior);
        let e0 = prior.initial_mse();
        let mut header: Vec<String> = ["iteration", "se_mse"].map(String::from).to_vec();
        header.extend(names("se_block_mse_", blocks));
        let mut file = dir.csv("state_evolution.csv", &header)?;
        if ensemble.is_full() {
            let alpha = runs.first().map_or(c.alpha, |r| r.rows as f64 / n as f64);
            let tr = se_trajectory(&se, &SeParams::new(c.amp.delta, alpha), e0, steps)?;
            for (t, e) in tr.iter().enumerate() {
                file.row(&[Cell::U(t as u64), Cell::F(scale * e), Cell::F(scale * e)])?;
            }
        } else {
            let params = CoupledSeParams::from_ensemble(&ensemble, c.amp.delta, 1.0)?;
            let tr = se_trajectory_coupled(&se, &params, &vec![e0; blocks], steps)?;
            for (t, e) in tr.iter().enumerate() {
                let mean = e.iter().sum::<f64>() / blocks as f64;
                let mut row = vec![Cell::U(t as u64), Cell::F(scale * mean)];
                row.extend(e.iter().map(|&v| Cell::F(scale * v)));
                file.row(&row)?;
            }
        }
        file.finish()?;
    }

    let finals: Vec<f64> = runs.iter().map(|r| r.final_mse).collect();
    dir.json(
        "summary.json",
        &CsRunSummary {
            instances: &runs,
            median_final_mse: median(&finals),
        },
    )?;
    if config.timing {
        let mut t = dir.csv("timing.csv", &["instance".into(), "seconds".into()])?;
        for (i, r) in runs.iter().enumerate() {
            t.row(&[Cell::U(i as u64), Cell::F(r.seconds)])?;
        }
        t.finish()?;
    }
    Ok(())
}

/// Final MSE of one instance, with numeric divergence counted as failure.
fn final_mse_or_fail(r: ampkit::Result<CsInstance>) -> ampkit::Result<f64> {
    match r {
        Ok(r) => Ok(r.final_mse),
        Err(ampkit::Error::NumericDivergence { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

fn cs_phase(config: &ExperimentConfig, c: &CsPhase, dir: &mut OutputDir) -> Res<()> {
    let n = c.n.expect("resolved");
    let header = ["rho", "alpha", "instances", "successes", "success_fraction", "median_final_mse"];
    let mut file = dir.csv("phase.csv", &header.map(String::from))?;
    let amp = ampkit::AmpConfig { trace: false, ..c.amp };
    for &rho in &c.rhos {
        let prior = GaussBernoulliPrior::new(rho, 0.0, c.sigma2);
        for &alpha in &c.alphas {
            let ensemble = ensemble_or_full(&c.ensemble, alpha);
            let finals: Vec<f64> = config
                .seeds
                .par_iter()
                .map(|&s| final_mse_or_fail(cs_instance(c.operator, &ensemble, n, &prior, &amp, s)))
                .collect::<Result<_, _>>()?;
            let ok = finals.iter().filter(|&&e| e < c.success_mse).count();
            file.row(&[
                Cell::F(rho),
                Cell::F(alpha),
                Cell::U(finals.len() as u64),
                Cell::U(ok as u64),
                Cell::F(ok as f64 / finals.len() as f64),
                Cell::F(median(&finals)),
            ])?;
        }
    }
    file.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct Threshold {
    rho: f64,
    alpha_bp: Option<f64>,
}

fn se_phase(c: &SePhase, dir: &mut OutputDir) -> Res<()> {
    let evaluators: Vec<StateEvolution> = c
        .rhos
        .iter()
        .map(|&rho| {
            let p = GaussBernoulliPrior::new(rho, 0.0, c.sigma2);
            let prior = if c.complex { SePrior::Complex(p) } else { SePrior::Real(p) };
            StateEvolution::with_quadrature(prior, c.quadrature)
        })
        .collect();

    let cells: Vec<(f64, f64)> = c.rhos.iter().flat_map(|&r| c.alphas.iter().map(move |&a| (r, a))).collect();
    let fixed: Vec<_> = cells
        .par_iter()
        .enumerate()
        .map(|(k, &(_, alpha))| {
            let se = &evaluators[k / c.alphas.len()];
            se_fixed_point(
                se,
                &SeParams::new(c.delta, alpha),
                se.prior().initial_mse(),
                c.threshold.tol,
                c.threshold.max_iter,
            )
        })
        .collect::<Result<_, _>>()?;
    let header = ["rho", "alpha", "E_star", "converged", "iterations"];
    let mut file = dir.csv("se_phase.csv", &header.map(String::from))?;
    for (&(rho, alpha), fp) in cells.iter().zip(&fixed) {
        file.row(&[
            Cell::F(rho),
            Cell::F(alpha),
            Cell::F(fp.e),
            Cell::B(fp.converged),
            Cell::U(fp.iterations as u64),
        ])?;
    }
    file.finish()?;

    let thresholds: Vec<Threshold> = c
        .rhos
        .par_iter()
        .zip(&evaluators)
        .map(|(&rho, se)| {
            let found = find_bp_threshold(se, c.delta, 1.0, (1e-3, 1.0), &c.threshold);
            match found {
                Ok(a) => Ok(Threshold { rho, alpha_bp: Some(a) }),
                Err(ampkit::Error::Bracket { .. }) => Ok(Threshold { rho, alpha_bp: None }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, _>>()?;
    let mut file = dir.csv("thresholds.csv", &["rho".into(), "alpha_bp".into()])?;
    for t in &thresholds {
        file.row(&[Cell::F(t.rho), Cell::Opt(t.alpha_bp)])?;
    }
    file.finish()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub path: &'static str,
    pub n: usize,
    pub instance: usize,
    pub iterations: usize,
    pub iterations_to_target: Option<usize>,
    pub final_mse: f64,
    pub seconds_to_target: Option<f64>,
    pub seconds: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / k, sy / k);
    let (num, den) = points.iter().fold((0.0, 0.0), |(num, den), (x, y)| {
        let dx = x.ln() - mx;
        (num + dx * (y.ln() - my), den + dx * dx)
    });
    num / den
}

/// Times one instance per seed, sequentially, for both paths.
pub fn bench_rows(c: &Bench, seeds: &[u64]) -> ampkit::Result<Vec<BenchRow>> {
    let amp = ampkit::AmpConfig { trace: true, ..c.amp };
    let mut rows = Vec::new();
    for &log2n in &c.log2_n {
        let n = 1usize << log2n;
        let mut paths = vec![("operator", OperatorKind::Hadamard)];
        if log2n <= c.dense_max_log2_n {
            paths.push(("dense", OperatorKind::Gaussian));
        }
        for (path, kind) in paths {
            for (i, &s) in seeds.iter().enumerate() {
                let r = cs_instance(kind, &CouplingEnsemble::full(c.alpha), n, &c.prior, &amp, s)?;
                let hit = r.trace.records.iter().find(|t| t.mse.is_some_and(|m| m < c.target_mse));
                rows.push(BenchRow {
                    path,
                    n,
                    instance: i,
                    iterations: r.iterations,
                    iterations_to_target: hit.map(|t| t.iteration),
                    final_mse: r.final_mse,
                    seconds_to_target: hit.map(|t| t.seconds),
                    seconds: r.seconds,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct BenchSummary {
    path: &'static str,
    n: usize,
    count: usize,
    median_seconds: f64,
    std_seconds: f64,
}

fn bench(config: &ExperimentConfig, c: &Bench, dir: &mut OutputDir) -> Res<()> {
    let rows = bench_rows(c, &config.seeds)?;
    let header = ["path", "n", "instance", "iterations", "iterations_to_target", "final_mse"];
    let mut file = dir.csv("bench.csv", &header.map(String::from))?;
    for r in &rows {
        file.row(&[
            Cell::S(r.path.into()),
            Cell::U(r.n as u64),
            Cell::U(r.instance as u64),
            Cell::U(r.iterations as u64),
            Cell::Opt(r.iterations_to_target.map(|v| v as f64)),
            Cell::F(r.final_mse),
        ])?;
    }
    file.finish()?;
    if !config.timing {
        return Ok(());
    }
    let mut file = dir.csv(
        "bench_timing.csv",
        &["path", "n", "instance", "seconds_to_target", "seconds"].map(String::from),
    )?;
    for r in &rows {
        file.row(&[
            Cell::S(r.path.into()),
            Cell::U(r.n as u64),
            Cell::U(r.instance as u64),
            Cell::Opt(r.seconds_to_target),
            Cell::F(r.seconds),
        ])?;
    }
    file.finish()?;

    let mut summary = Vec::new();
    for path in ["operator", "dense"] {
        for &log2n in &c.log2_n {
            let n = 1usize << log2n;
            let t: Vec<f64> = rows
                .iter()
                .filter(|r| r.path == path && r.n == n)
                .map(|r| r.seconds_to_target.unwrap_or(r.seconds))
                .collect();
            if t.is_empty() {
                continue;
            }
            let mean = t.iter().sum::<f64>() / t.len() as f64;
            let var = t.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / t.len() as f64;
            summary.push(BenchSummary {
                path,
                n,
                count: t.len(),
                median_seconds: median(&t),
                std_seconds: var.sqrt(),
            });
        }
    }
    let mut file = dir.csv(
        "bench_summary.csv",
        &["path", "n", "count", "median_seconds", "std_seconds"].map(String::from),
    )?;
    for s in &summary {
        file.row(&[
            Cell::S(s.path.into()),
            Cell::U(s.n as u64),
            Cell::U(s.count as u64),
            Cell::F(s.median_seconds),
            Cell::F(s.std_seconds),
        ])?;
    }
    file.finish()?;
    let slopes: Vec<(&str, f64)> = ["operator", "dense"]
        .iter()
        .filter_map(|&p| {
            let pts: Vec<(f64, f64)> =
                summary.iter().filter(|s| s.path == p).map(|s| (s.n as f64, s.median_seconds)).collect();
            (pts.len() >= 2).then(|| (p, loglog_slope(&pts)))
        })
        .collect();
    dir.json("bench_timing.json", &serde_json::json!({ "summary": summary, "loglog_slopes": slopes }))?;
    Ok(())
}

#[derive(Serialize)]
struct Payload {
    bytes: usize,
    recovered: bool,
    ser: f64,
    decoded_file: String,
}

fn code_run(config: &ExperimentConfig, c: &CodeRun, dir: &mut OutputDir) -> Res<()> {
    let p = &c.code;
    let results: Vec<_> = config
        .seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            run_instance(p, c.ensemble.as_ref(), TransformKind::Hadamard, &c.amp, s)
                .map(|r| ampkit::sparc::InstanceResult { instance: i, ..r })
        })
        .collect::<Result<_, _>>()?;
    let header = ["instance", "seed", "ser", "block_error", "iterations", "converged"];
    let mut file = dir.csv("code_run.csv", &header.map(String::from))?;
    for r in &results {
        file.row(&[
            Cell::U(r.instance as u64),
            Cell::U(r.seed),
            Cell::F(r.ser),
            Cell::B(r.block_error),
            Cell::U(r.iterations as u64),
            Cell::B(r.converged),
        ])?;
    }
    file.finish()?;

    let payload = match &c.payload {
        None => None,
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|source| crate::config::ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            let seed = config.seeds[0];
            let message = Message::from_bytes(&bytes, p.l, p.b)
                .map_err(|e| crate::config::ConfigError::Invalid(e.to_string()))?;
            let op = build_code_operator(p, c.ensemble.as_ref(), TransformKind::Hadamard, derive_seed(seed, 0))?;
            let cw = transmit(&section_encode(&message), &op, p.delta(), derive_seed(seed, 2))?;
            let amp = ampkit::AmpConfig {
                delta: p.delta(),
                trace: false,
                ..c.amp
            };
            let d = decode(&cw.y_noisy, &op, p, &amp, &message)?;
            let decoded = d.message.to_bytes(bytes.len())?;
            let name = "payload.decoded";
            std::fs::write(dir.path().join(name), &decoded)?;
            Some(Payload {
                bytes: bytes.len(),
                recovered: decoded == bytes,
                ser: d.ser,
                decoded_file: name.into(),
            })
        }
    };

    let n = results.len() as f64;
    dir.json(
        "summary.json",
        &serde_json::json!({
            "rate": p.rate,
            "actual_rate": p.actual_rate(),
            "capacity": capacity(p.snr),
            "m": p.m(),
            "n": p.n(),
            "mean_ser": results.iter().map(|r| r.ser).sum::<f64>() / n,
            "block_error_rate": results.iter().filter(|r| r.block_error).count() as f64 / n,
            "payload": payload,
        }),
    )?;
    Ok(())
}

fn code_sweep(c: &CodeSweep, config: &ExperimentConfig, dir: &mut OutputDir) -> Res<()> {
    let grid = c.grid();
    let cap = capacity(c.snr);
    let mut header: Vec<String> = [
        "operator",
        "rate",
        "actual_rate",
        "capacity",
        "instances",
        "mean_ser",
        "ser_std",
        "block_error_rate",
        "mean_iterations",
    ]
    .map(String::from)
    .to_vec();
    if c.reference_rate.is_some() {
        header.push("gap_db".into());
    }
    let mut file = dir.csv("sweep.csv", &header)?;
    let mut per_instance = dir.csv(
        "sweep_instances.csv",
        &["operator", "rate", "instance", "seed", "ser", "block_error", "iterations", "converged"].map(String::from),
    )?;
    let mut best = Vec::new();
    for op in &c.operators {
        let points = sweep_rates(&grid, op.ensemble.as_ref(), TransformKind::Hadamard, &c.amp, &config.seeds)?;
        for pt in &points {
            let mut row = vec![
                Cell::S(op.name.clone()),
                Cell::F(pt.rate),
                Cell::F(pt.actual_rate),
                Cell::F(cap),
                Cell::U(pt.instances as u64),
                Cell::F(pt.mean_ser),
                Cell::F(pt.ser_std),
                Cell::F(pt.block_error_rate),
                Cell::F(pt.mean_iterations),
            ];
            if let Some(r) = c.reference_rate {
                row.push(Cell::F(rate_gap_db(r, pt.rate)));
            }
            file.row(&row)?;
            for r in &pt.results {
                per_instance.row(&[
                    Cell::S(op.name.clone()),
                    Cell::F(pt.rate),
                    Cell::U(r.instance as u64),
                    Cell::U(r.seed),
                    Cell::F(r.ser),
                    Cell::B(r.block_error),
                    Cell::U(r.iterations as u64),
                    Cell::B(r.converged),
                ])?;
            }
        }
        best.push(serde_json::json!({
            "operator": op.name,
            "max_rate_90": max_rate_with_success(&points, 0.9),
        }));
    }
    file.finish()?;
    per_instance.finish()?;
    dir.json("summary.json", &serde_json::json!({ "capacity": cap, "operators": best }))?;
    Ok(())
}
