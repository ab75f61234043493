//! The four subcommands. Each returns `Ok(())` on success; errors carry
//! the exit-code class (2 config, 3 numerical).

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use lics::dynamics::{integrate, IntegratorConfig, Sampling};
use lics::optimize::{optimize, OptimizeResult};
use lics::scenarios::preset_catalog;
use lics::sweep::run_sweep;

use crate::config::{
    build_objective, build_sweep_spec, resolve_scenario, ExplicitScenario, InitConfig,
    IntegratorFileConfig, OutputConfig, RunConfig, ScenarioConfig, SimulateConfig,
};
use crate::output::{write_axes_file, write_matrix_file, write_trajectory_csv};
use crate::{CliError, CliResult};

/// Flags shared by the run commands.
pub struct CommonOpts {
    pub workers: usize,
    pub out_override: Option<PathBuf>,
    pub permit_partial: bool,
    pub seed: u64,
}

fn out_dir(config: &RunConfig, opts: &CommonOpts) -> CliResult<(PathBuf, OutputConfig)> {
    let output = config.output.clone().unwrap_or_default();
    output.validate()?;
    let dir = opts
        .out_override
        .clone()
        .unwrap_or_else(|| PathBuf::from(&output.dir));
    fs::create_dir_all(&dir)?;
    Ok((dir, output))
}

/// A config must carry only the block of the command being run; a stray
/// block means the file and the invocation disagree.
fn reject_stray_blocks(config: &RunConfig, running: &str) -> CliResult<()> {
    let mut stray = Vec::new();
    if config.simulate.is_some() && running != "simulate" {
        stray.push("[simulate]");
    }
    if config.sweep.is_some() && running != "sweep" {
        stray.push("[sweep]");
    }
    if config.optimize.is_some() && running != "optimize" {
        stray.push("[optimize]");
    }
    if stray.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "config carries {} but `{running}` was invoked",
            stray.join(" and ")
        )))
    }
}

#[derive(Serialize)]
struct FinalRecord {
    t: f64,
    pop_m: f64,
    pop_n: f64,
    pop_f: f64,
    #[serde(rename = "W")]
    w: f64,
    sum_total: f64,
    a_m: [f64; 2],
    a_n: [f64; 2],
    a_f: [f64; 2],
}

#[derive(Serialize)]
struct SimulateSummary {
    preset: Option<String>,
    points: usize,
    integrator: IntegratorConfig,
    final_state: FinalRecord,
    /// `sum_total - 1`; zero up to integrator tolerance when all decay
    /// rates vanish.
    conservation_residual: f64,
}

pub fn cmd_simulate(config: &RunConfig, opts: &CommonOpts) -> CliResult<()> {
    reject_stray_blocks(config, "simulate")?;
    let block = config.simulate.clone().unwrap_or_default();
    if block.points < 2 {
        return Err(CliError::Config(format!(
            "simulate: points must be at least 2, got {}",
            block.points
        )));
    }
    let scenario = resolve_scenario(&config.scenario)?;
    let (dir, output) = out_dir(config, opts)?;

    let traj = integrate(
        &scenario.schedule,
        &scenario.params,
        &scenario.init,
        &scenario.integrator,
        &Sampling::Uniform(block.points),
    )
    .map_err(CliError::from)?;
    let fin = traj.final_state();

    let mut written = Vec::new();
    if output.wants("csv") {
        let path = dir.join("trajectory.csv");
        write_trajectory_csv(&path, &traj)?;
        written.push(path);
    }
    if output.wants("json") {
        let summary = SimulateSummary {
            preset: scenario.preset.as_ref().map(|p| p.name.clone()),
            points: block.points,
            integrator: scenario.integrator,
            final_state: FinalRecord {
                t: fin.t,
                pop_m: fin.pop_m(),
                pop_n: fin.pop_n(),
                pop_f: fin.pop_f(),
                w: fin.w,
                sum_total: fin.sum_total(),
                a_m: [fin.a_m.re, fin.a_m.im],
                a_n: [fin.a_n.re, fin.a_n.im],
                a_f: [fin.a_f.re, fin.a_f.im],
            },
            conservation_residual: fin.sum_total() - 1.0,
        };
        let path = dir.join("summary.json");
        fs::write(
            &path,
            serde_json::to_string_pretty(&summary).unwrap() + "\n",
        )?;
        written.push(path);
    }

    println!(
        "simulate: pop_m = {:.6}, pop_n = {:.6}, pop_f = {:.6}, W = {:.6}, sum = {:.9} at T = {:.3}",
        fin.pop_m(),
        fin.pop_n(),
        fin.pop_f(),
        fin.w,
        fin.sum_total(),
        fin.t
    );
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn cmd_sweep(config: &RunConfig, opts: &CommonOpts) -> CliResult<()> {
    reject_stray_blocks(config, "sweep")?;
    let scenario = resolve_scenario(&config.scenario)?;
    let spec = build_sweep_spec(&scenario, config.sweep.as_ref())?;
    let (dir, output) = out_dir(config, opts)?;

    let result = run_sweep(&spec, opts.workers, opts.permit_partial).map_err(CliError::from)?;

    let mut written = Vec::new();
    if output.wants("mat") {
        for k in 0..result.observables.len() {
            let path = dir.join(format!("{}.mat", result.observables[k]));
            write_matrix_file(&path, &result, k)?;
            written.push(path);
        }
        let axes = dir.join("axes.dat");
        write_axes_file(&axes, &result)?;
        written.push(axes);
    }
    if output.wants("json") {
        let path = dir.join("summary.json");
        fs::write(&path, serde_json::to_string_pretty(&result).unwrap() + "\n")?;
        written.push(path);
    }

    println!(
        "sweep: {} x {} grid, {} observable(s), {} failed cell(s), {:.2} s",
        result.n_rows,
        result.n_cols,
        result.observables.len(),
        result.metadata.failed_cells.len(),
        result.metadata.wall_time_s
    );
    if !result.metadata.failed_cells.is_empty() {
        println!(
            "partial result: failed cells {:?} are NaN",
            result.metadata.failed_cells
        );
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct OptimizeSummary {
    best: BTreeMap<String, f64>,
    achieved: BTreeMap<String, f64>,
    objective: f64,
    evaluations: usize,
    converged: bool,
    best_start: usize,
    start_objectives: Vec<f64>,
    trace: Vec<(usize, f64)>,
    seed: u64,
    budget: usize,
}

pub fn cmd_optimize(config: &RunConfig, opts: &CommonOpts) -> CliResult<()> {
    reject_stray_blocks(config, "optimize")?;
    let block = config
        .optimize
        .as_ref()
        .ok_or_else(|| CliError::Config("optimize: [optimize] block required".into()))?;
    let scenario = resolve_scenario(&config.scenario)?;
    let objective = build_objective(&scenario, block)?;
    let (dir, output) = out_dir(config, opts)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let result = pool
        .install(|| optimize(&objective, block.budget, opts.seed))
        .map_err(CliError::from)?;

    // the exact simulate config that reproduces the optimum
    let echo = optimum_config(&objective, &result, config)?;
    let echo_text = echo.to_toml()?;

    let mut written = Vec::new();
    if output.wants("json") {
        let summary = OptimizeSummary {
            best: objective
                .free
                .iter()
                .zip(&result.best)
                .map(|(f, &v)| (f.path.name().to_string(), v))
                .collect(),
            achieved: result
                .achieved
                .iter()
                .map(|(o, v)| (o.name().to_string(), *v))
                .collect(),
            objective: result.objective,
            evaluations: result.evaluations,
            converged: result.converged,
            best_start: result.best_start,
            start_objectives: result.start_objectives.clone(),
            trace: result
                .trace
                .iter()
                .map(|p| (p.evaluations, p.objective))
                .collect(),
            seed: opts.seed,
            budget: block.budget,
        };
        let path = dir.join("optimize_result.json");
        fs::write(
            &path,
            serde_json::to_string_pretty(&summary).unwrap() + "\n",
        )?;
        written.push(path);
    }
    if output.wants("toml") {
        let path = dir.join("optimum_config.toml");
        fs::write(&path, &echo_text)?;
        written.push(path);
    }

    println!(
        "optimize: objective = {:.6e} after {} evaluations (converged: {})",
        result.objective, result.evaluations, result.converged
    );
    for (f, v) in objective.free.iter().zip(&result.best) {
        println!("  {} = {:.9}", f.path, v);
    }
    for (o, v) in &result.achieved {
        println!("  {o} = {v:.6}");
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// Build the explicit simulate config reproducing the optimizer's best
/// point, and verify it does (to 1e-9) before handing it out.
fn optimum_config(
    objective: &lics::optimize::Objective,
    result: &OptimizeResult,
    original: &RunConfig,
) -> CliResult<RunConfig> {
    let mut schedule = objective.schedule.clone();
    let mut params = objective.params;
    for (f, &v) in objective.free.iter().zip(&result.best) {
        f.path.apply(&mut schedule, &mut params, v);
    }
    let integrator = objective.integrator.unwrap_or_else(|| {
        let (t0, t1) = lics::scenarios::default_window(&schedule);
        IntegratorConfig::for_window(t0, t1)
    });

    let traj = integrate(
        &schedule,
        &params,
        &objective.init,
        &integrator,
        &Sampling::FinalOnly,
    )
    .map_err(CliError::from)?;
    let fin = traj.final_state();
    for (obs, recorded) in &result.achieved {
        let now = obs.extract(fin);
        if (now - recorded).abs() > 1e-9 {
            return Err(CliError::Numerical(format!(
                "config echo failed to reproduce {obs}: {now} vs recorded {recorded}"
            )));
        }
    }

    Ok(RunConfig {
        scenario: ScenarioConfig {
            preset: None,
            set: None,
            explicit: Some(ExplicitScenario {
                schedule: (&schedule).into(),
                params: (&params).into(),
                init: InitConfig::from_state(&objective.init),
                integrator: Some(IntegratorFileConfig::from_config(&integrator)),
            }),
        },
        simulate: Some(SimulateConfig::default()),
        sweep: None,
        optimize: None,
        output: original.output.clone(),
    })
}

pub fn cmd_presets() -> CliResult<()> {
    println!("available presets:");
    for (name, description) in preset_catalog() {
        println!("  {name:<7} {description}");
    }
    println!("aliases: fig3 -> fig3a, fig4 -> fig4c, fig5 -> fig5c, fig6 -> fig6a");
    Ok(())
}
