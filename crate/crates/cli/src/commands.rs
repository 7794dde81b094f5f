use std::path::Path;

use ccucp::annealer::{anneal, best_feasible, default_schedule, AnnealConfig, FeasibleSummary, SampleSet};
use ccucp::encoding::Formulation;
use ccucp::instance::{
    builtin_deterministic_instance, builtin_stochastic_instance_with, validate, CorrelationRegime, UcpInstance,
};
use ccucp::qubo::{
    compile_formulation, formulation, PenaltyWeights, QuboModel, REFERENCE_COUPLINGS_DETERMINISTIC,
    REFERENCE_COUPLINGS_STOCHASTIC_N10,
};
use ccucp::reference_solver::{solve_deterministic, solve_stochastic_exact, solve_stochastic_greedy, ExactConfig};
use ccucp::sampler::{self, ScenarioSet};
use ccucp::scenario_model::{check_feasible, Solution, DEFAULT_TOL};
use ccucp::tuner::{tune, TunerConfig};
use ccucp::Error;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::manifest::Run;
use crate::{
    AnnealArgs, Cli, Command, CompileArgs, ProblemArgs, SampleArgs, SolveArgs, SweepArgs, TuneArgs, WeightArgs,
};

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> CliError {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        let code = match e {
            Error::Infeasible(_) => 3,
            Error::ExactLimit(_) => 4,
            Error::Lp(_) | Error::EmptySampleSet => 1,
            Error::Io(_) => 1,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError {
            code: 1,
            message: format!("writing output: {e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli) -> CliResult<()> {
    let config = serde_json::to_value(&cli.command).expect("arguments serialize");
    let (name, config) = match config {
        Value::Object(map) if map.len() == 1 => map.into_iter().next().unwrap(),
        other => ("command".to_string(), other),
    };
    match &cli.command {
        Command::Sample(a) => cmd_sample(cli, Run::new(&cli.out, &name, config, vec![a.seed]), a),
        Command::Solve(a) => cmd_solve(Run::new(&cli.out, &name, config, vec![a.seed]), a),
        Command::SweepP(a) => cmd_sweep_p(cli, Run::new(&cli.out, &name, config, a.seeds.clone()), a),
        Command::Compile(a) => cmd_compile(Run::new(&cli.out, &name, config, vec![a.seed]), a),
        Command::Anneal(a) => cmd_anneal(cli, Run::new(&cli.out, &name, config, vec![a.seed]), a),
        Command::Tune(a) => cmd_tune(cli, Run::new(&cli.out, &name, config, a.seed.into_iter().collect()), a),
    }
}

fn read_input(run: &mut Run, kind: &str, path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("reading {}: {e}", path.display())))?;
    run.input(format!("{kind}:{}", path.display()), &bytes);
    String::from_utf8(bytes).map_err(|_| CliError::input(format!("{} is not UTF-8", path.display())))
}

fn parse_regime(name: &str) -> CliResult<CorrelationRegime> {
    Ok(name.parse::<CorrelationRegime>()?)
}

fn load_instance(run: &mut Run, builtin: Option<&str>, path: Option<&Path>, regime: &str) -> CliResult<UcpInstance> {
    let regime = parse_regime(regime)?;
    if let Some(path) = path {
        let text = read_input(run, "instance", path)?;
        let instance = UcpInstance::from_json_str(&text)?;
        let report = validate(&instance);
        if !report.is_empty() {
            let joined: Vec<String> = report.iter().map(ToString::to_string).collect();
            return Err(Error::InvalidInstance(joined.join("; ")).into());
        }
        return Ok(instance);
    }
    let instance = match builtin.unwrap_or("deterministic") {
        "deterministic" => builtin_deterministic_instance(),
        "stochastic" => builtin_stochastic_instance_with(regime),
        other => {
            return Err(CliError::input(format!(
                "unknown built-in instance `{other}` (valid: deterministic, stochastic)"
            )))
        }
    };
    run.input(format!("builtin:{}", builtin.unwrap_or("deterministic")), instance.to_json_string().as_bytes());
    Ok(instance)
}

struct Problem {
    instance: UcpInstance,
    scenarios: Option<ScenarioSet>,
    p_level: Option<f64>,
    /// Published coupling count for the built-in models.
    reference_couplings: Option<usize>,
}

impl Problem {
    fn formulation(&self) -> CliResult<Formulation> {
        Ok(formulation(&self.instance, self.scenarios.as_ref(), self.p_level)?)
    }
}

fn resolve(run: &mut Run, args: &ProblemArgs, seed: u64) -> CliResult<Problem> {
    let instance = load_instance(run, args.builtin.as_deref(), args.instance.as_deref(), &args.regime)?;
    let builtin = args.instance.is_none();
    if !instance.is_stochastic() {
        if args.scenarios.is_some() {
            return Err(CliError::input("--scenarios given for an instance with fixed demand"));
        }
        return Ok(Problem {
            instance,
            scenarios: None,
            p_level: None,
            reference_couplings: builtin.then_some(REFERENCE_COUPLINGS_DETERMINISTIC),
        });
    }
    ccucp::check_p_level(args.p_level)?;
    let scenarios = match &args.scenarios {
        Some(path) => {
            read_input(run, "scenarios", path)?;
            sampler::load_scenarios(path)?
        }
        None => sampler::sample(&instance, args.n, seed)?.rounded(),
    };
    let reference = (builtin && scenarios.n() == 10).then_some(REFERENCE_COUPLINGS_STOCHASTIC_N10);
    Ok(Problem {
        instance,
        scenarios: Some(scenarios),
        p_level: Some(args.p_level),
        reference_couplings: reference,
    })
}

/// Weights JSON, tolerating the `manifest` field of files this tool wrote.
fn read_weights(run: &mut Run, path: &Path) -> CliResult<PenaltyWeights> {
    let mut value: Value = serde_json::from_str(&read_input(run, "weights", path)?).map_err(Error::from)?;
    if let Value::Object(map) = &mut value {
        map.remove("manifest");
    }
    Ok(PenaltyWeights::from_json_str(&value.to_string())?)
}

fn load_weights(run: &mut Run, args: &WeightArgs) -> CliResult<PenaltyWeights> {
    match &args.weights_file {
        Some(path) => read_weights(run, path),
        None => Ok(PenaltyWeights::default()),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("library types serialize")
}

fn gnuplot(cli: &Cli, run: &mut Run, name: &str, script: &str) -> CliResult<()> {
    if cli.gnuplot {
        run.write_commented(name, script)?;
    }
    Ok(())
}

fn cmd_sample(cli: &Cli, mut run: Run, a: &SampleArgs) -> CliResult<()> {
    let builtin = a.builtin.as_deref().or(a.instance.is_none().then_some("stochastic"));
    let instance = load_instance(&mut run, builtin, a.instance.as_deref(), &a.regime)?;
    let set = sampler::sample(&instance, a.n, a.seed)?;
    let mut meta = set.meta();
    meta.manifest = Some(run.id());
    std::fs::create_dir_all(&cli.out)?;
    sampler::save_scenarios_with_meta(&set, &meta, run.path("scenarios.csv"))?;
    run.record("scenarios.csv")?;
    run.record("scenarios.csv.meta.json")?;
    println!("{} scenarios ({} regime) written to {}", set.n(), set.regime, run.path("scenarios.csv").display());
    run.finish()?;
    Ok(())
}

fn solve_problem(problem: &Problem, greedy: bool) -> ccucp::Result<Solution> {
    match (&problem.scenarios, problem.p_level) {
        (Some(s), Some(p)) if greedy => solve_stochastic_greedy(&problem.instance, s, p),
        (Some(s), Some(p)) => solve_stochastic_exact(&problem.instance, s, p, &ExactConfig::default()),
        _ => solve_deterministic(&problem.instance),
    }
}

fn cmd_solve(mut run: Run, a: &SolveArgs) -> CliResult<()> {
    let problem = resolve(&mut run, &a.problem, a.seed)?;
    let solution = solve_problem(&problem, a.greedy)?;
    let report = check_feasible(
        &problem.instance,
        problem.scenarios.as_ref(),
        problem.p_level.unwrap_or(1.0),
        &solution,
        DEFAULT_TOL,
    )?;
    run.write_json("solution.json", to_value(&solution))?;
    run.write_json("feasibility.json", to_value(&report))?;
    println!("objective {}", solution.objective);
    run.finish()?;
    if !report.joint {
        return Err(CliError {
            code: 3,
            message: "solver output failed the feasibility check".into(),
        });
    }
    Ok(())
}

const SWEEP_GP: &str = "set datafile separator ','
set key autotitle columnhead
set xlabel 'reliability level p'
set ylabel 'cost ($)'
plot 'sweep.csv' using 2:4 with points pointtype 7 title 'cost'
";

fn cmd_sweep_p(cli: &Cli, mut run: Run, a: &SweepArgs) -> CliResult<()> {
    if a.p_grid.is_empty() {
        return Err(CliError::input("--p-grid must list at least one level"));
    }
    if a.seeds.is_empty() || a.regimes.is_empty() {
        return Err(CliError::input("--seeds and --regimes must not be empty"));
    }
    for p in &a.p_grid {
        ccucp::check_p_level(*p)?;
    }
    let regimes = a
        .regimes
        .iter()
        .map(|r| parse_regime(r))
        .collect::<CliResult<Vec<_>>>()?;
    for r in &regimes {
        run.input(format!("builtin:stochastic:{r}"), builtin_stochastic_instance_with(*r).to_json_string().as_bytes());
    }
    let greedy = a.greedy || a.n > ExactConfig::default().max_scenarios;
    let jobs: Vec<(CorrelationRegime, u64)> = regimes
        .iter()
        .flat_map(|r| a.seeds.iter().map(move |s| (*r, *s)))
        .collect();
    let blocks = jobs
        .par_iter()
        .map(|(regime, seed)| {
            let instance = builtin_stochastic_instance_with(*regime);
            let scenarios = sampler::sample(&instance, a.n, *seed)?.rounded();
            a.p_grid
                .iter()
                .map(|p| {
                    let problem = Problem {
                        instance: instance.clone(),
                        scenarios: Some(scenarios.clone()),
                        p_level: Some(*p),
                        reference_couplings: None,
                    };
                    match solve_problem(&problem, greedy) {
                        Ok(s) => Ok((format!("{regime},{p},{seed},{}\n", s.objective), false)),
                        Err(Error::Infeasible(_)) => Ok((format!("{regime},{p},{seed},inf\n"), true)),
                        Err(e) => Err(e),
                    }
                })
                .collect::<ccucp::Result<Vec<(String, bool)>>>()
        })
        .collect::<ccucp::Result<Vec<_>>>()?;
    let mut csv = String::from("regime,p,seed,cost\n");
    let mut infeasible = 0;
    for (row, bad) in blocks.into_iter().flatten() {
        csv.push_str(&row);
        infeasible += usize::from(bad);
    }
    if infeasible > 0 {
        eprintln!("warning: {infeasible} infeasible cells recorded with cost inf");
    }
    run.write_commented("sweep.csv", &csv)?;
    gnuplot(cli, &mut run, "sweep.gp", SWEEP_GP)?;
    println!("{} rows written to {}", jobs.len() * a.p_grid.len(), run.path("sweep.csv").display());
    run.finish()?;
    Ok(())
}

fn cmd_compile(mut run: Run, a: &CompileArgs) -> CliResult<()> {
    let problem = resolve(&mut run, &a.problem, a.seed)?;
    let weights = load_weights(&mut run, &a.weights)?;
    let model = compile_formulation(&problem.formulation()?, &weights)?;
    run.write_commented("model.qubo", &model.to_text())?;
    let mut stats = model.stats();
    if let Some(r) = problem.reference_couplings {
        stats = stats.with_reference(r);
    }
    if a.stats {
        run.write_json("stats.json", to_value(&stats))?;
    }
    print!("variables {}, couplings {}", stats.num_vars, stats.num_couplings);
    match (stats.reference_couplings, stats.coupling_deviation) {
        (Some(r), Some(d)) => println!(" (reference {r}, deviation {:+.2}%)", 100.0 * d),
        _ => println!(),
    }
    run.finish()?;
    Ok(())
}

const HISTOGRAM_GP: &str = "set datafile separator ','
set xlabel 'decoded cost ($)'
set ylabel 'samples'
binwidth = 5
bin(x) = binwidth * floor(x / binwidth)
set style fill solid 0.5
plot 'histogram.csv' every ::1 using (bin($1)):(1.0) smooth freq with boxes title 'all', \\
     'histogram.csv' every ::1 using (bin($1)):(stringcolumn(2) eq 'true' ? 1.0 : 0.0) smooth freq with boxes title 'feasible'
";

fn write_samples(cli: &Cli, run: &mut Run, samples: &SampleSet, summary: &FeasibleSummary) -> CliResult<()> {
    let mut body = Vec::new();
    let header = json!({ "manifest": run.id(), "config": samples.config });
    body.extend_from_slice(format!("{header}\n").as_bytes());
    samples.write_jsonl(&mut body)?;
    run.write("samples.jsonl", &body)?;
    run.write_commented("histogram.csv", &summary.histogram_csv())?;
    gnuplot(cli, run, "histogram.gp", HISTOGRAM_GP)?;
    match &summary.best {
        Some((solution, read)) => {
            run.write_json(
                "best.json",
                json!({ "read_index": read, "cost": solution.objective, "solution": solution }),
            )?;
            println!(
                "best feasible cost {} (read {read}); joint feasibility ratio {}",
                solution.objective,
                summary.feasible_fraction()
            );
        }
        None => println!("no feasible sample among {} reads", samples.len()),
    }
    Ok(())
}

fn cmd_anneal(cli: &Cli, mut run: Run, a: &AnnealArgs) -> CliResult<()> {
    let problem = resolve(&mut run, &a.problem, a.seed)?;
    let f = problem.formulation()?;
    let model = match &a.qubo {
        Some(path) => {
            let model = QuboModel::from_text(&read_input(&mut run, "qubo", path)?)?;
            if model.num_vars != f.num_vars() {
                return Err(CliError::input(format!(
                    "QUBO has {} variables, the problem needs {}",
                    model.num_vars,
                    f.num_vars()
                )));
            }
            model
        }
        None => compile_formulation(&f, &load_weights(&mut run, &a.weights)?)?,
    };
    let mut config: AnnealConfig = default_schedule(&model);
    config.num_reads = a.reads;
    config.seed = a.seed;
    if let Some(s) = a.sweeps {
        config.sweeps = s;
    }
    if let Some(b) = a.beta_start {
        config.beta_start = b;
    }
    if let Some(b) = a.beta_end {
        config.beta_end = b;
    }
    config.validate()?;
    let samples = anneal(&model, &config)?;
    let summary = best_feasible(&samples, &f)?;
    write_samples(cli, &mut run, &samples, &summary)?;
    run.finish()?;
    Ok(())
}

const TRACE_GP: &str = "set datafile separator ','
set key autotitle columnhead outside
set logscale y
set xlabel 'iteration'
set ylabel 'penalty factor'
stats 'trace.csv' every ::1::1 nooutput
groups = (STATS_columns - 2) / 2
plot for [c=2:groups+1] 'trace.csv' using 1:c with linespoints
";

fn cmd_tune(cli: &Cli, mut run: Run, a: &TuneArgs) -> CliResult<()> {
    let mut config = match &a.config {
        Some(path) => serde_json::from_str::<TunerConfig>(&read_input(&mut run, "config", path)?)
            .map_err(|e| CliError::input(format!("tuner config: {e}")))?,
        None => TunerConfig::fast(0),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.validate()?;
    let initial = match &a.initial_weights {
        Some(path) => read_weights(&mut run, path)?,
        None => PenaltyWeights::default(),
    };
    let problem = resolve(&mut run, &a.problem, config.seed)?;
    let (weights, trace) = tune(
        &problem.instance,
        &initial,
        &config,
        problem.scenarios.as_ref(),
        problem.p_level,
    )?;
    run.write_commented("trace.csv", &trace.to_csv())?;
    gnuplot(cli, &mut run, "trace.gp", TRACE_GP)?;
    run.write_json("weights.json", to_value(&weights))?;
    run.write_json(
        "tuner.json",
        json!({
            "config": config,
            "iterations": trace.rows.len(),
            "threshold": trace.threshold,
            "stop_reason": trace.stop_reason,
        }),
    )?;
    println!("{} after {} iterations", trace.stop_reason, trace.rows.len());
    if a.final_reads > 0 {
        let f = problem.formulation()?;
        let model = compile_formulation(&f, &weights)?;
        let schedule = config.schedule(&model, a.final_reads, config.iteration_seed(config.max_iters));
        let samples = anneal(&model, &schedule)?;
        let summary = best_feasible(&samples, &f)?;
        write_samples(cli, &mut run, &samples, &summary)?;
    }
    run.finish()?;
    Ok(())
}
