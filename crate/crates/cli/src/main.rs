use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ebtrain::adapt::{self, Algorithm};
use ebtrain::bounds;
use ebtrain::config::KeyValues;
use ebtrain::lab::{self, ExperimentSpec, Figure, ResultTable, ScenarioConfig, Value};
use ebtrain::phasor::SplitPower;
use ebtrain::protocols::{self, ParallelPlan, ProtocolRun, RppPlan, SequentialPlan};
use ebtrain::{Error, PhaseAssignment, RolePartition, Result};

const AFTER_HELP: &str = "\
Values from --config are read first; flags given on the command line override them.
Config files hold `key = value` lines; `#` starts a comment. Keys match the long
flag names with `-` replaced by `_`, plus the deployment keys ref_atten_db, ref_dist,
pathloss_exp, dist_min, dist_max, paths_per_link and tx_power.

Exit status: 0 on success, 1 on a usage error, 2 when a parameter violates a
precondition or a file cannot be read or written.";

/// Phase training for distributed energy beamforming.
#[derive(Debug, Parser)]
#[command(name = "ebtrain", version, after_help = AFTER_HELP)]
struct Cli {
    /// Master seed for deployments and protocol randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write CSV output here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Read `key = value` defaults from this file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Align two ETs to the rest for a single adaptation interval.
    Adapt(RunArgs),
    /// Sequential training of every ET against the growing coherent sum.
    Sequential(RunArgs),
    /// Parallel training with random adapting sets.
    Parallel(RunArgs),
    /// Random phase perturbation baseline.
    Rpp(RunArgs),
    /// Training slots needed for a target efficiency.
    Bounds(BoundsArgs),
    /// Run a Monte Carlo experiment and emit its table.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Number of ETs.
    #[arg(long)]
    ets: Option<usize>,
    /// Feedback bits per window.
    #[arg(long)]
    bits: Option<u32>,
    /// Feedback windows per interval (alternative to --slots).
    #[arg(long)]
    windows: Option<usize>,
    /// Training slots per interval; total slots for rpp.
    #[arg(long)]
    slots: Option<usize>,
    /// a1 (no ER memory) or a2 (ER memory).
    #[arg(long)]
    algorithm: Option<Algorithm>,
    /// Adaptation probability for parallel training.
    #[arg(long)]
    p: Option<f64>,
    /// Parallel training intervals.
    #[arg(long)]
    intervals: Option<usize>,
    /// RPP perturbation half-width in radians.
    #[arg(long)]
    delta: Option<f64>,
    /// Standard deviation of power measurement noise, watts.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Number of ETs.
    #[arg(long)]
    ets: Option<usize>,
    /// Use identical unit gains instead of a random deployment.
    #[arg(long)]
    equal_gains: bool,
    /// Target efficiency in (0, 1].
    #[arg(long)]
    eta_target: Option<f64>,
    /// Feedback bits per window.
    #[arg(long)]
    bits: Option<u32>,
    /// a1 or a2.
    #[arg(long)]
    algorithm: Option<Algorithm>,
    /// Also report the efficiency lower bound at this many slots.
    #[arg(long)]
    slots: Option<usize>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// phase-error, seq-efficiency, eb-gain, tradeoff, coin or comparison.
    #[arg(long)]
    figure: Option<String>,
    /// Monte Carlo trials (per-figure default otherwise).
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated ET counts.
    #[arg(long)]
    ets: Option<String>,
    /// Comma-separated training slot counts.
    #[arg(long)]
    slots: Option<String>,
    /// Comma-separated feedback bit counts.
    #[arg(long)]
    bits: Option<String>,
    /// Comma-separated algorithms.
    #[arg(long)]
    algorithm: Option<String>,
    /// Comma-separated adaptation probabilities.
    #[arg(long)]
    p: Option<String>,
    /// Parallel training intervals.
    #[arg(long)]
    intervals: Option<usize>,
    /// RPP perturbation half-width in radians.
    #[arg(long)]
    delta: Option<f64>,
    /// Measurement noise standard deviation (power units).
    #[arg(long)]
    noise: Option<f64>,
}

const SCENARIO_KEYS: &[&str] = &[
    "seed",
    "ref_atten_db",
    "ref_dist",
    "pathloss_exp",
    "dist_min",
    "dist_max",
    "paths_per_link",
    "tx_power",
];

const RUN_KEYS: &[&str] = &["ets", "bits", "windows", "slots", "algorithm", "p", "intervals", "delta", "noise"];
const BOUNDS_KEYS: &[&str] = &["ets", "equal_gains", "eta_target", "bits", "algorithm", "slots"];

fn set<T: ToString>(kv: &mut KeyValues, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        kv.insert(key, v.to_string());
    }
}

fn set_run_flags(kv: &mut KeyValues, a: &RunArgs) {
    set(kv, "ets", &a.ets);
    set(kv, "bits", &a.bits);
    set(kv, "windows", &a.windows);
    set(kv, "slots", &a.slots);
    set(kv, "algorithm", &a.algorithm);
    set(kv, "p", &a.p);
    set(kv, "intervals", &a.intervals);
    set(kv, "delta", &a.delta);
    set(kv, "noise", &a.noise);
}

fn check_keys(kv: &KeyValues, keys: &[&str]) -> Result<()> {
    let known: Vec<&str> = SCENARIO_KEYS.iter().chain(keys).copied().collect();
    kv.reject_unknown(&known)
}

fn scenario_config(kv: &KeyValues, num_ets: usize) -> Result<ScenarioConfig> {
    let mut s = ScenarioConfig::default().with_ets(num_ets);
    s.seed = kv.parsed("seed")?.unwrap_or(0);
    if let Some(v) = kv.parsed("ref_atten_db")? {
        s.ref_atten_db = v;
    }
    if let Some(v) = kv.parsed("ref_dist")? {
        s.ref_dist = v;
    }
    if let Some(v) = kv.parsed("pathloss_exp")? {
        s.pathloss_exp = v;
    }
    if let Some(v) = kv.parsed("dist_min")? {
        s.dist_range.0 = v;
    }
    if let Some(v) = kv.parsed("dist_max")? {
        s.dist_range.1 = v;
    }
    if let Some(v) = kv.parsed("paths_per_link")? {
        s.paths_per_link = v;
    }
    if let Some(v) = kv.parsed("tx_power")? {
        s.tx_power = v;
    }
    Ok(s)
}

/// Where the CSV and the summary line go.
struct Output {
    csv: Option<Box<dyn Write>>,
    summary_to_stderr: bool,
    path: Option<PathBuf>,
}

impl Output {
    /// CSV goes to `--out` when given; otherwise to stdout only if `csv_by_default`.
    fn new(out: Option<PathBuf>, csv_by_default: bool) -> Result<Self> {
        match out {
            Some(path) => {
                let file = File::create(&path).map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                })?;
                Ok(Self {
                    csv: Some(Box::new(BufWriter::new(file))),
                    summary_to_stderr: false,
                    path: Some(path),
                })
            }
            None if csv_by_default => Ok(Self {
                csv: Some(Box::new(io::stdout().lock())),
                summary_to_stderr: true,
                path: None,
            }),
            None => Ok(Self {
                csv: None,
                summary_to_stderr: false,
                path: None,
            }),
        }
    }

    fn finish(mut self, table: &ResultTable, summary: &str) -> Result<()> {
        let path = self.path.clone().unwrap_or_else(|| "<stdout>".into());
        let io_err = |source| Error::Io {
            path: path.clone(),
            source,
        };
        if let Some(w) = self.csv.as_mut() {
            table.write_csv(&mut *w).map_err(|e| match e {
                Error::Io { source, .. } => io_err(source),
                other => other,
            })?;
            w.flush().map_err(io_err)?;
        }
        if self.summary_to_stderr {
            eprintln!("{summary}");
        } else {
            println!("{summary}");
        }
        Ok(())
    }
}

fn run_table(run: &ProtocolRun) -> ResultTable {
    let mut t = ResultTable::new(&["slot", "power"]);
    for (k, &q) in run.trajectory.iter().enumerate() {
        t.push(vec![(k + 1).into(), q.into()]);
    }
    t.comment(format!("final_power = {}", run.final_power));
    t.comment(format!("optimal_power = {}", run.optimal_power));
    t
}

fn run_summary(name: &str, run: &ProtocolRun) -> Result<String> {
    Ok(format!(
        "{name}: eta={:.6} final_power={:.6e} optimal_power={:.6e} training_slots={}",
        run.efficiency()?,
        run.final_power,
        run.optimal_power,
        run.training_slots()
    ))
}

fn slots_per_interval(kv: &KeyValues, bits: u32, default: usize) -> Result<usize> {
    let count = 1usize
        .checked_shl(bits)
        .filter(|_| (1..=adapt::MAX_BITS).contains(&bits))
        .ok_or_else(|| Error::Domain(format!("feedback bits must lie in 1..={}", adapt::MAX_BITS)))?;
    match (kv.parsed::<usize>("slots")?, kv.parsed::<usize>("windows")?) {
        (Some(_), Some(_)) => Err(Error::Domain("give either slots or windows, not both".into())),
        (Some(n), None) => Ok(n),
        (None, Some(w)) => Ok(w * count),
        (None, None) => Ok(default),
    }
}

fn run_command(kind: &str, kv: &KeyValues, out: Option<PathBuf>) -> Result<()> {
    check_keys(kv, RUN_KEYS)?;
    let bits = kv.parsed("bits")?.unwrap_or(1);
    let alg: Algorithm = kv.parsed("algorithm")?.unwrap_or(Algorithm::WithMemory);
    let noise = kv.parsed("noise")?.unwrap_or(0.0);
    let default_ets = if kind == "parallel" { 7 } else { 5 };
    let m: usize = kv.parsed("ets")?.unwrap_or(default_ets);
    let scenario = scenario_config(kv, m)?;
    let seed = scenario.seed;
    let mut rng = lab::trial_rng(seed, 0);
    let deployment = lab::draw_scenario(&scenario, &mut rng)?;
    let channels = &deployment.channels;
    let config = scenario.system_config()?;
    let output = Output::new(out, false)?;

    let (table, summary) = match kind {
        "adapt" => {
            let n_t = slots_per_interval(kv, bits, 10)?;
            if m < 3 {
                return Err(Error::Domain("adapt needs at least three ETs".into()));
            }
            let roles = RolePartition::new(m, &[0, 1], &(2..m).collect::<Vec<_>>())?;
            let model = SplitPower::rotating(channels, &roles, &PhaseAssignment::zeros(m), &config)?;
            let windows = adapt::windows_per_interval(n_t, bits)?;
            let meter = |psi: f64| model.power(psi);
            let outcome = if noise > 0.0 {
                adapt::run_interval(bits, windows, alg, adapt::with_gaussian_noise(meter, noise, &mut rng)?)?
            } else {
                adapt::run_interval(bits, windows, alg, meter)?
            };
            let target = model.target_phase()?;
            let err = ebtrain::phasor::circular_distance(outcome.final_phase, target);
            let mut t = ResultTable::new(&["slot", "probe_phase", "power"]);
            for (k, (&psi, &q)) in outcome.probes.iter().zip(&outcome.powers).enumerate() {
                t.push(vec![Value::from(k + 1), psi.into(), q.into()]);
            }
            t.comment(format!("target_phase = {target}"));
            let summary = format!(
                "adapt: final_phase={:.6} target_phase={:.6} error={:.3e} bound={:.3e} power={:.6e} slots={}",
                outcome.final_phase,
                target,
                err,
                adapt::error_bound(alg, n_t, bits)?,
                model.power(outcome.final_phase),
                n_t
            );
            (t, summary)
        }
        "sequential" => {
            let n_t = slots_per_interval(kv, bits, 10)?;
            let plan = SequentialPlan::new(m, n_t, bits, alg)?.with_noise(noise, seed);
            let run = protocols::run_sequential(channels, &plan, &config)?;
            (run_table(&run), run_summary("sequential", &run)?)
        }
        "parallel" => {
            let n_t = slots_per_interval(kv, bits, 10)?;
            let p = kv.parsed("p")?.unwrap_or(0.5);
            let intervals = kv.parsed("intervals")?.unwrap_or(30);
            let plan = ParallelPlan::new(p, intervals, n_t, bits, alg, seed)?.with_noise(noise);
            let run = protocols::run_parallel(channels, &plan, &config)?;
            (run_table(&run), run_summary("parallel", &run)?)
        }
        "rpp" => {
            let slots = kv.parsed("slots")?.unwrap_or(160);
            let delta = kv.parsed("delta")?.unwrap_or(RppPlan::DEFAULT_SCALE);
            let plan = RppPlan::new(slots, delta, seed)?;
            let run = protocols::run_rpp(channels, &plan, &config)?;
            (run_table(&run), run_summary("rpp", &run)?)
        }
        _ => unreachable!("dispatched from known subcommands"),
    };
    output.finish(&table, &summary)
}

fn bounds_command(kv: &KeyValues, out: Option<PathBuf>) -> Result<()> {
    check_keys(kv, BOUNDS_KEYS)?;
    let m: usize = kv.parsed("ets")?.unwrap_or(5);
    let target: f64 = kv.parsed("eta_target")?.unwrap_or(0.99);
    let bits: u32 = kv.parsed("bits")?.unwrap_or(1);
    let alg: Algorithm = kv.parsed("algorithm")?.unwrap_or(Algorithm::NoMemory);
    let equal: bool = kv.parsed("equal_gains")?.unwrap_or(false);
    let gains = if equal {
        vec![1.0; m]
    } else {
        let s = scenario_config(kv, m)?;
        lab::draw_scenario(&s, &mut lab::trial_rng(s.seed, 0))?.gains()
    };
    let raw = bounds::required_slots(&gains, bits, target, alg)?;
    let mut summary = format!(
        "required_slots={raw:.6} rounded={} ets={m} bits={bits} algorithm={alg} eta_target={target}",
        bounds::round_up_slots(raw, bits)?
    );
    let mut t = ResultTable::new(&["ets", "bits", "algorithm", "eta_target", "required_slots"]);
    t.push(vec![m.into(), bits.into(), alg.label().into(), target.into(), raw.into()]);
    if let Some(n_t) = kv.parsed::<usize>("slots")? {
        let lb = bounds::efficiency_lower_bound(&gains, n_t, bits, alg)?;
        summary.push_str(&format!(" lower_bound_at_{n_t}={lb:.6}"));
    }
    Output::new(out, false)?.finish(&t, &summary)
}

fn experiment_command(kv: &KeyValues, out: Option<PathBuf>) -> Result<()> {
    let figure: Figure = kv
        .get("figure")
        .ok_or_else(|| Error::Domain("experiment needs a figure".into()))?
        .parse()?;
    let mut spec = ExperimentSpec::new(figure);
    spec.apply(kv)?;
    let table = lab::run_experiment(&spec)?;
    let summary = format!(
        "experiment {}: trials={} seed={} rows={}",
        spec.figure,
        spec.trials,
        spec.seed(),
        table.rows.len()
    );
    Output::new(out, true)?.finish(&table, &summary)
}

fn run(cli: Cli) -> Result<()> {
    let mut kv = match &cli.config {
        Some(path) => KeyValues::load(path)?,
        None => KeyValues::default(),
    };
    set(&mut kv, "seed", &cli.seed);
    match &cli.command {
        Command::Adapt(a) | Command::Sequential(a) | Command::Parallel(a) | Command::Rpp(a) => {
            set_run_flags(&mut kv, a);
            let kind = match cli.command {
                Command::Adapt(_) => "adapt",
                Command::Sequential(_) => "sequential",
                Command::Parallel(_) => "parallel",
                _ => "rpp",
            };
            run_command(kind, &kv, cli.out)
        }
        Command::Bounds(a) => {
            set(&mut kv, "ets", &a.ets);
            set(&mut kv, "eta_target", &a.eta_target);
            set(&mut kv, "bits", &a.bits);
            set(&mut kv, "algorithm", &a.algorithm);
            set(&mut kv, "slots", &a.slots);
            if a.equal_gains {
                kv.insert("equal_gains", "true");
            }
            bounds_command(&kv, cli.out)
        }
        Command::Experiment(a) => {
            set(&mut kv, "figure", &a.figure);
            set(&mut kv, "trials", &a.trials);
            set(&mut kv, "ets", &a.ets);
            set(&mut kv, "slots", &a.slots);
            set(&mut kv, "bits", &a.bits);
            set(&mut kv, "algorithm", &a.algorithm);
            set(&mut kv, "p", &a.p);
            set(&mut kv, "intervals", &a.intervals);
            set(&mut kv, "delta", &a.delta);
            set(&mut kv, "noise", &a.noise);
            experiment_command(&kv, cli.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
