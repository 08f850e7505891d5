use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::adapt::{self, Algorithm};
use crate::bounds;
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::lab::export::ResultTable;
use crate::lab::scenario::{draw_scenario, trial_rng, Scenario, ScenarioConfig};
use crate::phasor::{self, circular_distance, FixedPhases, RolePartition, SplitPower, SystemConfig};
use crate::protocols::{self, ParallelPlan, RppPlan, SequentialPlan};

/// Experiments reproducible by [`run_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    /// Normalized phase error of one interval versus training slots.
    PhaseError,
    /// Sequential-training efficiency and its lower bound versus training slots.
    SeqEfficiency,
    /// Harvested power versus the number of ETs.
    EbGainVsM,
    /// Average power versus total slots with the weakest ETs switched off.
    TradeOff,
    /// Parallel training for several adaptation probabilities.
    Coin,
    /// Sequential versus parallel versus random phase perturbation.
    Comparison,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Figure::PhaseError,
        Figure::SeqEfficiency,
        Figure::EbGainVsM,
        Figure::TradeOff,
        Figure::Coin,
        Figure::Comparison,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Figure::PhaseError => "phase-error",
            Figure::SeqEfficiency => "seq-efficiency",
            Figure::EbGainVsM => "eb-gain",
            Figure::TradeOff => "tradeoff",
            Figure::Coin => "coin",
            Figure::Comparison => "comparison",
        }
    }

    /// Desk-scale trial count.
    pub fn default_trials(self) -> usize {
        match self {
            Figure::PhaseError => 1000,
            Figure::SeqEfficiency => 500,
            Figure::EbGainVsM => 1,
            Figure::TradeOff => 2000,
            Figure::Coin => 2000,
            Figure::Comparison => 1,
        }
    }

    /// Trial count used for the published curves.
    pub fn full_scale_trials(self) -> usize {
        match self {
            Figure::SeqEfficiency => 5000,
            Figure::TradeOff | Figure::Coin => 50_000,
            other => other.default_trials(),
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "phase-error" | "phase_error" | "f8" | "fig8" => Figure::PhaseError,
            "seq-efficiency" | "seq_efficiency" | "efficiency" | "f9" | "fig9" => Figure::SeqEfficiency,
            "eb-gain" | "eb_gain" | "eb-gain-vs-m" | "f10" | "fig10" => Figure::EbGainVsM,
            "tradeoff" | "trade-off" | "overhead" => Figure::TradeOff,
            "coin" | "p-sweep" | "parallel" => Figure::Coin,
            "comparison" | "compare" => Figure::Comparison,
            _ => return Err(Error::UnknownExperiment(s.to_owned())),
        })
    }
}

/// Per-experiment parameter overrides. `None` keeps the experiment default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub ets: Option<Vec<usize>>,
    pub slots: Option<Vec<usize>>,
    pub bits: Option<Vec<u32>>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub p_values: Option<Vec<f64>>,
    pub intervals: Option<usize>,
    /// Total slot counts for the trade-off curves.
    pub budgets: Option<Vec<usize>>,
    pub rpp_scale: Option<f64>,
    pub noise_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub figure: Figure,
    pub trials: usize,
    /// Deployment model; `scenario.seed` is the master seed.
    pub scenario: ScenarioConfig,
    pub overrides: Overrides,
}

/// Keys accepted by [`ExperimentSpec::apply`].
pub const CONFIG_KEYS: &[&str] = &[
    "figure",
    "trials",
    "seed",
    "ets",
    "slots",
    "bits",
    "algorithm",
    "p",
    "intervals",
    "budgets",
    "delta",
    "noise",
    "ref_atten_db",
    "ref_dist",
    "pathloss_exp",
    "dist_min",
    "dist_max",
    "paths_per_link",
    "tx_power",
];

impl ExperimentSpec {
    pub fn new(figure: Figure) -> Self {
        Self {
            figure,
            trials: figure.default_trials(),
            scenario: ScenarioConfig::default(),
            overrides: Overrides::default(),
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.seed = seed;
        self
    }

    pub fn seed(&self) -> u64 {
        self.scenario.seed
    }

    /// Apply `key = value` overrides on top of the current values.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        kv.reject_unknown(CONFIG_KEYS)?;
        if let Some(f) = kv.get("figure") {
            self.figure = f.parse()?;
        }
        if let Some(v) = kv.parsed("trials")? {
            self.trials = v;
        }
        if let Some(v) = kv.parsed("seed")? {
            self.scenario.seed = v;
        }
        let o = &mut self.overrides;
        o.ets = kv.list("ets")?.or(o.ets.take());
        o.slots = kv.list("slots")?.or(o.slots.take());
        o.bits = kv.list("bits")?.or(o.bits.take());
        o.algorithms = kv.list("algorithm")?.or(o.algorithms.take());
        o.p_values = kv.list("p")?.or(o.p_values.take());
        o.intervals = kv.parsed("intervals")?.or(o.intervals);
        o.budgets = kv.list("budgets")?.or(o.budgets.take());
        o.rpp_scale = kv.parsed("delta")?.or(o.rpp_scale);
        o.noise_std = kv.parsed("noise")?.or(o.noise_std);
        let s = &mut self.scenario;
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
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::domain("an experiment needs at least one trial"));
        }
        self.scenario.with_ets(2).validate()?;
        let o = &self.overrides;
        for (name, empty) in [
            ("ets", o.ets.as_ref().is_some_and(Vec::is_empty)),
            ("slots", o.slots.as_ref().is_some_and(Vec::is_empty)),
            ("bits", o.bits.as_ref().is_some_and(Vec::is_empty)),
            ("algorithm", o.algorithms.as_ref().is_some_and(Vec::is_empty)),
            ("p", o.p_values.as_ref().is_some_and(Vec::is_empty)),
            ("budgets", o.budgets.as_ref().is_some_and(Vec::is_empty)),
        ] {
            if empty {
                return Err(Error::domain(format!("override '{name}' has no values")));
            }
        }
        if let Some(ets) = &o.ets {
            if let Some(m) = ets.iter().find(|&&m| m < 2) {
                return Err(Error::domain(format!("experiments need at least two ETs, got {m}")));
            }
        }
        if let Some(b) = o.bits.iter().flatten().find(|&&b| b == 0 || b > adapt::MAX_BITS) {
            return Err(Error::domain(format!("feedback bits must lie in 1..={}, got {b}", adapt::MAX_BITS)));
        }
        if let Some(p) = o.p_values.iter().flatten().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::domain(format!("adaptation probability must lie in (0, 1), got {p}")));
        }
        if o.intervals == Some(0) {
            return Err(Error::domain("at least one interval is required"));
        }
        if let Some(d) = o.rpp_scale.filter(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::domain(format!("perturbation scale must be non-negative, got {d}")));
        }
        if let Some(n) = o.noise_std.filter(|n| !(*n >= 0.0 && n.is_finite())) {
            return Err(Error::domain(format!("noise std must be non-negative, got {n}")));
        }
        Ok(())
    }

    fn ets_or(&self, default: &[usize]) -> Vec<usize> {
        self.overrides.ets.clone().unwrap_or_else(|| default.to_vec())
    }

    fn slots_or(&self, default: &[usize]) -> Vec<usize> {
        self.overrides.slots.clone().unwrap_or_else(|| default.to_vec())
    }

    fn bits_or(&self, default: &[u32]) -> Vec<u32> {
        self.overrides.bits.clone().unwrap_or_else(|| default.to_vec())
    }

    fn algorithms_or(&self, default: &[Algorithm]) -> Vec<Algorithm> {
        self.overrides.algorithms.clone().unwrap_or_else(|| default.to_vec())
    }

    fn noise(&self) -> f64 {
        self.overrides.noise_std.unwrap_or(0.0)
    }

    fn echo(&self, table: &mut ResultTable) {
        let s = &self.scenario;
        table.comment(format!("figure = {}", self.figure));
        table.comment(format!("seed = {}", s.seed));
        table.comment(format!("trials = {}", self.trials));
        table.comment(format!(
            "ref_atten_db = {}, ref_dist = {}, pathloss_exp = {}, dist_range = [{}, {}], paths_per_link = {}, tx_power = {}",
            s.ref_atten_db, s.ref_dist, s.pathloss_exp, s.dist_range.0, s.dist_range.1, s.paths_per_link, s.tx_power
        ));
        if self.noise() > 0.0 {
            table.comment(format!("noise = {}", self.noise()));
        }
    }
}

/// One Monte Carlo trial: the deployment drawn and the metrics it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub distances: Vec<f64>,
    pub phase_shifts: Vec<f64>,
    pub metrics: Vec<(String, f64)>,
}

impl TrialRecord {
    fn new(trial_id: u64, scenario: &Scenario) -> Self {
        Self {
            trial_id,
            distances: scenario.distances.clone(),
            phase_shifts: scenario.phase_shifts(),
            metrics: Vec::new(),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }
}

/// Metric key used for sequential-training efficiencies.
pub fn efficiency_key(m: usize, algorithm: Algorithm, n_t: usize) -> String {
    format!("eta/m{m}/{algorithm}/nt{n_t}")
}

/// Metric key used for the matching lower bounds.
pub fn lower_bound_key(m: usize, algorithm: Algorithm, n_t: usize) -> String {
    format!("lb/m{m}/{algorithm}/nt{n_t}")
}

/// Run `f` for every trial on the rayon pool, keeping trial order.
fn run_trials<T: Send>(trials: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..trials as u64).into_par_iter().map(f).collect()
}

/// Per-trial stream: the deployment comes first, then a seed for protocol randomness.
fn trial_setup(spec: &ExperimentSpec, num_ets: usize, trial: u64) -> Result<(Scenario, ChaCha8Rng)> {
    let mut rng = trial_rng(spec.seed(), trial);
    let scenario = draw_scenario(&spec.scenario.with_ets(num_ets), &mut rng)?;
    Ok((scenario, rng))
}

fn system(spec: &ExperimentSpec, num_ets: usize) -> Result<SystemConfig> {
    spec.scenario.with_ets(num_ets).system_config()
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Execute `spec` and collect its summary table.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let mut table = match spec.figure {
        Figure::PhaseError => phase_error(spec)?,
        Figure::SeqEfficiency => seq_efficiency(spec)?,
        Figure::EbGainVsM => eb_gain(spec)?,
        Figure::TradeOff => tradeoff(spec)?,
        Figure::Coin => coin(spec)?,
        Figure::Comparison => comparison(spec)?,
    };
    let mut comments = Vec::new();
    std::mem::swap(&mut comments, &mut table.comments);
    spec.echo(&mut table);
    table.comments.extend(comments);
    Ok(table)
}

fn phase_error(spec: &ExperimentSpec) -> Result<ResultTable> {
    let m = spec.ets_or(&[5])[0];
    let bits = spec.bits_or(&[1, 2, 3]);
    let algs = spec.algorithms_or(&Algorithm::ALL);
    let slots = spec.slots_or(&[8, 16, 24, 32, 40]);
    let noise = spec.noise();
    let mut combos: Vec<(Algorithm, u32, usize)> = Vec::new();
    for &a in &algs {
        for &b in &bits {
            for &n in &slots {
                if adapt::windows_per_interval(n, b).is_ok() {
                    combos.push((a, b, n));
                }
            }
        }
    }
    if combos.is_empty() {
        return Err(Error::domain("no slot count is a multiple of 2^bits"));
    }
    // first two ETs adapt, the rest hold phase zero
    let adapting: Vec<usize> = (0..m.min(3) - 1).collect();
    let fixed: Vec<usize> = (adapting.len()..m).collect();
    let config = system(spec, m)?;

    let per_trial = run_trials(spec.trials, |t| {
        let (scenario, mut rng) = trial_setup(spec, m, t)?;
        let roles = RolePartition::new(m, &adapting, &fixed)?;
        let fixed_phases: FixedPhases = fixed.iter().map(|&i| (i, 0.0)).collect();
        let model = SplitPower::new(&scenario.channels, &roles, &fixed_phases, &config)?;
        let Ok(target) = model.target_phase() else {
            return Ok(None);
        };
        combos
            .iter()
            .map(|&(alg, b, n_t)| {
                let windows = adapt::windows_per_interval(n_t, b)?;
                let meter = |psi: f64| model.power(psi);
                let out = if noise > 0.0 {
                    adapt::run_interval(b, windows, alg, adapt::with_gaussian_noise(meter, noise, &mut rng)?)?
                } else {
                    adapt::run_interval(b, windows, alg, meter)?
                };
                Ok(circular_distance(out.final_phase, target) / (2.0 * PI))
            })
            .collect::<Result<Vec<f64>>>()
            .map(Some)
    })?;
    let used: Vec<&Vec<f64>> = per_trial.iter().flatten().collect();

    let mut table = ResultTable::new(&[
        "n_t",
        "bits",
        "algorithm",
        "mean_norm_error",
        "max_norm_error",
        "bound_norm_error",
    ]);
    for (k, &(alg, b, n_t)) in combos.iter().enumerate() {
        let errs = used.iter().map(|e| e[k]);
        table.push(vec![
            n_t.into(),
            b.into(),
            alg.label().into(),
            mean(errs.clone()).into(),
            errs.fold(0.0, f64::max).into(),
            (adapt::error_bound(alg, n_t, b)? / (2.0 * PI)).into(),
        ]);
    }
    table.comment(format!("ets = {m}, adapting = {:?}, fixed phase = 0", adapting));
    table.comment(format!("usable trials = {}", used.len()));
    Ok(table)
}

/// Per-trial sequential-training efficiencies and bounds behind the efficiency table.
pub fn seq_efficiency_trials(spec: &ExperimentSpec) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let ets = spec.ets_or(&[5, 10]);
    let slots = spec.slots_or(&[4, 8, 12, 16, 20]);
    let algs = spec.algorithms_or(&Algorithm::ALL);
    let bits = spec.bits_or(&[1])[0];
    let noise = spec.noise();
    let max_m = *ets.iter().max().expect("validated non-empty");

    run_trials(spec.trials, |t| {
        let (full, mut rng) = trial_setup(spec, max_m, t)?;
        let noise_seed: u64 = rng.random();
        let mut record = TrialRecord::new(t, &full);
        for &m in &ets {
            let scenario = full.prefix(m);
            let config = system(spec, m)?;
            let gains = scenario.gains();
            for &alg in &algs {
                for &n_t in &slots {
                    let plan = SequentialPlan::new(m, n_t, bits, alg)?.with_noise(noise, noise_seed);
                    let run = protocols::run_sequential(&scenario.channels, &plan, &config)?;
                    record.metrics.push((efficiency_key(m, alg, n_t), run.efficiency()?));
                    record.metrics.push((
                        lower_bound_key(m, alg, n_t),
                        bounds::efficiency_lower_bound(&gains, n_t, bits, alg)?,
                    ));
                }
            }
        }
        Ok(record)
    })
}

fn seq_efficiency(spec: &ExperimentSpec) -> Result<ResultTable> {
    let records = seq_efficiency_trials(spec)?;
    let mut table = ResultTable::new(&["n_t", "m", "algorithm", "mean_eta", "lower_bound"]);
    for m in spec.ets_or(&[5, 10]) {
        for alg in spec.algorithms_or(&Algorithm::ALL) {
            for n_t in spec.slots_or(&[4, 8, 12, 16, 20]) {
                let (ek, lk) = (efficiency_key(m, alg, n_t), lower_bound_key(m, alg, n_t));
                let eta = mean(records.iter().map(|r| r.metric(&ek).expect("metric recorded")));
                let lb = mean(records.iter().map(|r| r.metric(&lk).expect("metric recorded")));
                table.push(vec![n_t.into(), m.into(), alg.label().into(), eta.into(), lb.into()]);
            }
        }
    }
    table.comment(format!("bits = {}", spec.bits_or(&[1])[0]));
    Ok(table)
}

fn eb_gain(spec: &ExperimentSpec) -> Result<ResultTable> {
    let ets = spec.ets_or(&(2..=10).collect::<Vec<_>>());
    let slots = spec.slots_or(&[4, 8, 16]);
    let alg = spec.algorithms_or(&[Algorithm::WithMemory])[0];
    let bits = spec.bits_or(&[1])[0];
    let noise = spec.noise();
    let max_m = *ets.iter().max().expect("validated non-empty");
    let schemes: Vec<String> = slots
        .iter()
        .map(|n| format!("sequential-nt{n}"))
        .chain(["no-adaptation".to_owned(), "optimal".to_owned()])
        .collect();

    // per trial: [m][scheme] power
    let per_trial = run_trials(spec.trials, |t| {
        let (full, mut rng) = trial_setup(spec, max_m, t)?;
        let noise_seed: u64 = rng.random();
        ets.iter()
            .map(|&m| {
                let s = full.prefix(m);
                let config = system(spec, m)?;
                let mut row = Vec::with_capacity(schemes.len());
                for &n_t in &slots {
                    let plan = SequentialPlan::new(m, n_t, bits, alg)?.with_noise(noise, noise_seed);
                    row.push(protocols::run_sequential(&s.channels, &plan, &config)?.final_power);
                }
                row.push(protocols::run_no_adaptation(&s.channels, &config)?);
                row.push(phasor::optimal_power(&s.channels, &config)?);
                Ok(row)
            })
            .collect::<Result<Vec<Vec<f64>>>>()
    })?;

    let mut table = ResultTable::new(&["m", "scheme", "mean_power"]);
    for (i, &m) in ets.iter().enumerate() {
        for (k, scheme) in schemes.iter().enumerate() {
            let p = mean(per_trial.iter().map(|tr| tr[i][k]));
            table.push(vec![m.into(), scheme.as_str().into(), p.into()]);
        }
    }
    table.comment(format!("algorithm = {alg}, bits = {bits}"));
    Ok(table)
}

/// Mean power over the first `budget` slots: the training trajectory followed
/// by energy transmission at the final power.
fn average_power(trajectory: &[f64], final_power: f64, budget: usize) -> f64 {
    let train = trajectory.len().min(budget);
    let sum: f64 = trajectory[..train].iter().sum::<f64>() + (budget - train) as f64 * final_power;
    sum / budget as f64
}

fn tradeoff(spec: &ExperimentSpec) -> Result<ResultTable> {
    let m = spec.ets_or(&[5])[0];
    let n_t = spec.slots_or(&[10])[0];
    let alg = spec.algorithms_or(&[Algorithm::WithMemory])[0];
    let bits = spec.bits_or(&[1])[0];
    let noise = spec.noise();
    let budgets = spec
        .overrides
        .budgets
        .clone()
        .unwrap_or_else(|| (1..=20).map(|k| 20 * k).collect());
    if budgets.contains(&0) {
        return Err(Error::domain("slot budgets must be positive"));
    }
    let on_counts: Vec<usize> = (2..=m).rev().take(3).collect();
    let mut schemes: Vec<String> = on_counts.iter().map(|k| format!("sequential-on{k}")).collect();
    schemes.push("no-adaptation".into());
    schemes.push("optimal".into());

    let per_trial = run_trials(spec.trials, |t| {
        let (drawn, mut rng) = trial_setup(spec, m, t)?;
        let noise_seed: u64 = rng.random();
        let sorted = drawn.sorted_by_gain();
        let mut curves = Vec::with_capacity(schemes.len());
        for &k in &on_counts {
            let s = sorted.prefix(k);
            let config = system(spec, k)?;
            let plan = SequentialPlan::new(k, n_t, bits, alg)?.with_noise(noise, noise_seed);
            let run = protocols::run_sequential(&s.channels, &plan, &config)?;
            curves.push(
                budgets
                    .iter()
                    .map(|&b| average_power(&run.trajectory, run.final_power, b))
                    .collect::<Vec<f64>>(),
            );
        }
        let config = system(spec, m)?;
        let none = protocols::run_no_adaptation(&sorted.channels, &config)?;
        let best = phasor::optimal_power(&sorted.channels, &config)?;
        curves.push(vec![none; budgets.len()]);
        curves.push(vec![best; budgets.len()]);
        Ok(curves)
    })?;

    let mut table = ResultTable::new(&["total_slots", "scheme", "mean_power"]);
    for (j, &b) in budgets.iter().enumerate() {
        for (k, scheme) in schemes.iter().enumerate() {
            let p = mean(per_trial.iter().map(|c| c[k][j]));
            table.push(vec![b.into(), scheme.as_str().into(), p.into()]);
        }
    }
    table.comment(format!("ets = {m}, slots per interval = {n_t}, algorithm = {alg}, bits = {bits}"));
    Ok(table)
}

fn coin(spec: &ExperimentSpec) -> Result<ResultTable> {
    let m = spec.ets_or(&[7])[0];
    let n_t = spec.slots_or(&[10])[0];
    let alg = spec.algorithms_or(&[Algorithm::WithMemory])[0];
    let bits = spec.bits_or(&[1])[0];
    let noise = spec.noise();
    let ps = spec.overrides.p_values.clone().unwrap_or_else(|| vec![0.1, 0.3, 0.5, 0.7, 0.9]);
    let intervals = spec.overrides.intervals.unwrap_or(30);

    // per trial: [p][interval 0..=N] (power, efficiency)
    let per_trial = run_trials(spec.trials, |t| {
        let (s, mut rng) = trial_setup(spec, m, t)?;
        let coin_seed: u64 = rng.random();
        let config = system(spec, m)?;
        ps.iter()
            .map(|&p| {
                let plan = ParallelPlan::new(p, intervals, n_t, bits, alg, coin_seed)?.with_noise(noise);
                let run = protocols::run_parallel(&s.channels, &plan, &config)?;
                let q = run.optimal_power;
                let mut curve = vec![(run.intervals[0].power_before, q)];
                curve.extend(run.intervals.iter().map(|r| (r.power_after, q)));
                Ok(curve)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut table = ResultTable::new(&["p", "interval", "slots", "mean_power", "mean_optimal", "mean_eta"]);
    for (i, &p) in ps.iter().enumerate() {
        for n in 0..=intervals {
            let power = mean(per_trial.iter().map(|c| c[i][n].0));
            let optimal = mean(per_trial.iter().map(|c| c[i][n].1));
            let eta = mean(per_trial.iter().map(|c| c[i][n].0 / c[i][n].1));
            table.push(vec![p.into(), n.into(), (n * n_t).into(), power.into(), optimal.into(), eta.into()]);
        }
    }
    table.comment(format!("ets = {m}, slots per interval = {n_t}, algorithm = {alg}, bits = {bits}"));
    Ok(table)
}

/// Slot budget used by the comparison experiment: four sequential passes.
pub fn comparison_budget(num_ets: usize, n_t: usize) -> usize {
    4 * n_t * (num_ets - 1)
}

fn comparison(spec: &ExperimentSpec) -> Result<ResultTable> {
    let ets = spec.ets_or(&[5, 10]);
    let n_t = spec.slots_or(&[10])[0];
    let alg = spec.algorithms_or(&[Algorithm::WithMemory])[0];
    let bits = spec.bits_or(&[1])[0];
    let p = spec.overrides.p_values.as_ref().map_or(0.5, |v| v[0]);
    let delta = spec.overrides.rpp_scale.unwrap_or(RppPlan::DEFAULT_SCALE);
    let noise = spec.noise();
    let max_m = *ets.iter().max().expect("validated non-empty");
    const SCHEMES: [&str; 4] = ["sequential", "parallel", "rpp", "optimal"];

    // per trial: [m][scheme][slot]
    let per_trial = run_trials(spec.trials, |t| {
        let (full, mut rng) = trial_setup(spec, max_m, t)?;
        let proto_seed: u64 = rng.random();
        ets.iter()
            .map(|&m| {
                let s = full.prefix(m);
                let config = system(spec, m)?;
                let budget = comparison_budget(m, n_t);
                let seq = SequentialPlan::new(m, n_t, bits, alg)?.with_noise(noise, proto_seed);
                let par = ParallelPlan::new(p, budget / n_t, n_t, bits, alg, proto_seed)?.with_noise(noise);
                let rpp = RppPlan::new(budget, delta, proto_seed)?;
                let runs = [
                    protocols::run_sequential(&s.channels, &seq, &config)?,
                    protocols::run_parallel(&s.channels, &par, &config)?,
                    protocols::run_rpp(&s.channels, &rpp, &config)?,
                ];
                let mut curves: Vec<Vec<f64>> = runs
                    .iter()
                    .map(|r| (0..budget).map(|k| r.power_at_slot(k)).collect())
                    .collect();
                curves.push(vec![phasor::optimal_power(&s.channels, &config)?; budget]);
                Ok(curves)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut table = ResultTable::new(&["m", "slot", "scheme", "mean_power"]);
    for (i, &m) in ets.iter().enumerate() {
        for slot in 0..comparison_budget(m, n_t) {
            for (k, scheme) in SCHEMES.iter().enumerate() {
                let q = mean(per_trial.iter().map(|c| c[i][k][slot]));
                table.push(vec![m.into(), (slot + 1).into(), (*scheme).into(), q.into()]);
            }
        }
    }
    table.comment(format!(
        "slots per interval = {n_t}, algorithm = {alg}, bits = {bits}, p = {p}, delta = {delta}"
    ));
    Ok(table)
}
