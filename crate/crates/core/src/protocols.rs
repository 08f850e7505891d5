//! Sequential and parallel training protocols, plus the random phase
//! perturbation and no-adaptation baselines.
//!
//! The protocols play the role of the physical environment: they know the
//! channels and hand the adaptation sessions nothing but a power meter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adapt::{self, Algorithm, IntervalOutcome};
use crate::error::{Error, Result};
use crate::phasor::{
    self, circular_distance, EtRole, LinkChannel, PhaseAssignment, RolePartition, SplitPower,
    SystemConfig,
};

/// Snapshot of one ET during an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtState {
    pub index: usize,
    pub role: EtRole,
    pub current_phase: f64,
}

/// Sequential training: ET 0 is the phase reference and the others align to
/// the growing coherent sum one at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialPlan {
    /// Adaptation order over the ETs `1..M` (0-based indices).
    pub order: Vec<usize>,
    /// Training slots per interval, a multiple of `2^bits`.
    pub slots_per_interval: usize,
    pub bits: u32,
    pub algorithm: Algorithm,
    /// Standard deviation of additive measurement noise in watts; 0 means exact.
    pub noise_std: f64,
    pub noise_seed: u64,
}

impl SequentialPlan {
    /// Plan with the identity order `1, 2, …, M-1`.
    pub fn new(num_ets: usize, slots_per_interval: usize, bits: u32, algorithm: Algorithm) -> Result<Self> {
        let plan = Self {
            order: (1..num_ets).collect(),
            slots_per_interval,
            bits,
            algorithm,
            noise_std: 0.0,
            noise_seed: 0,
        };
        plan.validate(num_ets)?;
        Ok(plan)
    }

    pub fn with_order(mut self, order: Vec<usize>) -> Result<Self> {
        let num_ets = order.len() + 1;
        self.order = order;
        self.validate(num_ets)?;
        Ok(self)
    }

    pub fn with_noise(mut self, std_dev: f64, seed: u64) -> Self {
        self.noise_std = std_dev;
        self.noise_seed = seed;
        self
    }

    pub fn windows(&self) -> Result<usize> {
        adapt::windows_per_interval(self.slots_per_interval, self.bits)
    }

    /// Total training slots, `N_t (M-1)`.
    pub fn total_slots(&self) -> usize {
        self.slots_per_interval * self.order.len()
    }

    pub fn validate(&self, num_ets: usize) -> Result<()> {
        if num_ets < 2 {
            return Err(Error::domain("sequential training needs at least two ETs"));
        }
        let mut sorted = self.order.clone();
        sorted.sort_unstable();
        if sorted != (1..num_ets).collect::<Vec<_>>() {
            return Err(Error::domain(format!(
                "order {:?} is not a permutation of ETs 1..{}",
                self.order,
                num_ets - 1
            )));
        }
        self.windows()?;
        check_noise(self.noise_std)
    }
}

/// Parallel training: every interval each ET adapts with probability `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelPlan {
    pub adapt_prob: f64,
    pub num_intervals: usize,
    pub slots_per_interval: usize,
    pub bits: u32,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub noise_std: f64,
}

impl ParallelPlan {
    pub fn new(
        adapt_prob: f64,
        num_intervals: usize,
        slots_per_interval: usize,
        bits: u32,
        algorithm: Algorithm,
        seed: u64,
    ) -> Result<Self> {
        let plan = Self {
            adapt_prob,
            num_intervals,
            slots_per_interval,
            bits,
            algorithm,
            seed,
            noise_std: 0.0,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_noise(mut self, std_dev: f64) -> Self {
        self.noise_std = std_dev;
        self
    }

    pub fn windows(&self) -> Result<usize> {
        adapt::windows_per_interval(self.slots_per_interval, self.bits)
    }

    pub fn total_slots(&self) -> usize {
        self.slots_per_interval * self.num_intervals
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.adapt_prob > 0.0 && self.adapt_prob < 1.0) {
            return Err(Error::domain(format!(
                "adaptation probability must lie in (0, 1), got {}",
                self.adapt_prob
            )));
        }
        if self.num_intervals == 0 {
            return Err(Error::domain("parallel training needs at least one interval"));
        }
        self.windows()?;
        check_noise(self.noise_std)
    }
}

/// Random phase perturbation baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct RppPlan {
    pub num_slots: usize,
    /// Each ET perturbs its phase uniformly in `[-δ, δ]` every slot.
    pub perturb_scale: f64,
    pub seed: u64,
}

impl RppPlan {
    pub const DEFAULT_SCALE: f64 = std::f64::consts::PI / 8.0;

    pub fn new(num_slots: usize, perturb_scale: f64, seed: u64) -> Result<Self> {
        if num_slots == 0 {
            return Err(Error::domain("RPP needs at least one slot"));
        }
        if !(perturb_scale >= 0.0 && perturb_scale.is_finite()) {
            return Err(Error::domain(format!(
                "perturbation scale must be non-negative, got {perturb_scale}"
            )));
        }
        Ok(Self {
            num_slots,
            perturb_scale,
            seed,
        })
    }
}

fn check_noise(std_dev: f64) -> Result<()> {
    if std_dev >= 0.0 && std_dev.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("noise std must be non-negative, got {std_dev}")))
    }
}

/// One phase adaptation interval as it played out.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub roles: RolePartition,
    /// False when nobody or everybody adapted and phases were left alone.
    pub effective: bool,
    /// Common rotation the adapting ETs applied.
    pub rotation: Option<f64>,
    /// Optimal rotation, when it is well defined.
    pub target: Option<f64>,
    /// Circular distance between `rotation` and `target`.
    pub error: Option<f64>,
    /// Harvested power with all ETs on, before and after the interval.
    pub power_before: f64,
    pub power_after: f64,
}

impl IntervalRecord {
    pub fn et_states(&self, phases: &PhaseAssignment) -> Vec<EtState> {
        (0..self.roles.num_ets())
            .map(|index| EtState {
                index,
                role: self.roles.role_of(index),
                current_phase: phases.get(index),
            })
            .collect()
    }
}

/// Full record of a protocol execution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub final_phases: PhaseAssignment,
    /// Power at the ER in every training slot.
    pub trajectory: Vec<f64>,
    pub intervals: Vec<IntervalRecord>,
    /// Power once training is over and every ET transmits its final phase.
    pub final_power: f64,
    pub optimal_power: f64,
}

impl ProtocolRun {
    pub fn efficiency(&self) -> Result<f64> {
        phasor::efficiency(self.final_power, self.optimal_power)
    }

    pub fn training_slots(&self) -> usize {
        self.trajectory.len()
    }

    /// Power at `slot`, extending the run with energy transmission at the
    /// final phases once training is over.
    pub fn power_at_slot(&self, slot: usize) -> f64 {
        self.trajectory.get(slot).copied().unwrap_or(self.final_power)
    }
}

fn check_channels(channels: &[LinkChannel]) -> Result<()> {
    if channels.len() < 2 {
        return Err(Error::domain(format!(
            "a protocol needs at least two ETs, got {}",
            channels.len()
        )));
    }
    Ok(())
}

fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Run one interval against the true split-power model.
fn adapt_rotation(
    model: &SplitPower,
    bits: u32,
    windows: usize,
    algorithm: Algorithm,
    noise: Option<(f64, &mut ChaCha8Rng)>,
) -> Result<IntervalOutcome> {
    let meter = |psi: f64| model.power(psi);
    match noise {
        Some((std_dev, rng)) if std_dev > 0.0 => adapt::run_interval(
            bits,
            windows,
            algorithm,
            adapt::with_gaussian_noise(meter, std_dev, rng)?,
        ),
        _ => adapt::run_interval(bits, windows, algorithm, meter),
    }
}

/// Align ETs one at a time to the sum signal of the ETs already trained.
pub fn run_sequential(
    channels: &[LinkChannel],
    plan: &SequentialPlan,
    config: &SystemConfig,
) -> Result<ProtocolRun> {
    check_channels(channels)?;
    let m = channels.len();
    plan.validate(m)?;
    let windows = plan.windows()?;
    let mut rng = noise_rng(plan.noise_seed, 0);

    let mut phases = PhaseAssignment::zeros(m);
    let mut trajectory = Vec::with_capacity(plan.total_slots());
    let mut intervals = Vec::with_capacity(plan.order.len());
    let mut aligned = vec![0usize];

    for &et in &plan.order {
        let roles = RolePartition::new(m, &[et], &aligned)?;
        let model = SplitPower::rotating(channels, &roles, &phases, config)?;
        let power_before = model.power(0.0);
        let out = adapt_rotation(
            &model,
            plan.bits,
            windows,
            plan.algorithm,
            Some((plan.noise_std, &mut rng)),
        )?;
        trajectory.extend_from_slice(&out.powers);

        let target = model.target_phase().ok();
        phases.set(et, phases.get(et) + out.final_phase);
        intervals.push(IntervalRecord {
            roles,
            effective: true,
            rotation: Some(out.final_phase),
            target,
            error: target.map(|t| circular_distance(out.final_phase, t)),
            power_before,
            power_after: model.power(out.final_phase),
        });
        aligned.push(et);
    }

    finish(channels, phases, trajectory, intervals, config)
}

/// Random subsets of ETs rotate together to match the rest.
///
/// Adapting ETs apply the interval's common rotation on top of their current
/// phases, so an adapting group keeps its internal alignment.
pub fn run_parallel(
    channels: &[LinkChannel],
    plan: &ParallelPlan,
    config: &SystemConfig,
) -> Result<ProtocolRun> {
    check_channels(channels)?;
    plan.validate()?;
    let m = channels.len();
    let windows = plan.windows()?;
    let mut coin = noise_rng(plan.seed, 0);
    let mut noise = noise_rng(plan.seed, 1);

    let mut phases = PhaseAssignment::zeros(m);
    let mut trajectory = Vec::with_capacity(plan.total_slots());
    let mut intervals = Vec::with_capacity(plan.num_intervals);

    for _ in 0..plan.num_intervals {
        let flips: Vec<bool> = (0..m).map(|_| coin.random_bool(plan.adapt_prob)).collect();
        let adapting: Vec<usize> = (0..m).filter(|&i| flips[i]).collect();
        let fixed: Vec<usize> = (0..m).filter(|&i| !flips[i]).collect();
        let roles = RolePartition::new(m, &adapting, &fixed)?;
        let power_before = phasor::harvested_power(channels, &phases, config)?;

        if adapting.is_empty() || fixed.is_empty() {
            trajectory.extend(std::iter::repeat_n(power_before, plan.slots_per_interval));
            intervals.push(IntervalRecord {
                roles,
                effective: false,
                rotation: None,
                target: None,
                error: None,
                power_before,
                power_after: power_before,
            });
            continue;
        }

        let model = SplitPower::rotating(channels, &roles, &phases, config)?;
        let out = adapt_rotation(
            &model,
            plan.bits,
            windows,
            plan.algorithm,
            Some((plan.noise_std, &mut noise)),
        )?;
        trajectory.extend_from_slice(&out.powers);
        for &et in &adapting {
            phases.set(et, phases.get(et) + out.final_phase);
        }
        let target = model.target_phase().ok();
        intervals.push(IntervalRecord {
            roles,
            effective: true,
            rotation: Some(out.final_phase),
            target,
            error: target.map(|t| circular_distance(out.final_phase, t)),
            power_before,
            power_after: model.power(out.final_phase),
        });
    }

    finish(channels, phases, trajectory, intervals, config)
}

/// Every slot all ETs perturb their best-known phases at random; the ER's
/// one-bit feedback says whether the result beats the best power so far.
pub fn run_rpp(channels: &[LinkChannel], plan: &RppPlan, config: &SystemConfig) -> Result<ProtocolRun> {
    check_channels(channels)?;
    let m = channels.len();
    let mut rng = noise_rng(plan.seed, 0);
    let delta = plan.perturb_scale;

    let mut best_phases = PhaseAssignment::zeros(m);
    let mut best_power = phasor::harvested_power(channels, &best_phases, config)?;
    let mut trajectory = Vec::with_capacity(plan.num_slots);

    for _ in 0..plan.num_slots {
        let trial = PhaseAssignment::new(
            best_phases
                .as_slice()
                .iter()
                .map(|&phi| {
                    if delta > 0.0 {
                        phi + rng.random_range(-delta..=delta)
                    } else {
                        phi
                    }
                })
                .collect(),
        );
        let q = phasor::harvested_power(channels, &trial, config)?;
        trajectory.push(q);
        if q > best_power {
            best_power = q;
            best_phases = trial;
        }
    }

    finish(channels, best_phases, trajectory, Vec::new(), config)
}

/// Harvested power when every ET simply transmits phase zero.
pub fn run_no_adaptation(channels: &[LinkChannel], config: &SystemConfig) -> Result<f64> {
    phasor::harvested_power(channels, &PhaseAssignment::zeros(channels.len()), config)
}

fn finish(
    channels: &[LinkChannel],
    final_phases: PhaseAssignment,
    trajectory: Vec<f64>,
    intervals: Vec<IntervalRecord>,
    config: &SystemConfig,
) -> Result<ProtocolRun> {
    let final_power = phasor::harvested_power(channels, &final_phases, config)?;
    let optimal_power = phasor::optimal_power(channels, config)?;
    Ok(ProtocolRun {
        final_phases,
        trajectory,
        intervals,
        final_power,
        optimal_power,
    })
}
