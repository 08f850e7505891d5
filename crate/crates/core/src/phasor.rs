//! Signal and power algebra for a single-carrier distributed transmitter array.
//!
//! Every ET sends an unmodulated carrier; after propagation each link reduces
//! to a power gain `β` and a phase shift `θ`, so the received signal is the sum
//! of phasors `√β · e^{j(φ − θ)}`. The average harvested power is `ρP` times the
//! squared magnitude of that sum. All phase arithmetic goes through complex
//! phasors and [`canonicalize`], never through single-argument arctangents.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance used for power comparisons across the crate.
pub const POWER_RTOL: f64 = 1e-9;

/// Slack allowed when checking `q_d ≤ q_star` in [`efficiency`].
pub const EFFICIENCY_SLACK: f64 = 1e-12;

/// Phasor magnitudes below this fraction of the summed amplitudes count as zero.
const NULL_PHASOR_RTOL: f64 = 1e-12;

/// Map any finite angle into `[-π, π)`.
///
/// Values already in range are returned unchanged, which makes the map
/// idempotent bit for bit.
pub fn canonicalize(phase: f64) -> f64 {
    if (-PI..PI).contains(&phase) {
        return phase;
    }
    let r = (phase + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// Circular distance between two angles, in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    canonicalize(a - b).abs()
}

/// One propagation path between an ET and the ER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub attenuation: f64,
    pub delay: f64,
}

impl PathComponent {
    pub fn new(attenuation: f64, delay: f64) -> Result<Self> {
        if !(attenuation > 0.0 && attenuation.is_finite()) {
            return Err(Error::domain(format!(
                "path attenuation must be positive and finite, got {attenuation}"
            )));
        }
        if !(delay >= 0.0 && delay.is_finite()) {
            return Err(Error::domain(format!(
                "path delay must be non-negative and finite, got {delay}"
            )));
        }
        Ok(Self { attenuation, delay })
    }
}

/// Aggregate narrowband channel from one ET to the ER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkChannel {
    /// `β ≥ 0`, dimensionless.
    pub power_gain: f64,
    /// `θ` in `[-π, π)`.
    pub phase_shift: f64,
}

impl LinkChannel {
    pub fn new(power_gain: f64, phase_shift: f64) -> Result<Self> {
        if !(power_gain >= 0.0 && power_gain.is_finite()) {
            return Err(Error::domain(format!(
                "channel power gain must be non-negative and finite, got {power_gain}"
            )));
        }
        if !phase_shift.is_finite() {
            return Err(Error::domain("channel phase shift must be finite"));
        }
        Ok(Self {
            power_gain,
            phase_shift: canonicalize(phase_shift),
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.power_gain.sqrt()
    }

    /// `√β · e^{-jθ}`: the contribution of this link when the ET transmits phase 0.
    pub fn phasor(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude(), -self.phase_shift)
    }

    /// A zero-gain link; its phase shift carries no information.
    pub fn is_null(&self) -> bool {
        self.power_gain == 0.0
    }
}

/// Collapse a multipath channel into a single `(β, θ)` pair at carrier `carrier_freq`.
///
/// When the paths cancel exactly (up to `1e-12` of the total attenuation) the
/// result is the null channel `β = 0, θ = 0`; see [`LinkChannel::is_null`].
pub fn aggregate_channel(paths: &[PathComponent], carrier_freq: f64) -> Result<LinkChannel> {
    if paths.is_empty() {
        return Err(Error::domain("aggregate_channel needs at least one path"));
    }
    if !(carrier_freq > 0.0 && carrier_freq.is_finite()) {
        return Err(Error::domain(format!(
            "carrier frequency must be positive, got {carrier_freq}"
        )));
    }
    let mut total = 0.0;
    let sum: Complex64 = paths
        .iter()
        .map(|p| {
            total += p.attenuation;
            // reduce the delay to a fraction of a period first to keep precision
            let cycles = (carrier_freq * p.delay).fract();
            Complex64::from_polar(p.attenuation, -TAU * cycles)
        })
        .sum();
    if sum.norm() <= NULL_PHASOR_RTOL * total {
        return Ok(LinkChannel {
            power_gain: 0.0,
            phase_shift: 0.0,
        });
    }
    LinkChannel::new(sum.norm_sqr(), -sum.arg())
}

/// Static parameters of the array.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub num_ets: usize,
    /// Per-ET transmit power `P`, watts.
    pub tx_power: f64,
    /// RF-to-DC conversion efficiency `ρ`.
    pub conversion_eff: f64,
    /// Carrier frequency `f_c`, hertz.
    pub carrier_freq: f64,
    /// Training slot duration, seconds. Only used to label time axes.
    pub slot_duration: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_ets: 2,
            tx_power: 1.0,
            conversion_eff: 1.0,
            carrier_freq: 915e6,
            slot_duration: 1e-3,
        }
    }
}

impl SystemConfig {
    pub fn new(num_ets: usize) -> Result<Self> {
        let config = Self {
            num_ets,
            ..Self::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_tx_power(mut self, tx_power: f64) -> Result<Self> {
        self.tx_power = tx_power;
        self.validate()?;
        Ok(self)
    }

    pub fn with_conversion_eff(mut self, conversion_eff: f64) -> Result<Self> {
        self.conversion_eff = conversion_eff;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_ets < 2 {
            return Err(Error::domain(format!(
                "at least two ETs are required, got {}",
                self.num_ets
            )));
        }
        if !(self.tx_power > 0.0 && self.tx_power.is_finite()) {
            return Err(Error::domain("tx_power must be positive"));
        }
        if !(self.conversion_eff > 0.0 && self.conversion_eff <= 1.0) {
            return Err(Error::domain("conversion_eff must lie in (0, 1]"));
        }
        if !(self.carrier_freq > 0.0 && self.carrier_freq.is_finite()) {
            return Err(Error::domain("carrier_freq must be positive"));
        }
        if !(self.slot_duration >= 0.0 && self.slot_duration.is_finite()) {
            return Err(Error::domain("slot_duration must be non-negative"));
        }
        Ok(())
    }

    /// `ρP`, the factor between squared phasor magnitude and watts.
    pub fn power_scale(&self) -> f64 {
        self.tx_power * self.conversion_eff
    }
}

/// Transmit phases of all ETs, each kept in `[-π, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAssignment(Vec<f64>);

impl PhaseAssignment {
    pub fn new(phases: Vec<f64>) -> Self {
        Self(phases.into_iter().map(canonicalize).collect())
    }

    pub fn zeros(num_ets: usize) -> Self {
        Self(vec![0.0; num_ets])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, et: usize) -> f64 {
        self.0[et]
    }

    pub fn set(&mut self, et: usize, phase: f64) {
        self.0[et] = canonicalize(phase);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Role of an ET during one phase adaptation interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EtRole {
    Adapting,
    NonAdapting,
    Idle,
}

/// Split of the ETs (0-based indices) into adapting, non-adapting and idle sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RolePartition {
    adapting: Vec<usize>,
    non_adapting: Vec<usize>,
    idle: Vec<usize>,
}

impl RolePartition {
    /// Build a partition of `0..num_ets`; every ET not listed is idle.
    pub fn new(num_ets: usize, adapting: &[usize], non_adapting: &[usize]) -> Result<Self> {
        let mut seen = vec![false; num_ets];
        for &et in adapting.iter().chain(non_adapting) {
            if et >= num_ets {
                return Err(Error::domain(format!(
                    "ET index {et} out of range for {num_ets} ETs"
                )));
            }
            if seen[et] {
                return Err(Error::domain(format!("ET {et} assigned to two roles")));
            }
            seen[et] = true;
        }
        let mut adapting = adapting.to_vec();
        let mut non_adapting = non_adapting.to_vec();
        adapting.sort_unstable();
        non_adapting.sort_unstable();
        let idle = (0..num_ets).filter(|&m| !seen[m]).collect();
        Ok(Self {
            adapting,
            non_adapting,
            idle,
        })
    }

    pub fn adapting(&self) -> &[usize] {
        &self.adapting
    }

    pub fn non_adapting(&self) -> &[usize] {
        &self.non_adapting
    }

    pub fn idle(&self) -> &[usize] {
        &self.idle
    }

    pub fn num_ets(&self) -> usize {
        self.adapting.len() + self.non_adapting.len() + self.idle.len()
    }

    pub fn role_of(&self, et: usize) -> EtRole {
        if self.adapting.binary_search(&et).is_ok() {
            EtRole::Adapting
        } else if self.non_adapting.binary_search(&et).is_ok() {
            EtRole::NonAdapting
        } else {
            EtRole::Idle
        }
    }
}

/// Fixed transmit phases of the non-adapting ETs, keyed by ET index.
pub type FixedPhases = BTreeMap<usize, f64>;

/// `Σ √β_m e^{j(φ_m − θ_m)}` over all ETs.
pub fn received_phasor(channels: &[LinkChannel], phases: &[f64]) -> Complex64 {
    channels
        .iter()
        .zip(phases)
        .map(|(ch, &phi)| Complex64::from_polar(ch.amplitude(), phi - ch.phase_shift))
        .sum()
}

/// Average harvested power at the ER when every ET transmits its assigned phase.
pub fn harvested_power(
    channels: &[LinkChannel],
    assignment: &PhaseAssignment,
    config: &SystemConfig,
) -> Result<f64> {
    if channels.len() != assignment.len() {
        return Err(Error::domain(format!(
            "{} channels but {} phases",
            channels.len(),
            assignment.len()
        )));
    }
    Ok(config.power_scale() * received_phasor(channels, assignment.as_slice()).norm_sqr())
}

/// Harvested power under perfectly coherent combining, `ρP (Σ √β_m)²`.
pub fn optimal_power(channels: &[LinkChannel], config: &SystemConfig) -> Result<f64> {
    if channels.is_empty() {
        return Err(Error::domain("optimal_power needs at least one channel"));
    }
    let amp: f64 = channels.iter().map(LinkChannel::amplitude).sum();
    Ok(config.power_scale() * amp * amp)
}

/// Ratio of achieved to optimal power.
///
/// Fails with [`Error::Invariant`] when `q_d` exceeds `q_star` by more than
/// [`EFFICIENCY_SLACK`] (relative); within the slack the ratio is clamped to 1.
pub fn efficiency(q_d: f64, q_star: f64) -> Result<f64> {
    if !(q_star > 0.0 && q_star.is_finite()) {
        return Err(Error::domain(format!("q_star must be positive, got {q_star}")));
    }
    if !(q_d >= 0.0) {
        return Err(Error::domain(format!("q_d must be non-negative, got {q_d}")));
    }
    if q_d > q_star * (1.0 + EFFICIENCY_SLACK) {
        return Err(Error::Invariant(format!(
            "harvested power {q_d} exceeds optimum {q_star}"
        )));
    }
    Ok((q_d / q_star).min(1.0))
}

/// Harvested power as a function of the common rotation `ψ` applied by the
/// adapting ETs, with non-adapting ETs held fixed and idle ETs silent.
///
/// The adapting ETs transmit `base_m + ψ`; with zero base phases this is the
/// plain "all adapting ETs transmit `ψ`" model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPower {
    /// Adapting sum phasor at `ψ = 0`.
    adapting: Complex64,
    /// Non-adapting sum phasor.
    fixed: Complex64,
    adapting_amp: f64,
    fixed_amp: f64,
    scale: f64,
}

impl SplitPower {
    /// Adapting ETs start from phase zero; `fixed_phases` must cover exactly
    /// the non-adapting set.
    pub fn new(
        channels: &[LinkChannel],
        roles: &RolePartition,
        fixed_phases: &FixedPhases,
        config: &SystemConfig,
    ) -> Result<Self> {
        check_roles(channels, roles)?;
        let keys: Vec<usize> = fixed_phases.keys().copied().collect();
        if keys != roles.non_adapting() {
            return Err(Error::domain(format!(
                "fixed phases given for ETs {keys:?} but non-adapting set is {:?}",
                roles.non_adapting()
            )));
        }
        Ok(Self::build(
            channels,
            roles,
            |_| 0.0,
            |m| fixed_phases[&m],
            config,
        ))
    }

    /// Every transmitting ET starts from its entry in `current`; adapting ETs
    /// rotate by a common `ψ`.
    pub fn rotating(
        channels: &[LinkChannel],
        roles: &RolePartition,
        current: &PhaseAssignment,
        config: &SystemConfig,
    ) -> Result<Self> {
        check_roles(channels, roles)?;
        if current.len() != channels.len() {
            return Err(Error::domain(format!(
                "{} channels but {} phases",
                channels.len(),
                current.len()
            )));
        }
        Ok(Self::build(
            channels,
            roles,
            |m| current.get(m),
            |m| current.get(m),
            config,
        ))
    }

    fn build(
        channels: &[LinkChannel],
        roles: &RolePartition,
        base: impl Fn(usize) -> f64,
        fixed: impl Fn(usize) -> f64,
        config: &SystemConfig,
    ) -> Self {
        let sum = |set: &[usize], phase: &dyn Fn(usize) -> f64| -> (Complex64, f64) {
            set.iter().fold((Complex64::new(0.0, 0.0), 0.0), |(z, a), &m| {
                let ch = &channels[m];
                (
                    z + Complex64::from_polar(ch.amplitude(), phase(m) - ch.phase_shift),
                    a + ch.amplitude(),
                )
            })
        };
        let (adapting, adapting_amp) = sum(roles.adapting(), &base);
        let (fixed, fixed_amp) = sum(roles.non_adapting(), &fixed);
        Self {
            adapting,
            fixed,
            adapting_amp,
            fixed_amp,
            scale: config.power_scale(),
        }
    }

    /// `Q(ψ)` in watts.
    pub fn power(&self, psi: f64) -> f64 {
        let rot = Complex64::from_polar(1.0, psi);
        self.scale * (rot * self.adapting + self.fixed).norm_sqr()
    }

    /// `α_A`, squared magnitude of the adapting sum phasor.
    pub fn adapting_strength(&self) -> f64 {
        self.adapting.norm_sqr()
    }

    /// `α_NA`, squared magnitude of the non-adapting sum phasor.
    pub fn fixed_strength(&self) -> f64 {
        self.fixed.norm_sqr()
    }

    /// `max_ψ Q(ψ) = ρP(√α_A + √α_NA)²`.
    pub fn peak_power(&self) -> f64 {
        let s = self.adapting.norm() + self.fixed.norm();
        self.scale * s * s
    }

    /// The rotation that aligns the adapting sum phasor with the non-adapting one.
    pub fn target_phase(&self) -> Result<f64> {
        if self.adapting_amp == 0.0 || self.adapting.norm() <= NULL_PHASOR_RTOL * self.adapting_amp
        {
            return Err(Error::DegenerateAlignment(
                "adapting ETs have a zero-magnitude sum phasor".into(),
            ));
        }
        if self.fixed_amp == 0.0 || self.fixed.norm() <= NULL_PHASOR_RTOL * self.fixed_amp {
            return Err(Error::DegenerateAlignment(
                "non-adapting ETs have a zero-magnitude sum phasor".into(),
            ));
        }
        Ok(canonicalize(self.fixed.arg() - self.adapting.arg()))
    }
}

fn check_roles(channels: &[LinkChannel], roles: &RolePartition) -> Result<()> {
    if roles.num_ets() != channels.len() {
        return Err(Error::domain(format!(
            "role partition covers {} ETs but there are {} channels",
            roles.num_ets(),
            channels.len()
        )));
    }
    Ok(())
}

/// `Q(ψ)` for a single `ψ`; see [`SplitPower`] for repeated evaluation.
pub fn split_power(
    channels: &[LinkChannel],
    roles: &RolePartition,
    fixed_phases: &FixedPhases,
    psi: f64,
    config: &SystemConfig,
) -> Result<f64> {
    Ok(SplitPower::new(channels, roles, fixed_phases, config)?.power(psi))
}

/// `ψ*`, the common adapting phase maximizing [`split_power`].
pub fn target_phase(
    channels: &[LinkChannel],
    roles: &RolePartition,
    fixed_phases: &FixedPhases,
) -> Result<f64> {
    SplitPower::new(channels, roles, fixed_phases, &SystemConfig::default())?.target_phase()
}
