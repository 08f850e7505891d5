//! Closed-form efficiency guarantees for sequential training.

use std::f64::consts::PI;

use crate::adapt::{self, Algorithm};
use crate::error::{Error, Result};

/// Inputs shared by the bound formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub gains: Vec<f64>,
    pub bits: u32,
    pub slots: usize,
    pub target_eff: f64,
}

/// `(Σβ, Σ_{i≠j} √(β_i β_j))` over the strictly positive gains.
fn gain_sums(gains: &[f64]) -> Result<(f64, f64)> {
    if let Some(bad) = gains.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
        return Err(Error::domain(format!("channel gains must be non-negative, got {bad}")));
    }
    let active: Vec<f64> = gains.iter().copied().filter(|&g| g > 0.0).collect();
    if active.len() < gains.len() {
        log::warn!(
            "ignoring {} zero-gain ETs in bound evaluation",
            gains.len() - active.len()
        );
    }
    if active.len() < 2 {
        return Err(Error::domain(
            "bounds need at least two ETs with positive gain",
        ));
    }
    let total: f64 = active.iter().sum();
    let amp: f64 = active.iter().map(|g| g.sqrt()).sum();
    // Σ_{i≠j} √(β_i β_j) = (Σ√β)² − Σβ
    Ok((total, amp * amp - total))
}

/// Lower bound on the sequential-training efficiency after `n_t` slots per interval.
pub fn efficiency_lower_bound(gains: &[f64], n_t: usize, bits: u32, algorithm: Algorithm) -> Result<f64> {
    let (total, cross) = gain_sums(gains)?;
    let angle = adapt::error_bound(algorithm, n_t, bits)?;
    let c = angle.cos();
    Ok((total + cross * c * c) / (total + cross))
}

fn radicand(gains: &[f64], target_eff: f64) -> Result<f64> {
    if !(target_eff > 0.0 && target_eff <= 1.0) {
        return Err(Error::domain(format!(
            "target efficiency must lie in (0, 1], got {target_eff}"
        )));
    }
    let (total, cross) = gain_sums(gains)?;
    Ok(target_eff - (1.0 - target_eff) * total / cross)
}

fn slots_from_radicand(radicand: f64, bits: u32, algorithm: Algorithm) -> Result<f64> {
    if !(0.0..=1.0).contains(&radicand) {
        return Err(Error::TargetUnreachable { radicand });
    }
    if bits == 0 || bits > adapt::MAX_BITS {
        return Err(Error::domain(format!("feedback bits must lie in 1..={}", adapt::MAX_BITS)));
    }
    let angle = radicand.sqrt().acos();
    let count = (1u64 << bits) as f64;
    // angle == 0 gives +∞: no finite training length guarantees perfect alignment
    Ok(match algorithm {
        Algorithm::NoMemory => count / f64::from(bits) * (PI / angle).log2(),
        Algorithm::WithMemory => count + count * (PI / count / angle).ln() / (count + 1.0).ln(),
    })
}

/// Training slots per interval that guarantee efficiency `target_eff`.
///
/// The raw, possibly fractional value is returned; see [`round_up_slots`].
pub fn required_slots(gains: &[f64], bits: u32, target_eff: f64, algorithm: Algorithm) -> Result<f64> {
    slots_from_radicand(radicand(gains, target_eff)?, bits, algorithm)
}

/// [`required_slots`] for `num_ets` identical gains, one feedback bit and no memory.
pub fn equal_gain_required_slots(num_ets: usize, target_eff: f64) -> Result<f64> {
    if num_ets < 2 {
        return Err(Error::domain("equal-gain bound needs at least two ETs"));
    }
    if !(target_eff > 0.0 && target_eff <= 1.0) {
        return Err(Error::domain(format!(
            "target efficiency must lie in (0, 1], got {target_eff}"
        )));
    }
    let m = num_ets as f64;
    let radicand = (m * target_eff - 1.0) / (m - 1.0);
    if !(0.0..=1.0).contains(&radicand) {
        return Err(Error::TargetUnreachable { radicand });
    }
    Ok(2.0 * (PI / radicand.sqrt().acos()).log2())
}

/// Smallest valid slot count `≥ raw`: a positive multiple of `2^bits`.
pub fn round_up_slots(raw: f64, bits: u32) -> Result<usize> {
    if !raw.is_finite() {
        return Err(Error::domain("required slot count is unbounded"));
    }
    if bits == 0 || bits > adapt::MAX_BITS {
        return Err(Error::domain(format!("feedback bits must lie in 1..={}", adapt::MAX_BITS)));
    }
    let count = 1usize << bits;
    let windows = (raw / count as f64).ceil().max(1.0) as usize;
    Ok(windows * count)
}

impl BoundInputs {
    pub fn efficiency_lower_bound(&self, algorithm: Algorithm) -> Result<f64> {
        efficiency_lower_bound(&self.gains, self.slots, self.bits, algorithm)
    }

    pub fn required_slots(&self, algorithm: Algorithm) -> Result<f64> {
        required_slots(&self.gains, self.bits, self.target_eff, algorithm)
    }
}
