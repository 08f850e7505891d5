use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::phasor::{aggregate_channel, LinkChannel, PathComponent, SystemConfig};

/// Geometry and propagation model for random deployments.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_ets: usize,
    /// Path loss at the reference distance, dB.
    pub ref_atten_db: f64,
    /// Reference distance, metres.
    pub ref_dist: f64,
    pub pathloss_exp: f64,
    /// ET–ER distances are uniform in this range, metres.
    pub dist_range: (f64, f64),
    pub paths_per_link: usize,
    /// Per-ET transmit power, watts.
    pub tx_power: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_ets: 5,
            ref_atten_db: -20.0,
            ref_dist: 1.0,
            pathloss_exp: 3.0,
            dist_range: (5.0, 15.0),
            paths_per_link: 1,
            tx_power: 1.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn with_ets(&self, num_ets: usize) -> Self {
        Self {
            num_ets,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_ets < 1 {
            return Err(Error::domain("a scenario needs at least one ET"));
        }
        let (lo, hi) = self.dist_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::domain(format!(
                "distance range must be positive and ordered, got ({lo}, {hi})"
            )));
        }
        if !(self.pathloss_exp > 0.0) {
            return Err(Error::domain("path-loss exponent must be positive"));
        }
        if !(self.ref_dist > 0.0) {
            return Err(Error::domain("reference distance must be positive"));
        }
        if !self.ref_atten_db.is_finite() {
            return Err(Error::domain("reference attenuation must be finite"));
        }
        if self.paths_per_link == 0 {
            return Err(Error::domain("each link needs at least one path"));
        }
        if !(self.tx_power > 0.0) {
            return Err(Error::domain("tx_power must be positive"));
        }
        Ok(())
    }

    /// `β(r) = c₀ (r / r₀)^{-δ}` with `c₀` converted from dB.
    pub fn path_gain(&self, distance: f64) -> f64 {
        10f64.powf(self.ref_atten_db / 10.0) * (distance / self.ref_dist).powf(-self.pathloss_exp)
    }

    /// Matching array configuration (ρ = 1).
    pub fn system_config(&self) -> Result<SystemConfig> {
        SystemConfig::new(self.num_ets.max(2))?.with_tx_power(self.tx_power)
    }
}

/// One random deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub distances: Vec<f64>,
    pub channels: Vec<LinkChannel>,
}

impl Scenario {
    pub fn gains(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.power_gain).collect()
    }

    pub fn phase_shifts(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.phase_shift).collect()
    }

    /// Keep only the first `num_ets` ETs.
    pub fn prefix(&self, num_ets: usize) -> Scenario {
        Scenario {
            distances: self.distances[..num_ets].to_vec(),
            channels: self.channels[..num_ets].to_vec(),
        }
    }

    /// ETs reordered by decreasing channel gain.
    pub fn sorted_by_gain(&self) -> Scenario {
        let mut idx: Vec<usize> = (0..self.channels.len()).collect();
        idx.sort_by(|&a, &b| self.channels[b].power_gain.total_cmp(&self.channels[a].power_gain));
        Scenario {
            distances: idx.iter().map(|&i| self.distances[i]).collect(),
            channels: idx.iter().map(|&i| self.channels[i]).collect(),
        }
    }
}

/// Independent RNG stream for one trial of a seeded experiment.
pub fn trial_rng(master_seed: u64, trial_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_id);
    rng
}

/// Draw distances and channels for every ET.
///
/// With a single path per link the phase shift is uniform on the circle. With
/// several paths, unit-amplitude paths with delays uniform over one carrier
/// period are combined and then rescaled so the aggregate gain matches the
/// path-loss model.
pub fn draw_scenario<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Scenario> {
    config.validate()?;
    let (lo, hi) = config.dist_range;
    let mut distances = Vec::with_capacity(config.num_ets);
    let mut channels = Vec::with_capacity(config.num_ets);
    for _ in 0..config.num_ets {
        let r = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let beta = config.path_gain(r);
        let channel = if config.paths_per_link == 1 {
            LinkChannel::new(beta, rng.random_range(-PI..PI))?
        } else {
            let paths = (0..config.paths_per_link)
                .map(|_| PathComponent::new(1.0, rng.random_range(0.0..1.0)))
                .collect::<Result<Vec<_>>>()?;
            let raw = aggregate_channel(&paths, 1.0)?;
            if raw.is_null() {
                LinkChannel::new(beta, rng.random_range(-PI..PI))?
            } else {
                LinkChannel::new(beta, raw.phase_shift)?
            }
        };
        distances.push(r);
        channels.push(channel);
    }
    Ok(Scenario {
        distances,
        channels,
    })
}
