//! Working-set phase search driven by energy feedback.
//!
//! During one phase adaptation interval the adapting ETs probe `2^B` phases per
//! feedback window and the ER answers with the index of the strongest one.
//! Because `Q(ψ)` is a shifted cosine in `ψ`, the strongest probe is also the
//! one circularly closest to the target, so each answer cuts the working arc
//! down to that probe's nearest-neighbour cell. With ER memory one more bit
//! compares the window's best power with the best seen so far and halves the
//! remaining cell again.
//!
//! Positions inside a session are kept as offsets from the start of the
//! initial arc. Arcs only ever shrink inside that first arc, so offsets never
//! wrap and arcs straddling `±π` need no special casing.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::phasor::canonicalize;

/// Largest supported number of feedback bits per window.
pub const MAX_BITS: u32 = 16;

/// Which phase adaptation algorithm an interval runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    /// B-bit feedback, the ER keeps no state between windows.
    NoMemory,
    /// (B+1)-bit feedback, the ER remembers the best power seen so far.
    WithMemory,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::NoMemory, Algorithm::WithMemory];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::NoMemory => "a1",
            Algorithm::WithMemory => "a2",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a1" | "no-memory" | "without-memory" => Ok(Algorithm::NoMemory),
            "a2" | "memory" | "with-memory" => Ok(Algorithm::WithMemory),
            other => Err(Error::domain(format!(
                "unknown algorithm '{other}', expected a1 or a2"
            ))),
        }
    }
}

/// Contiguous arc `{start + t : 0 ≤ t < length}` on the circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkingArc {
    start: f64,
    length: f64,
}

impl WorkingArc {
    pub fn full() -> Self {
        Self {
            start: -PI,
            length: TAU,
        }
    }

    pub fn new(start: f64, length: f64) -> Result<Self> {
        if !start.is_finite() || !(length > 0.0 && length <= TAU) {
            return Err(Error::domain(format!(
                "arc length must lie in (0, 2π], got {length}"
            )));
        }
        Ok(Self {
            start: canonicalize(start),
            length,
        })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_full(&self) -> bool {
        self.length >= TAU
    }

    pub fn center(&self) -> f64 {
        canonicalize(self.start + 0.5 * self.length)
    }

    /// Membership with an angular tolerance on both ends.
    pub fn contains(&self, phase: f64, tol: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let offset = (phase - self.start).rem_euclid(TAU);
        offset <= self.length + tol || offset >= TAU - tol
    }
}

/// Probe phases for one feedback window.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSchedule {
    pub bits: u32,
    pub phases: Vec<f64>,
}

/// How the probes of the next window are placed inside the working arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeLayout {
    /// Centres of `2^B` equal sub-arcs.
    Subdivided,
    /// `2^B` probes plus the remembered best phase at the centre split the arc
    /// into `2^B + 1` equal sub-arcs.
    AroundBest,
    /// Remembered best phase sits on the lower end; probes step up to the upper end.
    FromLower,
    /// Remembered best phase sits on the upper end; probes start at the lower end.
    FromUpper,
}

/// Feedback message sent by the ER after a window.
///
/// `best_index` is zero-based, so it fits the `B` feedback bits directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Feedback {
    pub best_index: usize,
    /// Present only with ER memory from the second window on.
    pub improved: Option<bool>,
}

/// ER-side record of the best power measured in the current interval.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErMemory {
    best_power: f64,
}

impl ErMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn best_power(&self) -> f64 {
        self.best_power
    }

    /// Compare `power` with the stored best; store it and return true if it is
    /// at least as large.
    pub fn record(&mut self, power: f64) -> bool {
        if power >= self.best_power {
            self.best_power = power;
            true
        } else {
            false
        }
    }
}

/// Index of the strongest measurement; ties go to the lowest index.
pub fn er_select(powers: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &q) in powers.iter().enumerate() {
        match best {
            Some((_, b)) if !(q > b) => {}
            _ if q.is_nan() => {}
            _ => best = Some((i, q)),
        }
    }
    match best {
        Some((i, _)) => Ok(i),
        None if powers.is_empty() => Err(Error::domain("er_select needs at least one power")),
        None => Err(Error::domain("er_select got only NaN powers")),
    }
}

fn probe_count(bits: u32) -> Result<usize> {
    if bits == 0 || bits > MAX_BITS {
        return Err(Error::domain(format!(
            "feedback bits must lie in 1..={MAX_BITS}, got {bits}"
        )));
    }
    Ok(1usize << bits)
}

fn layout_probes(layout: ProbeLayout, lo: f64, len: f64, count: usize) -> Vec<f64> {
    let k = count as f64;
    match layout {
        ProbeLayout::Subdivided => {
            let w = len / k;
            (0..count).map(|b| lo + 0.5 * w + w * b as f64).collect()
        }
        ProbeLayout::AroundBest => {
            let w = len / (k + 1.0);
            let half = count / 2;
            (0..count)
                .map(|b| {
                    // skip the middle slot, which holds the remembered best phase
                    let slot = if b < half { b } else { b + 1 };
                    lo + 0.5 * w + w * slot as f64
                })
                .collect()
        }
        ProbeLayout::FromLower => {
            let w = len / k;
            (1..=count).map(|b| lo + w * b as f64).collect()
        }
        ProbeLayout::FromUpper => {
            let w = len / k;
            (0..count).map(|b| lo + w * b as f64).collect()
        }
    }
}

/// ET-side state of one phase adaptation interval.
///
/// All adapting ETs receive the same feedback, so a single session stands for
/// all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationSession {
    algorithm: Algorithm,
    bits: u32,
    windows_total: usize,
    /// One-based index of the next window to run.
    window: usize,
    /// Phase of offset zero.
    origin: f64,
    lo: f64,
    len: f64,
    layout: ProbeLayout,
    probes: Vec<f64>,
    best: Option<f64>,
    last_choice: Option<f64>,
}

impl AdaptationSession {
    /// Start a session on the full circle.
    pub fn new(bits: u32, windows: usize, algorithm: Algorithm) -> Result<Self> {
        Self::on_arc(WorkingArc::full(), bits, windows, algorithm)
    }

    /// Start a session on a caller-chosen arc.
    ///
    /// Partial arcs must not exceed half the circle: beyond that the nearest
    /// probe along the arc is no longer the nearest probe on the circle.
    pub fn on_arc(arc: WorkingArc, bits: u32, windows: usize, algorithm: Algorithm) -> Result<Self> {
        let count = probe_count(bits)?;
        if windows == 0 {
            return Err(Error::domain("an interval needs at least one feedback window"));
        }
        if !arc.is_full() && arc.length() > PI {
            return Err(Error::domain(
                "a partial starting arc must not be longer than π",
            ));
        }
        let probes = layout_probes(ProbeLayout::Subdivided, 0.0, arc.length(), count);
        let best = match algorithm {
            Algorithm::NoMemory => None,
            Algorithm::WithMemory => Some(probes[0]),
        };
        Ok(Self {
            algorithm,
            bits,
            windows_total: windows,
            window: 1,
            origin: arc.start(),
            lo: 0.0,
            len: arc.length(),
            layout: ProbeLayout::Subdivided,
            probes,
            best,
            last_choice: None,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn probe_count(&self) -> usize {
        self.probes.len()
    }

    /// One-based index of the window about to run.
    pub fn window_index(&self) -> usize {
        self.window
    }

    pub fn windows_total(&self) -> usize {
        self.windows_total
    }

    pub fn is_complete(&self) -> bool {
        self.window > self.windows_total
    }

    pub fn layout(&self) -> ProbeLayout {
        self.layout
    }

    fn to_phase(&self, offset: f64) -> f64 {
        canonicalize(self.origin + offset)
    }

    pub fn arc(&self) -> WorkingArc {
        WorkingArc {
            start: self.to_phase(self.lo),
            length: self.len,
        }
    }

    pub fn probe_phases(&self) -> Vec<f64> {
        self.probes.iter().map(|&u| self.to_phase(u)).collect()
    }

    pub fn schedule(&self) -> ProbeSchedule {
        ProbeSchedule {
            bits: self.bits,
            phases: self.probe_phases(),
        }
    }

    /// Best phase so far (memory algorithm only).
    pub fn psi_best(&self) -> Option<f64> {
        self.best.map(|u| self.to_phase(u))
    }

    /// Phase the adapting ETs settle on after the last completed window.
    pub fn final_phase(&self) -> Result<f64> {
        if self.window == 1 {
            return Err(Error::Protocol("no feedback window has completed".into()));
        }
        let offset = match self.algorithm {
            Algorithm::NoMemory => self.last_choice,
            Algorithm::WithMemory => self.best,
        };
        offset
            .map(|u| self.to_phase(u))
            .ok_or_else(|| Error::Protocol("session has no chosen phase".into()))
    }

    /// Apply the ER feedback for the current window and lay out the next one.
    pub fn advance(&mut self, feedback: &Feedback) -> Result<()> {
        if self.is_complete() {
            return Err(Error::Protocol(format!(
                "all {} feedback windows already used",
                self.windows_total
            )));
        }
        if feedback.best_index >= self.probes.len() {
            return Err(Error::domain(format!(
                "feedback index {} out of range for {} probes",
                feedback.best_index,
                self.probes.len()
            )));
        }
        match self.algorithm {
            Algorithm::NoMemory => {
                if feedback.improved.is_some() {
                    return Err(Error::Protocol(
                        "memoryless feedback carries no comparison bit".into(),
                    ));
                }
                self.shrink_to_subdivision(feedback.best_index);
            }
            Algorithm::WithMemory => match (self.window, feedback.improved) {
                (1, None) => {
                    self.shrink_to_subdivision(feedback.best_index);
                    self.best = self.last_choice;
                    self.relayout(ProbeLayout::AroundBest);
                }
                (1, Some(_)) => {
                    return Err(Error::Protocol(
                        "the first window carries no comparison bit".into(),
                    ))
                }
                (_, Some(improved)) => self.shrink_with_memory(feedback.best_index, improved),
                (n, None) => {
                    return Err(Error::Protocol(format!(
                        "window {n} feedback is missing the comparison bit"
                    )))
                }
            },
        }
        self.window += 1;
        Ok(())
    }

    /// Keep the `index`-th of the equal sub-arcs the probes sit in.
    fn shrink_to_subdivision(&mut self, index: usize) {
        debug_assert_eq!(self.layout, ProbeLayout::Subdivided);
        let w = self.len / self.probes.len() as f64;
        self.last_choice = Some(self.probes[index]);
        self.lo += w * index as f64;
        self.len = w;
        self.relayout(ProbeLayout::Subdivided);
    }

    fn shrink_with_memory(&mut self, index: usize, improved: bool) {
        let hi = self.lo + self.len;
        let chosen = self.probes[index];
        let best = self.best.expect("memory session tracks a best phase");

        // nearest-probe cell of the chosen probe
        let mut lo = if index == 0 {
            self.lo
        } else {
            0.5 * (self.probes[index - 1] + chosen)
        };
        let mut hi = if index + 1 == self.probes.len() {
            hi
        } else {
            0.5 * (chosen + self.probes[index + 1])
        };
        let cell = (lo, hi);

        // the comparison bit says which of `chosen` and `best` is closer to the target
        let mid = 0.5 * (chosen + best);
        let keep_upper = (best < chosen) == improved;
        if keep_upper {
            lo = lo.max(mid);
        } else {
            hi = hi.min(mid);
        }

        if hi > lo {
            if improved {
                self.best = Some(chosen);
            }
        } else {
            // Only reachable with noisy measurements: the bits contradict each
            // other, so fall back to the index bits alone.
            (lo, hi) = cell;
            self.best = Some(chosen);
        }
        self.last_choice = Some(chosen);
        self.lo = lo;
        self.len = hi - lo;

        let best = self.best.expect("set above");
        let center = lo + 0.5 * self.len;
        let (d_lo, d_mid, d_hi) = ((best - lo).abs(), (best - center).abs(), (best - hi).abs());
        let layout = if d_mid <= d_lo && d_mid <= d_hi {
            ProbeLayout::AroundBest
        } else if d_lo <= d_hi {
            ProbeLayout::FromLower
        } else {
            ProbeLayout::FromUpper
        };
        self.relayout(layout);
    }

    fn relayout(&mut self, layout: ProbeLayout) {
        self.layout = layout;
        self.probes = layout_probes(layout, self.lo, self.len, self.probes.len());
    }
}

/// Everything observed while running one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalOutcome {
    pub final_phase: f64,
    /// Probe phase transmitted in each slot.
    pub probes: Vec<f64>,
    /// Power measured by the ER in each slot.
    pub powers: Vec<f64>,
    pub feedback: Vec<Feedback>,
    /// Working arc at the start of every window, followed by the final arc.
    pub arcs: Vec<WorkingArc>,
    /// ER memory after every window (memory algorithm only).
    pub er_best: Vec<f64>,
}

/// Run a full interval from the full circle. `measure` maps a probe phase to
/// the power the ER measures while the adapting ETs transmit it.
pub fn run_interval(
    bits: u32,
    windows: usize,
    algorithm: Algorithm,
    measure: impl FnMut(f64) -> f64,
) -> Result<IntervalOutcome> {
    run_session(AdaptationSession::new(bits, windows, algorithm)?, measure)
}

/// Drive an existing session through its remaining windows.
pub fn run_session(
    mut session: AdaptationSession,
    mut measure: impl FnMut(f64) -> f64,
) -> Result<IntervalOutcome> {
    let remaining = session.windows_total() + 1 - session.window_index();
    let slots = remaining * session.probe_count();
    let mut probes = Vec::with_capacity(slots);
    let mut powers = Vec::with_capacity(slots);
    let mut feedback = Vec::with_capacity(remaining);
    let mut arcs = Vec::with_capacity(remaining + 1);
    let mut er_best = Vec::new();
    let mut memory = ErMemory::new();

    while !session.is_complete() {
        arcs.push(session.arc());
        let window: Vec<f64> = session
            .probe_phases()
            .into_iter()
            .map(|psi| {
                probes.push(psi);
                let q = measure(psi);
                powers.push(q);
                q
            })
            .collect();
        let best_index = er_select(&window)?;
        let improved = match session.algorithm() {
            Algorithm::NoMemory => None,
            Algorithm::WithMemory => {
                let improved = memory.record(window[best_index]);
                er_best.push(memory.best_power());
                (session.window_index() > 1).then_some(improved)
            }
        };
        let fb = Feedback {
            best_index,
            improved,
        };
        session.advance(&fb)?;
        feedback.push(fb);
    }
    arcs.push(session.arc());

    Ok(IntervalOutcome {
        final_phase: session.final_phase()?,
        probes,
        powers,
        feedback,
        arcs,
        er_best,
    })
}

/// Wrap a power meter with additive zero-mean Gaussian measurement noise.
pub fn with_gaussian_noise<'a, R: Rng>(
    mut measure: impl FnMut(f64) -> f64 + 'a,
    std_dev: f64,
    rng: &'a mut R,
) -> Result<impl FnMut(f64) -> f64 + 'a> {
    if !(std_dev >= 0.0 && std_dev.is_finite()) {
        return Err(Error::domain(format!("noise standard deviation must be non-negative, got {std_dev}")));
    }
    let normal = Normal::new(0.0, std_dev)
        .map_err(|e| Error::domain(format!("invalid noise level {std_dev}: {e}")))?;
    Ok(move |psi| measure(psi) + normal.sample(rng))
}

fn windows_for(n_t: usize, bits: u32) -> Result<usize> {
    let count = probe_count(bits)?;
    if n_t < count || !n_t.is_multiple_of(count) {
        return Err(Error::domain(format!(
            "training slots {n_t} must be a positive multiple of 2^{bits} = {count}"
        )));
    }
    Ok(n_t / count)
}

/// Feedback windows per interval for `n_t` training slots.
pub fn windows_per_interval(n_t: usize, bits: u32) -> Result<usize> {
    windows_for(n_t, bits)
}

/// Worst-case phase error of the memoryless search after `n_t` slots.
pub fn error_bound_a1(n_t: usize, bits: u32) -> Result<f64> {
    let windows = windows_for(n_t, bits)?;
    Ok(PI * 0.5f64.powi((bits as usize * windows) as i32))
}

/// Worst-case phase error of the memory search after `n_t` slots.
pub fn error_bound_a2(n_t: usize, bits: u32) -> Result<f64> {
    let windows = windows_for(n_t, bits)?;
    let count = (1u64 << bits) as f64;
    Ok(PI / count * (1.0 / (count + 1.0)).powi(windows as i32 - 1))
}

pub fn error_bound(algorithm: Algorithm, n_t: usize, bits: u32) -> Result<f64> {
    match algorithm {
        Algorithm::NoMemory => error_bound_a1(n_t, bits),
        Algorithm::WithMemory => error_bound_a2(n_t, bits),
    }
}
