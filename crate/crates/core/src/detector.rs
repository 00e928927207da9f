//! Single-photon detectors: a free-running herald detector and a gated
//! idler detector. Efficiency is per-photon Bernoulli; dark counts are a
//! Poisson process (free-running) or a per-gate Bernoulli (gated); dead
//! time discards any click closer than `dead_time_ns` to the previous
//! accepted click. Afterpulsing and jitter are not modeled.

use serde::{Deserialize, Serialize};

use crate::controller::GateWindow;
use crate::error::{Error, Result};
use crate::event::{Arrival, Channel, Detection, Origin};
use crate::rng::RandomStream;
use crate::source::{ModeCount, PairCountSampler};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorMode {
    FreeRunning,
    Gated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub efficiency: f64,
    pub dead_time_ns: f64,
    pub dark_rate_hz: f64,
    pub mode: DetectorMode,
    pub gate_offset_ns: f64,
    pub gate_width_ns: f64,
}

impl DetectorParams {
    /// Representative free-running avalanche photodiode.
    pub fn herald_default() -> Self {
        Self {
            efficiency: 0.4,
            dead_time_ns: 0.0,
            dark_rate_hz: 0.0,
            mode: DetectorMode::FreeRunning,
            gate_offset_ns: 0.0,
            gate_width_ns: 0.0,
        }
    }

    /// Representative gated InGaAs detector, one click per gate.
    pub fn idler_default() -> Self {
        Self {
            efficiency: 0.15,
            dead_time_ns: 0.0,
            dark_rate_hz: 0.0,
            mode: DetectorMode::Gated,
            gate_offset_ns: 0.0,
            gate_width_ns: 100.0,
        }
    }

    pub fn ideal(mode: DetectorMode) -> Self {
        let base = match mode {
            DetectorMode::FreeRunning => Self::herald_default(),
            DetectorMode::Gated => Self::idler_default(),
        };
        Self {
            efficiency: 1.0,
            ..base
        }
    }

    pub fn validate(&self, section: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::config(
                format!("{section}.efficiency"),
                format!("must be in [0, 1], got {}", self.efficiency),
            ));
        }
        for (name, v) in [
            ("dead_time_ns", self.dead_time_ns),
            ("dark_rate_hz", self.dark_rate_hz),
            ("gate_offset_ns", self.gate_offset_ns),
            ("gate_width_ns", self.gate_width_ns),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(
                    format!("{section}.{name}"),
                    format!("must be finite and non-negative, got {v}"),
                ));
            }
        }
        if self.mode == DetectorMode::Gated && self.gate_width_ns <= 0.0 {
            return Err(Error::config(
                format!("{section}.gate_width_ns"),
                "a gated detector needs a positive gate width",
            ));
        }
        if self.mode == DetectorMode::Gated && self.dark_probability_per_gate() > 1.0 {
            return Err(Error::config(
                format!("{section}.dark_rate_hz"),
                "dark-count probability per gate exceeds 1",
            ));
        }
        Ok(())
    }

    /// The detector gate for an output window.
    pub fn gate_for(&self, window: &GateWindow) -> GateWindow {
        GateWindow {
            start_ns: window.start_ns + self.gate_offset_ns,
            width_ns: self.gate_width_ns,
        }
    }

    pub fn dark_probability_per_gate(&self) -> f64 {
        self.dark_rate_hz * self.gate_width_ns * 1e-9
    }
}

/// Free-running detector with dead-time state carried across calls.
#[derive(Clone, Debug)]
pub struct FreeRunningDetector {
    params: DetectorParams,
    channel: Channel,
    last_click_ns: Option<f64>,
    scratch: Vec<Detection>,
}

impl FreeRunningDetector {
    pub fn new(params: DetectorParams, channel: Channel) -> Self {
        Self {
            params,
            channel,
            last_click_ns: None,
            scratch: Vec::new(),
        }
    }

    /// Detects the photons arriving during `[span_start_ns, span_start_ns + span_ns)`.
    /// Clicks are appended to `out` in time order.
    pub fn detect(
        &mut self,
        arrivals: &[Arrival],
        span_start_ns: f64,
        span_ns: f64,
        rng: &mut RandomStream,
        out: &mut Vec<Detection>,
    ) {
        self.scratch.clear();
        for a in arrivals {
            if rng.uniform() < self.params.efficiency {
                self.scratch.push(Detection {
                    t_ns: a.t_ns,
                    origin: a.origin,
                    channel: self.channel,
                });
            }
        }
        if self.params.dark_rate_hz > 0.0 {
            let expected = self.params.dark_rate_hz * span_ns * 1e-9;
            let n = PairCountSampler::new(expected, ModeCount::Infinite)
                .expect("validated dark rate")
                .sample(rng);
            for _ in 0..n {
                self.scratch.push(Detection {
                    t_ns: span_start_ns + span_ns * rng.uniform(),
                    origin: Origin::Dark,
                    channel: self.channel,
                });
            }
        }
        if self.scratch.is_empty() {
            return;
        }
        self.scratch.sort_by(|a, b| a.t_ns.total_cmp(&b.t_ns));
        for click in self.scratch.drain(..) {
            if let Some(last) = self.last_click_ns {
                if click.t_ns < last + self.params.dead_time_ns {
                    continue;
                }
            }
            self.last_click_ns = Some(click.t_ns);
            out.push(click);
        }
    }
}

/// Clicks of a free-running detector over `[0, span_ns)`.
pub fn detect_free_running(
    arrivals: &[Arrival],
    p: &DetectorParams,
    span_ns: f64,
    rng: &mut RandomStream,
) -> Vec<Detection> {
    let mut det = FreeRunningDetector::new(p.clone(), Channel::Signal);
    let mut out = Vec::new();
    det.detect(arrivals, 0.0, span_ns, rng, &mut out);
    out
}

/// Gated detector: at most one click per gate, first in time wins.
#[derive(Clone, Debug)]
pub struct GatedDetector {
    params: DetectorParams,
    last_click_ns: Option<f64>,
    last_gate_end_ns: f64,
    dark_probability: f64,
}

impl GatedDetector {
    pub fn new(params: DetectorParams) -> Self {
        let dark_probability = params.dark_probability_per_gate();
        Self {
            params,
            last_click_ns: None,
            last_gate_end_ns: f64::NEG_INFINITY,
            dark_probability,
        }
    }

    /// Opens one gate. Gates must be presented in time order and must not
    /// overlap.
    pub fn detect_gate(
        &mut self,
        gate: &GateWindow,
        arrivals: &[Arrival],
        channel: Channel,
        rng: &mut RandomStream,
    ) -> Result<Option<Detection>> {
        if gate.start_ns < self.last_gate_end_ns {
            return Err(Error::OverlappingGates {
                first_start_ns: self.last_gate_end_ns - gate.width_ns,
                first_width_ns: gate.width_ns,
                second_start_ns: gate.start_ns,
            });
        }
        self.last_gate_end_ns = gate.end_ns();
        let armed_from = self
            .last_click_ns
            .map_or(f64::NEG_INFINITY, |t| t + self.params.dead_time_ns);
        let mut first: Option<Detection> = None;
        let offer = |t_ns: f64, origin: Origin, first: &mut Option<Detection>| {
            if t_ns >= armed_from && first.is_none_or(|f| t_ns < f.t_ns) {
                *first = Some(Detection {
                    t_ns,
                    origin,
                    channel,
                });
            }
        };
        for a in arrivals.iter().filter(|a| gate.contains(a.t_ns)) {
            if rng.uniform() < self.params.efficiency {
                offer(a.t_ns, a.origin, &mut first);
            }
        }
        if self.dark_probability > 0.0 && rng.uniform() < self.dark_probability {
            let t = gate.start_ns + gate.width_ns * rng.uniform();
            offer(t, Origin::Dark, &mut first);
        }
        if let Some(click) = first {
            self.last_click_ns = Some(click.t_ns);
        }
        Ok(first)
    }
}

/// Clicks of a gated detector over a list of gates given as
/// `(start_ns, width_ns)`. Gates must be time-sorted and non-overlapping.
pub fn detect_gated(
    arrivals: &[Arrival],
    gates: &[(f64, f64)],
    p: &DetectorParams,
    rng: &mut RandomStream,
) -> Result<Vec<Detection>> {
    for w in gates.windows(2) {
        if w[1].0 < w[0].0 + w[0].1 {
            return Err(Error::OverlappingGates {
                first_start_ns: w[0].0,
                first_width_ns: w[0].1,
                second_start_ns: w[1].0,
            });
        }
    }
    let mut sorted: Vec<Arrival> = arrivals.to_vec();
    sorted.sort_by(|a, b| a.t_ns.total_cmp(&b.t_ns));
    let mut det = GatedDetector::new(p.clone());
    let mut out = Vec::new();
    let mut lo = 0;
    for &(start_ns, width_ns) in gates {
        let gate = GateWindow { start_ns, width_ns };
        while lo < sorted.len() && sorted[lo].t_ns < start_ns {
            lo += 1;
        }
        let hi = lo + sorted[lo..].partition_point(|a| a.t_ns < gate.end_ns());
        if let Some(click) = det.detect_gate(&gate, &sorted[lo..hi], Channel::IdlerPort2, rng)? {
            out.push(click);
        }
        lo = hi;
    }
    Ok(out)
}
