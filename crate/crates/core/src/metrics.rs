//! Figures of merit computed from tallies: brightness, improvement factor,
//! CAR and the three-port g² estimator, with jackknife standard errors over
//! cycle partitions.

use crate::controller::{ControllerMode, RoutingDecision};
use crate::error::{Error, Result};
use crate::event::Detection;
use crate::tally::Tally;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClickClass {
    TrueCoincidence,
    Accidental,
}

/// A gated click is a true coincidence only when it comes from the partner
/// of the herald that opened the gate.
pub fn classify_gated_click(click: &Detection, decision: &RoutingDecision) -> ClickClass {
    match (click.origin.pair_id(), decision.herald().and_then(|h| h.origin.pair_id())) {
        (Some(a), Some(b)) if a == b => ClickClass::TrueCoincidence,
        _ => ClickClass::Accidental,
    }
}

pub fn car(t: &Tally) -> Result<f64> {
    if t.accidentals == 0 {
        return Err(Error::Undefined {
            quantity: "CAR",
            reason: "no accidental coincidences",
        });
    }
    Ok(t.coincidences as f64 / t.accidentals as f64)
}

/// Ratio of coincidence rates, enabled over disabled.
pub fn improvement_factor(enabled: &Tally, disabled: &Tally) -> Result<f64> {
    if disabled.coincidences == 0 {
        return Err(Error::Undefined {
            quantity: "improvement factor",
            reason: "no coincidences with multiplexing disabled",
        });
    }
    if enabled.duration_s() <= 0.0 || disabled.duration_s() <= 0.0 {
        return Err(Error::Undefined {
            quantity: "improvement factor",
            reason: "empty run",
        });
    }
    Ok((enabled.coincidences as f64 / enabled.duration_s())
        / (disabled.coincidences as f64 / disabled.duration_s()))
}

/// C123 H / (R12 R13), with H the heralds that opened a gate.
pub fn g2_estimator(t: &Tally) -> Result<f64> {
    if t.r12 == 0 || t.r13 == 0 {
        return Err(Error::Undefined {
            quantity: "g2",
            reason: "no clicks on one of the split ports",
        });
    }
    Ok(t.c123 as f64 * t.heralds as f64 / (t.r12 as f64 * t.r13 as f64))
}

/// A value with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    /// Number of standard errors between this estimate and `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr > 0.0 {
            (self.value - target) / self.stderr
        } else if self.value == target {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Delete-one jackknife over partitions. `f` maps a tally to the statistic;
/// returns `None` when the statistic is undefined on the full tally. A
/// leave-one-out value that is undefined makes the standard error infinite.
pub fn jackknife<F>(blocks: &[Tally], f: F) -> Option<Estimate>
where
    F: Fn(&Tally) -> Result<f64>,
{
    let total: Tally = blocks.iter().copied().sum();
    let value = f(&total).ok()?;
    let loo: Vec<Option<f64>> = blocks.iter().map(|b| f(&total.without(b)).ok()).collect();
    Some(Estimate::new(value, jackknife_spread(&loo)))
}

/// Paired jackknife for a statistic of two runs over the same partition of
/// cycles (the enabled and disabled halves of a mode-both run).
pub fn jackknife_paired<F>(a: &[Tally], b: &[Tally], f: F) -> Option<Estimate>
where
    F: Fn(&Tally, &Tally) -> Result<f64>,
{
    assert_eq!(a.len(), b.len(), "paired jackknife needs equal partitions");
    let ta: Tally = a.iter().copied().sum();
    let tb: Tally = b.iter().copied().sum();
    let value = f(&ta, &tb).ok()?;
    let loo: Vec<Option<f64>> = a
        .iter()
        .zip(b)
        .map(|(pa, pb)| f(&ta.without(pa), &tb.without(pb)).ok())
        .collect();
    Some(Estimate::new(value, jackknife_spread(&loo)))
}

fn jackknife_spread(loo: &[Option<f64>]) -> f64 {
    let n = loo.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let Some(vals) = loo.iter().copied().collect::<Option<Vec<f64>>>() else {
        return f64::INFINITY;
    };
    let mean = vals.iter().sum::<f64>() / n as f64;
    let ss: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum();
    ((n - 1) as f64 / n as f64 * ss).sqrt()
}

/// Rates and ratios for one controller mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeMetrics {
    pub mode: ControllerMode,
    pub signal_cps: f64,
    pub gate_cps: f64,
    pub brightness_cps: f64,
    pub accidental_cps: f64,
    pub accidental_shifted_cps: f64,
    pub car: Option<Estimate>,
    pub g2: Option<Estimate>,
    pub tally: Tally,
}

impl ModeMetrics {
    pub fn from_blocks(mode: ControllerMode, blocks: &[Tally]) -> Self {
        let tally: Tally = blocks.iter().copied().sum();
        let rate = |n: u64| {
            let d = tally.duration_s();
            if d > 0.0 {
                n as f64 / d
            } else {
                0.0
            }
        };
        let g2 = if tally.r12 + tally.r13 > 0 {
            jackknife(blocks, g2_estimator)
        } else {
            None
        };
        Self {
            mode,
            signal_cps: rate(tally.signal_clicks),
            gate_cps: rate(tally.gates),
            brightness_cps: rate(tally.coincidences),
            accidental_cps: rate(tally.accidentals),
            accidental_shifted_cps: rate(tally.accidentals_shifted),
            car: jackknife(blocks, car),
            g2,
            tally,
        }
    }
}

/// Everything reported for one configuration. Mode-specific fields are
/// present for the modes that were run; ratios need both.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub mu: f64,
    pub cycles: u64,
    pub enabled: Option<ModeMetrics>,
    pub disabled: Option<ModeMetrics>,
    pub improvement_factor: Option<Estimate>,
    pub g2_ratio_enabled_disabled: Option<Estimate>,
}

impl MetricsReport {
    /// Builds a report from per-partition tallies. Enabled and disabled
    /// partitions, when both are given, must cover the same cycles.
    pub fn from_blocks(mu: f64, enabled: Option<&[Tally]>, disabled: Option<&[Tally]>) -> Self {
        let cycles = enabled
            .or(disabled)
            .map(|b| b.iter().map(|t| t.cycles).sum())
            .unwrap_or(0);
        let (improvement_factor, g2_ratio) = match (enabled, disabled) {
            (Some(e), Some(d)) => (
                jackknife_paired(e, d, improvement_factor),
                jackknife_paired(e, d, |a, b| Ok(g2_estimator(a)? / nonzero_g2(b)?)),
            ),
            _ => (None, None),
        };
        Self {
            mu,
            cycles,
            enabled: enabled.map(|b| ModeMetrics::from_blocks(ControllerMode::Enabled, b)),
            disabled: disabled.map(|b| ModeMetrics::from_blocks(ControllerMode::Disabled, b)),
            improvement_factor,
            g2_ratio_enabled_disabled: g2_ratio,
        }
    }

    /// The enabled-mode metrics if present, otherwise the disabled ones.
    pub fn primary(&self) -> Option<&ModeMetrics> {
        self.enabled.as_ref().or(self.disabled.as_ref())
    }

    pub fn brightness_cps(&self) -> f64 {
        self.primary().map_or(0.0, |m| m.brightness_cps)
    }

    pub fn signal_cps(&self) -> f64 {
        self.primary().map_or(0.0, |m| m.signal_cps)
    }

    pub fn car(&self) -> Option<Estimate> {
        self.primary().and_then(|m| m.car)
    }

    pub fn g2(&self) -> Option<Estimate> {
        self.primary().and_then(|m| m.g2)
    }
}

fn nonzero_g2(t: &Tally) -> Result<f64> {
    let g = g2_estimator(t)?;
    if g == 0.0 {
        return Err(Error::Undefined {
            quantity: "g2 ratio",
            reason: "no triple coincidences with multiplexing disabled",
        });
    }
    Ok(g)
}
