//! Loss, delay and routing applied to idler photons, plus the beamsplitter
//! used for the g² measurement.
//!
//! Loss is independent Bernoulli survival per photon. Every thinning step
//! consumes exactly one uniform per input photon whatever the transmission,
//! so two runs that differ only in a loss figure see the same draws.

use serde::{Deserialize, Serialize};

use crate::controller::RoutingDecision;
use crate::error::{Error, Result};
use crate::event::PairEvent;
use crate::grid::TimeGrid;
use crate::rng::RandomStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub signal_transmission: f64,
    pub idler_base_transmission: f64,
    pub switch_insertion_loss_db: f64,
    /// Switches in the idler path. Defaults to `stages + 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_switches: Option<u32>,
    /// Extra loss of one long (delaying) arm relative to the short arm.
    pub long_path_extra_loss_db: f64,
    pub predelay_ns: f64,
    /// Delay of the first stage's long arm; stage `j` delays by `2^j` times this.
    pub long_path_delay_ns: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            signal_transmission: 1.0,
            idler_base_transmission: 1.0,
            switch_insertion_loss_db: 1.0,
            n_switches: None,
            long_path_extra_loss_db: 1.0,
            // about 120 m of fiber
            predelay_ns: 600.0,
            long_path_delay_ns: 100.0,
        }
    }
}

impl ChannelParams {
    /// A channel with no loss anywhere.
    pub fn lossless() -> Self {
        Self {
            switch_insertion_loss_db: 0.0,
            long_path_extra_loss_db: 0.0,
            ..Self::default()
        }
    }

    pub fn switch_count(&self, grid: &TimeGrid) -> u32 {
        self.n_switches.unwrap_or(grid.stages() + 1)
    }

    /// Survival probability of an idler routed through a path that delays
    /// it by `delay_bins` bins. Each set bit of the delay is one traversed
    /// long arm.
    pub fn path_transmission(&self, delay_bins: u32, grid: &TimeGrid) -> f64 {
        let loss_db = self.switch_count(grid) as f64 * self.switch_insertion_loss_db
            + delay_bins.count_ones() as f64 * self.long_path_extra_loss_db;
        self.idler_base_transmission * 10f64.powf(-loss_db / 10.0)
    }

    /// Long-arm transmission relative to the short arm.
    pub fn long_to_short_ratio(&self) -> f64 {
        10f64.powf(-self.long_path_extra_loss_db / 10.0)
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        for (key, t) in [
            ("channel.signal_transmission", self.signal_transmission),
            ("channel.idler_base_transmission", self.idler_base_transmission),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config(key, format!("must be in [0, 1], got {t}")));
            }
        }
        for (key, db) in [
            ("channel.switch_insertion_loss_db", self.switch_insertion_loss_db),
            ("channel.long_path_extra_loss_db", self.long_path_extra_loss_db),
        ] {
            if !(db.is_finite() && db >= 0.0) {
                return Err(Error::config(key, format!("must be a non-negative loss, got {db}")));
            }
        }
        if !(self.predelay_ns.is_finite() && self.predelay_ns >= 0.0) {
            return Err(Error::config(
                "channel.predelay_ns",
                format!("must be a non-negative duration, got {}", self.predelay_ns),
            ));
        }
        if (self.long_path_delay_ns - grid.bin_width_ns).abs() > 1e-9 * grid.bin_width_ns {
            return Err(Error::config(
                "channel.long_path_delay_ns",
                format!(
                    "must equal the bin width ({} ns) so delayed photons land in the output window, got {}",
                    grid.bin_width_ns, self.long_path_delay_ns
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct G2SplitterParams {
    pub split_ratio: f64,
    pub arm_delay_ns: f64,
}

impl Default for G2SplitterParams {
    fn default() -> Self {
        Self {
            split_ratio: 0.5,
            arm_delay_ns: 500.0,
        }
    }
}

impl G2SplitterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::config(
                "g2.split_ratio",
                format!("must be in (0, 1), got {}", self.split_ratio),
            ));
        }
        if !(self.arm_delay_ns.is_finite() && self.arm_delay_ns > 0.0) {
            return Err(Error::config(
                "g2.arm_delay_ns",
                format!("must be a positive duration, got {}", self.arm_delay_ns),
            ));
        }
        Ok(())
    }
}

pub fn db_to_transmission(loss_db: f64) -> Result<f64> {
    if !(loss_db >= 0.0) {
        return Err(Error::param("loss_db", format!("must be >= 0, got {loss_db}")));
    }
    Ok(10f64.powf(-loss_db / 10.0))
}

/// Keeps each event independently with probability `transmission`.
pub fn bernoulli_thin<T>(events: Vec<T>, transmission: f64, rng: &mut RandomStream) -> Vec<T> {
    let mut events = events;
    thin_in_place(&mut events, transmission, rng);
    events
}

pub(crate) fn thin_in_place<T>(events: &mut Vec<T>, transmission: f64, rng: &mut RandomStream) {
    debug_assert!((0.0..=1.0).contains(&transmission));
    events.retain(|_| rng.uniform() < transmission);
}

/// Sends a cycle's idler photons through the pre-delay and the switch
/// network configured by `decision`.
///
/// Every photon of the cycle gets the selected path's delay and loss;
/// only photons from the selected bin land in the output window (the final
/// bin of the cycle shifted by the pre-delay). The others arrive outside
/// any gate.
pub fn route_idler(
    events: &[PairEvent],
    decision: &RoutingDecision,
    ch: &ChannelParams,
    grid: &TimeGrid,
    rng: &mut RandomStream,
) -> Result<Vec<PairEvent>> {
    let mut out = Vec::with_capacity(events.len());
    route_idler_into(events, decision, ch, grid, rng, &mut out)?;
    Ok(out)
}

pub(crate) fn route_idler_into(
    events: &[PairEvent],
    decision: &RoutingDecision,
    ch: &ChannelParams,
    grid: &TimeGrid,
    rng: &mut RandomStream,
    out: &mut Vec<PairEvent>,
) -> Result<()> {
    out.clear();
    let RoutingDecision::Route {
        bin, delay_bins, ..
    } = *decision
    else {
        return Ok(());
    };
    if bin + delay_bins != grid.final_bin() {
        return Err(Error::Feasibility(format!(
            "a delay of {delay_bins} bins cannot move bin {bin} into the output bin {}",
            grid.final_bin()
        )));
    }
    if (ch.long_path_delay_ns - grid.bin_width_ns).abs() > 1e-9 * grid.bin_width_ns {
        return Err(Error::Feasibility(format!(
            "long-arm delay {} ns does not match the {} ns bin width",
            ch.long_path_delay_ns, grid.bin_width_ns
        )));
    }
    let shift = ch.predelay_ns + delay_bins as f64 * ch.long_path_delay_ns;
    let transmission = ch.path_transmission(delay_bins, grid);
    for ev in events {
        if rng.uniform() < transmission {
            out.push(PairEvent {
                t_ns: ev.t_ns + shift,
                ..*ev
            });
        }
    }
    Ok(())
}

/// Splits photons on the g² beamsplitter. Port 3 carries the extra fiber
/// delay.
pub fn split_for_g2(
    events: &[PairEvent],
    p: &G2SplitterParams,
    rng: &mut RandomStream,
) -> (Vec<PairEvent>, Vec<PairEvent>) {
    let mut port2 = Vec::new();
    let mut port3 = Vec::new();
    for ev in events {
        if rng.uniform() < p.split_ratio {
            port2.push(*ev);
        } else {
            port3.push(PairEvent {
                t_ns: ev.t_ns + p.arm_delay_ns,
                ..*ev
            });
        }
    }
    (port2, port3)
}
