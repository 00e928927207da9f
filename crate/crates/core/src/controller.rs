//! Per-cycle routing logic of the FPGA controller.
//!
//! Each clock cycle the controller looks at the herald clicks of that
//! cycle, picks the bin of the earliest click, and sets the switch network
//! so that the idler from that bin is delayed into the final bin of the
//! cycle, where the gated idler detector is armed. Cycles are independent:
//! switches and gates reset every period.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::Detection;
use crate::grid::TimeGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecisionKind {
    Early,
    Late,
    Blocked,
}

impl fmt::Display for DecisionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecisionKind::Early => "Early",
            DecisionKind::Late => "Late",
            DecisionKind::Blocked => "Blocked",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RoutingDecision {
    Blocked,
    /// Route the idlers of `bin` through a path delaying them by
    /// `delay_bins` bins. `herald` is the click that selected the bin.
    Route {
        bin: u32,
        delay_bins: u32,
        herald: Detection,
    },
}

impl RoutingDecision {
    pub fn kind(&self) -> DecisionKind {
        match self {
            RoutingDecision::Blocked => DecisionKind::Blocked,
            RoutingDecision::Route { delay_bins: 0, .. } => DecisionKind::Late,
            RoutingDecision::Route { .. } => DecisionKind::Early,
        }
    }

    pub fn deciding_herald_t_ns(&self) -> Option<f64> {
        match self {
            RoutingDecision::Blocked => None,
            RoutingDecision::Route { herald, .. } => Some(herald.t_ns),
        }
    }

    pub fn herald(&self) -> Option<&Detection> {
        match self {
            RoutingDecision::Blocked => None,
            RoutingDecision::Route { herald, .. } => Some(herald),
        }
    }
}

/// Whether the multiplexer is active.
///
/// `Disabled` holds the switches on the short path and arms the gate only
/// for heralds in the final bin, so both modes see the same optical loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerMode {
    Enabled,
    Disabled,
}

impl fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControllerMode::Enabled => "enabled",
            ControllerMode::Disabled => "disabled",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub decision_latency_ns: f64,
    pub switch_settle_ns: f64,
    /// Copied from the channel's pre-delay when the experiment is built.
    #[serde(skip)]
    pub idler_predelay_ns: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            decision_latency_ns: 150.0,
            switch_settle_ns: 100.0,
            idler_predelay_ns: 600.0,
        }
    }
}

impl ControllerConfig {
    /// The herald's own idler must reach the switches after they settle.
    pub fn check_feasible(&self) -> Result<()> {
        if self.idler_predelay_ns < self.decision_latency_ns + self.switch_settle_ns {
            return Err(Error::Feasibility(format!(
                "idler pre-delay {} ns is shorter than decision latency {} ns plus switch settling {} ns",
                self.idler_predelay_ns, self.decision_latency_ns, self.switch_settle_ns
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("controller.decision_latency_ns", self.decision_latency_ns),
            ("controller.switch_settle_ns", self.switch_settle_ns),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, format!("must be a non-negative duration, got {v}")));
            }
        }
        self.check_feasible()
    }
}

/// Enabled-mode decision: the earliest click in the cycle selects its bin.
/// `clicks` must be time-sorted and belong to a single cycle.
pub fn decide(herald_clicks: &[Detection], grid: &TimeGrid) -> RoutingDecision {
    let Some(first) = herald_clicks.first() else {
        return RoutingDecision::Blocked;
    };
    let (_, bin) = grid.bin_of(first.t_ns);
    RoutingDecision::Route {
        bin,
        delay_bins: grid.final_bin() - bin,
        herald: *first,
    }
}

/// Disabled-mode decision: static short path, gate armed by the earliest
/// click in the final bin; clicks in earlier bins are ignored.
pub fn decide_disabled(herald_clicks: &[Detection], grid: &TimeGrid) -> RoutingDecision {
    let final_bin = grid.final_bin();
    herald_clicks
        .iter()
        .find(|c| grid.bin_of(c.t_ns).1 == final_bin)
        .map_or(RoutingDecision::Blocked, |c| RoutingDecision::Route {
            bin: final_bin,
            delay_bins: 0,
            herald: *c,
        })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateWindow {
    pub start_ns: f64,
    pub width_ns: f64,
}

impl GateWindow {
    pub fn end_ns(&self) -> f64 {
        self.start_ns + self.width_ns
    }

    pub fn contains(&self, t_ns: f64) -> bool {
        t_ns >= self.start_ns && t_ns < self.end_ns()
    }

    pub fn shifted(&self, by_ns: f64) -> GateWindow {
        GateWindow {
            start_ns: self.start_ns + by_ns,
            width_ns: self.width_ns,
        }
    }
}

/// Switch commands and output window for one cycle.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Schedule {
    /// Absolute times at which switch commands are issued, one per switch.
    pub commands_ns: Vec<f64>,
    pub settle_ns: f64,
    /// The cycle's final bin shifted by the idler pre-delay.
    pub gate: Option<GateWindow>,
}

impl Schedule {
    /// True if a photon reaching the switches at `t_ns` meets a switch in
    /// transition and is lost.
    pub fn drops_at_switch(&self, t_ns: f64) -> bool {
        self.commands_ns
            .iter()
            .any(|&c| t_ns >= c && t_ns < c + self.settle_ns)
    }
}

/// Switch commands follow the deciding herald by the decision latency; the
/// gate covers the final bin of the cycle after the pre-delay.
pub fn schedule(
    decision: &RoutingDecision,
    cfg: &ControllerConfig,
    cycle: u64,
    grid: &TimeGrid,
    n_switches: u32,
) -> Result<Schedule> {
    cfg.check_feasible()?;
    let RoutingDecision::Route { herald, .. } = decision else {
        return Ok(Schedule::default());
    };
    let command = herald.t_ns + cfg.decision_latency_ns;
    // the herald's own idler reaches the switches at herald + pre-delay
    if command + cfg.switch_settle_ns > herald.t_ns + cfg.idler_predelay_ns {
        return Err(Error::Feasibility(format!(
            "switches settle at {} ns, after the heralded photon arrives at {} ns",
            command + cfg.switch_settle_ns,
            herald.t_ns + cfg.idler_predelay_ns
        )));
    }
    Ok(Schedule {
        commands_ns: vec![command; n_switches as usize],
        settle_ns: cfg.switch_settle_ns,
        gate: Some(output_window(cycle, grid, cfg.idler_predelay_ns)),
    })
}

pub fn output_window(cycle: u64, grid: &TimeGrid, predelay_ns: f64) -> GateWindow {
    GateWindow {
        start_ns: grid.cycle_start_ns(cycle) + grid.bin_start_ns(grid.final_bin()) + predelay_ns,
        width_ns: grid.bin_width_ns,
    }
}

/// Runtime controller: mode plus timing.
#[derive(Clone, Debug)]
pub struct Controller {
    pub mode: ControllerMode,
    pub cfg: ControllerConfig,
    pub n_switches: u32,
}

impl Controller {
    pub fn decide(&self, herald_clicks: &[Detection], grid: &TimeGrid) -> RoutingDecision {
        match self.mode {
            ControllerMode::Enabled => decide(herald_clicks, grid),
            ControllerMode::Disabled => decide_disabled(herald_clicks, grid),
        }
    }

    pub fn schedule(&self, decision: &RoutingDecision, cycle: u64, grid: &TimeGrid) -> Result<Schedule> {
        match self.mode {
            ControllerMode::Enabled => schedule(decision, &self.cfg, cycle, grid, self.n_switches),
            // static routing: no commands, gate only
            ControllerMode::Disabled => Ok(Schedule {
                commands_ns: Vec::new(),
                settle_ns: self.cfg.switch_settle_ns,
                gate: decision
                    .herald()
                    .map(|_| output_window(cycle, grid, self.cfg.idler_predelay_ns)),
            }),
        }
    }
}

/// One line of the optional debug trace.
pub fn trace_line(cycle: u64, decision: &RoutingDecision, schedule: &Schedule) -> String {
    let mut line = format!("cycle={cycle} decision={}", decision.kind());
    if let RoutingDecision::Route {
        bin,
        delay_bins,
        herald,
    } = decision
    {
        line.push_str(&format!(" bin={bin} delay_bins={delay_bins} herald_t_ns={}", herald.t_ns));
    }
    if !schedule.commands_ns.is_empty() {
        let cmds: Vec<String> = schedule.commands_ns.iter().map(|c| c.to_string()).collect();
        line.push_str(&format!(" commands_ns={}", cmds.join(";")));
    }
    if let Some(g) = schedule.gate {
        line.push_str(&format!(" gate_ns={}+{}", g.start_ns, g.width_ns));
    }
    line
}
