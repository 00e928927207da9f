//! Cycle-by-cycle simulation and the run, g² and sweep drivers.
//!
//! A run is cut into a fixed number of contiguous cycle blocks whatever
//! the thread count. Blocks are simulated independently (detector dead-time
//! state starts fresh in each block) and merged in block order, so results
//! depend only on the configuration, the seed and the cycle count.
//!
//! Enabled and disabled controllers are simulated side by side on the same
//! generated pairs and herald clicks. Idler-side draws come from streams
//! keyed by cycle and purpose, so both modes also share those random
//! numbers wherever their photons coincide.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::controller::{Controller, ControllerMode, GateWindow, RoutingDecision, trace_line};
use crate::detector::{FreeRunningDetector, GatedDetector};
use crate::error::Result;
use crate::event::{Arrival, Channel, Detection, PairEvent};
use crate::metrics::{classify_gated_click, ClickClass, MetricsReport};
use crate::optics::{route_idler_into, G2SplitterParams};
use crate::rng::{Purpose, RandomStream};
use crate::source::{generate_cycle_into, PairCountSampler};
use crate::tally::Tally;

/// Number of cycle partitions used for merging and jackknife errors.
pub const DEFAULT_BLOCKS: usize = 32;

/// Per-partition tallies of one controller mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeRun {
    pub mode: ControllerMode,
    pub blocks: Vec<Tally>,
}

impl ModeRun {
    pub fn total(&self) -> Tally {
        self.blocks.iter().copied().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    pub runs: Vec<ModeRun>,
    /// One line per cycle and mode, in cycle order, when tracing was asked for.
    pub trace: Vec<String>,
}

impl SimOutput {
    pub fn run(&self, mode: ControllerMode) -> Option<&ModeRun> {
        self.runs.iter().find(|r| r.mode == mode)
    }
}

/// Contiguous block boundaries: block `i` covers `[i n / k, (i + 1) n / k)`.
pub fn block_ranges(n_cycles: u64, n_blocks: usize) -> Vec<(u64, u64)> {
    let k = (n_blocks.max(1) as u64).min(n_cycles.max(1));
    (0..k)
        .map(|i| {
            let lo = (i as u128 * n_cycles as u128 / k as u128) as u64;
            let hi = ((i + 1) as u128 * n_cycles as u128 / k as u128) as u64;
            (lo, hi)
        })
        .collect()
}

/// Simulates `n_cycles` cycles for each of `modes`.
pub fn simulate(
    cfg: &ExperimentConfig,
    modes: &[ControllerMode],
    n_cycles: u64,
    n_blocks: usize,
    trace: bool,
) -> Result<SimOutput> {
    let sampler = cfg.source.sampler()?;
    let grid = cfg.grid.clone();
    let seed = cfg.seed;
    simulate_with_source(cfg, modes, n_cycles, n_blocks, trace, move |cycle, pairs| {
        let mut rng = RandomStream::for_cycle(seed, cycle, Purpose::Generation);
        generate_cycle_into(&sampler, &grid, cycle, &mut rng, pairs);
    })
}

/// Like [`simulate`], with the pairs of each cycle supplied by `source`
/// instead of the configured pair statistics. `source` fills the buffer
/// for the given cycle, with cycle-relative timestamps.
pub fn simulate_with_source<F>(
    cfg: &ExperimentConfig,
    modes: &[ControllerMode],
    n_cycles: u64,
    n_blocks: usize,
    trace: bool,
    source: F,
) -> Result<SimOutput>
where
    F: Fn(u64, &mut Vec<PairEvent>) + Sync,
{
    cfg.validate()?;
    let sim = CycleSimulator::new(cfg)?;
    let ranges = block_ranges(n_cycles, n_blocks);
    let blocks: Vec<BlockResult> = ranges
        .par_iter()
        .map(|&(lo, hi)| sim.run_block(modes, lo, hi, trace, &source))
        .collect::<Result<_>>()?;
    let mut runs: Vec<ModeRun> = modes
        .iter()
        .map(|&mode| ModeRun {
            mode,
            blocks: Vec::with_capacity(blocks.len()),
        })
        .collect();
    let mut lines = Vec::new();
    for block in blocks {
        for (run, t) in runs.iter_mut().zip(block.tallies) {
            run.blocks.push(t);
        }
        lines.extend(block.trace);
    }
    Ok(SimOutput { runs, trace: lines })
}

struct BlockResult {
    tallies: Vec<Tally>,
    trace: Vec<String>,
}

struct PendingGate {
    gate: GateWindow,
    arrivals: Vec<Arrival>,
    direct_clicked: bool,
    rng: RandomStream,
}

struct ModeState {
    controller: Controller,
    detector: GatedDetector,
    pending: VecDeque<PendingGate>,
    tally: Tally,
}

impl ModeState {
    /// Opens the delayed-arm gates that start before `before_ns`.
    fn flush(&mut self, before_ns: f64) -> Result<()> {
        while self.pending.front().is_some_and(|p| p.gate.start_ns < before_ns) {
            let mut p = self.pending.pop_front().expect("checked non-empty");
            let click = self
                .detector
                .detect_gate(&p.gate, &p.arrivals, Channel::IdlerPort3, &mut p.rng)?;
            if click.is_some() {
                self.tally.r13 += 1;
                if p.direct_clicked {
                    self.tally.c123 += 1;
                }
            }
        }
        Ok(())
    }
}

/// Reusable per-cycle machinery for one configuration.
pub struct CycleSimulator<'a> {
    cfg: &'a ExperimentConfig,
    sampler: PairCountSampler,
    g2: Option<G2SplitterParams>,
    n_switches: u32,
}

/// Scratch buffers reused from cycle to cycle.
#[derive(Default)]
struct Buffers {
    pairs: Vec<PairEvent>,
    signal: Vec<Arrival>,
    heralds: Vec<Detection>,
    routed: Vec<PairEvent>,
}

impl<'a> CycleSimulator<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        Ok(Self {
            cfg,
            sampler: cfg.source.sampler()?,
            g2: cfg.g2.clone(),
            n_switches: cfg.channel.switch_count(&cfg.grid),
        })
    }

    fn mode_state(&self, mode: ControllerMode, period: f64) -> ModeState {
        ModeState {
            controller: Controller {
                mode,
                cfg: self.cfg.controller_config(),
                n_switches: self.n_switches,
            },
            detector: GatedDetector::new(self.cfg.idler_detector.clone()),
            pending: VecDeque::new(),
            tally: Tally::empty(period),
        }
    }

    fn run_block<F>(&self, modes: &[ControllerMode], lo: u64, hi: u64, trace: bool, source: &F) -> Result<BlockResult>
    where
        F: Fn(u64, &mut Vec<PairEvent>),
    {
        let period = self.cfg.grid.cycle_period_ns();
        let mut states: Vec<ModeState> = modes.iter().map(|&m| self.mode_state(m, period)).collect();
        let mut herald_det = FreeRunningDetector::new(self.cfg.herald_detector.clone(), Channel::Signal);
        let mut buf = Buffers::default();
        let mut lines = Vec::new();
        for cycle in lo..hi {
            source(cycle, &mut buf.pairs);
            self.herald_clicks(cycle, &mut herald_det, &mut buf);
            for state in states.iter_mut() {
                let line = self.step(cycle, state, &buf.pairs, &buf.heralds, &mut buf.routed, trace)?;
                if let Some(l) = line {
                    lines.push(if modes.len() > 1 {
                        format!("mode={} {l}", state.controller.mode)
                    } else {
                        l
                    });
                }
            }
        }
        let mut tallies = Vec::with_capacity(states.len());
        for mut s in states {
            s.flush(f64::INFINITY)?;
            tallies.push(s.tally);
        }
        Ok(BlockResult { tallies, trace: lines })
    }

    fn herald_clicks(&self, cycle: u64, det: &mut FreeRunningDetector, buf: &mut Buffers) {
        buf.heralds.clear();
        if buf.pairs.is_empty() && self.cfg.herald_detector.dark_rate_hz == 0.0 {
            return;
        }
        let period = self.cfg.grid.cycle_period_ns();
        let mut rng = RandomStream::for_cycle(self.cfg.seed, cycle, Purpose::Herald);
        buf.signal.clear();
        for p in &buf.pairs {
            if rng.uniform() < self.cfg.channel.signal_transmission {
                buf.signal.push(p.arrival(period));
            }
        }
        det.detect(&buf.signal, self.cfg.grid.cycle_start_ns(cycle), period, &mut rng, &mut buf.heralds);
    }

    /// Runs one mode through one cycle. Returns the trace line if asked.
    fn step(
        &self,
        cycle: u64,
        state: &mut ModeState,
        pairs: &[PairEvent],
        heralds: &[Detection],
        routed: &mut Vec<PairEvent>,
        trace: bool,
    ) -> Result<Option<String>> {
        let grid = &self.cfg.grid;
        let period = grid.cycle_period_ns();
        let decision = state.controller.decide(heralds, grid);
        state.tally.cycles += 1;
        state.tally.signal_clicks += heralds.len() as u64;
        let schedule = state.controller.schedule(&decision, cycle, grid)?;
        let line = trace.then(|| trace_line(cycle, &decision, &schedule));
        let Some(window) = schedule.gate else {
            return Ok(line);
        };
        state.tally.heralds += 1;
        state.tally.gates += 1;

        let mut rng = RandomStream::for_cycle(self.cfg.seed, cycle, Purpose::IdlerPath);
        route_idler_into(pairs, &decision, &self.cfg.channel, grid, &mut rng, routed)?;
        if let RoutingDecision::Route { delay_bins, .. } = decision {
            if !schedule.commands_ns.is_empty() {
                // photons reach the switches one pre-delay after emission
                let cycle_start = grid.cycle_start_ns(cycle);
                let extra = delay_bins as f64 * self.cfg.channel.long_path_delay_ns;
                routed.retain(|ev| !schedule.drops_at_switch(cycle_start + ev.t_ns - extra));
            }
        }

        let gate_a = self.cfg.idler_detector.gate_for(&window);
        let (direct, delayed): (Vec<Arrival>, Option<Vec<Arrival>>) = match &self.g2 {
            None => (routed.iter().map(|e| e.arrival(period)).collect(), None),
            Some(g2) => {
                let mut rng = RandomStream::for_cycle(self.cfg.seed, cycle, Purpose::Splitter);
                let (p2, p3) = crate::optics::split_for_g2(routed, g2, &mut rng);
                (
                    p2.iter().map(|e| e.arrival(period)).collect(),
                    Some(p3.iter().map(|e| e.arrival(period)).collect()),
                )
            }
        };

        state.flush(gate_a.start_ns)?;
        let mut rng = RandomStream::for_cycle(self.cfg.seed, cycle, Purpose::IdlerDetection);
        let click = state
            .detector
            .detect_gate(&gate_a, &direct, Channel::IdlerPort2, &mut rng)?;
        if let Some(c) = &click {
            state.tally.r12 += 1;
            match classify_gated_click(c, &decision) {
                ClickClass::TrueCoincidence => state.tally.coincidences += 1,
                ClickClass::Accidental => state.tally.accidentals += 1,
            }
        }
        if let (Some(arrivals), Some(g2)) = (delayed, &self.g2) {
            state.pending.push_back(PendingGate {
                gate: gate_a.shifted(g2.arm_delay_ns),
                arrivals,
                direct_clicked: click.is_some(),
                rng: RandomStream::for_cycle(self.cfg.seed, cycle, Purpose::DelayedArmDetection),
            });
        }
        if self.probe_clicks(cycle, &decision) {
            state.tally.accidentals_shifted += 1;
        }
        Ok(line)
    }

    /// Experiment-style accidental estimate: light of an independent bin,
    /// sent through the same path to the same kind of gate, with nothing
    /// heralded in it.
    fn probe_clicks(&self, cycle: u64, decision: &RoutingDecision) -> bool {
        let RoutingDecision::Route { delay_bins, .. } = *decision else {
            return false;
        };
        let mut rng = RandomStream::for_cycle(self.cfg.seed, cycle, Purpose::AccidentalProbe);
        let port = self.g2.as_ref().map_or(1.0, |g| g.split_ratio);
        let p_click = self.cfg.channel.path_transmission(delay_bins, &self.cfg.grid)
            * port
            * self.cfg.idler_detector.efficiency;
        let n = self.sampler.sample(&mut rng);
        let mut clicked = false;
        for _ in 0..n {
            clicked |= rng.uniform() < p_click;
        }
        let dark = self.cfg.idler_detector.dark_probability_per_gate();
        clicked |= dark > 0.0 && rng.uniform() < dark;
        clicked
    }
}

/// Result of [`run_experiment`]: the report plus the raw merged tallies.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub report: MetricsReport,
    pub enabled: Option<Tally>,
    pub disabled: Option<Tally>,
    pub trace: Vec<String>,
}

/// Simulates `n_cycles` cycles in the configured mode(s). With mode
/// `both`, enabled and disabled share the seed and the ratios are filled.
pub fn run_experiment(cfg: &ExperimentConfig, n_cycles: u64) -> Result<RunResult> {
    run_experiment_traced(cfg, n_cycles, false)
}

pub fn run_experiment_traced(cfg: &ExperimentConfig, n_cycles: u64, trace: bool) -> Result<RunResult> {
    let out = simulate(cfg, cfg.mode.controller_modes(), n_cycles, DEFAULT_BLOCKS, trace)?;
    let en = out.run(ControllerMode::Enabled);
    let dis = out.run(ControllerMode::Disabled);
    let report = MetricsReport::from_blocks(
        cfg.mu(),
        en.map(|r| r.blocks.as_slice()),
        dis.map(|r| r.blocks.as_slice()),
    );
    Ok(RunResult {
        report,
        enabled: en.map(ModeRun::total),
        disabled: dis.map(ModeRun::total),
        trace: out.trace,
    })
}

/// Runs the split-detection measurement: the output goes through the
/// beamsplitter, the delayed port is gated one arm delay after the direct
/// port on the same detector. Uses the default splitter when the
/// configuration has none.
pub fn run_g2_experiment(cfg: &ExperimentConfig, mode: ControllerMode, n_cycles: u64) -> Result<Tally> {
    let mut cfg = cfg.clone();
    cfg.g2.get_or_insert_with(G2SplitterParams::default);
    let out = simulate(&cfg, &[mode], n_cycles, DEFAULT_BLOCKS, false)?;
    Ok(out.runs[0].total())
}

/// One row of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub report: MetricsReport,
}

/// Runs the configuration once per value of the numeric key `axis`, in the
/// order given.
pub fn run_sweep(cfg: &ExperimentConfig, axis: &str, values: &[f64], n_cycles: u64) -> Result<Vec<SweepRow>> {
    crate::config::check_axis(axis)?;
    values
        .iter()
        .map(|&v| {
            let point = cfg.with_value(axis, v)?;
            Ok(SweepRow {
                axis_value: v,
                report: run_experiment(&point, n_cycles)?.report,
            })
        })
        .collect()
}
