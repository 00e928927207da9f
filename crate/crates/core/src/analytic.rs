//! Exact per-cycle probabilities for the ideal-timing model, by enumeration
//! over truncated photon numbers.
//!
//! The oracle covers the same protocol as the simulator without dark counts
//! and without detector dead time. Bins are independent, so a cycle factors
//! into "no herald in the bins before the deciding one" times the outcome
//! of the deciding bin. Inside that bin the pairs are taken in time order;
//! the first pair whose signal clicks is the herald, and the gate records
//! the first detected idler photon.
//!
//! Two evaluations are provided: a brute-force joint table over every
//! photon-number vector and herald pattern (small grids only), and a
//! factorized form valid for any number of stages. Tests check them
//! against each other and against the Monte Carlo simulator.

use std::collections::BTreeMap;

use crate::config::ExperimentConfig;
use crate::controller::ControllerMode;
use crate::error::{Error, Result};
use crate::source::ModeCount;

pub const DEFAULT_CUTOFF: usize = 8;
/// Largest truncated probability mass per cycle the oracle accepts.
pub const TAIL_LIMIT: f64 = 1e-10;
pub const MAX_STAGES: u32 = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleParams {
    pub mu: f64,
    pub mode_count: ModeCount,
    pub signal_transmission: f64,
    pub herald_efficiency: f64,
    /// Idler survival probability for each delay, indexed by delay in bins
    /// (`0..2^stages`).
    pub transmissions: Vec<f64>,
    pub idler_efficiency: f64,
    /// Fraction sent to the direct port of the g² splitter, if present.
    pub split_ratio: Option<f64>,
    pub stages: u32,
    pub cutoff: usize,
}

impl OracleParams {
    /// Ideal detectors and lossless, symmetric paths.
    pub fn ideal(mu: f64, stages: u32) -> Self {
        Self {
            mu,
            mode_count: ModeCount::Infinite,
            signal_transmission: 1.0,
            herald_efficiency: 1.0,
            transmissions: vec![1.0; 1 << stages],
            idler_efficiency: 1.0,
            split_ratio: None,
            stages,
            cutoff: DEFAULT_CUTOFF,
        }
    }

    /// The oracle for a simulator configuration. Fails for features the
    /// oracle leaves out: dark counts, dead time and settling windows that
    /// can reach photons of the deciding bin.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        for (name, v) in [
            ("herald_detector.dark_rate_hz", cfg.herald_detector.dark_rate_hz),
            ("idler_detector.dark_rate_hz", cfg.idler_detector.dark_rate_hz),
            ("herald_detector.dead_time_ns", cfg.herald_detector.dead_time_ns),
            ("idler_detector.dead_time_ns", cfg.idler_detector.dead_time_ns),
        ] {
            if v != 0.0 {
                return Err(Error::param("config", format!("the oracle needs {name} = 0")));
            }
        }
        let ctl = cfg.controller_config();
        let margin = ctl.idler_predelay_ns - ctl.decision_latency_ns - ctl.switch_settle_ns;
        if margin < cfg.grid.bin_width_ns {
            return Err(Error::param(
                "config",
                "switch settling can reach photons of the deciding bin",
            ));
        }
        if cfg.idler_detector.gate_offset_ns != 0.0
            || cfg.idler_detector.gate_width_ns != cfg.grid.bin_width_ns
        {
            return Err(Error::param("config", "the oracle needs the gate to cover the output bin exactly"));
        }
        let bins = cfg.grid.bins_per_cycle;
        Ok(Self {
            mu: cfg.mu(),
            mode_count: cfg.source.mode_count,
            signal_transmission: cfg.channel.signal_transmission,
            herald_efficiency: cfg.herald_detector.efficiency,
            transmissions: (0..bins).map(|d| cfg.channel.path_transmission(d, &cfg.grid)).collect(),
            idler_efficiency: cfg.idler_detector.efficiency,
            split_ratio: cfg.g2.as_ref().map(|g| g.split_ratio),
            stages: cfg.grid.stages(),
            cutoff: DEFAULT_CUTOFF,
        })
    }

    pub fn bins(&self) -> usize {
        1 << self.stages
    }

    fn eta_signal(&self) -> f64 {
        self.signal_transmission * self.herald_efficiency
    }

    fn check(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::param("mu", format!("must be >= 0, got {}", self.mu)));
        }
        if self.stages == 0 || self.stages > MAX_STAGES {
            return Err(Error::param("stages", format!("must be in 1..={MAX_STAGES}, got {}", self.stages)));
        }
        if self.transmissions.len() != self.bins() {
            return Err(Error::param(
                "transmissions",
                format!("need one per delay ({}), got {}", self.bins(), self.transmissions.len()),
            ));
        }
        if self.mode_count == ModeCount::Finite(0) {
            return Err(Error::param("mode_count", "must be at least 1"));
        }
        let tail = cycle_tail(self);
        if tail > TAIL_LIMIT {
            return Err(Error::CutoffTooSmall {
                cutoff: self.cutoff,
                tail,
                limit: TAIL_LIMIT,
            });
        }
        Ok(())
    }
}

/// Probability of `n` pairs in one bin, from the closed forms.
pub fn pair_pmf(n: usize, mu: f64, modes: ModeCount) -> f64 {
    match modes {
        ModeCount::Infinite => {
            if mu == 0.0 {
                return if n == 0 { 1.0 } else { 0.0 };
            }
            let ln = -mu + n as f64 * mu.ln() - (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
            ln.exp()
        }
        ModeCount::Finite(m) => {
            // n + M - 1 choose n, times p^n (1 - p)^M with p = (mu/M) / (1 + mu/M)
            let m = m as f64;
            let x = mu / m;
            let ln_binom: f64 = (0..n).map(|i| ((m + i as f64) / (i as f64 + 1.0)).ln()).sum();
            if x == 0.0 {
                return if n == 0 { 1.0 } else { 0.0 };
            }
            (ln_binom + n as f64 * (x / (1.0 + x)).ln() - m * (1.0 + x).ln()).exp()
        }
    }
}

/// Mass above the cutoff in one bin, summed forward from `cutoff + 1`.
pub fn bin_tail(mu: f64, modes: ModeCount, cutoff: usize) -> f64 {
    let mut tail = 0.0;
    for n in cutoff + 1..cutoff + 10_000 {
        let p = pair_pmf(n, mu, modes);
        tail += p;
        if p < tail * 1e-18 || p == 0.0 {
            break;
        }
    }
    tail
}

fn cycle_tail(p: &OracleParams) -> f64 {
    let b = bin_tail(p.mu, p.mode_count, p.cutoff);
    -(p.bins() as f64 * (-b).ln_1p()).exp_m1()
}

/// Click recorded by the direct-port gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GateClick {
    None,
    Coincidence,
    Accidental,
}

/// What happens in the deciding bin's output window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GateOutcome {
    pub click: GateClick,
    /// The delayed-port gate clicked (g² setup only).
    pub delayed_click: bool,
    /// Photons reaching the output, before the splitter and detector.
    pub photons: usize,
}

/// Joint outcome distribution for a bin with exactly `n` pairs, restricted
/// to the event that at least one signal photon is detected. Indexed by
/// `outcome_index`.
fn heralded_bin_outcomes(n: usize, t: f64, p: &OracleParams) -> Vec<f64> {
    let cut = p.cutoff;
    let len = 2 * 3 * 2 * (cut + 1);
    let idx = |hs: usize, click: usize, del: usize, ph: usize| ((hs * 3 + click) * 2 + del) * (cut + 1) + ph;
    let eta_s = p.eta_signal();
    let eta_i = p.idler_efficiency;
    let r = p.split_ratio.unwrap_or(1.0);
    // idler fates: lost, survives undetected, detected direct, detected delayed
    let fates = [
        (1.0 - t, false, false, false),
        (t * (1.0 - eta_i), true, false, false),
        (t * eta_i * r, true, true, false),
        (t * eta_i * (1.0 - r), true, false, true),
    ];
    let mut cur = vec![0.0; len];
    cur[idx(0, 0, 0, 0)] = 1.0;
    for _ in 0..n {
        let mut next = vec![0.0; len];
        for hs in 0..2 {
            for click in 0..3 {
                for del in 0..2 {
                    for ph in 0..=cut.min(n) {
                        let w = cur[idx(hs, click, del, ph)];
                        if w == 0.0 {
                            continue;
                        }
                        for (ps, s_det) in [(eta_s, true), (1.0 - eta_s, false)] {
                            let deciding = s_det && hs == 0;
                            let nhs = hs | s_det as usize;
                            for &(pf, survives, direct, delayed) in &fates {
                                let wt = w * ps * pf;
                                if wt == 0.0 {
                                    continue;
                                }
                                let nclick = if direct && click == 0 {
                                    if deciding {
                                        1
                                    } else {
                                        2
                                    }
                                } else {
                                    click
                                };
                                let ndel = del | delayed as usize;
                                let nph = ph + survives as usize;
                                next[idx(nhs, nclick, ndel, nph)] += wt;
                            }
                        }
                    }
                }
            }
        }
        cur = next;
    }
    // keep the heralded half, re-indexed without the herald flag
    cur[len / 2..].to_vec()
}

fn outcome_of_index(i: usize, cutoff: usize) -> GateOutcome {
    let ph = i % (cutoff + 1);
    let del = (i / (cutoff + 1)) % 2;
    let click = i / (2 * (cutoff + 1));
    GateOutcome {
        click: [GateClick::None, GateClick::Coincidence, GateClick::Accidental][click],
        delayed_click: del == 1,
        photons: ph,
    }
}

/// Probabilities per cycle. Rates of the simulator's tally counters divided
/// by the number of cycles estimate these.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleRates {
    /// A gate opens (the H counter).
    pub p_gate: f64,
    pub p_coincidence: f64,
    pub p_accidental: f64,
    /// Direct-port click.
    pub p_r12: f64,
    /// Delayed-port click.
    pub p_r13: f64,
    pub p_c123: f64,
    /// Click from an independent bin of light sent down the chosen path.
    pub p_probe: f64,
    /// Mean herald-detector clicks per cycle.
    pub signal_clicks: f64,
    /// `photons[n]` = P(gate opens and n photons reach the output).
    pub photons: Vec<f64>,
}

impl CycleRates {
    fn empty(cutoff: usize) -> Self {
        Self {
            p_gate: 0.0,
            p_coincidence: 0.0,
            p_accidental: 0.0,
            p_r12: 0.0,
            p_r13: 0.0,
            p_c123: 0.0,
            p_probe: 0.0,
            signal_clicks: 0.0,
            photons: vec![0.0; cutoff + 1],
        }
    }

    fn add_outcome(&mut self, o: GateOutcome, w: f64) {
        self.p_gate += w;
        match o.click {
            GateClick::None => {}
            GateClick::Coincidence => self.p_coincidence += w,
            GateClick::Accidental => self.p_accidental += w,
        }
        let direct = o.click != GateClick::None;
        if direct {
            self.p_r12 += w;
        }
        if o.delayed_click {
            self.p_r13 += w;
            if direct {
                self.p_c123 += w;
            }
        }
        self.photons[o.photons] += w;
    }

    /// Expected value of the three-port g² estimator in the limit of many
    /// cycles.
    pub fn g2_estimator_limit(&self) -> Result<f64> {
        if self.p_r12 == 0.0 || self.p_r13 == 0.0 {
            return Err(Error::Undefined {
                quantity: "g2",
                reason: "no clicks on one of the split ports",
            });
        }
        Ok(self.p_c123 * self.p_gate / (self.p_r12 * self.p_r13))
    }

    /// P(exactly one photon at the output and a gate open).
    pub fn p_single(&self) -> f64 {
        self.photons.get(1).copied().unwrap_or(0.0)
    }
}

/// How the controller picks among heralded bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinPolicy {
    /// The earliest heralded bin (the implemented controller).
    Earliest,
    /// The latest heralded bin; used only to compare routing rules.
    Latest,
}

struct BinModel {
    pmf: Vec<f64>,
    /// P(no signal click in a bin).
    quiet: f64,
}

impl BinModel {
    fn new(p: &OracleParams) -> Self {
        let pmf: Vec<f64> = (0..=p.cutoff).map(|n| pair_pmf(n, p.mu, p.mode_count)).collect();
        let miss = 1.0 - p.eta_signal();
        let quiet = pmf.iter().enumerate().map(|(n, q)| q * miss.powi(n as i32)).sum();
        Self { pmf, quiet }
    }

    /// Outcome distribution of a heralded bin whose idlers see transmission `t`.
    fn heralded(&self, t: f64, p: &OracleParams) -> Vec<f64> {
        let mut acc = vec![0.0; 2 * 3 * (p.cutoff + 1)];
        for (n, &pn) in self.pmf.iter().enumerate().skip(1) {
            for (a, v) in acc.iter_mut().zip(heralded_bin_outcomes(n, t, p)) {
                *a += pn * v;
            }
        }
        acc
    }

    /// Click probability for an independent bin of light.
    fn probe(&self, t: f64, p: &OracleParams) -> f64 {
        let q = t * p.idler_efficiency * p.split_ratio.unwrap_or(1.0);
        self.pmf
            .iter()
            .enumerate()
            .map(|(n, pn)| pn * (1.0 - (1.0 - q).powi(n as i32)))
            .sum()
    }
}

/// Factorized per-cycle rates for the given controller mode.
pub fn cycle_rates(p: &OracleParams, mode: ControllerMode) -> Result<CycleRates> {
    cycle_rates_with_policy(p, mode, BinPolicy::Earliest)
}

pub fn cycle_rates_with_policy(p: &OracleParams, mode: ControllerMode, policy: BinPolicy) -> Result<CycleRates> {
    p.check()?;
    let bins = p.bins();
    let model = BinModel::new(p);
    let mut rates = CycleRates::empty(p.cutoff);
    rates.signal_clicks = bins as f64 * p.mu * p.eta_signal();
    let deciding: Vec<(usize, f64)> = match mode {
        ControllerMode::Disabled => vec![(bins - 1, 1.0)],
        ControllerMode::Enabled => (0..bins)
            .map(|k| {
                let quiet_bins = match policy {
                    BinPolicy::Earliest => k,
                    BinPolicy::Latest => bins - 1 - k,
                };
                (k, model.quiet.powi(quiet_bins as i32))
            })
            .collect(),
    };
    for (k, weight) in deciding {
        let t = p.transmissions[bins - 1 - k];
        for (i, v) in model.heralded(t, p).into_iter().enumerate() {
            if v != 0.0 {
                rates.add_outcome(outcome_of_index(i, p.cutoff), weight * v);
            }
        }
        let p_herald = 1.0 - model.quiet;
        rates.p_probe += weight * p_herald * model.probe(t, p);
    }
    Ok(rates)
}

/// One entry of the joint table: which bins heralded, and the outcome of
/// the deciding bin (`None` for a blocked cycle).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CycleKey {
    pub herald_pattern: u64,
    pub outcome: Option<GateOutcome>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleTable {
    pub entries: BTreeMap<CycleKey, f64>,
    cutoff: usize,
}

impl CycleTable {
    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn p_blocked(&self) -> f64 {
        self.entries
            .iter()
            .filter(|(k, _)| k.outcome.is_none())
            .map(|(_, v)| v)
            .sum()
    }

    /// Marginal over (herald pattern, output photon number).
    pub fn pattern_photons(&self) -> BTreeMap<(u64, usize), f64> {
        let mut m = BTreeMap::new();
        for (k, v) in &self.entries {
            let n = k.outcome.map_or(0, |o| o.photons);
            *m.entry((k.herald_pattern, n)).or_insert(0.0) += v;
        }
        m
    }

    pub fn rates(&self) -> CycleRates {
        let mut r = CycleRates::empty(self.cutoff);
        for (k, &v) in &self.entries {
            if let Some(o) = k.outcome {
                r.add_outcome(o, v);
            }
        }
        r
    }
}

/// Joint distribution over every photon-number vector up to the cutoff and
/// every herald pattern. Limited to two stages (81 or 6561 vectors).
pub fn exact_cycle_probabilities(p: &OracleParams, mode: ControllerMode) -> Result<CycleTable> {
    p.check()?;
    if p.stages > 2 {
        return Err(Error::param("stages", "the joint table is limited to two stages"));
    }
    let bins = p.bins();
    let cut = p.cutoff;
    let pmf: Vec<f64> = (0..=cut).map(|n| pair_pmf(n, p.mu, p.mode_count)).collect();
    let miss = 1.0 - p.eta_signal();
    // outcomes[d][n]: heralded-bin outcomes with n pairs behind delay d
    let outcomes: Vec<Vec<Vec<f64>>> = p
        .transmissions
        .iter()
        .map(|&t| (0..=cut).map(|n| heralded_bin_outcomes(n, t, p)).collect())
        .collect();
    let mut entries = BTreeMap::new();
    let mut counts = vec![0usize; bins];
    loop {
        let p_counts: f64 = counts.iter().map(|&n| pmf[n]).product();
        for pattern in 0u64..(1 << bins) {
            let heralded = |j: usize| pattern >> j & 1 == 1;
            let decision = match mode {
                ControllerMode::Enabled => (0..bins).find(|&j| heralded(j)),
                ControllerMode::Disabled => heralded(bins - 1).then_some(bins - 1),
            };
            let mut w = p_counts;
            for (j, &n) in counts.iter().enumerate() {
                if Some(j) == decision {
                    continue;
                }
                let quiet = miss.powi(n as i32);
                w *= if heralded(j) { 1.0 - quiet } else { quiet };
            }
            if w == 0.0 {
                continue;
            }
            match decision {
                None => {
                    *entries
                        .entry(CycleKey {
                            herald_pattern: pattern,
                            outcome: None,
                        })
                        .or_insert(0.0) += w;
                }
                Some(k) => {
                    let dist = &outcomes[bins - 1 - k][counts[k]];
                    for (i, &v) in dist.iter().enumerate() {
                        if v != 0.0 {
                            *entries
                                .entry(CycleKey {
                                    herald_pattern: pattern,
                                    outcome: Some(outcome_of_index(i, cut)),
                                })
                                .or_insert(0.0) += w * v;
                        }
                    }
                }
            }
        }
        // next photon-number vector
        let mut j = 0;
        loop {
            if j == bins {
                return Ok(CycleTable { entries, cutoff: cut });
            }
            counts[j] += 1;
            if counts[j] <= cut {
                break;
            }
            counts[j] = 0;
            j += 1;
        }
    }
}

/// Ratio of coincidence probabilities, enabled over disabled, from the
/// joint table. Cycle periods are equal, so this is the rate ratio.
pub fn analytic_improvement_factor(p: &OracleParams) -> Result<f64> {
    let en = exact_cycle_probabilities(p, ControllerMode::Enabled)?.rates();
    let dis = exact_cycle_probabilities(p, ControllerMode::Disabled)?.rates();
    if dis.p_coincidence == 0.0 {
        return Err(Error::Undefined {
            quantity: "improvement factor",
            reason: "no coincidences with multiplexing disabled",
        });
    }
    Ok(en.p_coincidence / dis.p_coincidence)
}

/// Small-mu limit of the one-stage improvement factor: the early bin adds
/// a second chance at the long-arm transmission.
pub fn small_mu_improvement_factor(long_to_short: f64) -> f64 {
    1.0 + long_to_short
}

/// g² of a photon-number distribution, sum n(n-1)P / (sum nP)^2. The
/// distribution need not be normalized.
pub fn g2_of_distribution(dist: &[f64]) -> Result<f64> {
    let total: f64 = dist.iter().sum();
    let mean: f64 = dist.iter().enumerate().map(|(n, p)| n as f64 * p).sum::<f64>() / total;
    if !(mean > 0.0) {
        return Err(Error::Undefined {
            quantity: "g2",
            reason: "mean output photon number is zero",
        });
    }
    let fact2: f64 = dist
        .iter()
        .enumerate()
        .map(|(n, p)| (n as f64) * (n as f64 - 1.0) * p)
        .sum::<f64>()
        / total;
    Ok(fact2 / (mean * mean))
}

/// g² of the output photons in cycles where a gate opened.
pub fn heralded_g2(p: &OracleParams, mode: ControllerMode) -> Result<f64> {
    g2_of_distribution(&cycle_rates(p, mode)?.photons)
}

/// g² of the pair number in one bin, without heralding.
pub fn unheralded_g2(modes: ModeCount) -> f64 {
    match modes {
        ModeCount::Infinite => 1.0,
        ModeCount::Finite(m) => 1.0 + 1.0 / m as f64,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageOptimum {
    pub best_stages: u32,
    /// `(stages, P1)` for stages = 1..=m_max.
    pub table: Vec<(u32, f64)>,
}

/// Single-photon output probability per cycle against the number of
/// stages, with `m + 1` switches of the given loss on every path and ideal
/// detectors. Ties go to fewer stages.
pub fn optimal_stage_count(per_switch_loss_db: f64, mu: f64, m_max: u32) -> Result<StageOptimum> {
    if !(per_switch_loss_db.is_finite() && per_switch_loss_db >= 0.0) {
        return Err(Error::param("per_switch_loss_db", format!("must be >= 0, got {per_switch_loss_db}")));
    }
    if m_max == 0 || m_max > MAX_STAGES {
        return Err(Error::param("m_max", format!("must be in 1..={MAX_STAGES}, got {m_max}")));
    }
    let mut table = Vec::with_capacity(m_max as usize);
    for m in 1..=m_max {
        let t = 10f64.powf(-((m + 1) as f64) * per_switch_loss_db / 10.0);
        let p = OracleParams {
            transmissions: vec![t; 1 << m],
            ..OracleParams::ideal(mu, m)
        };
        table.push((m, cycle_rates(&p, ControllerMode::Enabled)?.p_single()));
    }
    let mut best = table[0];
    for &entry in &table[1..] {
        if entry.1 > best.1 {
            best = entry;
        }
    }
    Ok(StageOptimum {
        best_stages: best.0,
        table,
    })
}

/// True if the values rise to a single peak and then fall (plateaus
/// allowed).
pub fn is_unimodal(values: &[f64]) -> bool {
    let mut falling = false;
    for w in values.windows(2) {
        if w[1] < w[0] {
            falling = true;
        } else if w[1] > w[0] && falling {
            return false;
        }
    }
    true
}

/// P1 table as CSV.
pub fn p1_table_csv(opt: &StageOptimum, per_switch_loss_db: f64, mu: f64) -> String {
    let mut s = String::from("# photon-mux-sim p1-table v1\n");
    s.push_str(&format!("# per_switch_loss_db={per_switch_loss_db} mu={mu} best_stages={}\n", opt.best_stages));
    s.push_str("stages,bins,switches,p1\n");
    for &(m, p1) in &opt.table {
        s.push_str(&format!("{m},{},{},{p1}\n", 1u64 << m, m + 1));
    }
    s
}
