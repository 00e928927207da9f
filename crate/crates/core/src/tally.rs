use std::ops::{Add, AddAssign};

/// Event counters accumulated over a range of cycles.
///
/// Counter names follow the usual heralded-source notation: `heralds` is
/// H, `coincidences` C, `accidentals` A, `r12`/`r13` the herald-port
/// coincidences and `c123` the triple coincidences used by the g²
/// estimator.
///
/// Merging is component-wise addition of integers, so it is associative
/// and commutative, and a run split into partitions merges back to the
/// same tally bit-for-bit.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    /// Every click of the free-running herald detector.
    pub signal_clicks: u64,
    /// Heralds that triggered an output gate (one per non-blocked cycle).
    pub heralds: u64,
    /// Open output gates.
    pub gates: u64,
    /// Gated clicks whose photon is the partner of the deciding herald.
    pub coincidences: u64,
    /// Gated clicks from any other origin (other pairs or dark counts).
    pub accidentals: u64,
    /// Experiment-style accidental estimate: clicks produced in the gate by
    /// light from an unrelated cycle.
    pub accidentals_shifted: u64,
    pub r12: u64,
    pub r13: u64,
    pub c123: u64,
    pub cycles: u64,
    /// Clock period of the run; zero for an empty tally.
    pub cycle_period_ns: f64,
}

impl Tally {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn empty(cycle_period_ns: f64) -> Self {
        Self {
            cycle_period_ns,
            ..Self::default()
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.cycles as f64 * self.cycle_period_ns * 1e-9
    }

    /// Component-wise sum.
    pub fn merge(&self, other: &Tally) -> Tally {
        debug_assert!(
            self.cycle_period_ns == 0.0
                || other.cycle_period_ns == 0.0
                || self.cycle_period_ns == other.cycle_period_ns,
            "merging tallies from different clock periods"
        );
        Tally {
            signal_clicks: self.signal_clicks + other.signal_clicks,
            heralds: self.heralds + other.heralds,
            gates: self.gates + other.gates,
            coincidences: self.coincidences + other.coincidences,
            accidentals: self.accidentals + other.accidentals,
            accidentals_shifted: self.accidentals_shifted + other.accidentals_shifted,
            r12: self.r12 + other.r12,
            r13: self.r13 + other.r13,
            c123: self.c123 + other.c123,
            cycles: self.cycles + other.cycles,
            cycle_period_ns: self.cycle_period_ns.max(other.cycle_period_ns),
        }
    }

    /// Removes a sub-tally (used for leave-one-out estimates). `part` must
    /// have been merged into `self`.
    pub fn without(&self, part: &Tally) -> Tally {
        Tally {
            signal_clicks: self.signal_clicks - part.signal_clicks,
            heralds: self.heralds - part.heralds,
            gates: self.gates - part.gates,
            coincidences: self.coincidences - part.coincidences,
            accidentals: self.accidentals - part.accidentals,
            accidentals_shifted: self.accidentals_shifted - part.accidentals_shifted,
            r12: self.r12 - part.r12,
            r13: self.r13 - part.r13,
            c123: self.c123 - part.c123,
            cycles: self.cycles - part.cycles,
            cycle_period_ns: self.cycle_period_ns,
        }
    }

    /// Gated clicks attributed to a herald, C + A.
    pub fn attributed_clicks(&self) -> u64 {
        self.coincidences + self.accidentals
    }
}

pub fn merge_tallies(a: &Tally, b: &Tally) -> Tally {
    a.merge(b)
}

impl Add for Tally {
    type Output = Tally;

    fn add(self, rhs: Tally) -> Tally {
        self.merge(&rhs)
    }
}

impl AddAssign for Tally {
    fn add_assign(&mut self, rhs: Tally) {
        *self = self.merge(&rhs);
    }
}

impl std::iter::Sum for Tally {
    fn sum<I: Iterator<Item = Tally>>(iter: I) -> Tally {
        iter.fold(Tally::zero(), |acc, t| acc.merge(&t))
    }
}
