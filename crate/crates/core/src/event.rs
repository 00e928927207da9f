use std::fmt;

/// Identifies one down-converted pair for the whole run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairId {
    pub cycle: u64,
    pub index: u32,
}

impl fmt::Display for PairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.cycle, self.index)
    }
}

/// A photon pair created in a given bin of a given cycle.
///
/// `t_ns` is relative to the start of the cycle. Optics stages shift it
/// (pre-delay, switch paths), so after routing it may exceed the cycle
/// period; [`PairEvent::absolute_ns`] gives the lab-frame time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairEvent {
    pub cycle_index: u64,
    pub bin_index: u32,
    pub pair_id: PairId,
    pub t_ns: f64,
}

impl PairEvent {
    pub fn absolute_ns(&self, cycle_period_ns: f64) -> f64 {
        self.cycle_index as f64 * cycle_period_ns + self.t_ns
    }

    pub fn arrival(&self, cycle_period_ns: f64) -> Arrival {
        Arrival {
            t_ns: self.absolute_ns(cycle_period_ns),
            origin: Origin::Pair(self.pair_id),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    Pair(PairId),
    Dark,
}

impl Origin {
    pub fn pair_id(&self) -> Option<PairId> {
        match self {
            Origin::Pair(id) => Some(*id),
            Origin::Dark => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    Signal,
    IdlerPort2,
    IdlerPort3,
}

/// A photon reaching a detector, in absolute time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arrival {
    pub t_ns: f64,
    pub origin: Origin,
}

/// A detector click.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub t_ns: f64,
    pub origin: Origin,
    pub channel: Channel,
}

impl Detection {
    pub fn is_dark(&self) -> bool {
        self.origin == Origin::Dark
    }
}
