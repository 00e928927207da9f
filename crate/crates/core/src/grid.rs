use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretization of the experiment into bins and clock cycles.
///
/// A cycle is one period of the external clock and holds `bins_per_cycle`
/// bins. Bins are right-open: a timestamp on a boundary belongs to the
/// later bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeGrid {
    pub bin_width_ns: f64,
    pub bins_per_cycle: u32,
    pub n_cycles: u64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            bin_width_ns: 100.0,
            bins_per_cycle: 2,
            n_cycles: 1_000_000,
        }
    }
}

impl TimeGrid {
    pub fn new(bin_width_ns: f64, bins_per_cycle: u32, n_cycles: u64) -> Result<Self> {
        let grid = Self {
            bin_width_ns,
            bins_per_cycle,
            n_cycles,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width_ns.is_finite() && self.bin_width_ns > 0.0) {
            return Err(Error::config(
                "grid.bin_width_ns",
                format!("must be a positive duration, got {}", self.bin_width_ns),
            ));
        }
        if self.bins_per_cycle < 2 || !self.bins_per_cycle.is_power_of_two() {
            return Err(Error::config(
                "grid.bins_per_cycle",
                format!("must be a power of two >= 2, got {}", self.bins_per_cycle),
            ));
        }
        if self.n_cycles == 0 {
            return Err(Error::config("grid.n_cycles", "must be at least 1"));
        }
        Ok(())
    }

    #[inline]
    pub fn cycle_period_ns(&self) -> f64 {
        self.bin_width_ns * self.bins_per_cycle as f64
    }

    /// Number of correction stages `m`, with `bins_per_cycle = 2^m`.
    pub fn stages(&self) -> u32 {
        self.bins_per_cycle.trailing_zeros()
    }

    pub fn final_bin(&self) -> u32 {
        self.bins_per_cycle - 1
    }

    #[inline]
    pub fn cycle_start_ns(&self, cycle: u64) -> f64 {
        cycle as f64 * self.cycle_period_ns()
    }

    /// Cycle-relative start of `bin`.
    #[inline]
    pub fn bin_start_ns(&self, bin: u32) -> f64 {
        bin as f64 * self.bin_width_ns
    }

    /// Locates an absolute timestamp on the grid.
    pub fn bin_of(&self, t_ns: f64) -> (u64, u32) {
        debug_assert!(t_ns >= 0.0);
        let period = self.cycle_period_ns();
        let cycle = (t_ns / period).floor();
        let within = t_ns - cycle * period;
        let bin = ((within / self.bin_width_ns).floor() as u32).min(self.final_bin());
        (cycle as u64, bin)
    }
}

/// Free-function form of [`TimeGrid::bin_of`].
pub fn bin_of(t_ns: f64, grid: &TimeGrid) -> (u64, u32) {
    grid.bin_of(t_ns)
}
