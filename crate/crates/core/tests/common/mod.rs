#![allow(dead_code)]

use photon_mux::config::ExperimentConfig;
use photon_mux::detector::{DetectorMode, DetectorParams};
use photon_mux::optics::ChannelParams;

/// Lossless channel, unit-efficiency detectors, Poisson pairs.
pub fn ideal_config(mu: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.source.mu = Some(mu);
    cfg.channel = ChannelParams::lossless();
    cfg.herald_detector = DetectorParams::ideal(DetectorMode::FreeRunning);
    cfg.idler_detector = DetectorParams::ideal(DetectorMode::Gated);
    cfg
}

pub fn with_mu(mut cfg: ExperimentConfig, mu: f64) -> ExperimentConfig {
    cfg.source.mu = Some(mu);
    cfg.source.pump_power_mw = None;
    cfg
}

/// Standard score of `count` successes in `n` trials against probability `p`.
pub fn binomial_z(count: u64, n: u64, p: f64) -> f64 {
    let n = n as f64;
    let se = (p * (1.0 - p) / n).sqrt();
    let diff = count as f64 / n - p;
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}
