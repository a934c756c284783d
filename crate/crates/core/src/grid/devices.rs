//! Slow discrete controllers: on-load tap changers and overexcitation
//! limiters. Both advance once per simulated second.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OltcConfig {
    pub deadband_low: f64,
    pub deadband_high: f64,
    /// Seconds outside the deadband before the first tap move.
    pub first_delay: u32,
    /// Seconds between subsequent moves of the same excursion.
    pub next_delay: u32,
    pub step: f64,
    pub tap_min: f64,
    pub tap_max: f64,
}

impl Default for OltcConfig {
    fn default() -> Self {
        Self {
            deadband_low: 0.99,
            deadband_high: 1.01,
            first_delay: 10,
            next_delay: 5,
            step: 0.01,
            tap_min: 0.85,
            tap_max: 1.15,
        }
    }
}

impl OltcConfig {
    fn pos_range(&self) -> (i32, i32) {
        (((self.tap_min - 1.0) / self.step).round() as i32, ((self.tap_max - 1.0) / self.step).round() as i32)
    }

    pub fn clamp_pos(&self, pos: i32) -> i32 {
        let (lo, hi) = self.pos_range();
        pos.clamp(lo, hi)
    }

    pub fn tap_at(&self, pos: i32) -> f64 {
        1.0 + self.step * pos as f64
    }
}

/// Tap position is kept as an integer step count so repeated moves never
/// accumulate rounding drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OltcState {
    pub pos: i32,
    pub tap: f64,
    pub timer: u32,
    /// A move already happened in the current excursion.
    pub moved: bool,
}

impl OltcState {
    pub fn nominal() -> Self {
        Self { pos: 0, tap: 1.0, timer: 0, moved: false }
    }

    pub fn at_position(pos: i32, cfg: &OltcConfig) -> Self {
        Self { pos, tap: cfg.tap_at(pos), timer: 0, moved: false }
    }

    pub fn is_saturated(&self, cfg: &OltcConfig) -> bool {
        let (lo, hi) = cfg.pos_range();
        self.pos <= lo || self.pos >= hi
    }
}

/// Advances one tap changer by `dt` seconds given its controlled voltage.
pub fn step_oltc(oltc: OltcState, v_controlled: f64, dt: u32, cfg: &OltcConfig) -> (OltcState, bool) {
    if (cfg.deadband_low..=cfg.deadband_high).contains(&v_controlled) {
        return (OltcState { timer: 0, moved: false, ..oltc }, false);
    }
    let mut next = oltc;
    next.timer += dt;
    let delay = if oltc.moved { cfg.next_delay } else { cfg.first_delay };
    if next.timer < delay {
        return (next, false);
    }
    // V_load ≈ tap · V_transmission: raise the tap on undervoltage.
    let dir = if v_controlled < cfg.deadband_low { 1 } else { -1 };
    let pos = cfg.clamp_pos(oltc.pos + dir);
    next.timer = 0;
    if pos == oltc.pos {
        return (next, false);
    }
    next.pos = pos;
    next.tap = cfg.tap_at(pos);
    next.moved = true;
    (next, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OxlConfig {
    /// Seconds of continuous overexcitation before the limiter acts.
    pub delay: u32,
}

impl Default for OxlConfig {
    fn default() -> Self {
        Self { delay: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OxlState {
    pub timer: u32,
    /// Latching: once set, the generator is held at `q_max` for the rest
    /// of the case.
    pub tripped: bool,
}

pub fn step_oxl(oxl: OxlState, q_output: f64, q_max: f64, dt: u32, cfg: &OxlConfig) -> OxlState {
    if oxl.tripped {
        return oxl;
    }
    if q_output > q_max {
        let timer = oxl.timer + dt;
        OxlState { timer, tripped: timer >= cfg.delay }
    } else {
        OxlState { timer: 0, tripped: false }
    }
}
