//! TOML run configuration. Every key is optional; missing keys take the
//! built-in physics defaults.

use std::path::Path;

use serde::Deserialize;
use tunnel_core::atom::over_barrier_threshold;
use tunnel_core::pipeline::{AsymptoticSettings, DelaySettings, Settings};
use tunnel_core::propagator::Absorber;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub z: f64,
    pub e0_over_z3: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delay_only: bool,
    pub delay: DelaySection,
    pub asymptotic: AsymptoticSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelaySection {
    pub dx: f64,
    pub dt: f64,
    pub half_width: f64,
    pub record_stride: usize,
    pub absorber_width: f64,
    pub absorber_strength: f64,
    pub settle_window: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticSection {
    pub dx: f64,
    pub dt: f64,
    pub bound_half_width: f64,
    pub growth_check: usize,
    pub edge_tolerance: f64,
    pub settle_window: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            z: 1.0,
            e0_over_z3: vec![0.035, 0.04, 0.048, 0.055, 0.06],
            gamma: vec![0.2, 0.25, 0.33],
            delay_only: false,
            delay: DelaySection::default(),
            asymptotic: AsymptoticSection::default(),
        }
    }
}

impl Default for DelaySection {
    fn default() -> Self {
        let d = DelaySettings::default();
        Self {
            dx: d.dx,
            dt: d.dt,
            half_width: d.half_width,
            record_stride: d.record_stride,
            absorber_width: d.absorber.width,
            absorber_strength: d.absorber.strength,
            settle_window: d.settle_window,
        }
    }
}

impl Default for AsymptoticSection {
    fn default() -> Self {
        let a = AsymptoticSettings::default();
        Self {
            dx: a.dx,
            dt: a.dt,
            bound_half_width: a.bound_half_width,
            growth_check: a.growth_check,
            edge_tolerance: a.edge_tolerance,
            settle_window: a.settle_window,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive, got {v}"))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Checks shared by every command.
    pub fn validate_numerics(&self) -> Result<(), String> {
        positive("z", self.z)?;
        positive("delay.dx", self.delay.dx)?;
        positive("delay.dt", self.delay.dt)?;
        positive("delay.half_width", self.delay.half_width)?;
        positive("asymptotic.dx", self.asymptotic.dx)?;
        positive("asymptotic.dt", self.asymptotic.dt)?;
        positive("asymptotic.bound_half_width", self.asymptotic.bound_half_width)?;
        positive("asymptotic.edge_tolerance", self.asymptotic.edge_tolerance)?;
        if self.delay.record_stride == 0 || self.asymptotic.growth_check == 0 {
            return Err("record_stride and growth_check must be at least 1".into());
        }
        if !(self.delay.absorber_width > 0.0 && self.delay.absorber_width < 0.5) {
            return Err(format!("delay.absorber_width must lie in (0, 0.5), got {}", self.delay.absorber_width));
        }
        positive("delay.absorber_strength", self.delay.absorber_strength)?;
        Ok(())
    }

    /// Sweep lists must stay in the tunnelling regime.
    pub fn validate_point(&self, e0_ratio: f64, gamma: f64) -> Result<(), String> {
        self.validate_run(e0_ratio, gamma)?;
        let threshold = over_barrier_threshold(self.z) / self.z.powi(3);
        if e0_ratio >= threshold {
            return Err(format!("E0/Z^3 = {e0_ratio} outside (0, {threshold:.6}) (over-barrier threshold)"));
        }
        Ok(())
    }

    /// A single `run` only needs a positive field and `0 < γ < 1`; an
    /// over-barrier field is recorded as a skipped row instead.
    pub fn validate_run(&self, e0_ratio: f64, gamma: f64) -> Result<(), String> {
        if !(e0_ratio > 0.0 && e0_ratio.is_finite()) {
            return Err(format!("E0/Z^3 = {e0_ratio} must be positive"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(format!("gamma = {gamma} outside (0, 1)"));
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<(), String> {
        if self.e0_over_z3.is_empty() {
            return Err("e0_over_z3 list is empty".into());
        }
        if self.gamma.is_empty() {
            return Err("gamma list is empty".into());
        }
        for &e in &self.e0_over_z3 {
            for &g in &self.gamma {
                self.validate_point(e, g)?;
            }
        }
        Ok(())
    }

    pub fn settings(&self) -> Settings {
        let d = &self.delay;
        let a = &self.asymptotic;
        Settings {
            z: self.z,
            delay: DelaySettings {
                dx: d.dx,
                dt: d.dt,
                half_width: d.half_width,
                record_stride: d.record_stride,
                absorber: Absorber { width: d.absorber_width, strength: d.absorber_strength },
                settle_window: d.settle_window,
                snapshot_times: Vec::new(),
                snapshot_dir: None,
            },
            asymptotic: AsymptoticSettings {
                dx: a.dx,
                dt: a.dt,
                bound_half_width: a.bound_half_width,
                growth_check: a.growth_check,
                edge_tolerance: a.edge_tolerance,
                settle_window: a.settle_window,
            },
            delay_only: self.delay_only,
        }
    }
}
