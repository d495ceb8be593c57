//! End-to-end evaluation of one `(E₀, γ)` point and of sweeps over many.
//!
//! Two propagations per point:
//!
//! * the *delay run* on a compact absorbing box records the detector traces,
//!   `ψ(t₀)` and the wavefunction around the exit at every record instant;
//! * the *asymptotic run* on a non-absorbing box that grows with the freed
//!   packet ends at `t₀ + 8/ω`, where the bound set is projected out.

use std::path::PathBuf;

use num_complex::Complex;
use rayon::prelude::*;

use crate::asymptotics::{final_time, most_probable_momentum, project_out_bound, tau_2, wigner_closed_form, Dimension};
use crate::atom::{over_barrier_threshold, AtomFieldModel, BarrierGeometry};
use crate::detector::{exit_momentum_flow, exit_momentum_window, tau_a, tau_mt, DetectorRecord, ObservableReport};
use crate::error::{Error, Result};
use crate::grid::{Grid, Wavefunction};
use crate::propagator::{propagate, settle_eigenstate, write_snapshot, Absorber, PropagationConfig, SplitStepper};
use crate::spectrum::{bound_states, EigenPair};

/// Detector intervals between `x_in` and `x_exit`.
pub const DETECTOR_INTERVALS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct DelaySettings {
    pub dx: f64,
    pub dt: f64,
    /// The box is `[−L, L)` rounded up to a power-of-two point count.
    pub half_width: f64,
    pub record_stride: usize,
    pub absorber: Absorber<f64>,
    /// Time scale of the filter that settles the initial state onto the
    /// discrete propagator's eigenvector; `0` disables settling.
    pub settle_window: f64,
    /// Absolute instants at which to dump `ψ` (binary snapshot format).
    pub snapshot_times: Vec<f64>,
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for DelaySettings {
    fn default() -> Self {
        Self {
            dx: 0.1,
            dt: 0.01,
            half_width: 100.0,
            record_stride: 10,
            absorber: Absorber::default(),
            settle_window: 40.0,
            snapshot_times: Vec::new(),
            snapshot_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticSettings {
    pub dx: f64,
    pub dt: f64,
    /// Half width of the initial box, which also hosts the bound set.
    pub bound_half_width: f64,
    /// Steps between checks of the box edges.
    pub growth_check: usize,
    /// Probability allowed in the outer eighth of either side before the box
    /// is doubled.
    pub edge_tolerance: f64,
    pub settle_window: f64,
}

impl Default for AsymptoticSettings {
    fn default() -> Self {
        Self {
            dx: 0.2,
            dt: 0.02,
            bound_half_width: 200.0,
            growth_check: 200,
            edge_tolerance: 1e-14,
            settle_window: 40.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub z: f64,
    pub delay: DelaySettings,
    pub asymptotic: AsymptoticSettings,
    /// Skip the asymptotic run (and `p_fq`, `τ₂`).
    pub delay_only: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self { z: 1.0, delay: DelaySettings::default(), asymptotic: AsymptoticSettings::default(), delay_only: false }
    }
}

/// Smallest power-of-two grid `[−n·dx/2, n·dx/2)` covering `[−L, L]`.
pub fn symmetric_grid(half_width: f64, dx: f64) -> Result<Grid<f64>> {
    let n = ((2.0 * half_width / dx).ceil() as usize + 1).max(16).next_power_of_two();
    Grid::from_spacing(-dx * (n / 2) as f64, dx, n)
}

/// Field-free quantities shared by every point with the same `Z` and
/// numerical settings.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub settings: Settings,
    pub ground: EigenPair<f64>,
    pub delay_initial: Wavefunction<f64>,
    pub bound: Vec<EigenPair<f64>>,
    pub asymptotic_initial: Option<Wavefunction<f64>>,
}

impl Prepared {
    pub fn new(settings: &Settings) -> Result<Self> {
        let model = AtomFieldModel::new(settings.z, 0.0, 1.0, 0.0);
        let d = &settings.delay;
        let delay_grid = symmetric_grid(d.half_width, d.dx)?;
        let ground = crate::spectrum::ground_state(&model, delay_grid)?;
        let delay_initial = if d.settle_window > 0.0 {
            settle_eigenstate(&ground, &model, d.dt, d.settle_window)?
        } else {
            ground.state.clone()
        };
        let (bound, asymptotic_initial) = if settings.delay_only {
            (Vec::new(), None)
        } else {
            let a = &settings.asymptotic;
            let grid = symmetric_grid(a.bound_half_width, a.dx)?;
            let bound = bound_states(&model, grid)?;
            let first = bound.first().ok_or(Error::NotConverged(0))?;
            let init = if a.settle_window > 0.0 {
                settle_eigenstate(first, &model, a.dt, a.settle_window)?
            } else {
                first.state.clone()
            };
            (bound, Some(init))
        };
        Ok(Self { settings: settings.clone(), ground, delay_initial, bound, asymptotic_initial })
    }
}

/// Outcome of the delay run.
#[derive(Clone, Debug)]
pub struct DelayRun {
    pub geometry: BarrierGeometry<f64>,
    pub records: Vec<DetectorRecord<f64>>,
    pub psi_t0: Wavefunction<f64>,
    pub tau_a: f64,
    pub p0_window: f64,
    pub p0_flow: f64,
    pub final_norm: f64,
}

/// Outcome of the asymptotic run.
#[derive(Clone, Debug)]
pub struct AsymptoticRun {
    pub psi_final: Wavefunction<f64>,
    pub free: Wavefunction<f64>,
    pub bound_population: f64,
    pub p_fq: f64,
}

/// Everything produced for one parameter point.
#[derive(Clone, Debug)]
pub struct PointResult {
    pub e0_ratio: f64,
    pub gamma: f64,
    pub report: ObservableReport<f64>,
    pub delay: DelayRun,
    pub asymptotic: Option<AsymptoticRun>,
    /// Non-fatal failures of individual observables (their columns are NaN).
    pub notes: Vec<String>,
}

/// Model of the point `E₀ = ratio·Z³`, Keldysh parameter `γ`, `t₀ = 0`.
pub fn point_model(z: f64, e0_ratio: f64, gamma: f64) -> Result<AtomFieldModel<f64>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Config(format!("Keldysh parameter must lie in (0, 1), got {gamma}")));
    }
    if !(e0_ratio > 0.0) {
        return Err(Error::NoBarrier(e0_ratio));
    }
    let threshold = over_barrier_threshold(z) / (z * z * z);
    if e0_ratio >= threshold {
        return Err(Error::OverBarrier { e0: e0_ratio, threshold });
    }
    Ok(AtomFieldModel::from_keldysh(z, e0_ratio * z * z * z, gamma, 0.0))
}

/// Stores the wavefunction around the exit at every record instant so the
/// snapshot at `t₀ + τ_A` can be rebuilt once `τ_A` is known.
struct ExitBuffer {
    start: usize,
    times: Vec<f64>,
    segments: Vec<Vec<Complex<f64>>>,
}

pub fn delay_run(prepared: &Prepared, model: &AtomFieldModel<f64>) -> Result<DelayRun> {
    let d = &prepared.settings.delay;
    let geometry = model.barrier_points()?;
    let grid = *prepared.delay_initial.grid();
    let record_dt = d.dt * d.record_stride as f64;
    let reach = 6.0 / model.omega;
    let blocks = (reach / record_dt).ceil();
    let cfg = PropagationConfig {
        dt: d.dt,
        t_start: model.t0 - blocks * record_dt,
        t_end: model.t0 + blocks * record_dt,
        absorber: Some(d.absorber),
        detector_positions: geometry.detector_positions(DETECTOR_INTERVALS),
        record_stride: d.record_stride,
    };

    let delta = geometry.width() / 20.0;
    let half = (12.0 * delta / grid.dx()).ceil() as usize + 2;
    let centre = grid.nearest_index(geometry.x_exit);
    let mut buffer = ExitBuffer { start: centre.saturating_sub(half), times: Vec::new(), segments: Vec::new() };
    let stop = (centre + half + 1).min(grid.n());
    let mut psi_t0 = None;
    let snapshot_dir = d.snapshot_dir.clone();
    let mut pending: Vec<f64> = d.snapshot_times.clone();

    let mut observer = |t: f64, psi: &Wavefunction<f64>| -> Result<()> {
        buffer.times.push(t);
        buffer.segments.push(psi.amps()[buffer.start..stop].to_vec());
        if (t - model.t0).abs() < 0.5 * d.dt {
            psi_t0 = Some(psi.clone());
        }
        if let Some(dir) = &snapshot_dir {
            let due: Vec<f64> = pending.iter().copied().filter(|&s| (t - s).abs() <= 0.5 * record_dt).collect();
            for s in due {
                let name = format!("snapshot_{}_{}_t{}.bin", model.e0, model.derived_scales().gamma, s);
                write_snapshot(&dir.join(name), t, psi)?;
                pending.retain(|&p| p != s);
            }
        }
        Ok(())
    };
    let (final_psi, records) = propagate(prepared.delay_initial.clone(), model, &cfg, &mut observer)?;
    let psi_t0 = psi_t0.ok_or(Error::Config("t0 is not on the record grid".into()))?;

    let exit = records.last().expect("detectors configured");
    let tau_a = tau_a(exit, model)?;
    let p0_flow = exit_momentum_flow(exit)?;

    let t_ion = model.t0 + tau_a;
    let k = buffer
        .times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t_ion).abs().total_cmp(&(b.1 - t_ion).abs()))
        .map(|(k, _)| k)
        .expect("records present");
    let mut amps = vec![Complex::new(0.0, 0.0); grid.n()];
    amps[buffer.start..stop].copy_from_slice(&buffer.segments[k]);
    let p0_window = exit_momentum_window(&Wavefunction::new(grid, amps)?, &geometry)?;

    Ok(DelayRun {
        geometry,
        records,
        psi_t0,
        tau_a,
        p0_window,
        p0_flow,
        final_norm: final_psi.norm_sqr(),
    })
}

/// Grow `psi`'s box when either outer eighth holds more than `tol`.
fn grow_if_needed(psi: &Wavefunction<f64>, tol: f64) -> Result<Option<Wavefunction<f64>>> {
    let g = *psi.grid();
    let n = g.n();
    let edge = n / 8;
    let dens = |r: std::ops::Range<usize>| psi.amps()[r].iter().map(|a| a.norm_sqr()).sum::<f64>() * g.dx();
    let left = dens(0..edge) > tol;
    let right = dens(n - edge..n) > tol;
    if !left && !right {
        return Ok(None);
    }
    let shift = match (left, right) {
        (true, true) => n / 2,
        (true, false) => n,
        _ => 0,
    };
    let bigger = Grid::from_spacing(g.x_min() - g.dx() * shift as f64, g.dx(), 2 * n)?;
    log::debug!("asymptotic box grows to [{:.1}, {:.1}]", bigger.x_min(), bigger.x_max());
    Ok(Some(psi.embed_into(&bigger)?))
}

pub fn asymptotic_run(prepared: &Prepared, model: &AtomFieldModel<f64>) -> Result<AsymptoticRun> {
    let a = &prepared.settings.asymptotic;
    let mut psi = prepared
        .asymptotic_initial
        .clone()
        .ok_or(Error::Config("asymptotic run disabled".into()))?;
    let t_start = model.t0 - 6.0 / model.omega;
    let t_final = final_time(model);
    let steps = ((t_final - t_start) / a.dt).round() as usize;
    let mut stepper = SplitStepper::new(*psi.grid(), *model, a.dt, None);
    let mut k = 0;
    while k < steps {
        let block = a.growth_check.min(steps - k);
        stepper.advance(&mut psi, t_start + a.dt * k as f64, block);
        k += block;
        if !psi.is_finite() {
            return Err(Error::NonFinite(t_start + a.dt * k as f64));
        }
        if let Some(bigger) = grow_if_needed(&psi, a.edge_tolerance)? {
            psi = bigger;
            stepper = SplitStepper::new(*psi.grid(), *model, a.dt, None);
        }
    }
    let grid = *psi.grid();
    let bound = prepared
        .bound
        .iter()
        .map(|b| b.state.embed_into(&grid).map(|state| EigenPair { energy: b.energy, state }))
        .collect::<Result<Vec<_>>>()?;
    let free = project_out_bound(&psi, &bound)?;
    let bound_population = crate::asymptotics::bound_population(&psi, &bound)?;
    let p_fq = most_probable_momentum(&free)?;
    Ok(AsymptoticRun { psi_final: psi, free, bound_population, p_fq })
}

/// Run one parameter point. Failures of the barrier geometry or the delay run
/// are fatal; the later stages degrade to NaN with a note.
pub fn run_point(prepared: &Prepared, e0_ratio: f64, gamma: f64) -> Result<PointResult> {
    let model = point_model(prepared.settings.z, e0_ratio, gamma)?;
    let delay = delay_run(prepared, &model)?;
    let mut notes = Vec::new();
    let mut note = |what: &str, e: &Error| {
        log::warn!("E0/Z^3={e0_ratio} gamma={gamma}: {what}: {e}");
        notes.push(format!("{what}: {e}"));
    };

    let tau_mt = tau_mt(&delay.psi_t0, &model).unwrap_or_else(|e| {
        note("tau_MT", &e);
        f64::NAN
    });
    let (asymptotic, p_fq, tau2) = if prepared.settings.delay_only {
        (None, f64::NAN, f64::NAN)
    } else {
        match asymptotic_run(prepared, &model) {
            Ok(run) => {
                let t2 = tau_2(run.p_fq, &delay.geometry, &model).unwrap_or_else(|e| {
                    note("tau_2", &e);
                    f64::NAN
                });
                let p = run.p_fq;
                (Some(run), p, t2)
            }
            Err(e) => {
                note("asymptotic run", &e);
                (None, f64::NAN, f64::NAN)
            }
        }
    };
    let tau_sub = wigner_closed_form(&model, Dimension::One).unwrap_or_else(|e| {
        note("tau_sub", &e);
        f64::NAN
    });
    let report = ObservableReport::new(
        model.e0,
        gamma,
        delay.geometry,
        delay.tau_a,
        tau_mt,
        (delay.p0_window, delay.p0_flow),
        p_fq,
        tau2,
        tau_sub,
    );
    if report.bound_violated {
        notes.push(format!("tau_A {:.6} below tau_MT {:.6}", report.tau_a, report.tau_mt));
    }
    Ok(PointResult { e0_ratio, gamma, report, delay, asymptotic, notes })
}

/// One row of a sweep: a result or the reason the point failed.
#[derive(Debug)]
pub struct SweepEntry {
    pub e0_ratio: f64,
    pub gamma: f64,
    pub outcome: Result<PointResult>,
}

/// All combinations of the parameter lists, in parallel, sorted by `(γ, E₀)`.
pub fn sweep(prepared: &Prepared, e0_ratios: &[f64], gammas: &[f64]) -> Vec<SweepEntry> {
    let points: Vec<(f64, f64)> =
        gammas.iter().flat_map(|&g| e0_ratios.iter().map(move |&e| (e, g))).collect();
    let mut entries: Vec<SweepEntry> = points
        .into_par_iter()
        .map(|(e0_ratio, gamma)| SweepEntry { e0_ratio, gamma, outcome: run_point(prepared, e0_ratio, gamma) })
        .collect();
    entries.sort_by(|a, b| a.gamma.total_cmp(&b.gamma).then(a.e0_ratio.total_cmp(&b.e0_ratio)));
    entries
}
