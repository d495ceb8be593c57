//! Real-time evolution under `H(t) = −½∂²ₓ + V(x,t)`.
//!
//! One step is the Strang splitting
//! `e^{−iV dt/2} e^{−iT dt} e^{−iV dt/2}` with the field taken at the step
//! midpoint. Between two recorded instants the trailing half kick of one step
//! and the leading half kick of the next are fused into a single diagonal
//! multiply, so a step costs one forward/inverse FFT pair plus one pass.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::atom::AtomFieldModel;
use crate::detector::DetectorRecord;
use crate::error::{Error, Result};
use crate::grid::{Grid, Spectral, Wavefunction};
use crate::num::Real;

/// Smooth boundary mask `cos(π s/2)^strength` applied once per step over the
/// outer `width` fraction of each box edge, `s ∈ [0, 1]` being the depth into
/// the layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Absorber<T> {
    pub width: T,
    pub strength: T,
}

impl<T: Real> Default for Absorber<T> {
    fn default() -> Self {
        Self { width: T::lit(0.1), strength: T::lit(0.125) }
    }
}

impl<T: Real> Absorber<T> {
    pub fn mask(&self, grid: &Grid<T>) -> Vec<T> {
        let layer = self.width * (grid.x_max() - grid.x_min());
        let half_pi = T::FRAC_PI_2();
        (0..grid.n())
            .map(|i| {
                let x = grid.x(i);
                let depth = ((grid.x_min() + layer - x).max(x - (grid.x_max() - layer))).max(T::zero());
                if depth <= T::zero() {
                    T::one()
                } else {
                    let s = (depth / layer).min(T::one());
                    (half_pi * s).cos().max(T::zero()).powf(self.strength)
                }
            })
            .collect()
    }

    /// Interval left untouched by the mask.
    pub fn clear_region(&self, grid: &Grid<T>) -> (T, T) {
        let layer = self.width * (grid.x_max() - grid.x_min());
        (grid.x_min() + layer, grid.x_max() - layer)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationConfig<T> {
    pub dt: T,
    pub t_start: T,
    pub t_end: T,
    pub absorber: Option<Absorber<T>>,
    pub detector_positions: Vec<T>,
    /// Steps between detector samples (and observer calls).
    pub record_stride: usize,
}

impl<T: Real> PropagationConfig<T> {
    /// Number of steps actually taken: the window rounded up to a whole
    /// number of record strides.
    pub fn steps(&self) -> usize {
        let raw = ((self.t_end - self.t_start) / self.dt).round().to_usize().unwrap_or(0);
        raw.div_ceil(self.record_stride) * self.record_stride
    }

    /// Kinetic phase of the fastest representable mode per step,
    /// `dt·(π/dx)²/2`; above `π` the highest modes alias in time.
    pub fn kinetic_phase(&self, grid: &Grid<T>) -> T {
        let k = grid.p_max();
        self.dt * k * k / T::lit(2.0)
    }

    /// Whether the window reaches six field periods `1/ω` either side of `t₀`.
    pub fn covers_pulse(&self, model: &AtomFieldModel<T>) -> bool {
        let reach = T::lit(6.0) / model.omega;
        let slack = self.dt * T::lit(0.5);
        self.t_start <= model.t0 - reach + slack && self.t_end >= model.t0 + reach - slack
    }

    pub fn validate(&self, grid: &Grid<T>) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::Config(format!(
                "empty time window [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record stride must be at least 1".into()));
        }
        let (lo, hi) = match &self.absorber {
            Some(a) => {
                if !(a.width > T::zero() && a.width < T::lit(0.5)) || !(a.strength > T::zero()) {
                    return Err(Error::Config(format!("bad absorber {a:?}")));
                }
                a.clear_region(grid)
            }
            None => (grid.x_min(), grid.x_max()),
        };
        for &x in &self.detector_positions {
            if !(x > lo + grid.dx() && x < hi - grid.dx()) {
                return Err(Error::Config(format!(
                    "detector at {x} outside the clear region [{lo}, {hi}]"
                )));
            }
        }
        let phase = self.kinetic_phase(grid);
        if phase >= T::PI() {
            log::warn!(
                "kinetic phase per step dt*(pi/dx)^2/2 = {phase:.3} exceeds pi; \
                 only modes far above the physical momenta are affected"
            );
        }
        Ok(())
    }
}

/// Precomputed factors of the split-step scheme for one grid, model and `dt`.
pub struct SplitStepper<T: Real> {
    grid: Grid<T>,
    model: AtomFieldModel<T>,
    dt: T,
    kinetic: Vec<Complex<T>>,
    core_half: Vec<Complex<T>>,
    core_full: Vec<Complex<T>>,
    mask: Option<Vec<T>>,
    spectral: Spectral<T>,
}

const PHASE_BLOCK: usize = 64;

impl<T: Real> SplitStepper<T> {
    pub fn new(grid: Grid<T>, model: AtomFieldModel<T>, dt: T, absorber: Option<&Absorber<T>>) -> Self {
        let half = T::lit(0.5);
        let kinetic = grid
            .wavenumbers()
            .into_iter()
            .map(|k| Complex::from_polar(T::one(), -half * k * k * dt))
            .collect();
        let core: Vec<T> = grid.positions().into_iter().map(|x| model.core_potential(x)).collect();
        let core_half = core.iter().map(|&v| Complex::from_polar(T::one(), -v * dt * half)).collect();
        let core_full = core.iter().map(|&v| Complex::from_polar(T::one(), -v * dt)).collect();
        Self {
            grid,
            model,
            dt,
            kinetic,
            core_half,
            core_full,
            mask: absorber.map(|a| a.mask(&grid)),
            spectral: Spectral::new(grid.n()),
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// `ψ ← core·e^{iθx}·mask ψ`: the potential kick with the field part
    /// `−E x` folded into `θ`, generated blockwise by complex recurrence.
    fn kick(&self, psi: &mut [Complex<T>], full: bool, theta: T, with_mask: bool) {
        let core = if full { &self.core_full } else { &self.core_half };
        let step = Complex::from_polar(T::one(), theta * self.grid.dx());
        let mask = if with_mask { self.mask.as_deref() } else { None };
        for (b, chunk) in psi.chunks_mut(PHASE_BLOCK).enumerate() {
            let start = b * PHASE_BLOCK;
            let mut phase = Complex::from_polar(T::one(), theta * self.grid.x(start));
            for (k, a) in chunk.iter_mut().enumerate() {
                let i = start + k;
                let mut f = core[i] * phase;
                if let Some(m) = mask {
                    f = f * m[i];
                }
                *a = *a * f;
                phase = phase * step;
            }
        }
    }

    fn drift(&mut self, psi: &mut [Complex<T>]) {
        self.spectral.apply_diagonal(psi, &self.kinetic);
    }

    /// One full Strang step from `t` to `t + dt`.
    pub fn step(&mut self, psi: &mut Wavefunction<T>, t: T) {
        let e = self.model.field(t + self.dt * T::lit(0.5));
        let theta = e * self.dt * T::lit(0.5);
        let amps = psi.amps_mut();
        self.kick(amps, false, theta, false);
        self.drift(amps);
        self.kick(amps, false, theta, true);
    }

    /// `steps` consecutive Strang steps starting at `t`, with interior half
    /// kicks fused. Equivalent to calling [`step`](Self::step) repeatedly.
    pub fn advance(&mut self, psi: &mut Wavefunction<T>, t: T, steps: usize) {
        if steps == 0 {
            return;
        }
        let half = T::lit(0.5);
        let (dt, model) = (self.dt, self.model);
        let mid = |k: usize| t + dt * (T::count(k) + half);
        let mut e_prev = model.field(mid(0));
        let amps = psi.amps_mut();
        self.kick(amps, false, e_prev * self.dt * half, false);
        for k in 0..steps {
            self.drift(amps);
            if k + 1 == steps {
                self.kick(amps, false, e_prev * self.dt * half, true);
            } else {
                let e_next = model.field(mid(k + 1));
                self.kick(amps, true, (e_prev + e_next) * self.dt * half, true);
                e_prev = e_next;
            }
        }
    }
}

/// Eigenvector of the field-free one-step propagator closest to `pair`.
///
/// An eigenstate of `H₀` is not exactly stationary under the split-step
/// scheme: it breathes at `O(dt²)` and carries a small oscillating current.
/// Filtering its evolution with a Gaussian window of width `window` in time,
/// `Σ_k w_k e^{iE t_k} U^k ψ`, suppresses every other level by
/// `exp(−(ΔE·window)²/2)`. The discrete propagator is symmetric and
/// time-reversal invariant, so the result is real up to a global phase,
/// which is removed.
pub fn settle_eigenstate<T: Real>(
    pair: &crate::spectrum::EigenPair<T>,
    model: &AtomFieldModel<T>,
    dt: T,
    window: T,
) -> Result<Wavefunction<T>> {
    let grid = *pair.state.grid();
    let free = model.with_field(T::zero());
    let mut stepper = SplitStepper::new(grid, free, dt, None);
    let half_span = (T::lit(6.0) * window / dt).ceil().to_usize().unwrap_or(0).max(1);
    let mut psi = pair.state.clone();
    let mut acc = Wavefunction::zeros(grid);
    for k in 0..=2 * half_span {
        let t = dt * T::count(k);
        let s = (T::count(k) - T::count(half_span)) * dt / window;
        let w = (-(s * s) / T::lit(2.0)).exp();
        acc.axpy(Complex::from_polar(w, pair.energy * t), &psi)?;
        stepper.step(&mut psi, t);
    }
    let peak = acc
        .amps()
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().partial_cmp(&b.norm_sqr()).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(Complex::new(T::one(), T::zero()));
    acc.scale((peak / peak.norm()).conj());
    acc.amps_mut().iter_mut().for_each(|a| a.im = T::zero());
    acc.normalize()?;
    if !acc.is_finite() {
        return Err(Error::NonFinite(0.0));
    }
    Ok(acc)
}

/// Called with `(t, ψ(t))` at every record instant, including the first.
pub trait Observer<T: Real> {
    fn observe(&mut self, t: T, psi: &Wavefunction<T>) -> Result<()>;
}

impl<T: Real, F: FnMut(T, &Wavefunction<T>) -> Result<()>> Observer<T> for F {
    fn observe(&mut self, t: T, psi: &Wavefunction<T>) -> Result<()> {
        self(t, psi)
    }
}

/// Observer that does nothing.
pub struct NoObserver;

impl<T: Real> Observer<T> for NoObserver {
    fn observe(&mut self, _: T, _: &Wavefunction<T>) -> Result<()> {
        Ok(())
    }
}

/// Evolve `psi` over the configured window, sampling the current and density
/// at every detector each `record_stride` steps.
pub fn propagate<T: Real>(
    mut psi: Wavefunction<T>,
    model: &AtomFieldModel<T>,
    cfg: &PropagationConfig<T>,
    observer: &mut dyn Observer<T>,
) -> Result<(Wavefunction<T>, Vec<DetectorRecord<T>>)> {
    let grid = *psi.grid();
    cfg.validate(&grid)?;
    let mut stepper = SplitStepper::new(grid, *model, cfg.dt, cfg.absorber.as_ref());
    let mut records: Vec<DetectorRecord<T>> =
        cfg.detector_positions.iter().map(|&x| DetectorRecord::new(x)).collect();
    let blocks = cfg.steps() / cfg.record_stride;
    log::debug!("propagating {} steps on {} points", cfg.steps(), grid.n());

    let mut sample = |k: usize, psi: &Wavefunction<T>, records: &mut Vec<DetectorRecord<T>>| -> Result<()> {
        let t = cfg.t_start + cfg.dt * T::count(k);
        if !psi.is_finite() {
            return Err(Error::NonFinite(t.to_f64_lossy()));
        }
        for r in records.iter_mut() {
            let (j, rho) = psi.flux_at(r.position)?;
            r.push(t, j, rho);
        }
        observer.observe(t, psi)
    };

    sample(0, &psi, &mut records)?;
    for b in 0..blocks {
        let k = b * cfg.record_stride;
        stepper.advance(&mut psi, cfg.t_start + cfg.dt * T::count(k), cfg.record_stride);
        sample(k + cfg.record_stride, &psi, &mut records)?;
    }
    Ok((psi, records))
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"TDSEWF01";

/// Write `ψ(t)` as a little-endian binary record:
/// magic `TDSEWF01`, `t: f64`, `x_min: f64`, `dx: f64`, `n: u64`, then `n`
/// pairs `(re: f64, im: f64)`.
pub fn write_snapshot<T: Real>(path: &Path, t: T, psi: &Wavefunction<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SNAPSHOT_MAGIC)?;
    let g = psi.grid();
    for v in [t.to_f64_lossy(), g.x_min().to_f64_lossy(), g.dx().to_f64_lossy()] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(g.n() as u64).to_le_bytes())?;
    for a in psi.amps() {
        w.write_all(&a.re.to_f64_lossy().to_le_bytes())?;
        w.write_all(&a.im.to_f64_lossy().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(f64, Wavefunction<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Config(format!("{} is not a wavefunction snapshot", path.display())));
    }
    let mut word = [0u8; 8];
    let mut next = |r: &mut BufReader<File>| -> Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let t = f64::from_le_bytes(next(&mut r)?);
    let x_min = f64::from_le_bytes(next(&mut r)?);
    let dx = f64::from_le_bytes(next(&mut r)?);
    let n = u64::from_le_bytes(next(&mut r)?) as usize;
    let grid = Grid::from_spacing(x_min, dx, n)?;
    let mut amps = Vec::with_capacity(n);
    for _ in 0..n {
        let re = f64::from_le_bytes(next(&mut r)?);
        let im = f64::from_le_bytes(next(&mut r)?);
        amps.push(Complex::new(re, im));
    }
    Ok((t, Wavefunction::new(grid, amps)?))
}
