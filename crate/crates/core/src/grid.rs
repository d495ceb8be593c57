//! Uniform 1D lattice, wavefunction storage and the spectral helpers built
//! on it: inner products, momentum representation, probability current and
//! sub-sample peak refinement.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::num::Real;

/// Uniform grid `x_i = x_min + i·dx`, `i = 0..n`.
///
/// The box is treated as periodic with period `n·dx` by the spectral
/// operators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    x_min: T,
    dx: T,
    n: usize,
}

impl<T: Real> Grid<T> {
    /// Grid with both end points included, `dx = (x_max - x_min) / (n - 1)`.
    pub fn new(x_min: T, x_max: T, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least two points, got {n}")));
        }
        let dx = (x_max - x_min) / T::count(n - 1);
        Self::from_spacing(x_min, dx, n)
    }

    pub fn from_spacing(x_min: T, dx: T, n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "point count must be a power of two >= 16, got {n}"
            )));
        }
        if !(dx > T::zero()) || !dx.is_finite() || !x_min.is_finite() {
            return Err(Error::InvalidGrid(format!("bad spacing {dx}")));
        }
        let grid = Self { x_min, dx, n };
        if !(x_min < T::zero() && grid.x_max() > T::zero()) {
            return Err(Error::InvalidGrid(format!(
                "box [{}, {}] must contain the origin strictly",
                x_min,
                grid.x_max()
            )));
        }
        Ok(grid)
    }

    /// Smallest power-of-two grid with spacing `dx` starting at `x_lo` whose
    /// last point reaches at least `x_hi`.
    pub fn covering(x_lo: T, x_hi: T, dx: T) -> Result<Self> {
        let span = ((x_hi - x_lo) / dx).ceil().to_usize().unwrap_or(0) + 1;
        let n = span.max(16).next_power_of_two();
        Self::from_spacing(x_lo, dx, n)
    }

    pub fn x_min(&self) -> T {
        self.x_min
    }

    pub fn x_max(&self) -> T {
        self.x_min + self.dx * T::count(self.n - 1)
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn x(&self, i: usize) -> T {
        self.x_min + self.dx * T::count(i)
    }

    pub fn positions(&self) -> Vec<T> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Momentum spacing of the discrete Fourier transform.
    pub fn dp(&self) -> T {
        T::TAU() / (T::count(self.n) * self.dx)
    }

    /// Nyquist momentum `π/dx`.
    pub fn p_max(&self) -> T {
        T::PI() / self.dx
    }

    /// Wavenumbers in FFT storage order (zero first, Nyquist negative).
    pub fn wavenumbers(&self) -> Vec<T> {
        let n = self.n as isize;
        let dp = self.dp();
        (0..n)
            .map(|m| {
                let m = if m < n / 2 { m } else { m - n };
                dp * <T as num_traits::FromPrimitive>::from_isize(m).unwrap()
            })
            .collect()
    }

    /// Index of the grid point closest to `x`, clamped into the grid.
    pub fn nearest_index(&self, x: T) -> usize {
        let f = ((x - self.x_min) / self.dx).round();
        f.max(T::zero()).to_usize().unwrap_or(0).min(self.n - 1)
    }

    /// Lower bracketing index and the fractional offset towards the next
    /// point, or `None` when `x` lies outside `[x_0, x_{n-1})`.
    pub fn bracket(&self, x: T) -> Option<(usize, T)> {
        let f = (x - self.x_min) / self.dx;
        if f < T::zero() {
            return None;
        }
        let i = f.floor().to_usize()?;
        if i + 1 >= self.n {
            return None;
        }
        Some((i, f - T::count(i)))
    }

    /// Offset of `other`'s first point inside `self`, when `other` is an
    /// aligned sub-grid with identical spacing.
    pub fn subgrid_offset(&self, other: &Grid<T>) -> Option<usize> {
        let tol = T::lit(1e-9);
        if ((self.dx - other.dx) / self.dx).abs() > tol {
            return None;
        }
        let f = (other.x_min - self.x_min) / self.dx;
        let k = f.round();
        if (f - k).abs() > T::lit(1e-6) || k < T::zero() {
            return None;
        }
        let k = k.to_usize()?;
        (k + other.n <= self.n).then_some(k)
    }
}

/// Complex wavefunction samples on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Wavefunction<T> {
    grid: Grid<T>,
    amps: Vec<Complex<T>>,
}

impl<T: Real> Wavefunction<T> {
    pub fn new(grid: Grid<T>, amps: Vec<Complex<T>>) -> Result<Self> {
        if amps.len() != grid.n() {
            return Err(Error::InvalidGrid(format!(
                "{} amplitudes for {} grid points",
                amps.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, amps })
    }

    pub fn zeros(grid: Grid<T>) -> Self {
        Self { grid, amps: vec![Complex::new(T::zero(), T::zero()); grid.n()] }
    }

    pub fn from_fn(grid: Grid<T>, f: impl Fn(T) -> Complex<T>) -> Self {
        let amps = (0..grid.n()).map(|i| f(grid.x(i))).collect();
        Self { grid, amps }
    }

    pub fn from_real(grid: Grid<T>, values: &[T]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex::new(v, T::zero())).collect())
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn amps(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<Complex<T>> {
        self.amps
    }

    /// `Σ|ψ_i|² dx`.
    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<T>() * self.grid.dx()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit norm and returns the norm it had before.
    pub fn normalize(&mut self) -> Result<T> {
        let norm = self.norm();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::InvalidGrid(format!("cannot normalize a state of norm {norm}")));
        }
        let inv = norm.recip();
        self.amps.iter_mut().for_each(|a| *a = *a * inv);
        Ok(norm)
    }

    pub fn scale(&mut self, factor: Complex<T>) {
        self.amps.iter_mut().for_each(|a| *a = *a * factor);
    }

    pub fn conj(&self) -> Self {
        Self { grid: self.grid, amps: self.amps.iter().map(|a| a.conj()).collect() }
    }

    pub fn density(&self, index: usize) -> T {
        self.amps[index].norm_sqr()
    }

    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        inner_product(self, other)
    }

    /// Probability current at grid point `index`.
    pub fn current(&self, index: usize) -> Result<T> {
        probability_current(self, index)
    }

    /// Current and density at an arbitrary position, linearly interpolated
    /// between the two bracketing grid points.
    pub fn flux_at(&self, x: T) -> Result<(T, T)> {
        let n = self.grid.n();
        let (i, f) = self
            .grid
            .bracket(x)
            .filter(|&(i, _)| i >= 1 && i + 2 < n)
            .ok_or(Error::BoundaryIndex { index: self.grid.nearest_index(x), n })?;
        let one = T::one();
        let j = self.current(i)? * (one - f) + self.current(i + 1)? * f;
        let rho = self.density(i) * (one - f) + self.density(i + 1) * f;
        Ok((j, rho))
    }

    /// Copies this state into a larger grid that contains this one as an
    /// aligned sub-grid; everything outside is zero.
    pub fn embed_into(&self, target: &Grid<T>) -> Result<Self> {
        let offset = target.subgrid_offset(&self.grid).ok_or(Error::GridMismatch)?;
        let mut out = Self::zeros(*target);
        out.amps[offset..offset + self.amps.len()].copy_from_slice(&self.amps);
        Ok(out)
    }

    /// `self += c·other`.
    pub fn axpy(&mut self, c: Complex<T>, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        self.amps.iter_mut().zip(&other.amps).for_each(|(a, b)| *a = *a + c * *b);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

/// `⟨a|b⟩ = Σ a_i* b_i dx`.
pub fn inner_product<T: Real>(a: &Wavefunction<T>, b: &Wavefunction<T>) -> Result<Complex<T>> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let sum = a
        .amps
        .iter()
        .zip(&b.amps)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * *y);
    Ok(sum * a.grid.dx())
}

/// `j = Im(ψ_i* (ψ_{i+1} − ψ_{i−1}) / 2dx)`, the central-difference form of
/// `(ψ*∂ψ − ψ∂ψ*)/2i`.
pub fn probability_current<T: Real>(psi: &Wavefunction<T>, index: usize) -> Result<T> {
    let n = psi.grid.n();
    if index == 0 || index + 1 >= n {
        return Err(Error::BoundaryIndex { index, n });
    }
    let a = &psi.amps;
    let deriv = (a[index + 1] - a[index - 1]) / (T::lit(2.0) * psi.grid.dx());
    Ok((a[index].conj() * deriv).im)
}

/// Cached forward/inverse FFT pair for one grid size.
#[derive(Clone)]
pub struct Spectral<T: Real> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scratch: Vec<Complex<T>>,
    inv_n: T,
}

impl<T: Real> Spectral<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![Complex::new(T::zero(), T::zero()); len],
            inv_n: T::count(n).recip(),
        }
    }

    /// Unnormalized forward transform, `Σ_j f_j e^{-2πi jk/n}`.
    pub fn forward(&mut self, buf: &mut [Complex<T>]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    /// Inverse transform including the `1/n` factor.
    pub fn inverse(&mut self, buf: &mut [Complex<T>]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let s = self.inv_n;
        buf.iter_mut().for_each(|v| *v = *v * s);
    }

    /// Applies a diagonal momentum-space multiplier in place.
    pub fn apply_diagonal(&mut self, buf: &mut [Complex<T>], diag: &[Complex<T>]) {
        self.forward(buf);
        buf.iter_mut().zip(diag).for_each(|(v, d)| *v = *v * *d);
        self.inverse(buf);
    }
}

/// Momentum density `|ψ̃(p)|²` sampled on `[−π/dx, π/dx)` in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumDistribution<T> {
    pub p_values: Vec<T>,
    pub density: Vec<T>,
}

impl<T: Real> MomentumDistribution<T> {
    pub fn dp(&self) -> T {
        self.p_values[1] - self.p_values[0]
    }

    /// `Σ density·dp`.
    pub fn integral(&self) -> T {
        self.density.iter().copied().sum::<T>() * self.dp()
    }

    pub fn mean(&self) -> T {
        let w: T = self.density.iter().copied().sum();
        self.p_values.iter().zip(&self.density).map(|(&p, &d)| p * d).sum::<T>() / w
    }

    /// Standard deviation `√(⟨p²⟩ − ⟨p⟩²)`.
    pub fn std_dev(&self) -> T {
        let w: T = self.density.iter().copied().sum();
        let mean = self.mean();
        let var = self
            .p_values
            .iter()
            .zip(&self.density)
            .map(|(&p, &d)| (p - mean) * (p - mean) * d)
            .sum::<T>()
            / w;
        var.sqrt()
    }

    /// Refined most probable momentum.
    pub fn most_probable(&self) -> Result<T> {
        argmax_refined(&self.density, &self.p_values)
    }
}

/// Unitary transform `ψ̃(p_k) = dx/√(2π) Σ_j ψ_j e^{−i p_k x_j}`, returned
/// with momenta in ascending order.
pub fn momentum_amplitudes<T: Real>(psi: &Wavefunction<T>) -> (Vec<T>, Vec<Complex<T>>) {
    let grid = psi.grid();
    let n = grid.n();
    let mut buf = psi.amps().to_vec();
    Spectral::new(n).forward(&mut buf);
    let k = grid.wavenumbers();
    let pref = grid.dx() / T::TAU().sqrt();
    let half = n / 2;
    let mut p_values = Vec::with_capacity(n);
    let mut amps = Vec::with_capacity(n);
    // fftshift: negative momenta first
    for m in (half..n).chain(0..half) {
        let p = k[m];
        // phase from the box origin x_min
        let phase = Complex::from_polar(pref, -p * grid.x_min());
        p_values.push(p);
        amps.push(buf[m] * phase);
    }
    (p_values, amps)
}

pub fn momentum_distribution<T: Real>(psi: &Wavefunction<T>) -> MomentumDistribution<T> {
    let (p_values, amps) = momentum_amplitudes(psi);
    let density = amps.iter().map(|a| a.norm_sqr()).collect();
    MomentumDistribution { p_values, density }
}

/// Refined location and height of a sampled maximum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak<T> {
    pub index: usize,
    pub coord: T,
    pub value: T,
}

/// Parabola through the discrete maximum and its neighbours; returns its
/// vertex. Coordinates need not be uniform.
pub fn refine_peak<T: Real>(samples: &[T], coords: &[T]) -> Result<Peak<T>> {
    let len = samples.len();
    if len < 3 || coords.len() != len {
        return Err(Error::SeriesTooShort(len.min(coords.len())));
    }
    let mut best = 0;
    for (i, &v) in samples.iter().enumerate() {
        if v > samples[best] {
            best = i;
        }
    }
    if best == 0 || best + 1 == len {
        return Err(Error::PeakAtBoundary { index: best, len });
    }
    let (x0, x1, x2) = (coords[best - 1], coords[best], coords[best + 1]);
    let (y0, y1, y2) = (samples[best - 1], samples[best], samples[best + 1]);
    let a = x1 - x0;
    let b = x1 - x2;
    let den = a * (y1 - y2) - b * (y1 - y0);
    if den == T::zero() {
        return Ok(Peak { index: best, coord: x1, value: y1 });
    }
    let num = a * a * (y1 - y2) - b * b * (y1 - y0);
    let coord = x1 - T::lit(0.5) * num / den;
    let value = lagrange3([x0, x1, x2], [y0, y1, y2], coord);
    Ok(Peak { index: best, coord, value })
}

pub fn argmax_refined<T: Real>(samples: &[T], coords: &[T]) -> Result<T> {
    refine_peak(samples, coords).map(|p| p.coord)
}

/// Quadratic Lagrange interpolation through three points.
pub fn lagrange3<T: Real>(x: [T; 3], y: [T; 3], at: T) -> T {
    let l0 = (at - x[1]) * (at - x[2]) / ((x[0] - x[1]) * (x[0] - x[2]));
    let l1 = (at - x[0]) * (at - x[2]) / ((x[1] - x[0]) * (x[1] - x[2]));
    let l2 = (at - x[0]) * (at - x[1]) / ((x[2] - x[0]) * (x[2] - x[1]));
    y[0] * l0 + y[1] * l1 + y[2] * l2
}
