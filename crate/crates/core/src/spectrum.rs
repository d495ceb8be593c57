//! Field-free eigenproblem of the discretized Hamiltonian.
//!
//! The kinetic operator is spectral (exact on the periodic box) and the
//! potential is diagonal, so [`Hamiltonian::apply`] costs two FFTs. The
//! ground state comes from imaginary-time relaxation; the bound set from a
//! Chebyshev-filtered block iteration with Rayleigh–Ritz deflation, which
//! converges the closely spaced Rydberg-like levels in a few seconds where
//! one-state-at-a-time relaxation would need tens of thousands of steps.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::atom::AtomFieldModel;
use crate::error::{Error, Result};
use crate::grid::{momentum_distribution, Grid, Spectral, Wavefunction};
use crate::num::Real;

/// Eigenvalue and normalized eigenvector of the field-free Hamiltonian.
#[derive(Clone, Debug)]
pub struct EigenPair<T> {
    pub energy: T,
    pub state: Wavefunction<T>,
}

/// `H = −½∂²ₓ + V(x)` with a spectral kinetic term.
pub struct Hamiltonian<T: Real> {
    grid: Grid<T>,
    kinetic: Vec<Complex<T>>,
    potential: Vec<T>,
    spectral: Spectral<T>,
}

impl<T: Real> Hamiltonian<T> {
    pub fn new(grid: Grid<T>, potential: Vec<T>) -> Result<Self> {
        if potential.len() != grid.n() {
            return Err(Error::GridMismatch);
        }
        let half = T::lit(0.5);
        let kinetic = grid
            .wavenumbers()
            .into_iter()
            .map(|k| Complex::new(half * k * k, T::zero()))
            .collect();
        Ok(Self { grid, kinetic, potential, spectral: Spectral::new(grid.n()) })
    }

    /// `H₀`: the atom without field.
    pub fn field_free(model: &AtomFieldModel<T>, grid: Grid<T>) -> Self {
        let v = grid.positions().into_iter().map(|x| model.core_potential(x)).collect();
        Self::new(grid, v).expect("potential sampled on its own grid")
    }

    /// `H(t)` with the field frozen at its value at `t`.
    pub fn at_time(model: &AtomFieldModel<T>, grid: Grid<T>, t: T) -> Self {
        let v = grid.positions().into_iter().map(|x| model.potential(x, t)).collect();
        Self::new(grid, v).expect("potential sampled on its own grid")
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn potential(&self) -> &[T] {
        &self.potential
    }

    /// `out = H·psi`.
    pub fn apply(&mut self, psi: &[Complex<T>], out: &mut [Complex<T>]) {
        out.copy_from_slice(psi);
        self.spectral.apply_diagonal(out, &self.kinetic);
        out.iter_mut()
            .zip(psi)
            .zip(&self.potential)
            .for_each(|((o, p), &v)| *o = *o + *p * v);
    }

    pub fn apply_wavefunction(&mut self, psi: &Wavefunction<T>) -> Result<Wavefunction<T>> {
        if psi.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = Wavefunction::zeros(self.grid);
        self.apply(psi.amps(), out.amps_mut());
        Ok(out)
    }

    /// `⟨H⟩` and `⟨H²⟩ = ‖Hψ‖²` for a normalized state.
    pub fn moments(&mut self, psi: &Wavefunction<T>) -> Result<(T, T)> {
        let h = self.apply_wavefunction(psi)?;
        let mean = psi.inner(&h)?.re;
        Ok((mean, h.norm_sqr()))
    }

    /// Guaranteed enclosure of the spectrum: `T ≥ 0` and `T ≤ (π/dx)²/2`.
    pub fn spectral_bounds(&self) -> (T, T) {
        let (vmin, vmax) = self
            .potential
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let kmax = self.grid.p_max();
        (vmin, vmax + T::lit(0.5) * kmax * kmax)
    }

    /// `‖Hψ − Eψ‖` with `E = ⟨ψ|H|ψ⟩`.
    pub fn residual(&mut self, psi: &Wavefunction<T>) -> Result<(T, T)> {
        let mut h = self.apply_wavefunction(psi)?;
        let e = psi.inner(&h)?.re / psi.norm_sqr();
        h.axpy(Complex::new(-e, T::zero()), psi)?;
        Ok((e, h.norm()))
    }

    fn apply_shifted(&mut self, psi: &[Complex<T>], out: &mut [Complex<T>], c: T, inv_r: T) {
        self.apply(psi, out);
        out.iter_mut().zip(psi).for_each(|(o, p)| *o = (*o - *p * c) * inv_r);
    }
}

/// Scaled modified Bessel functions `e^{−β} I_k(β)`, `k = 0..`, by Miller's
/// backward recurrence normalized with `I₀ + 2ΣI_k = e^β`.
pub(crate) fn scaled_bessel_i(beta: f64, tol: f64) -> Vec<f64> {
    let m = ((2.0 * beta * (-tol.ln())).sqrt().ceil() as usize + 20).max(20);
    let start = m + 40 + (beta.sqrt() as usize);
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = vals[k + 1] + 2.0 * k as f64 / beta * vals[k];
        if vals[k - 1] > 1e250 {
            vals.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    let sum = vals[0] + 2.0 * vals[1..].iter().sum::<f64>();
    let mut out: Vec<f64> = vals.into_iter().map(|v| v / sum).collect();
    let cut = out.iter().rposition(|&v| v > tol * out[0]).unwrap_or(0) + 1;
    out.truncate(cut.max(2));
    out
}

/// Imaginary-time propagator `ψ ↦ e^{−HΔτ}ψ` (up to a scalar) expanded in
/// Chebyshev polynomials of the rescaled Hamiltonian.
struct ImaginaryTimeStep<T> {
    coeffs: Vec<T>,
    center: T,
    inv_radius: T,
}

impl<T: Real> ImaginaryTimeStep<T> {
    fn new(h: &Hamiltonian<T>, dtau: f64) -> Self {
        let (lo, hi) = h.spectral_bounds();
        let (lo, hi) = (lo.to_f64_lossy(), hi.to_f64_lossy());
        let center = 0.5 * (hi + lo);
        let radius = 0.5 * (hi - lo) * 1.001;
        let bessel = scaled_bessel_i(radius * dtau, 1e-18);
        // e^{−β(1+x)} = Σ (2 − δ_k0)(−1)^k e^{−β}I_k(β) T_k(x)
        let coeffs = bessel
            .iter()
            .enumerate()
            .map(|(k, &b)| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let w = if k == 0 { 1.0 } else { 2.0 };
                T::lit(sign * w * b)
            })
            .collect();
        Self { coeffs, center: T::lit(center), inv_radius: T::lit(1.0 / radius) }
    }

    fn apply(&self, h: &mut Hamiltonian<T>, psi: &mut [Complex<T>]) {
        let n = psi.len();
        let zero = Complex::new(T::zero(), T::zero());
        let mut prev = psi.to_vec();
        let mut cur = vec![zero; n];
        let mut next = vec![zero; n];
        h.apply_shifted(&prev, &mut cur, self.center, self.inv_radius);
        let (a0, a1) = (self.coeffs[0], self.coeffs[1]);
        psi.iter_mut()
            .zip(&prev)
            .zip(&cur)
            .for_each(|((o, p), c)| *o = *p * a0 + *c * a1);
        let two = T::lit(2.0);
        for &a in &self.coeffs[2..] {
            h.apply_shifted(&cur, &mut next, self.center, self.inv_radius);
            for i in 0..n {
                next[i] = next[i] * two - prev[i];
                psi[i] = psi[i] + next[i] * a;
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
    }
}

const RELAX_DTAU_MAX: f64 = 10.0;
const RELAX_BETA: f64 = 2000.0;
const RELAX_MAX_STEPS: usize = 2000;

/// Lowest eigenpair of `H₀` by imaginary-time relaxation with
/// renormalization every step.
///
/// Converged once the energy changes by less than `1e-12` between steps and
/// the residual `‖H₀ψ − Eψ‖` is below `1e-10`.
pub fn ground_state<T: Real>(model: &AtomFieldModel<T>, grid: Grid<T>) -> Result<EigenPair<T>> {
    let mut h = Hamiltonian::field_free(model, grid);
    let width = (T::lit(2.0) / model.z.max(T::lit(1e-3))).max(T::lit(0.5));
    let mut psi = Wavefunction::from_fn(grid, |x| {
        Complex::new((-(x * x) / (T::lit(2.0) * width * width)).exp(), T::zero())
    });
    psi.normalize()?;
    // Recurrence roundoff grows like (degree)² near the spectrum edge, so the
    // expansion length rather than Δτ is what must stay bounded.
    let (lo, hi) = h.spectral_bounds();
    let dtau = (2.0 * RELAX_BETA / (hi - lo).to_f64_lossy()).min(RELAX_DTAU_MAX);
    let step = ImaginaryTimeStep::new(&h, dtau);
    let mut energy = T::infinity();
    for _ in 0..RELAX_MAX_STEPS {
        step.apply(&mut h, psi.amps_mut());
        psi.normalize()?;
        let (e, res) = h.residual(&psi)?;
        let converged = (e - energy).abs() < T::lit(1e-12) && res < T::lit(1e-10);
        energy = e;
        if converged {
            fix_sign(&mut psi);
            return Ok(EigenPair { energy, state: psi });
        }
    }
    Err(Error::NotConverged(RELAX_MAX_STEPS))
}

/// Settings of the block eigensolver behind [`bound_states`].
#[derive(Clone, Copy, Debug)]
pub struct BoundStateOptions {
    /// Maximum `|ψ|` allowed at either box edge for a state to count as bound.
    pub edge_tolerance: f64,
    pub residual_tolerance: f64,
    pub initial_block: usize,
    pub filter_degree: usize,
    pub max_iterations: usize,
}

impl Default for BoundStateOptions {
    fn default() -> Self {
        Self {
            edge_tolerance: 1e-6,
            residual_tolerance: 1e-9,
            initial_block: 24,
            filter_degree: 40,
            max_iterations: 400,
        }
    }
}

/// All eigenpairs of `H₀` with negative energy whose amplitude vanishes at
/// the box edges, sorted by energy.
pub fn bound_states<T: Real>(model: &AtomFieldModel<T>, grid: Grid<T>) -> Result<Vec<EigenPair<T>>> {
    bound_states_with(model, grid, BoundStateOptions::default())
}

pub fn bound_states_with<T: Real>(
    model: &AtomFieldModel<T>,
    grid: Grid<T>,
    opts: BoundStateOptions,
) -> Result<Vec<EigenPair<T>>> {
    let mut h = Hamiltonian::field_free(model, grid);
    let mut block = opts.initial_block.min(grid.n() / 2).max(4);
    loop {
        let (energies, states) = filtered_block(&mut h, block, &opts)?;
        let negative = energies.iter().filter(|&&e| e < 0.0).count();
        if negative + BLOCK_GUARD > block && block < grid.n() / 2 {
            block = (block * 2).min(grid.n() / 2);
            continue;
        }
        let mut out = Vec::new();
        for (e, v) in energies.into_iter().zip(states) {
            if e >= 0.0 {
                break;
            }
            let edge = v[0].abs().max(v[v.len() - 1].abs());
            if edge >= opts.edge_tolerance {
                continue;
            }
            let mut psi = Wavefunction::from_real(grid, &v.iter().map(|&x| T::lit(x)).collect::<Vec<_>>())?;
            psi.normalize()?;
            fix_sign(&mut psi);
            let energy = h.residual(&psi)?.0;
            out.push(EigenPair { energy, state: psi });
        }
        return Ok(out);
    }
}

type Block = Vec<Vec<f64>>;

/// Ritz vectors at the top of the block kept above the last wanted level.
const BLOCK_GUARD: usize = 4;

/// Chebyshev-filtered subspace iteration on real vectors; returns Ritz
/// values ascending with their normalized vectors.
fn filtered_block<T: Real>(
    h: &mut Hamiltonian<T>,
    size: usize,
    opts: &BoundStateOptions,
) -> Result<(Vec<f64>, Block)> {
    let grid = *h.grid();
    let n = grid.n();
    let dx = grid.dx().to_f64_lossy();
    let (_, upper) = h.spectral_bounds();
    let upper = upper.to_f64_lossy();

    let mut rng = 0x9e37_79b9_7f4a_7c15u64;
    let mut block: Block = (0..size)
        .map(|j| {
            (0..n)
                .map(|i| {
                    rng ^= rng << 13;
                    rng ^= rng >> 7;
                    rng ^= rng << 17;
                    let x = grid.x(i).to_f64_lossy();
                    let noise = (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                    noise + (-(x * x) / (8.0 + j as f64)).exp() * x.powi((j % 6) as i32)
                })
                .collect()
        })
        .collect();
    orthonormalize(&mut block, dx);
    let mut ritz = rayleigh_ritz(h, &mut block, dx);

    for _ in 0..opts.max_iterations {
        let residuals = residuals(h, &block, &ritz, dx);
        // the top of the block converges slowly and only serves as a buffer;
        // once the buffer dips below zero the caller enlarges the block
        if ritz[size - BLOCK_GUARD] < 0.0 {
            return Ok((ritz, block));
        }
        let done = ritz
            .iter()
            .zip(&residuals)
            .filter(|(&e, _)| e < 0.0)
            .all(|(_, &r)| r < opts.residual_tolerance);
        if done {
            return Ok((ritz, block));
        }
        let lower = ritz[0];
        let cut = ritz[size - 1];
        chebyshev_filter(h, &mut block, opts.filter_degree, cut, upper, lower);
        orthonormalize(&mut block, dx);
        ritz = rayleigh_ritz(h, &mut block, dx);
    }
    Err(Error::NotConverged(opts.max_iterations))
}

fn apply_real<T: Real>(h: &mut Hamiltonian<T>, v: &[f64]) -> Vec<f64> {
    let input: Vec<Complex<T>> = v.iter().map(|&x| Complex::new(T::lit(x), T::zero())).collect();
    let mut out = vec![Complex::new(T::zero(), T::zero()); v.len()];
    h.apply(&input, &mut out);
    out.into_iter().map(|c| c.re.to_f64_lossy()).collect()
}

/// Scaled Chebyshev filter damping the interval `[cut, upper]`.
fn chebyshev_filter<T: Real>(
    h: &mut Hamiltonian<T>,
    block: &mut Block,
    degree: usize,
    cut: f64,
    upper: f64,
    lower: f64,
) {
    let e = 0.5 * (upper - cut);
    let c = 0.5 * (upper + cut);
    let sigma0 = e / (lower - c);
    for v in block.iter_mut() {
        let mut sigma = sigma0;
        let hv = apply_real(h, v);
        let mut y: Vec<f64> =
            hv.iter().zip(v.iter()).map(|(a, b)| (a - c * b) * sigma / e).collect();
        let mut x = std::mem::take(v);
        for _ in 1..degree {
            let sigma_next = 1.0 / (2.0 / sigma0 - sigma);
            let hy = apply_real(h, &y);
            let y_next: Vec<f64> = hy
                .iter()
                .zip(&y)
                .zip(&x)
                .map(|((hy, y), x)| 2.0 * sigma_next / e * (hy - c * y) - sigma * sigma_next * x)
                .collect();
            x = std::mem::replace(&mut y, y_next);
            sigma = sigma_next;
        }
        *v = y;
    }
}

/// Modified Gram–Schmidt, two passes, with the `dx` quadrature weight.
fn orthonormalize(block: &mut Block, dx: f64) {
    for _ in 0..2 {
        for j in 0..block.len() {
            let (done, rest) = block.split_at_mut(j);
            let v = &mut rest[0];
            for u in done.iter() {
                let proj: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>() * dx;
                v.iter_mut().zip(u).for_each(|(b, a)| *b -= proj * a);
            }
            let norm = (v.iter().map(|b| b * b).sum::<f64>() * dx).sqrt();
            v.iter_mut().for_each(|b| *b /= norm);
        }
    }
}

fn rayleigh_ritz<T: Real>(h: &mut Hamiltonian<T>, block: &mut Block, dx: f64) -> Vec<f64> {
    let k = block.len();
    let hv: Block = block.iter().map(|v| apply_real(h, v)).collect();
    let mut g = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let val: f64 = block[i].iter().zip(&hv[j]).map(|(a, b)| a * b).sum::<f64>() * dx;
            g[(i, j)] = val;
            g[(j, i)] = val;
        }
    }
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = block[0].len();
    let rotated: Block = order
        .iter()
        .map(|&col| {
            let mut out = vec![0.0; n];
            for (i, v) in block.iter().enumerate() {
                let q = eig.eigenvectors[(i, col)];
                out.iter_mut().zip(v).for_each(|(o, x)| *o += q * x);
            }
            out
        })
        .collect();
    *block = rotated;
    order.iter().map(|&i| eig.eigenvalues[i]).collect()
}

fn residuals<T: Real>(h: &mut Hamiltonian<T>, block: &Block, ritz: &[f64], dx: f64) -> Vec<f64> {
    block
        .iter()
        .zip(ritz)
        .map(|(v, &e)| {
            let hv = apply_real(h, v);
            (hv.iter().zip(v).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>() * dx).sqrt()
        })
        .collect()
}

/// Real eigenvectors are fixed up to sign; make the largest amplitude positive.
fn fix_sign<T: Real>(psi: &mut Wavefunction<T>) {
    let amps = psi.amps();
    let peak = amps
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().partial_cmp(&b.norm_sqr()).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(Complex::new(T::one(), T::zero()));
    let phase = peak / peak.norm();
    psi.scale(phase.conj());
    // strip rounding residue from the imaginary part of a real state
    psi.amps_mut().iter_mut().for_each(|a| a.im = T::zero());
}

/// Standard deviation of the momentum density, `√(⟨p²⟩ − ⟨p⟩²)`.
pub fn ground_momentum_width<T: Real>(pair: &EigenPair<T>) -> T {
    momentum_distribution(&pair.state).std_dev()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_coefficients_sum_to_one() {
        for beta in [0.5, 10.0, 400.0, 5000.0] {
            let s = scaled_bessel_i(beta, 1e-18);
            let total = s[0] + 2.0 * s[1..].iter().sum::<f64>();
            assert!((total - 1.0).abs() < 1e-12);
            // e^{-β}I_0(β) ≈ 1/√(2πβ) for large β
            if beta > 100.0 {
                let asym = 1.0 / (2.0 * std::f64::consts::PI * beta).sqrt();
                assert!((s[0] / asym - 1.0).abs() < 1.0 / (4.0 * beta));
            }
        }
    }

    #[test]
    fn free_particle_kinetic_moments() {
        // plane wave with an exactly representable wavenumber
        let g = Grid::from_spacing(-12.8f64, 0.1, 256).unwrap();
        let k = 5.0 * g.dp();
        let psi = Wavefunction::from_fn(g, |x| Complex::from_polar(1.0 / 25.6f64.sqrt(), k * x));
        let mut h = Hamiltonian::new(g, vec![0.0; 256]).unwrap();
        let (mean, sq) = h.moments(&psi).unwrap();
        assert!((mean - k * k / 2.0).abs() < 1e-12);
        assert!((sq - mean * mean).abs() < 1e-12);
    }

    #[test]
    fn ground_state_z2() {
        let m = AtomFieldModel::<f64>::new(2.0, 0.0, 1.0, 0.0);
        let g = Grid::from_spacing(-25.6, 0.05, 1024).unwrap();
        let pair = ground_state(&m, g).unwrap();
        assert!((pair.energy + 2.0).abs() < 1e-3, "{}", pair.energy);
        let width = ground_momentum_width(&pair);
        assert!((width - 0.76).abs() < 0.04, "{width}");
    }

    #[test]
    fn ground_state_is_even_and_nodeless() {
        let m = AtomFieldModel::<f64>::new(1.0, 0.0, 1.0, 0.0);
        let g = Grid::from_spacing(-25.6, 0.1, 512).unwrap();
        let pair = ground_state(&m, g).unwrap();
        let a = pair.state.amps();
        assert!(a.iter().all(|c| c.re >= -1e-12));
        for i in 1..256 {
            assert!((a[256 - i].re - a[256 + i].re).abs() < 1e-9);
        }
        assert!(momentum_distribution(&pair.state).mean().abs() < 1e-10);
    }
}
