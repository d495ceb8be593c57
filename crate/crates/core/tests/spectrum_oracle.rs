//! Spectrum routes checked against dense diagonalization: the same
//! Fourier-grid Hamiltonian exactly, and the finite-difference one in the
//! `dx → 0` limit.

use nalgebra::{DMatrix, SymmetricEigen};
use tunnel_core::Grid;
use tunnel_core::spectrum::{bound_states, ground_momentum_width, ground_state, Hamiltonian};
use tunnel_core::AtomFieldModel;

/// Dense `H₀` with the periodic spectral kinetic matrix
/// `T_ij = (1/n) Σ_k (k²/2) cos(k (x_i − x_j))`.
fn dense_hamiltonian(model: &AtomFieldModel, grid: &Grid) -> DMatrix<f64> {
    let n = grid.n();
    let ks = grid.wavenumbers();
    let column: Vec<f64> = (0..n)
        .map(|m| {
            let d = m as f64 * grid.dx();
            ks.iter().map(|k| 0.5 * k * k * (k * d).cos()).sum::<f64>() / n as f64
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| {
        let t = column[(i + n - j) % n];
        if i == j {
            t + model.core_potential(grid.x(i))
        } else {
            t
        }
    })
}

struct Dense {
    energies: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

fn dense_spectrum(model: &AtomFieldModel, grid: &Grid) -> Dense {
    let eig = SymmetricEigen::new(dense_hamiltonian(model, grid));
    let mut order: Vec<usize> = (0..grid.n()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let scale = 1.0 / grid.dx().sqrt();
    Dense {
        energies: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        vectors: order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().map(|v| v * scale).collect())
            .collect(),
    }
}

fn reference_grid() -> Grid {
    Grid::from_spacing(-51.2, 0.1, 1024).unwrap()
}

fn overlap(a: &[f64], b: &tunnel_core::Wavefunction, dx: f64) -> f64 {
    a.iter().zip(b.amps()).map(|(x, y)| x * y.re).sum::<f64>() * dx
}

#[test]
fn ground_state_matches_dense_diagonalization() {
    let model = AtomFieldModel::new(1.0, 0.0, 1.0, 0.0);
    let grid = reference_grid();
    let dense = dense_spectrum(&model, &grid);
    let pair = ground_state(&model, grid).unwrap();
    // variational: relaxation can only approach the exact minimum from above
    assert!(pair.energy >= dense.energies[0] - 1e-12);
    assert!(pair.energy - dense.energies[0] < 1e-10);
    assert!((pair.energy + 0.5).abs() < 1e-4, "E0 = {}", pair.energy);
    let ov = overlap(&dense.vectors[0], &pair.state, grid.dx()).abs();
    assert!((ov - 1.0).abs() < 1e-10);
    let width = ground_momentum_width(&pair);
    assert!((width - 0.38).abs() < 0.02, "width = {width}");
}

#[test]
fn bound_set_matches_dense_diagonalization() {
    let model = AtomFieldModel::new(1.0, 0.0, 1.0, 0.0);
    let grid = reference_grid();
    let dense = dense_spectrum(&model, &grid);
    let states = bound_states(&model, grid).unwrap();

    let expected: Vec<usize> = (0..grid.n())
        .filter(|&i| {
            let v = &dense.vectors[i];
            dense.energies[i] < 0.0 && v[0].abs().max(v[grid.n() - 1].abs()) < 1e-6
        })
        .collect();
    assert_eq!(states.len(), expected.len());
    // frozen from the dense oracle on this box
    assert_eq!(states.len(), 4);

    let ground = ground_state(&model, grid).unwrap();
    let diff = states[0]
        .state
        .amps()
        .iter()
        .zip(ground.state.amps())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        * grid.dx();
    assert!(diff.sqrt() < 1e-8);

    let mut h = Hamiltonian::field_free(&model, grid);
    for (pair, &i) in states.iter().zip(&expected) {
        assert!((pair.energy - dense.energies[i]).abs() < 1e-10);
        let ov = overlap(&dense.vectors[i], &pair.state, grid.dx()).abs();
        assert!((ov - 1.0).abs() < 1e-9, "level {i}: overlap {ov}");
        let (_, res) = h.residual(&pair.state).unwrap();
        assert!(res < 1e-8);
        // virial-type sanity: kinetic energy positive, potential below E
        let v: f64 = pair
            .state
            .amps()
            .iter()
            .zip(h.potential())
            .map(|(a, v)| a.norm_sqr() * v)
            .sum::<f64>()
            * grid.dx();
        assert!(v < pair.energy && pair.energy - v > 0.0);
    }
    for (a, pa) in states.iter().enumerate() {
        for pb in &states[a..] {
            let ip = pa.state.inner(&pb.state).unwrap().norm();
            let want = if std::ptr::eq(pa, pb) { 1.0 } else { 0.0 };
            assert!((ip - want).abs() < 1e-10, "Gram entry {ip}");
        }
    }
}

/// Lowest eigenvalue of the three-point finite-difference `H₀` (hard walls).
fn finite_difference_ground(model: &AtomFieldModel, x_min: f64, dx: f64, n: usize) -> f64 {
    let off = -0.5 / (dx * dx);
    let h = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 / (dx * dx) + model.core_potential(x_min + dx * i as f64)
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            0.0
        }
    });
    SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[test]
fn finite_difference_oracle_converges_to_spectral_ground() {
    let model = AtomFieldModel::new(1.0, 0.0, 1.0, 0.0);
    let spectral = ground_state(&model, Grid::from_spacing(-25.6, 0.1, 512).unwrap()).unwrap().energy;
    let coarse = finite_difference_ground(&model, -25.6, 0.1, 512) - spectral;
    let fine = finite_difference_ground(&model, -25.6, 0.05, 1024) - spectral;
    assert!(coarse.abs() < 1e-3, "dx=0.1 gap {coarse}");
    let ratio = coarse / fine;
    assert!((ratio - 4.0).abs() < 0.5, "finite-difference error ratio {ratio}");
}
