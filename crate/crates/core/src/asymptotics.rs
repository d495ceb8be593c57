//! From the final wavefunction to asymptotic momenta, and the classical map
//! from an exit instant to an asymptotic momentum used to reconstruct `τ₂`.

use crate::atom::{AtomFieldModel, BarrierGeometry};
use crate::error::{Error, Result};
use crate::grid::{momentum_distribution, Wavefunction};
use crate::num::Real;
use crate::spectrum::EigenPair;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalState<T> {
    pub x: T,
    pub p: T,
    pub t: T,
}

impl<T: Real> ClassicalState<T> {
    pub fn new(x: T, p: T, t: T) -> Self {
        Self { x, p, t }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.p.is_finite() && self.t.is_finite()
    }
}

/// `ψ − Σ_k ⟨φ_k|ψ⟩ φ_k`.
pub fn project_out_bound<T: Real>(psi: &Wavefunction<T>, bound: &[EigenPair<T>]) -> Result<Wavefunction<T>> {
    let mut out = psi.clone();
    for pair in bound {
        let c = pair.state.inner(psi)?;
        out.axpy(-c, &pair.state)?;
    }
    Ok(out)
}

/// Population left in the bound set, `Σ_k |⟨φ_k|ψ⟩|²`.
pub fn bound_population<T: Real>(psi: &Wavefunction<T>, bound: &[EigenPair<T>]) -> Result<T> {
    bound
        .iter()
        .map(|pair| pair.state.inner(psi).map(|c| c.norm_sqr()))
        .sum()
}

/// Most probable momentum of the freed part.
pub fn most_probable_momentum<T: Real>(psi_free: &Wavefunction<T>) -> Result<T> {
    let norm = psi_free.norm();
    if !(norm > T::lit(1e-8)) {
        return Err(Error::NegligibleFreeNorm(norm.to_f64_lossy()));
    }
    momentum_distribution(psi_free).most_probable()
}

/// Integration step of the classical leg.
pub const CLASSICAL_DT: f64 = 0.05;
/// Beyond this distance the core force is neglected.
pub const COULOMB_CUTOFF: f64 = 500.0;

fn rk4<T: Real>(s: ClassicalState<T>, h: T, force: impl Fn(T, T) -> T) -> ClassicalState<T> {
    let half = T::lit(0.5);
    let (x, p, t) = (s.x, s.p, s.t);
    let k1x = p;
    let k1p = force(x, t);
    let k2x = p + half * h * k1p;
    let k2p = force(x + half * h * k1x, t + half * h);
    let k3x = p + half * h * k2p;
    let k3p = force(x + half * h * k2x, t + half * h);
    let k4x = p + h * k3p;
    let k4p = force(x + h * k3x, t + h);
    let sixth = h / T::lit(6.0);
    ClassicalState {
        x: x + sixth * (k1x + T::lit(2.0) * (k2x + k3x) + k4x),
        p: p + sixth * (k1p + T::lit(2.0) * (k2p + k3p) + k4p),
        t: t + h,
    }
}

/// Integrate Newton's equation `ẍ = −∂ₓV(x,t)` from `s0` to `t_end` with RK4
/// at step `dt`, without any asymptotic hand-off.
pub fn integrate<T: Real>(
    s0: ClassicalState<T>,
    model: &AtomFieldModel<T>,
    t_end: T,
    dt: T,
    recapture_below: Option<T>,
) -> Result<ClassicalState<T>> {
    let steps = ((t_end - s0.t) / dt).ceil().to_usize().unwrap_or(0).max(1);
    let h = (t_end - s0.t) / T::count(steps);
    let mut s = s0;
    for _ in 0..steps {
        s = rk4(s, h, |x, t| model.force(x, t));
        check_escape(&s, recapture_below)?;
    }
    Ok(s)
}

fn check_escape<T: Real>(s: &ClassicalState<T>, recapture_below: Option<T>) -> Result<()> {
    if !s.is_finite() {
        return Err(Error::NonFinite(s.t.to_f64_lossy()));
    }
    if let Some(x_in) = recapture_below {
        if s.x < x_in {
            return Err(Error::Recaptured { t: s.t.to_f64_lossy(), x: s.x.to_f64_lossy() });
        }
    }
    Ok(())
}

/// Asymptotic state of a trajectory started at `s0`.
///
/// RK4 with `dt = 0.05` up to `t_end`; if the electron is still within the
/// core's reach it is followed further until `|x| > 500`. The field impulse
/// remaining after the last integrated instant is added in closed form and
/// the core force is dropped. Falling back below the barrier entry counts as
/// recapture.
pub fn classical_trajectory<T: Real>(
    s0: ClassicalState<T>,
    model: &AtomFieldModel<T>,
    t_end: T,
) -> Result<ClassicalState<T>> {
    let dt = T::lit(CLASSICAL_DT);
    classical_trajectory_with_step(s0, model, t_end, dt)
}

pub fn classical_trajectory_with_step<T: Real>(
    s0: ClassicalState<T>,
    model: &AtomFieldModel<T>,
    t_end: T,
    dt: T,
) -> Result<ClassicalState<T>> {
    let x_in = model.barrier_points().ok().map(|g| g.x_in);
    let mut s = integrate(s0, model, t_end, dt, x_in)?;
    let cutoff = T::lit(COULOMB_CUTOFF);
    // a bound orbit would never leave; give up after a generous budget
    let budget = T::lit(1e5);
    let t_limit = s.t + budget;
    while s.x.abs() <= cutoff && model.z != T::zero() {
        if s.t > t_limit {
            return Err(Error::Recaptured { t: s.t.to_f64_lossy(), x: s.x.to_f64_lossy() });
        }
        s = rk4(s, dt, |x, t| model.force(x, t));
        check_escape(&s, x_in)?;
    }
    Ok(ClassicalState { x: s.x, p: s.p + model.field_impulse_after(s.t), t: T::infinity() })
}

/// Asymptotic momentum of an electron released at rest at `x_exit` at `t_exit`.
pub fn released_momentum<T: Real>(
    t_exit: T,
    geom: &BarrierGeometry<T>,
    model: &AtomFieldModel<T>,
    t_final: T,
) -> Result<T> {
    let s = classical_trajectory(ClassicalState::new(geom.x_exit, T::zero(), t_exit), model, t_final)?;
    Ok(s.p)
}

/// Final instant of the asymptotic run, `t₀ + 8/ω`.
pub fn final_time<T: Real>(model: &AtomFieldModel<T>) -> T {
    model.t0 + T::lit(8.0) / model.omega
}

const TAU2_SCAN: usize = 96;
const TAU2_TOL: f64 = 1e-6;

/// Exit instant (relative to `t₀`) at which an electron leaving `x_exit` at
/// rest would reach the asymptotic momentum `p_fq`.
///
/// The window `t₀ ± 3τ_E` is scanned for the first sign change of
/// `p(t_exit) − p_fq` among non-recaptured trajectories, then bisected to
/// `1e-6`.
pub fn tau_2<T: Real>(p_fq: T, geom: &BarrierGeometry<T>, model: &AtomFieldModel<T>) -> Result<T> {
    let tau_e = model.derived_scales().tau_e;
    let (lo, hi) = (model.t0 - T::lit(3.0) * tau_e, model.t0 + T::lit(3.0) * tau_e);
    let t_final = final_time(model);
    let eval = |t: T| released_momentum(t, geom, model, t_final.max(t)).map(|p| p - p_fq);

    let mut prev: Option<(T, T)> = None;
    let mut bracket = None;
    for k in 0..=TAU2_SCAN {
        let t = lo + (hi - lo) * T::count(k) / T::count(TAU2_SCAN);
        let f = match eval(t) {
            Ok(f) => f,
            Err(Error::Recaptured { .. }) => {
                prev = None;
                continue;
            }
            Err(e) => return Err(e),
        };
        if f == T::zero() {
            return Ok(t - model.t0);
        }
        if let Some((tp, fp)) = prev {
            if (fp < T::zero()) != (f < T::zero()) {
                bracket = Some((tp, fp, t));
                break;
            }
        }
        prev = Some((t, f));
    }
    let (mut a, mut fa, mut b) = bracket.ok_or(Error::Tau2OutsideWindow {
        lo: (lo - model.t0).to_f64_lossy(),
        hi: (hi - model.t0).to_f64_lossy(),
    })?;
    let tol = T::lit(TAU2_TOL);
    while b - a > tol {
        let m = (a + b) * T::lit(0.5);
        let fm = match eval(m) {
            Ok(f) => f,
            // recapture inside a bracket: treat like the side that still
            // has too little momentum
            Err(Error::Recaptured { .. }) => -p_fq.abs() - T::one(),
            Err(e) => return Err(e),
        };
        if (fm < T::zero()) == (fa < T::zero()) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok((a + b) * T::lit(0.5) - model.t0)
}

/// Which closed-form approximation of the under-barrier time to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    One,
    Three,
}

/// Closed-form field dependence of the under-barrier (Wigner) time:
/// `14.29√(1−16E₀/Z³)/Z²` in one dimension, `9.0√(1−9.5E₀/Z³)/Z²` in three.
pub fn wigner_closed_form<T: Real>(model: &AtomFieldModel<T>, dim: Dimension) -> Result<T> {
    let (c, k) = match dim {
        Dimension::One => (14.29, 16.0),
        Dimension::Three => (9.0, 9.5),
    };
    let z = model.z;
    let radicand = T::one() - T::lit(k) * model.e0 / (z * z * z);
    if radicand < T::zero() {
        return Err(Error::NegativeRadicand(radicand.to_f64_lossy()));
    }
    Ok(T::lit(c) * radicand.sqrt() / (z * z))
}
