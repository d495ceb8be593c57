//! Soft-core atom in a Gaussian field pulse.
//!
//! `V(x,t) = −Z/√(x²+α) − E(t)·x` with `α = 2/Z²` and
//! `E(t) = E₀·exp(−ω²(t−t₀)²/2)`. The field pushes the electron towards
//! positive `x`, so the barrier and the tunnel exit lie at `x > 0`.

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomFieldModel<T> {
    pub z: T,
    pub alpha: T,
    pub e0: T,
    pub omega: T,
    pub t0: T,
}

/// Derived scales of a parameter point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedScales<T> {
    /// Ionization potential `Z²/2`.
    pub ip: T,
    /// Keldysh parameter `ω√(2I_p)/E₀`.
    pub gamma: T,
    /// Rise time `√2/ω`.
    pub tau_e: T,
    /// Keldysh time `√(2I_p)/E₀`.
    pub tau_k: T,
}

/// Classical turning points of `V(x,t₀) = −I_p` on the positive axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierGeometry<T> {
    pub x_in: T,
    pub x_exit: T,
}

impl<T: Real> BarrierGeometry<T> {
    pub fn width(&self) -> T {
        self.x_exit - self.x_in
    }

    /// Evenly spaced detector positions from `x_in` to `x_exit`, both included.
    pub fn detector_positions(&self, intervals: usize) -> Vec<T> {
        let step = self.width() / T::count(intervals);
        (0..=intervals).map(|k| self.x_in + step * T::count(k)).collect()
    }
}

impl<T: Real> AtomFieldModel<T> {
    /// Soft-core atom with `α = 2/Z²`, so the ground state sits at `−Z²/2`.
    pub fn new(z: T, e0: T, omega: T, t0: T) -> Self {
        Self { z, alpha: T::lit(2.0) / (z * z), e0, omega, t0 }
    }

    /// Parameter point specified by its Keldysh parameter instead of `ω`.
    pub fn from_keldysh(z: T, e0: T, gamma: T, t0: T) -> Self {
        let ip = z * z / T::lit(2.0);
        let omega = gamma * e0 / (T::lit(2.0) * ip).sqrt();
        Self::new(z, e0, omega, t0)
    }

    /// Same pulse with the binding potential switched off (`Z = 0`).
    pub fn without_core(e0: T, omega: T, t0: T) -> Self {
        Self { z: T::zero(), alpha: T::one(), e0, omega, t0 }
    }

    pub fn with_field(self, e0: T) -> Self {
        Self { e0, ..self }
    }

    pub fn ip(&self) -> T {
        self.z * self.z / T::lit(2.0)
    }

    pub fn field(&self, t: T) -> T {
        let s = self.omega * (t - self.t0);
        self.e0 * (-s * s / T::lit(2.0)).exp()
    }

    pub fn core_potential(&self, x: T) -> T {
        -self.z / (x * x + self.alpha).sqrt()
    }

    pub fn potential(&self, x: T, t: T) -> T {
        self.core_potential(x) - self.field(t) * x
    }

    /// Potential with the field frozen at an arbitrary strength.
    pub fn static_potential(&self, x: T, field: T) -> T {
        self.core_potential(x) - field * x
    }

    /// Core force `−∂V_core/∂x`.
    pub fn core_force(&self, x: T) -> T {
        let r2 = x * x + self.alpha;
        -self.z * x / (r2 * r2.sqrt())
    }

    /// Total force `−∂V/∂x` on the electron.
    pub fn force(&self, x: T, t: T) -> T {
        self.core_force(x) + self.field(t)
    }

    /// `∫_t^∞ E(t') dt'` in closed form.
    pub fn field_impulse_after(&self, t: T) -> T {
        let s = self.omega * (t - self.t0) / T::SQRT_2();
        let erfc = T::lit(libm::erfc(s.to_f64_lossy()));
        self.e0 / self.omega * (T::FRAC_PI_2()).sqrt() * erfc
    }

    pub fn derived_scales(&self) -> DerivedScales<T> {
        let ip = self.ip();
        let two_ip = (T::lit(2.0) * ip).sqrt();
        DerivedScales {
            ip,
            gamma: self.omega * two_ip / self.e0,
            tau_e: T::SQRT_2() / self.omega,
            tau_k: two_ip / self.e0,
        }
    }

    /// Position and height of the barrier maximum of `V(x,t₀)` on `x > 0`.
    ///
    /// Beyond `√(α/2)` the core force decreases monotonically, so the
    /// potential is strictly concave there and has at most one maximum.
    /// Returns `None` when the field is too strong for any maximum.
    pub fn barrier_peak(&self) -> Option<(T, T)> {
        let lo = (self.alpha / T::lit(2.0)).sqrt();
        if self.e0 <= T::zero() || -self.core_force(lo) <= self.e0 {
            return None;
        }
        let hi = self.exit_search_limit();
        let v = |x: T| self.static_potential(x, self.e0);
        let x = golden_section_max(v, lo, hi, T::lit(1e-12));
        Some((x, v(x)))
    }

    fn exit_search_limit(&self) -> T {
        T::lit(4.0) * self.ip() / self.e0 + T::lit(20.0)
    }

    /// Entry and exit points of the tunnel barrier at peak field.
    pub fn barrier_points(&self) -> Result<BarrierGeometry<T>> {
        if !(self.e0 > T::zero()) {
            return Err(Error::NoBarrier(self.e0.to_f64_lossy()));
        }
        let ip = self.ip();
        let over = || Error::OverBarrier {
            e0: self.e0.to_f64_lossy(),
            threshold: over_barrier_threshold(self.z).to_f64_lossy(),
        };
        let (x_peak, v_peak) = self.barrier_peak().ok_or_else(over)?;
        if v_peak + ip <= T::zero() {
            return Err(over());
        }
        let g = |x: T| self.static_potential(x, self.e0) + ip;
        // down to adjacent floats: a `1e-10` bracket alone leaves `V` off by
        // the slope times that, which matters for large `Z`
        let x_in = bisect(g, T::zero(), x_peak, T::zero());
        let x_exit = bisect(g, x_peak, self.exit_search_limit(), T::zero());
        Ok(BarrierGeometry { x_in, x_exit })
    }
}

/// Smallest `E₀` for which the barrier maximum of `V(x,t₀)` reaches `−I_p`.
pub fn over_barrier_threshold<T: Real>(z: T) -> T {
    let ip = z * z / T::lit(2.0);
    let clears = |e0: T| {
        let m = AtomFieldModel::new(z, e0, T::one(), T::zero());
        match m.barrier_peak() {
            Some((_, v)) => v + ip <= T::zero(),
            None => true,
        }
    };
    // upper bound: the field at which the maximum disappears altogether
    let alpha = T::lit(2.0) / (z * z);
    let lo_x = (alpha / T::lit(2.0)).sqrt();
    let mut hi = -AtomFieldModel::new(z, T::one(), T::one(), T::zero()).core_force(lo_x);
    let mut lo = T::zero();
    let tol = T::lit(1e-10) * (z * z * z).max(T::one());
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) / T::lit(2.0);
        if clears(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Bisection for a sign change of `f` on `[a, b]`.
pub(crate) fn bisect<T: Real>(f: impl Fn(T) -> T, mut a: T, mut b: T, tol: T) -> T {
    let mut fa = f(a);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = (a + b) / T::lit(2.0);
        if m == a || m == b {
            break;
        }
        let fm = f(m);
        if fm == T::zero() {
            return m;
        }
        if (fm > T::zero()) == (fa > T::zero()) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    (a + b) / T::lit(2.0)
}

fn golden_section_max<T: Real>(f: impl Fn(T) -> T, mut a: T, mut b: T, tol: T) -> T {
    let r = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if (b - a).abs() <= tol * (T::one() + c.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / T::lit(2.0)
}
