//! Epanechnikov kernel, its closed-form integrals and the jackknife/boundary kernels.

use crate::error::{MonobandError, Result};
use crate::Scalar;

/// Kernel family. Only Epanechnikov ships; the enum leaves room for more.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum KernelSpec {
    #[default]
    Epanechnikov,
}

/// Lower bound on `nu0*nu2 - nu1^2` below which boundary moments are rejected.
pub const MOMENT_FLOOR: f64 = 1e-12;

impl KernelSpec {
    #[inline]
    pub fn eval<T: Scalar>(self, x: T) -> T {
        match self {
            KernelSpec::Epanechnikov => {
                if x.abs() > T::one() {
                    T::zero()
                } else {
                    T::lit(0.75) * (T::one() - x * x)
                }
            }
        }
    }

    /// Distribution function of the kernel density.
    #[inline]
    pub fn cdf<T: Scalar>(self, x: T) -> T {
        match self {
            KernelSpec::Epanechnikov => {
                if x <= -T::one() {
                    T::zero()
                } else if x >= T::one() {
                    T::one()
                } else {
                    T::lit(0.5) + x * (T::lit(0.75) - T::lit(0.25) * x * x)
                }
            }
        }
    }

    /// `2*sqrt(2)*K(sqrt(2)*x) - K(x)`.
    #[inline]
    pub fn jackknife<T: Scalar>(self, x: T) -> T {
        let s = T::SQRT_2();
        (s + s) * self.eval(s * x) - self.eval(x)
    }

    /// Antiderivative of `x^l K(x)` on the support, vanishing at 0.
    #[inline]
    fn antider<T: Scalar>(self, l: usize, x: T) -> T {
        let x2 = x * x;
        match (self, l) {
            (KernelSpec::Epanechnikov, 0) => x * (T::lit(0.75) - T::lit(0.25) * x2),
            (KernelSpec::Epanechnikov, 1) => x2 * (T::lit(0.375) - T::lit(0.1875) * x2),
            (KernelSpec::Epanechnikov, 2) => x2 * x * (T::lit(0.25) - T::lit(0.15) * x2),
            (KernelSpec::Epanechnikov, 3) => x2 * x2 * (T::lit(0.1875) - T::lit(0.125) * x2),
            _ => panic!("moment order {l} not supported"),
        }
    }

    /// Truncated moment `int x^l K(x) dx` over `[-t/h, (1-t)/h]` intersected with `[-1, 1]`.
    pub fn nu<T: Scalar>(self, l: usize, t: T, h: T) -> T {
        let (a, b) = limits(t, h);
        if a >= b {
            return T::zero();
        }
        self.antider(l, b) - self.antider(l, a)
    }

    /// `(nu0, nu1, nu2)` at `(t, h)`.
    pub fn moments<T: Scalar>(self, t: T, h: T) -> [T; 3] {
        let (a, b) = limits(t, h);
        if a >= b {
            return [T::zero(); 3];
        }
        [0, 1, 2].map(|l| self.antider(l, b) - self.antider(l, a))
    }

    /// Boundary factors `(nu2/c, nu1/c)` with `c = nu0*nu2 - nu1^2`, so that
    /// `kstar(u, t) = jackknife(u) * (a - b*u)`.
    pub fn kstar_factors<T: Scalar>(self, t: T, h: T) -> Result<(T, T)> {
        let [n0, n1, n2] = self.moments(t, h);
        let c = n0 * n2 - n1 * n1;
        if !(c > T::lit(MOMENT_FLOOR)) {
            return Err(MonobandError::DegenerateMoments { t: t.as_f64(), value: c.as_f64() });
        }
        Ok((n2 / c, n1 / c))
    }

    /// Boundary-corrected jackknife kernel `K~*(u, t)`.
    pub fn kstar<T: Scalar>(self, u: T, t: T, h: T) -> Result<T> {
        let (a, b) = self.kstar_factors(t, h)?;
        Ok(self.jackknife(u) * (a - b * u))
    }

    /// `int |x| K(x) dx`.
    pub fn kappa1(self) -> f64 {
        0.375
    }

    /// `int x^2 K(x) dx`.
    pub fn kappa2(self) -> f64 {
        0.2
    }
}

#[inline]
fn limits<T: Scalar>(t: T, h: T) -> (T, T) {
    let a = (-t / h).max(-T::one());
    let b = ((T::one() - t) / h).min(T::one());
    (a, b)
}
