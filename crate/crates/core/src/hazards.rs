//! Parametric baseline hazards with exact cumulative-hazard algebra.
//!
//! Two families are supported, both with scale `lambda` and shape `nu`:
//!
//! * constant: `h(t) = lambda` (shape fixed to 1)
//! * Weibull:  `h(t) = lambda * nu * t^(nu - 1)`
//!
//! Integration and inversion are closed form:
//! `H(a, b) = lambda * (b^nu - a^nu)` and `H(0, w) = y  =>  w = (y / lambda)^(1/nu)`.
//! A bisection fallback is provided for baseline kinds whose cumulative hazard
//! has no analytic inverse.
//!
//! The math is generic over the floating-point scalar; the rest of the crate
//! works with the `f64` alias [`crate::BaselineHazard`].

use num_traits::Float;

use crate::error::{Error, Result};

/// Time offset used in place of 0 when bounding a hazard whose shape is
/// below 1: the hazard diverges as `t -> 0`, so bounds (and the rejection
/// engines that rely on them) are taken over `[SINGULARITY_OFFSET, horizon]`.
pub const SINGULARITY_OFFSET: f64 = 1e-6;

/// Absolute tolerance on the cumulative hazard in the bisection fallback.
const BISECT_TOL: f64 = 1e-12;
const BISECT_MAX_ITER: usize = 200;

/// Parametric family of a baseline hazard.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    Constant,
    Weibull,
}

/// A baseline hazard function, valid on `t >= 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Baseline<T> {
    kind: BaselineKind,
    lambda: T,
    nu: T,
}

fn as_f64<T: Float>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

impl<T: Float> Baseline<T> {
    /// Constant hazard with rate `lambda` (events per unit time).
    pub fn constant(lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be positive, got {}", as_f64(lambda)),
            });
        }
        Ok(Baseline {
            kind: BaselineKind::Constant,
            lambda,
            nu: T::one(),
        })
    }

    /// Weibull hazard with scale `lambda` and shape `nu`.
    pub fn weibull(lambda: T, nu: T) -> Result<Self> {
        if !(lambda > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be positive, got {}", as_f64(lambda)),
            });
        }
        if !(nu > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "nu",
                reason: format!("must be positive, got {}", as_f64(nu)),
            });
        }
        Ok(Baseline {
            kind: BaselineKind::Weibull,
            lambda,
            nu,
        })
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    /// True when the hazard does not vary with time (constant kind, or a
    /// Weibull that degenerates to it at shape 1).
    pub fn is_time_constant(&self) -> bool {
        self.kind == BaselineKind::Constant || self.nu == T::one()
    }

    fn check_time(&self, t: T) -> Result<()> {
        if t < T::zero() {
            return Err(Error::InvalidParameter {
                name: "t",
                reason: format!("must be nonnegative, got {}", as_f64(t)),
            });
        }
        Ok(())
    }

    /// Hazard value at time `t`.
    ///
    /// Errors with [`Error::SingularHazard`] when `nu < 1` and `t = 0`.
    pub fn hazard_at(&self, t: T) -> Result<T> {
        self.check_time(t)?;
        match self.kind {
            BaselineKind::Constant => Ok(self.lambda),
            BaselineKind::Weibull => {
                if self.nu < T::one() && t == T::zero() {
                    return Err(Error::SingularHazard {
                        nu: as_f64(self.nu),
                    });
                }
                Ok(self.lambda * self.nu * t.powf(self.nu - T::one()))
            }
        }
    }

    /// Integrated hazard over `[a, b]`, computed in closed form.
    pub fn cumulative_hazard(&self, a: T, b: T) -> Result<T> {
        self.check_time(a)?;
        if a > b {
            return Err(Error::ReversedInterval {
                a: as_f64(a),
                b: as_f64(b),
            });
        }
        match self.kind {
            BaselineKind::Constant => Ok(self.lambda * (b - a)),
            BaselineKind::Weibull => Ok(self.lambda * (b.powf(self.nu) - a.powf(self.nu))),
        }
    }

    /// Solve `cumulative_hazard(0, w) = y` for `w`, in closed form.
    pub fn inverse_cumulative_hazard(&self, y: T) -> Result<T> {
        if y < T::zero() {
            return Err(Error::InvalidParameter {
                name: "y",
                reason: format!("must be nonnegative, got {}", as_f64(y)),
            });
        }
        match self.kind {
            BaselineKind::Constant => Ok(y / self.lambda),
            BaselineKind::Weibull => Ok((y / self.lambda).powf(self.nu.recip())),
        }
    }

    /// A finite bound dominating the hazard over the evaluation interval:
    /// `[0, horizon]` for nondecreasing hazards, `[SINGULARITY_OFFSET, horizon]`
    /// when the shape is below 1 and the hazard diverges at the origin.
    pub fn upper_bound(&self, horizon: T) -> Result<T> {
        if !(horizon > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must be positive, got {}", as_f64(horizon)),
            });
        }
        match self.kind {
            BaselineKind::Constant => Ok(self.lambda),
            BaselineKind::Weibull => {
                let peak = if self.nu >= T::one() {
                    horizon
                } else {
                    T::from(SINGULARITY_OFFSET).unwrap()
                };
                Ok(self.lambda * self.nu * peak.powf(self.nu - T::one()))
            }
        }
    }

    /// Bisection fallback for `cumulative_hazard(0, w) = y`, for baseline
    /// kinds without an analytic inverse. The bracket starts at
    /// `[0, horizon_hint]` and doubles until it contains the root; the
    /// iteration stops once `|H(0, w) - y| <= 1e-12`.
    pub fn inverse_cumulative_hazard_by_bisection(&self, y: T, horizon_hint: T) -> Result<T> {
        if y < T::zero() {
            return Err(Error::InvalidParameter {
                name: "y",
                reason: format!("must be nonnegative, got {}", as_f64(y)),
            });
        }
        if y == T::zero() {
            return Ok(T::zero());
        }
        let two = T::from(2.0).unwrap();
        let mut hi = if horizon_hint > T::zero() {
            horizon_hint
        } else {
            T::one()
        };
        let mut expansions = 0;
        while self.cumulative_hazard(T::zero(), hi)? < y {
            hi = hi * two;
            expansions += 1;
            if expansions > 1024 {
                return Err(Error::Inversion(format!(
                    "failed to bracket cumulative hazard target {}",
                    as_f64(y)
                )));
            }
        }
        let tol = T::from(BISECT_TOL).unwrap();
        let mut lo = T::zero();
        let mut mid = (lo + hi) / two;
        for _ in 0..BISECT_MAX_ITER {
            mid = (lo + hi) / two;
            let h = self.cumulative_hazard(T::zero(), mid)?;
            if (h - y).abs() <= tol {
                return Ok(mid);
            }
            if h < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(mid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type B = Baseline<f64>;

    #[test]
    fn constant_hazard_is_time_free() {
        let b = B::constant(2.0).unwrap();
        assert_eq!(b.hazard_at(7.3).unwrap(), 2.0);
        assert_eq!(b.hazard_at(0.0).unwrap(), 2.0);
    }

    #[test]
    fn weibull_hazard_direct_evaluation() {
        let b = B::weibull(1.0, 2.0).unwrap();
        assert_eq!(b.hazard_at(3.0).unwrap(), 6.0);
    }

    #[test]
    fn weibull_shape_one_reduces_to_constant() {
        let b = B::weibull(0.5, 1.0).unwrap();
        assert_eq!(b.hazard_at(10.0).unwrap(), 0.5);
        assert!(b.is_time_constant());
    }

    #[test]
    fn singular_evaluation_is_an_error() {
        let b = B::weibull(1.0, 0.5).unwrap();
        assert!(matches!(
            b.hazard_at(0.0),
            Err(Error::SingularHazard { .. })
        ));
        assert!(b.hazard_at(1e-9).unwrap().is_finite());
    }

    #[test]
    fn negative_time_is_an_error() {
        let b = B::constant(1.0).unwrap();
        assert!(b.hazard_at(-0.1).is_err());
        assert!(b.cumulative_hazard(-1.0, 0.0).is_err());
    }

    #[test]
    fn cumulative_hazard_closed_forms() {
        let w = B::weibull(1.0, 2.0).unwrap();
        assert_eq!(w.cumulative_hazard(0.0, 2.0).unwrap(), 4.0);
        let c = B::constant(3.0).unwrap();
        assert_eq!(c.cumulative_hazard(1.0, 4.0).unwrap(), 9.0);
        assert_eq!(w.cumulative_hazard(5.0, 5.0).unwrap(), 0.0);
        assert_eq!(c.cumulative_hazard(5.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn reversed_interval_is_an_error() {
        let b = B::constant(1.0).unwrap();
        assert!(matches!(
            b.cumulative_hazard(2.0, 1.0),
            Err(Error::ReversedInterval { .. })
        ));
    }

    #[test]
    fn inverse_cumulative_hazard_closed_forms() {
        let w = B::weibull(1.0, 2.0).unwrap();
        assert_eq!(w.inverse_cumulative_hazard(4.0).unwrap(), 2.0);
        let c = B::constant(2.0).unwrap();
        assert_eq!(c.inverse_cumulative_hazard(3.0).unwrap(), 1.5);
        assert!(c.inverse_cumulative_hazard(-1.0).is_err());
    }

    #[test]
    fn inverse_round_trips_through_cumulative_hazard() {
        let b = B::weibull(0.8, 1.7).unwrap();
        let w = b.inverse_cumulative_hazard(2.5).unwrap();
        let back = b.cumulative_hazard(0.0, w).unwrap();
        assert!((back - 2.5).abs() < 1e-12, "round trip gave {back}");
    }

    #[test]
    fn upper_bound_examples() {
        let c = B::constant(2.0).unwrap();
        assert_eq!(c.upper_bound(10.0).unwrap(), 2.0);

        let inc = B::weibull(1.0, 2.0).unwrap();
        assert_eq!(inc.upper_bound(5.0).unwrap(), 10.0);

        // Decreasing hazard peaks at the singularity offset:
        // 1 * 0.5 * (1e-6)^(-0.5) = 500.
        let dec = B::weibull(1.0, 0.5).unwrap();
        let bound = dec.upper_bound(5.0).unwrap();
        assert!((bound - 500.0).abs() < 1e-9, "bound {bound}");
        // Grid scan over [offset, horizon] confirms the bound dominates.
        let n = 2000;
        for i in 0..=n {
            let t = SINGULARITY_OFFSET + (5.0 - SINGULARITY_OFFSET) * i as f64 / n as f64;
            assert!(dec.hazard_at(t).unwrap() <= bound + 1e-12);
        }
    }

    #[test]
    fn bisection_fallback_matches_closed_form() {
        let b = B::weibull(0.8, 1.7).unwrap();
        for y in [0.0, 0.3, 2.5, 40.0] {
            let closed = b.inverse_cumulative_hazard(y).unwrap();
            let numeric = b.inverse_cumulative_hazard_by_bisection(y, 1.0).unwrap();
            let back = b.cumulative_hazard(0.0, numeric).unwrap();
            assert!((back - y).abs() <= 1e-11, "H mismatch at y={y}: {back}");
            assert!((closed - numeric).abs() <= 1e-9 * closed.max(1.0));
        }
    }

    #[test]
    fn generic_scalar_works_in_f32() {
        let b: Baseline<f32> = Baseline::weibull(1.0f32, 2.0f32).unwrap();
        assert!((b.hazard_at(3.0).unwrap() - 6.0).abs() < 1e-5);
        assert!((b.inverse_cumulative_hazard(4.0).unwrap() - 2.0).abs() < 1e-5);
    }
}
