//! Per-subject intensity models.
//!
//! An [`IntensityModel`] composes a timescale, a baseline hazard, fixed
//! covariates, a frailty specification and an event-dependence mechanism
//! into the conditional intensity
//!
//! ```text
//! lambda(t | H(t), u, x) = u * base(t, H(t)) * exp(beta'x + phi * z(t, H(t)))
//! ```
//!
//! where `base` is the baseline evaluated on calendar time `t` or on the gap
//! `t - T_{N(t-)}` (optionally scaled by `alpha^(j-1)` per past event), and
//! `z` is an internal covariate computed from the history: the running event
//! count `N(t-)`, its capped version `min(N(t-), K0)`, the decaying form
//! `N(t-)/t`, or the windowed rate `(N(t-) - N(t-u))/u`. A fully general
//! log-linear kind replaces the baseline with
//! `exp(g0(t) + I(N(t-)>0) g1(t - T_{N(t-)}) + g2(N(t-)))`.
//!
//! The module also provides the conditional gap distribution obtained by
//! freezing the history over the at-risk interval, its compensator
//! (integrated intensity), and the inversion used by the sampling engines.
//! Where the compensator has no closed form (decayed and windowed covariates,
//! the general kind) it is computed by adaptive Simpson quadrature after
//! substituting out the Weibull singularity.

use rand::Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::hazards::SINGULARITY_OFFSET;
use crate::numeric::{adaptive_simpson, QUAD_TOL};
use crate::BaselineHazard;

/// Tolerance on the conditional CDF value when inverting the compensator
/// numerically.
const INVERT_CDF_TOL: f64 = 1e-10;
const INVERT_MAX_ITER: usize = 200;

/// Timescale on which the baseline hazard is indexed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Timescale {
    /// Baseline evaluated at time since origin.
    Calendar,
    /// Baseline evaluated at time since the previous event; the clock resets
    /// at each event.
    Gap,
}

/// Subject-level multiplicative random effect.
///
/// Gamma and log-normal frailties are parameterized to mean 1 with variance
/// `theta`, so covariate effects stay interpretable and the mixed-process
/// moment oracles are clean. `None` behaves as the constant frailty 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FrailtySpec {
    None,
    Gamma { variance: f64 },
    LogNormal { variance: f64 },
    Binary { low: f64, high: f64, high_prob: f64 },
}

impl FrailtySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FrailtySpec::None => Ok(()),
            FrailtySpec::Gamma { variance } | FrailtySpec::LogNormal { variance } => {
                if !variance.is_finite() || variance < 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "frailty.variance",
                        reason: format!("must be a nonnegative real, got {variance}"),
                    });
                }
                Ok(())
            }
            FrailtySpec::Binary {
                low,
                high,
                high_prob,
            } => {
                if !(low >= 0.0 && high > low) {
                    return Err(Error::InvalidParameter {
                        name: "frailty.low_value/high_value",
                        reason: format!("need 0 <= low < high, got low={low}, high={high}"),
                    });
                }
                if !(high_prob > 0.0 && high_prob < 1.0) {
                    return Err(Error::InvalidParameter {
                        name: "frailty.high_prob",
                        reason: format!("must lie in (0, 1), got {high_prob}"),
                    });
                }
                Ok(())
            }
        }
    }

    /// One draw from the frailty distribution; `None` returns exactly 1.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            FrailtySpec::None => 1.0,
            FrailtySpec::Gamma { variance } => {
                if variance == 0.0 {
                    return 1.0;
                }
                let shape = 1.0 / variance;
                let dist = rand_distr::Gamma::new(shape, variance)
                    .expect("validated gamma parameters");
                dist.sample(rng)
            }
            FrailtySpec::LogNormal { variance } => {
                if variance == 0.0 {
                    return 1.0;
                }
                let sigma2 = (1.0 + variance).ln();
                let dist = rand_distr::LogNormal::new(-0.5 * sigma2, sigma2.sqrt())
                    .expect("validated log-normal parameters");
                dist.sample(rng)
            }
            FrailtySpec::Binary {
                low,
                high,
                high_prob,
            } => {
                if rng.random::<f64>() < high_prob {
                    high
                } else {
                    low
                }
            }
        }
    }

    /// Mean of the frailty distribution.
    pub fn mean(&self) -> f64 {
        match *self {
            FrailtySpec::None | FrailtySpec::Gamma { .. } | FrailtySpec::LogNormal { .. } => 1.0,
            FrailtySpec::Binary {
                low,
                high,
                high_prob,
            } => low * (1.0 - high_prob) + high * high_prob,
        }
    }

    /// Variance of the frailty distribution.
    pub fn variance(&self) -> f64 {
        match *self {
            FrailtySpec::None => 0.0,
            FrailtySpec::Gamma { variance } | FrailtySpec::LogNormal { variance } => variance,
            FrailtySpec::Binary {
                low,
                high,
                high_prob,
            } => {
                let m = self.mean();
                (low * low) * (1.0 - high_prob) + (high * high) * high_prob - m * m
            }
        }
    }
}

/// Named pure functions available as components of the general intensity.
///
/// The catalog is deliberately small (constant, linear, log) so that
/// configurations stay declarative. All members are monotone, which the
/// engines exploit when bounding the intensity over an interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GFunction {
    /// `g(x) = c`
    Constant(f64),
    /// `g(x) = intercept + slope * x`
    Linear { intercept: f64, slope: f64 },
    /// `g(x) = intercept + coeff * ln(1 + x)`
    Log { intercept: f64, coeff: f64 },
}

impl GFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            GFunction::Constant(c) => c,
            GFunction::Linear { intercept, slope } => intercept + slope * x,
            GFunction::Log { intercept, coeff } => intercept + coeff * (1.0 + x).ln(),
        }
    }

    /// Maximum over `[a, b]`; exact because every catalog member is monotone.
    pub(crate) fn max_on(&self, a: f64, b: f64) -> f64 {
        self.eval(a).max(self.eval(b))
    }

    fn validate(&self, key: &'static str) -> Result<()> {
        let params = match *self {
            GFunction::Constant(c) => [c, 0.0],
            GFunction::Linear { intercept, slope } => [intercept, slope],
            GFunction::Log { intercept, coeff } => [intercept, coeff],
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter {
                name: key,
                reason: "parameters must be finite".to_string(),
            });
        }
        Ok(())
    }
}

/// How past events feed back into the intensity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DependenceSpec {
    /// No feedback: conditional on frailty and covariates the process is
    /// Poisson (calendar) or renewal (gap).
    None,
    /// Gap-time baseline multiplied by `alpha^(j-1)` for the j-th event,
    /// with the exponent frozen at `cap` once reached. Only meaningful on
    /// the gap timescale. With `alpha > 1` and no cap the process can
    /// explode; the engines' per-subject event limit is the guard.
    GapBaselineMultiplier { alpha: f64, cap: Option<u32> },
    /// Internal covariate `N(t-)`.
    CountCovariate { phi: f64 },
    /// Internal covariate `min(N(t-), cap)`.
    CappedCountCovariate { phi: f64, cap: u32 },
    /// Internal covariate `N(t-)/t` (0 at t = 0): each event raises the
    /// intensity but the boost fades with time.
    DecayedCountCovariate { phi: f64 },
    /// Internal covariate `(N(t-) - N(t-window))/window`: the event rate over
    /// the trailing window. Before `t = window` the window shrinks to `[0, t]`
    /// and the covariate is `N(t-)/t`.
    WindowedRateCovariate { phi: f64, window: f64 },
    /// Log-linear intensity in calendar time, gap time and event count:
    /// `exp(g0(t) + I(N(t-)>0) g1(t - T_{N(t-)}) + g2(N(t-)) + beta'x) * u`.
    /// Replaces the baseline entirely.
    General {
        g0: GFunction,
        g1: GFunction,
        g2: GFunction,
    },
}

impl DependenceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DependenceSpec::None => Ok(()),
            DependenceSpec::GapBaselineMultiplier { alpha, cap } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "dependence.alpha",
                        reason: format!("must be a positive real, got {alpha}"),
                    });
                }
                if cap == Some(0) {
                    return Err(Error::InvalidParameter {
                        name: "dependence.cap",
                        reason: "must be a positive integer".to_string(),
                    });
                }
                Ok(())
            }
            DependenceSpec::CountCovariate { phi } => check_phi(phi),
            DependenceSpec::CappedCountCovariate { phi, cap } => {
                check_phi(phi)?;
                if cap == 0 {
                    return Err(Error::InvalidParameter {
                        name: "dependence.cap",
                        reason: "must be a positive integer".to_string(),
                    });
                }
                Ok(())
            }
            DependenceSpec::DecayedCountCovariate { phi } => check_phi(phi),
            DependenceSpec::WindowedRateCovariate { phi, window } => {
                check_phi(phi)?;
                if !(window > 0.0 && window.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "dependence.window",
                        reason: format!("must be a positive real, got {window}"),
                    });
                }
                Ok(())
            }
            DependenceSpec::General { g0, g1, g2 } => {
                g0.validate("dependence.g0")?;
                g1.validate("dependence.g1")?;
                g2.validate("dependence.g2")
            }
        }
    }

    /// True when the intensity never looks at past events.
    pub fn is_none(&self) -> bool {
        matches!(self, DependenceSpec::None)
    }
}

fn check_phi(phi: f64) -> Result<()> {
    if !phi.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dependence.phi",
            reason: format!("must be finite, got {phi}"),
        });
    }
    Ok(())
}

/// Evolving history of one subject during simulation.
///
/// `now` is the origin of the current at-risk interval: the last event time,
/// or 0 before any event. Event times are strictly increasing calendar times.
#[derive(Clone, Debug)]
pub struct SubjectState {
    covariates: Vec<f64>,
    frailty: f64,
    event_times: Vec<f64>,
    now: f64,
}

impl SubjectState {
    pub fn new(covariates: Vec<f64>, frailty: f64) -> Self {
        SubjectState {
            covariates,
            frailty,
            event_times: Vec::new(),
            now: 0.0,
        }
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn frailty(&self) -> f64 {
        self.frailty
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    pub fn n_events(&self) -> usize {
        self.event_times.len()
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn last_event(&self) -> Option<f64> {
        self.event_times.last().copied()
    }

    /// Record an event at calendar time `t` and advance the clock to it.
    pub fn record_event(&mut self, t: f64) -> Result<()> {
        match self.last_event() {
            Some(last) if t <= last => return Err(Error::HistoryOrder { t, last }),
            None if !(t > 0.0) => {
                return Err(Error::InvalidParameter {
                    name: "event time",
                    reason: format!("must be positive, got {t}"),
                })
            }
            _ => {}
        }
        self.event_times.push(t);
        self.now = t;
        Ok(())
    }

    /// `N(t-)`: number of events strictly before `t`.
    pub fn count_before(&self, t: f64) -> usize {
        self.event_times.partition_point(|&e| e < t)
    }

    /// `N(t)`: number of events at or before `t`.
    pub fn count_through(&self, t: f64) -> usize {
        self.event_times.partition_point(|&e| e <= t)
    }

    pub(crate) fn into_event_times(self) -> Vec<f64> {
        self.event_times
    }
}

/// Whether history at the evaluation time uses the left limit `N(t-)` (the
/// process convention) or includes events at exactly `t` (needed by the
/// discrete engine, whose events sit on grid points).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum HistoryAt {
    LeftLimit,
    Inclusive,
}

/// Full per-subject intensity specification.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityModel {
    pub timescale: Timescale,
    pub baseline: BaselineHazard,
    pub beta: Vec<f64>,
    pub frailty: FrailtySpec,
    pub dependence: DependenceSpec,
}

impl IntensityModel {
    /// Model with no covariates, no frailty and no event-dependence.
    pub fn plain(timescale: Timescale, baseline: BaselineHazard) -> Self {
        IntensityModel {
            timescale,
            baseline,
            beta: Vec::new(),
            frailty: FrailtySpec::None,
            dependence: DependenceSpec::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.frailty.validate()?;
        self.dependence.validate()?;
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidModel(
                "covariate coefficients must be finite".to_string(),
            ));
        }
        if matches!(self.dependence, DependenceSpec::GapBaselineMultiplier { .. })
            && self.timescale != Timescale::Gap
        {
            return Err(Error::InvalidModel(
                "gap-baseline-multiplier dependence requires the gap timescale".to_string(),
            ));
        }
        Ok(())
    }

    fn linear_predictor(&self, state: &SubjectState) -> f64 {
        self.beta
            .iter()
            .zip(state.covariates())
            .map(|(b, x)| b * x)
            .sum()
    }

    /// Conditional intensity at time `t` given the state's history.
    ///
    /// `t` must not precede the last recorded event. Inherits the baseline's
    /// singularity error for `nu < 1` evaluated exactly at a clock origin.
    pub fn intensity_at(&self, state: &SubjectState, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::InvalidParameter {
                name: "t",
                reason: format!("must be nonnegative, got {t}"),
            });
        }
        if let Some(last) = state.last_event() {
            if t < last {
                return Err(Error::HistoryOrder { t, last });
            }
        }
        self.eval_intensity(state, t, HistoryAt::LeftLimit, false)
    }

    /// Intensity evaluation shared by the public entry point and the engines.
    ///
    /// With `floored` set, baseline time arguments are kept at least
    /// [`SINGULARITY_OFFSET`] away from a `nu < 1` singularity, so the value
    /// is finite everywhere and never exceeds [`Self::intensity_bound`].
    pub(crate) fn eval_intensity(
        &self,
        state: &SubjectState,
        t: f64,
        history: HistoryAt,
        floored: bool,
    ) -> Result<f64> {
        let count = match history {
            HistoryAt::LeftLimit => state.count_before(t),
            HistoryAt::Inclusive => state.count_through(t),
        };
        let last = if count > 0 {
            Some(state.event_times()[count - 1])
        } else {
            None
        };
        let lin = self.linear_predictor(state);

        if let DependenceSpec::General { g0, g1, g2 } = self.dependence {
            let mut log_rate = g0.eval(t) + g2.eval(count as f64) + lin;
            if let Some(last) = last {
                log_rate += g1.eval(t - last);
            }
            return Ok(state.frailty() * log_rate.exp());
        }

        let mut arg = match self.timescale {
            Timescale::Calendar => t,
            Timescale::Gap => t - last.unwrap_or(0.0),
        };
        if floored && self.baseline.nu() < 1.0 {
            arg = arg.max(SINGULARITY_OFFSET);
        }
        let mut base = self.baseline.hazard_at(arg)?;

        if let DependenceSpec::GapBaselineMultiplier { alpha, cap } = self.dependence {
            base *= alpha.powi(capped_count(count, cap) as i32);
        }
        let z = self.covariate_value(state, t, history, count);
        Ok(state.frailty() * base * (lin + z).exp())
    }

    /// `phi * z(t, H(t))` contribution of the internal covariate.
    fn covariate_value(
        &self,
        state: &SubjectState,
        t: f64,
        history: HistoryAt,
        count: usize,
    ) -> f64 {
        match self.dependence {
            DependenceSpec::None | DependenceSpec::GapBaselineMultiplier { .. } => 0.0,
            DependenceSpec::CountCovariate { phi } => phi * count as f64,
            DependenceSpec::CappedCountCovariate { phi, cap } => {
                phi * capped_count(count, Some(cap)) as f64
            }
            DependenceSpec::DecayedCountCovariate { phi } => {
                if t > 0.0 {
                    phi * count as f64 / t
                } else {
                    0.0
                }
            }
            DependenceSpec::WindowedRateCovariate { phi, window } => {
                if t <= 0.0 {
                    0.0
                } else if t < window {
                    // Shrinking window over [0, t].
                    phi * count as f64 / t
                } else {
                    let older = match history {
                        HistoryAt::LeftLimit => state.count_before(t - window),
                        HistoryAt::Inclusive => state.count_through(t - window),
                    };
                    phi * (count - older) as f64 / window
                }
            }
            DependenceSpec::General { .. } => unreachable!("handled before baseline evaluation"),
        }
    }

    /// Conditional CDF of the next gap given the history frozen at
    /// `state.now()`: `F(w) = 1 - exp(-integral of lambda over (now, now+w])`.
    pub fn conditional_gap_cdf(&self, state: &SubjectState, w: f64) -> Result<f64> {
        if !(w > 0.0) {
            return Err(Error::InvalidParameter {
                name: "w",
                reason: format!("must be positive, got {w}"),
            });
        }
        let integral = self.integrated_intensity(state, w)?;
        Ok(1.0 - (-integral).exp())
    }

    /// Compensator increment over the at-risk interval `(now, now + w]`,
    /// with the history frozen at `now`.
    ///
    /// Closed form wherever the internal covariate is constant over the
    /// interval; adaptive quadrature otherwise.
    pub fn integrated_intensity(&self, state: &SubjectState, w: f64) -> Result<f64> {
        if w < 0.0 {
            return Err(Error::InvalidParameter {
                name: "w",
                reason: format!("must be nonnegative, got {w}"),
            });
        }
        if w == 0.0 {
            return Ok(0.0);
        }
        let t0 = state.now();
        let j1 = state.n_events();
        let lin = self.linear_predictor(state);

        if let DependenceSpec::General { g0, g1, g2 } = self.dependence {
            let origin = state.last_event().unwrap_or(0.0);
            let constant = lin + g2.eval(j1 as f64);
            let f = |s: f64| {
                let mut lr = g0.eval(s) + constant;
                if j1 > 0 {
                    lr += g1.eval(s - origin);
                }
                lr.exp()
            };
            let integral = adaptive_simpson(f, t0, t0 + w, QUAD_TOL);
            return Ok(state.frailty() * integral);
        }

        // Baseline clock origin: calendar time zero or the last event.
        let origin = match self.timescale {
            Timescale::Calendar => 0.0,
            Timescale::Gap => state.last_event().unwrap_or(0.0),
        };
        let mut scale = state.frailty() * lin.exp();
        if let DependenceSpec::GapBaselineMultiplier { alpha, cap } = self.dependence {
            scale *= alpha.powi(capped_count(j1, cap) as i32);
        }

        match self.dependence {
            DependenceSpec::None
            | DependenceSpec::GapBaselineMultiplier { .. }
            | DependenceSpec::CountCovariate { .. }
            | DependenceSpec::CappedCountCovariate { .. } => {
                let z = self.frozen_constant_covariate(j1);
                let h = self
                    .baseline
                    .cumulative_hazard(t0 - origin, t0 + w - origin)?;
                Ok(scale * z.exp() * h)
            }
            DependenceSpec::DecayedCountCovariate { phi } => {
                if j1 == 0 {
                    let h = self
                        .baseline
                        .cumulative_hazard(t0 - origin, t0 + w - origin)?;
                    return Ok(scale * h);
                }
                let psi = move |s: f64| (phi * j1 as f64 / s).exp();
                Ok(scale * self.baseline_weighted_integral(origin, t0, t0 + w, &psi))
            }
            DependenceSpec::WindowedRateCovariate { phi, window } => {
                if j1 == 0 {
                    let h = self
                        .baseline
                        .cumulative_hazard(t0 - origin, t0 + w - origin)?;
                    return Ok(scale * h);
                }
                let mut cuts: Vec<f64> = Vec::with_capacity(j1 + 2);
                cuts.push(t0);
                if t0 < window && window < t0 + w {
                    cuts.push(window);
                }
                for &e in state.event_times() {
                    let s = e + window;
                    if s > t0 && s < t0 + w {
                        cuts.push(s);
                    }
                }
                cuts.push(t0 + w);
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());

                let mut total = 0.0;
                for pair in cuts.windows(2) {
                    let (lo, hi) = (pair[0], pair[1]);
                    if hi <= lo {
                        continue;
                    }
                    let mid = 0.5 * (lo + hi);
                    if mid < window {
                        // Shrinking-window piece: z(s) = j1 / s varies.
                        let psi = move |s: f64| (phi * j1 as f64 / s).exp();
                        total += self.baseline_weighted_integral(origin, lo, hi, &psi);
                    } else {
                        // Full-window piece: membership is constant.
                        let in_window = j1 - state.count_before(mid - window);
                        let z = phi * in_window as f64 / window;
                        total += z.exp()
                            * self.baseline.cumulative_hazard(lo - origin, hi - origin)?;
                    }
                }
                Ok(scale * total)
            }
            DependenceSpec::General { .. } => unreachable!("handled above"),
        }
    }

    /// Internal covariate term when it is constant over the frozen interval.
    fn frozen_constant_covariate(&self, j1: usize) -> f64 {
        match self.dependence {
            DependenceSpec::CountCovariate { phi } => phi * j1 as f64,
            DependenceSpec::CappedCountCovariate { phi, cap } => {
                phi * capped_count(j1, Some(cap)) as f64
            }
            _ => 0.0,
        }
    }

    /// `integral over [a, b] of h0(s - origin) * psi(s) ds` for a smooth
    /// positive weight `psi`, via the substitution `q = (s - origin)^nu`
    /// which removes the Weibull endpoint singularity:
    /// the integral becomes `lambda * integral psi(origin + q^(1/nu)) dq`.
    fn baseline_weighted_integral(
        &self,
        origin: f64,
        a: f64,
        b: f64,
        psi: &impl Fn(f64) -> f64,
    ) -> f64 {
        let nu = self.baseline.nu();
        let lambda = self.baseline.lambda();
        let qa = (a - origin).powf(nu);
        let qb = (b - origin).powf(nu);
        let inv_nu = nu.recip();
        lambda * adaptive_simpson(|q: f64| psi(origin + q.powf(inv_nu)), qa, qb, QUAD_TOL)
    }

    /// Solve `integrated_intensity(state, w) = y` for the gap `w`; this is
    /// the inverse of the conditional gap CDF at `1 - exp(-y)`.
    ///
    /// Closed form where available; otherwise bisection on `[0, horizon]`
    /// with tolerance [`INVERT_CDF_TOL`] on the CDF value. Returns `None`
    /// when the compensator over the whole horizon stays below `y`, i.e. the
    /// next event falls beyond the horizon.
    pub fn invert_integrated_intensity(
        &self,
        state: &SubjectState,
        y: f64,
        horizon: f64,
    ) -> Result<Option<f64>> {
        debug_assert!(y >= 0.0);
        let t0 = state.now();
        let j1 = state.n_events();
        let lin = self.linear_predictor(state);

        let closed_form = match self.dependence {
            DependenceSpec::None
            | DependenceSpec::GapBaselineMultiplier { .. }
            | DependenceSpec::CountCovariate { .. }
            | DependenceSpec::CappedCountCovariate { .. } => true,
            DependenceSpec::DecayedCountCovariate { .. }
            | DependenceSpec::WindowedRateCovariate { .. } => j1 == 0,
            DependenceSpec::General { .. } => false,
        };

        if closed_form {
            let origin = match self.timescale {
                Timescale::Calendar => 0.0,
                Timescale::Gap => state.last_event().unwrap_or(0.0),
            };
            let mut scale = state.frailty() * (lin + self.frozen_constant_covariate(j1)).exp();
            if let DependenceSpec::GapBaselineMultiplier { alpha, cap } = self.dependence {
                scale *= alpha.powi(capped_count(j1, cap) as i32);
            }
            // scale * (H0(0, t0 - origin + w) - H0(0, t0 - origin)) = y
            let start = self.baseline.cumulative_hazard(0.0, t0 - origin)?;
            let end = self.baseline.inverse_cumulative_hazard(y / scale + start)?;
            return Ok(Some(end - (t0 - origin)));
        }

        if !(horizon > 0.0) {
            return Ok(None);
        }
        let at_horizon = self.integrated_intensity(state, horizon)?;
        if at_horizon < y {
            return Ok(None);
        }
        let target_cdf = -(-y).exp_m1(); // 1 - e^{-y}
        let mut lo = 0.0;
        let mut hi = horizon;
        let mut mid = 0.5 * horizon;
        for _ in 0..INVERT_MAX_ITER {
            mid = 0.5 * (lo + hi);
            let integral = self.integrated_intensity(state, mid)?;
            let cdf = -(-integral).exp_m1();
            if (cdf - target_cdf).abs() <= INVERT_CDF_TOL {
                return Ok(Some(mid));
            }
            if integral < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        Ok(Some(mid))
    }

    /// Finite bound dominating the intensity over the at-risk segment
    /// `(state.now(), horizon]`, with the current history held fixed.
    /// Baselines with shape below 1 are bounded away from their singularity
    /// by [`SINGULARITY_OFFSET`]; the engines evaluate the intensity with the
    /// same floor, so the bound is honest.
    pub(crate) fn intensity_bound(&self, state: &SubjectState, horizon: f64) -> Result<f64> {
        let t_lo = state.now();
        let j1 = state.n_events();
        let lin = self.linear_predictor(state);

        if let DependenceSpec::General { g0, g1, g2 } = self.dependence {
            let mut log_rate = g0.max_on(t_lo, horizon) + g2.eval(j1 as f64) + lin;
            if j1 > 0 {
                log_rate += g1.max_on(0.0, horizon);
            }
            return Ok(state.frailty() * log_rate.exp());
        }

        let mut bound = state.frailty() * self.baseline.upper_bound(horizon)?;
        if let DependenceSpec::GapBaselineMultiplier { alpha, cap } = self.dependence {
            bound *= alpha.powi(capped_count(j1, cap) as i32);
        }
        let z_max = match self.dependence {
            DependenceSpec::None | DependenceSpec::GapBaselineMultiplier { .. } => 0.0,
            DependenceSpec::CountCovariate { phi } => phi * j1 as f64,
            DependenceSpec::CappedCountCovariate { phi, cap } => {
                phi * capped_count(j1, Some(cap)) as f64
            }
            DependenceSpec::DecayedCountCovariate { phi } => {
                if j1 == 0 {
                    0.0
                } else {
                    // z ranges over [j1/horizon, j1/t_lo]; t_lo > 0 once j1 > 0.
                    (phi * j1 as f64 / t_lo).max(phi * j1 as f64 / horizon)
                }
            }
            DependenceSpec::WindowedRateCovariate { phi, window } => {
                if j1 == 0 {
                    0.0
                } else {
                    let z_hi = if t_lo < window {
                        j1 as f64 / t_lo
                    } else {
                        j1 as f64 / window
                    };
                    (phi * z_hi).max(0.0)
                }
            }
            DependenceSpec::General { .. } => unreachable!(),
        };
        Ok(bound * (lin + z_max).exp())
    }
}

fn capped_count(count: usize, cap: Option<u32>) -> usize {
    match cap {
        Some(c) => count.min(c as usize),
        None => count,
    }
}
