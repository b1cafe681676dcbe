//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by hazard evaluation, model composition, simulation
/// engines, scenario handling and validation checks.
#[derive(Debug, Error)]
pub enum Error {
    /// A hazard with shape `nu < 1` was evaluated at its singular point `t = 0`.
    #[error("hazard is singular at t = 0 for shape nu = {nu}")]
    SingularHazard { nu: f64 },

    /// Interval arguments out of order.
    #[error("interval endpoints out of order: a = {a} > b = {b}")]
    ReversedInterval { a: f64, b: f64 },

    /// A parameter failed its domain check.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Model specification is internally inconsistent.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Evaluation time precedes the last recorded event.
    #[error("time {t} precedes the last recorded event at {last}")]
    HistoryOrder { t: f64, last: f64 },

    /// Root finding failed to bracket or converge.
    #[error("numerical inversion failed: {0}")]
    Inversion(String),

    /// A subject's event process exploded: it reached the per-subject event
    /// limit, or event times stopped advancing at machine precision, before
    /// the censoring time.
    #[error("event process exploded after {events} events without reaching the censoring time")]
    Explosion { events: usize },

    /// A thinning candidate's intensity exceeded the dominating bound.
    #[error("dominating bound violated at t = {t}: intensity {intensity} > bound {bound}")]
    BoundViolation { t: f64, intensity: f64, bound: f64 },

    /// The discrete grid's per-step event probability exceeded one.
    #[error("step size too large: intensity * dt = {lambda_dt} > 1 at t = {t}; use a smaller dt")]
    StepSize { lambda_dt: f64, t: f64 },

    /// An engine cannot simulate the configured model.
    #[error("{engine} engine does not support this model: {reason}")]
    EngineModel { engine: &'static str, reason: String },

    /// A per-subject failure, tagged with the subject index.
    #[error("subject {subject}: {source}")]
    Subject {
        subject: usize,
        #[source]
        source: Box<Error>,
    },

    /// Scenario configuration failed validation.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// Scenario file could not be parsed.
    #[error("scenario parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Dataset file could not be parsed.
    #[error("dataset parse error at line {line}: {message}")]
    Dataset { line: usize, message: String },

    /// A statistical check received an empty sample.
    #[error("empty sample for check {0}")]
    EmptySample(&'static str),

    /// A validation check does not apply to the given scenario.
    #[error("check {check} does not apply: {reason}")]
    UnsupportedCheck {
        check: &'static str,
        reason: String,
    },

    /// Oracle-mode validation needs realized frailties that the data lacks.
    #[error("model has a frailty term but the cohort carries no realized frailty values")]
    MissingFrailty,
}

impl Error {
    /// Attach a subject index to a per-subject failure.
    pub fn for_subject(self, subject: usize) -> Error {
        Error::Subject {
            subject,
            source: Box::new(self),
        }
    }

    /// Walk through `Subject` wrappers to the underlying cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::Subject { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
