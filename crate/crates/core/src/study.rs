//! Scenario-level orchestration: censoring, cohort simulation, taxonomy
//! classification and counting-process export.
//!
//! A cohort is simulated subject by subject, each on its own random stream
//! derived from `(seed, subject index)` (see [`crate::engines::subject_rng`]),
//! with covariates and the censoring time drawn before event generation.
//! Results are therefore identical whatever the worker count or simulation
//! order. Export follows the standard counting-process layout: per subject,
//! one `(start, stop, status)` row per at-risk interval, the last row
//! censored at `C` with status 0.

use std::io::{self, BufRead, Write};

use rand::{Rng, RngCore};
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::engines::{self, Engine, EventHistory};
use crate::error::{Error, Result};
use crate::models::{DependenceSpec, FrailtySpec, IntensityModel, Timescale};

/// How the end of observation is drawn for each subject.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CensoringSpec {
    Fixed { value: f64 },
    Exponential { rate: f64 },
    Uniform { low: f64, high: f64 },
}

impl CensoringSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CensoringSpec::Fixed { value } => {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "censoring.value",
                        reason: format!("must be a positive real, got {value}"),
                    });
                }
                Ok(())
            }
            CensoringSpec::Exponential { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "censoring.rate",
                        reason: format!("must be a positive real, got {rate}"),
                    });
                }
                Ok(())
            }
            CensoringSpec::Uniform { low, high } => {
                if !(low >= 0.0 && high > low && high.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "censoring.low/high",
                        reason: format!("need 0 <= low < high, got low={low}, high={high}"),
                    });
                }
                Ok(())
            }
        }
    }

    /// One positive censoring time.
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let c = match *self {
                CensoringSpec::Fixed { value } => value,
                CensoringSpec::Exponential { rate } => -(rng.random::<f64>().max(f64::MIN_POSITIVE)).ln() / rate,
                CensoringSpec::Uniform { low, high } => low + rng.random::<f64>() * (high - low),
            };
            if c > 0.0 {
                return c;
            }
        }
    }
}

/// Per-coordinate generator for the fixed covariates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CovariateSpec {
    Bernoulli { p: f64 },
    Normal { mean: f64, sd: f64 },
}

impl CovariateSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CovariateSpec::Bernoulli { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidParameter {
                        name: "covariate bernoulli p",
                        reason: format!("must lie in [0, 1], got {p}"),
                    });
                }
                Ok(())
            }
            CovariateSpec::Normal { mean, sd } => {
                if !mean.is_finite() || !(sd >= 0.0 && sd.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "covariate normal parameters",
                        reason: format!("need finite mean and sd >= 0, got ({mean}, {sd})"),
                    });
                }
                Ok(())
            }
        }
    }

    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CovariateSpec::Bernoulli { p } => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            CovariateSpec::Normal { mean, sd } => rand_distr::Normal::new(mean, sd)
                .expect("validated normal parameters")
                .sample(rng),
        }
    }
}

/// Everything needed to simulate one cohort.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub model: IntensityModel,
    pub censoring: CensoringSpec,
    pub n_subjects: usize,
    pub covariates: Vec<CovariateSpec>,
    pub seed: u64,
    pub engine: Engine,
    /// Grid step; present exactly when `engine` is `Discrete`.
    pub dt: Option<f64>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.censoring.validate()?;
        for c in &self.covariates {
            c.validate()?;
        }
        if self.n_subjects == 0 {
            return Err(Error::InvalidScenario(
                "n_subjects must be at least 1".to_string(),
            ));
        }
        if self.covariates.len() != self.model.beta.len() {
            return Err(Error::InvalidScenario(format!(
                "covariates ({}) and model.beta ({}) must have the same length",
                self.covariates.len(),
                self.model.beta.len()
            )));
        }
        match (self.engine, self.dt) {
            (Engine::Discrete, None) => {
                return Err(Error::InvalidScenario(
                    "the discrete engine requires dt".to_string(),
                ))
            }
            (Engine::Discrete, Some(dt)) if !(dt > 0.0 && dt.is_finite()) => {
                return Err(Error::InvalidScenario(format!(
                    "dt must be a positive real, got {dt}"
                )))
            }
            (e, Some(_)) if e != Engine::Discrete => {
                return Err(Error::InvalidScenario(format!(
                    "dt only applies to the discrete engine, not {e}"
                )))
            }
            _ => {}
        }
        if self.engine == Engine::GapRejection && self.model.timescale != Timescale::Gap {
            return Err(Error::InvalidScenario(
                "the gap-rejection engine requires model.timescale = gap".to_string(),
            ));
        }
        if self.engine == Engine::Thinning {
            if let DependenceSpec::GapBaselineMultiplier { alpha, cap: None } =
                self.model.dependence
            {
                if alpha > 1.0 {
                    return Err(Error::InvalidScenario(format!(
                        "dependence.alpha = {alpha} > 1 requires dependence.cap under thinning"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Simulate subject `index` of the configured cohort. The per-subject draw
/// order is fixed: covariates coordinate by coordinate, censoring time,
/// then the engine (which draws the frailty first).
pub fn simulate_subject(config: &ScenarioConfig, index: usize) -> Result<EventHistory> {
    let mut rng = engines::subject_rng(config.seed, index as u64);
    let covariates: Vec<f64> = config.covariates.iter().map(|c| c.draw(&mut rng)).collect();
    let censor = config.censoring.draw(&mut rng);
    engines::simulate(
        &config.model,
        covariates,
        censor,
        config.engine,
        config.dt,
        &mut rng,
    )
    .map_err(|e| e.for_subject(index))
}

/// Simulate the whole cohort, fanning subjects out across the rayon pool.
pub fn simulate_cohort(config: &ScenarioConfig) -> Result<Vec<EventHistory>> {
    config.validate()?;
    (0..config.n_subjects)
        .into_par_iter()
        .map(|i| simulate_subject(config, i))
        .collect()
}

/// One `(start, stop, status)` row of the exported dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct CountingProcessRecord {
    pub subject_id: usize,
    /// Per-subject row counter starting at 1; the censored row continues the
    /// numbering.
    pub event_number: usize,
    pub start: f64,
    pub stop: f64,
    /// 1 for an observed event at `stop`, 0 for the censored final interval.
    pub status: u8,
    pub covariates: Vec<f64>,
    pub frailty: f64,
}

/// Expand a cohort into counting-process rows ordered by
/// `(subject_id, event_number)`: per subject `(0, T1, 1), (T1, T2, 1), ...,
/// (Tn, C, 0)`; a subject with no events yields the single row `(0, C, 0)`.
pub fn to_counting_process(cohort: &[EventHistory]) -> Vec<CountingProcessRecord> {
    let mut rows = Vec::with_capacity(cohort.iter().map(|h| h.n_events() + 1).sum());
    for (subject_id, h) in cohort.iter().enumerate() {
        let mut start = 0.0;
        let mut event_number = 1;
        for &t in &h.event_times {
            rows.push(CountingProcessRecord {
                subject_id,
                event_number,
                start,
                stop: t,
                status: 1,
                covariates: h.covariates.clone(),
                frailty: h.frailty,
            });
            start = t;
            event_number += 1;
        }
        rows.push(CountingProcessRecord {
            subject_id,
            event_number,
            start,
            stop: h.censoring_time,
            status: 0,
            covariates: h.covariates.clone(),
            frailty: h.frailty,
        });
    }
    rows
}

/// A parsed dataset: rows plus what optional columns were present.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub records: Vec<CountingProcessRecord>,
    pub n_covariates: usize,
    pub has_frailty: bool,
}

impl Dataset {
    /// Rebuild per-subject histories from the rows. The engine tag is not part
    /// of the export, so the caller supplies it.
    pub fn to_cohort(&self, engine: Engine) -> Result<Vec<EventHistory>> {
        let mut cohort: Vec<EventHistory> = Vec::new();
        let mut current: Option<(usize, EventHistory)> = None;
        for row in &self.records {
            let start_new = match &current {
                Some((id, _)) => *id != row.subject_id,
                None => true,
            };
            if start_new {
                if let Some((_, h)) = current.take() {
                    cohort.push(h);
                }
                current = Some((
                    row.subject_id,
                    EventHistory {
                        event_times: Vec::new(),
                        censoring_time: 0.0,
                        frailty: row.frailty,
                        covariates: row.covariates.clone(),
                        engine,
                    },
                ));
            }
            let (_, h) = current.as_mut().expect("just installed");
            match row.status {
                1 => h.event_times.push(row.stop),
                0 => h.censoring_time = row.stop,
                s => {
                    return Err(Error::Dataset {
                        line: 0,
                        message: format!("status must be 0 or 1, got {s}"),
                    })
                }
            }
        }
        if let Some((_, h)) = current.take() {
            cohort.push(h);
        }
        for h in &cohort {
            if h.censoring_time <= 0.0 {
                return Err(Error::Dataset {
                    line: 0,
                    message: "a subject lacks its censored final row".to_string(),
                });
            }
        }
        Ok(cohort)
    }
}

/// CSV header for the given column layout.
fn csv_header(n_covariates: usize, emit_frailty: bool) -> String {
    let mut header = String::from("subject_id,event_number,start,stop,status");
    for k in 1..=n_covariates {
        header.push_str(&format!(",x{k}"));
    }
    if emit_frailty {
        header.push_str(",frailty");
    }
    header
}

/// Write rows as CSV. Floating-point values use the shortest decimal that
/// round-trips, so re-parsing reproduces the exact bits.
pub fn write_csv<W: Write>(
    records: &[CountingProcessRecord],
    n_covariates: usize,
    emit_frailty: bool,
    out: &mut W,
) -> io::Result<()> {
    writeln!(out, "{}", csv_header(n_covariates, emit_frailty))?;
    for r in records {
        write!(
            out,
            "{},{},{},{},{}",
            r.subject_id, r.event_number, r.start, r.stop, r.status
        )?;
        for x in &r.covariates {
            write!(out, ",{x}")?;
        }
        if emit_frailty {
            write!(out, ",{}", r.frailty)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Parse a dataset previously written by [`write_csv`].
pub fn read_csv<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Dataset {
        line: 1,
        message: "missing header".to_string(),
    })?;
    let header = header.map_err(|e| Error::Dataset {
        line: 1,
        message: e.to_string(),
    })?;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.len() < 5 || cols[..5] != ["subject_id", "event_number", "start", "stop", "status"] {
        return Err(Error::Dataset {
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let has_frailty = cols.last() == Some(&"frailty");
    let n_covariates = cols.len() - 5 - usize::from(has_frailty);
    for (k, name) in cols[5..5 + n_covariates].iter().enumerate() {
        if *name != format!("x{}", k + 1) {
            return Err(Error::Dataset {
                line: 1,
                message: format!("unexpected covariate column {name:?}"),
            });
        }
    }

    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Dataset {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Dataset {
                line: line_no,
                message: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        let parse_f = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| Error::Dataset {
                line: line_no,
                message: format!("bad {what}: {s:?}"),
            })
        };
        let parse_u = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|_| Error::Dataset {
                line: line_no,
                message: format!("bad {what}: {s:?}"),
            })
        };
        let mut covariates = Vec::with_capacity(n_covariates);
        for s in &fields[5..5 + n_covariates] {
            covariates.push(parse_f(s, "covariate")?);
        }
        records.push(CountingProcessRecord {
            subject_id: parse_u(fields[0], "subject_id")?,
            event_number: parse_u(fields[1], "event_number")?,
            start: parse_f(fields[2], "start")?,
            stop: parse_f(fields[3], "stop")?,
            status: match fields[4] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Dataset {
                        line: line_no,
                        message: format!("status must be 0 or 1, got {other:?}"),
                    })
                }
            },
            covariates,
            frailty: if has_frailty {
                parse_f(fields[cols.len() - 1], "frailty")?
            } else {
                1.0
            },
        });
    }
    Ok(Dataset {
        records,
        n_covariates,
        has_frailty,
    })
}

/// Baseline classification of the generating process. A constant baseline
/// (including a Weibull at shape 1) is its own class because it reads the
/// same on either timescale.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineClass {
    ConstantBaseline,
    GapTimeBaseline,
    CalendarTimeBaseline,
}

impl std::fmt::Display for BaselineClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaselineClass::ConstantBaseline => "constant baseline",
            BaselineClass::GapTimeBaseline => "gap-time baseline",
            BaselineClass::CalendarTimeBaseline => "calendar-time baseline",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PopulationClass {
    Homogeneous,
    Heterogeneous,
}

impl std::fmt::Display for PopulationClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PopulationClass::Homogeneous => "homogeneous",
            PopulationClass::Heterogeneous => "heterogeneous",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DependenceClass {
    None,
    EventDependent,
}

impl std::fmt::Display for DependenceClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DependenceClass::None => "no event-dependence",
            DependenceClass::EventDependent => "event-dependent",
        })
    }
}

/// Cell of the baseline x population x dependence taxonomy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScenarioClass {
    pub baseline: BaselineClass,
    pub population: PopulationClass,
    pub dependence: DependenceClass,
}

impl ScenarioClass {
    /// All 3 x 2 x 2 cells.
    pub fn all_cells() -> Vec<ScenarioClass> {
        let mut cells = Vec::with_capacity(12);
        for baseline in [
            BaselineClass::ConstantBaseline,
            BaselineClass::GapTimeBaseline,
            BaselineClass::CalendarTimeBaseline,
        ] {
            for population in [PopulationClass::Homogeneous, PopulationClass::Heterogeneous] {
                for dependence in [DependenceClass::None, DependenceClass::EventDependent] {
                    cells.push(ScenarioClass {
                        baseline,
                        population,
                        dependence,
                    });
                }
            }
        }
        cells
    }

    /// Scenario keys selecting this cell.
    pub fn selecting_keys(&self) -> String {
        let baseline = match self.baseline {
            BaselineClass::ConstantBaseline => {
                "model.baseline.kind = constant (either timescale)"
            }
            BaselineClass::GapTimeBaseline => {
                "model.timescale = gap, model.baseline.kind = weibull with nu != 1"
            }
            BaselineClass::CalendarTimeBaseline => {
                "model.timescale = calendar, model.baseline.kind = weibull with nu != 1"
            }
        };
        let population = match self.population {
            PopulationClass::Homogeneous => "frailty.kind = none",
            PopulationClass::Heterogeneous => "frailty.kind = gamma | lognormal | binary",
        };
        let dependence = match self.dependence {
            DependenceClass::None => "dependence.kind = none",
            DependenceClass::EventDependent => {
                "dependence.kind = gap-multiplier | count | capped-count | decayed-count | windowed-rate | general"
            }
        };
        format!("{baseline}; {population}; {dependence}")
    }
}

impl std::fmt::Display for ScenarioClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} / {} / {}", self.baseline, self.population, self.dependence)
    }
}

/// Locate a scenario in the taxonomy.
pub fn classify_scenario(config: &ScenarioConfig) -> ScenarioClass {
    let baseline = if config.model.baseline.is_time_constant() {
        BaselineClass::ConstantBaseline
    } else {
        match config.model.timescale {
            Timescale::Gap => BaselineClass::GapTimeBaseline,
            Timescale::Calendar => BaselineClass::CalendarTimeBaseline,
        }
    };
    let population = match config.model.frailty {
        FrailtySpec::None => PopulationClass::Homogeneous,
        _ => PopulationClass::Heterogeneous,
    };
    let dependence = if config.model.dependence.is_none() {
        DependenceClass::None
    } else {
        DependenceClass::EventDependent
    };
    ScenarioClass {
        baseline,
        population,
        dependence,
    }
}
