//! Scenario file format: a flat key-value text format with dotted keys.
//!
//! One `key = value` pair per line; `#` starts a comment; blank lines are
//! ignored. Keys are strict: unknown keys, duplicate keys and keys that do
//! not apply to the configured kinds are all errors, so a typo can never be
//! silently ignored.
//!
//! ```text
//! # A heterogeneous calendar-time scenario.
//! model.timescale       = calendar            # calendar | gap
//! model.baseline.kind   = weibull             # constant | weibull
//! model.baseline.lambda = 1.0
//! model.baseline.nu     = 2.0                 # weibull only
//! model.beta            = 0.693, -0.2         # optional covariate coefficients
//! covariates            = bernoulli(0.5), normal(0, 1)
//! frailty.kind          = gamma               # none | gamma | lognormal | binary
//! frailty.variance      = 0.5
//! dependence.kind       = none                # none | gap-multiplier | count |
//!                                             # capped-count | decayed-count |
//!                                             # windowed-rate | general
//! censoring.kind        = fixed               # fixed | exponential | uniform
//! censoring.value       = 2.0
//! n_subjects            = 100000
//! seed                  = 42
//! engine                = inversion           # inversion | thinning |
//!                                             # gap-rejection | discrete
//! ```
//!
//! Kind-specific keys: `frailty.low_value`, `frailty.high_value` and
//! `frailty.high_prob` (binary frailty); `dependence.alpha` and
//! `dependence.cap` (gap-multiplier; the cap also serves `capped-count`),
//! `dependence.phi` (all covariate kinds), `dependence.window`
//! (windowed-rate), `dependence.g0`/`g1`/`g2` (general kind, as
//! `constant(c)`, `linear(a, b)` or `log(a, b)`); `censoring.rate`
//! (exponential), `censoring.low`/`censoring.high` (uniform); `dt`
//! (discrete engine only).

use std::collections::BTreeMap;

use crate::engines::Engine;
use crate::error::{Error, Result};
use crate::models::{DependenceSpec, FrailtySpec, GFunction, IntensityModel, Timescale};
use crate::study::{CensoringSpec, CovariateSpec, ScenarioConfig};
use crate::BaselineHazard;

const KNOWN_KEYS: &[&str] = &[
    "model.timescale",
    "model.baseline.kind",
    "model.baseline.lambda",
    "model.baseline.nu",
    "model.beta",
    "covariates",
    "frailty.kind",
    "frailty.variance",
    "frailty.low_value",
    "frailty.high_value",
    "frailty.high_prob",
    "dependence.kind",
    "dependence.alpha",
    "dependence.cap",
    "dependence.phi",
    "dependence.window",
    "dependence.g0",
    "dependence.g1",
    "dependence.g2",
    "censoring.kind",
    "censoring.value",
    "censoring.rate",
    "censoring.low",
    "censoring.high",
    "n_subjects",
    "seed",
    "engine",
    "dt",
];

struct Entry {
    value: String,
    line: usize,
    consumed: bool,
}

struct Keys {
    entries: BTreeMap<String, Entry>,
}

impl Keys {
    fn parse(text: &str) -> Result<Keys> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected 'key = value', got {content:?}"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "empty key".to_string(),
                });
            }
            if let Some(previous) = entries.insert(
                key.clone(),
                Entry {
                    value,
                    line,
                    consumed: false,
                },
            ) {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "duplicate key {key:?} (first set on line {})",
                        previous.line
                    ),
                });
            }
        }
        Ok(Keys { entries })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.consumed = true;
            (e.value.clone(), e.line)
        })
    }

    fn require(&mut self, key: &str) -> Result<(String, usize)> {
        self.take(key)
            .ok_or_else(|| Error::InvalidScenario(format!("missing required key {key:?}")))
    }

    /// Error out on the first key that was never consumed: a typo, or a key
    /// that does not apply to the configured kinds.
    fn finish(&self) -> Result<()> {
        for (key, entry) in &self.entries {
            if !entry.consumed {
                let message = if KNOWN_KEYS.contains(&key.as_str()) {
                    format!("key {key:?} does not apply to the configured kinds")
                } else {
                    format!("unknown key {key:?}")
                };
                return Err(Error::Parse {
                    line: entry.line,
                    message,
                });
            }
        }
        Ok(())
    }
}

fn parse_f64(value: &str, line: usize, key: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("{key}: expected a number, got {value:?}"),
    })
}

fn parse_u64(value: &str, line: usize, key: &str) -> Result<u64> {
    value.parse::<u64>().map_err(|_| Error::Parse {
        line,
        message: format!("{key}: expected an unsigned integer, got {value:?}"),
    })
}

/// Split on top-level commas, respecting parentheses.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(s[start..].trim());
    parts
}

/// Parse `name(arg, ...)` into its name and numeric arguments.
fn parse_call<'a>(s: &'a str, line: usize, key: &str) -> Result<(&'a str, Vec<f64>)> {
    let open = s.find('(');
    let (name, rest) = match open {
        Some(pos) if s.ends_with(')') => (&s[..pos], &s[pos + 1..s.len() - 1]),
        _ => {
            return Err(Error::Parse {
                line,
                message: format!("{key}: expected 'name(args)', got {s:?}"),
            })
        }
    };
    let mut args = Vec::new();
    let rest = rest.trim();
    if !rest.is_empty() {
        for a in rest.split(',') {
            args.push(parse_f64(a.trim(), line, key)?);
        }
    }
    Ok((name.trim(), args))
}

fn parse_gfunction(value: &str, line: usize, key: &str) -> Result<GFunction> {
    let (name, args) = parse_call(value, line, key)?;
    let wrong_arity = |want: usize| Error::Parse {
        line,
        message: format!("{key}: {name} takes {want} argument(s), got {}", args.len()),
    };
    match name {
        "constant" => {
            if args.len() != 1 {
                return Err(wrong_arity(1));
            }
            Ok(GFunction::Constant(args[0]))
        }
        "linear" => {
            if args.len() != 2 {
                return Err(wrong_arity(2));
            }
            Ok(GFunction::Linear {
                intercept: args[0],
                slope: args[1],
            })
        }
        "log" => {
            if args.len() != 2 {
                return Err(wrong_arity(2));
            }
            Ok(GFunction::Log {
                intercept: args[0],
                coeff: args[1],
            })
        }
        other => Err(Error::Parse {
            line,
            message: format!("{key}: unknown function {other:?} (use constant, linear or log)"),
        }),
    }
}

fn parse_covariate(value: &str, line: usize) -> Result<CovariateSpec> {
    let (name, args) = parse_call(value, line, "covariates")?;
    match (name, args.as_slice()) {
        ("bernoulli", [p]) => Ok(CovariateSpec::Bernoulli { p: *p }),
        ("normal", [mean, sd]) => Ok(CovariateSpec::Normal {
            mean: *mean,
            sd: *sd,
        }),
        _ => Err(Error::Parse {
            line,
            message: format!(
                "covariates: expected bernoulli(p) or normal(mean, sd), got {value:?}"
            ),
        }),
    }
}

/// Parse scenario text into a validated [`ScenarioConfig`].
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let mut keys = Keys::parse(text)?;

    let (ts, line) = keys.require("model.timescale")?;
    let timescale = match ts.as_str() {
        "calendar" => Timescale::Calendar,
        "gap" => Timescale::Gap,
        other => {
            return Err(Error::Parse {
                line,
                message: format!("model.timescale: expected calendar or gap, got {other:?}"),
            })
        }
    };

    let (kind, kind_line) = keys.require("model.baseline.kind")?;
    let (lambda, lambda_line) = keys.require("model.baseline.lambda")?;
    let lambda = parse_f64(&lambda, lambda_line, "model.baseline.lambda")?;
    let baseline = match kind.as_str() {
        "constant" => {
            if let Some((nu, nu_line)) = keys.take("model.baseline.nu") {
                let nu = parse_f64(&nu, nu_line, "model.baseline.nu")?;
                if nu != 1.0 {
                    return Err(Error::Parse {
                        line: nu_line,
                        message: format!("a constant baseline has nu = 1, got {nu}"),
                    });
                }
            }
            BaselineHazard::constant(lambda)
        }
        "weibull" => {
            let (nu, nu_line) = keys.require("model.baseline.nu")?;
            let nu = parse_f64(&nu, nu_line, "model.baseline.nu")?;
            BaselineHazard::weibull(lambda, nu)
        }
        other => {
            return Err(Error::Parse {
                line: kind_line,
                message: format!(
                    "model.baseline.kind: expected constant or weibull, got {other:?}"
                ),
            })
        }
    }
    .map_err(|e| Error::Parse {
        line: lambda_line,
        message: e.to_string(),
    })?;

    let beta = match keys.take("model.beta") {
        Some((value, line)) if !value.is_empty() => split_top_level(&value)
            .into_iter()
            .map(|v| parse_f64(v, line, "model.beta"))
            .collect::<Result<Vec<f64>>>()?,
        _ => Vec::new(),
    };

    let covariates = match keys.take("covariates") {
        Some((value, line)) if !value.is_empty() => split_top_level(&value)
            .into_iter()
            .map(|v| parse_covariate(v, line))
            .collect::<Result<Vec<CovariateSpec>>>()?,
        _ => Vec::new(),
    };

    let frailty = match keys.take("frailty.kind") {
        None => FrailtySpec::None,
        Some((kind, line)) => match kind.as_str() {
            "none" => FrailtySpec::None,
            "gamma" | "lognormal" => {
                let (v, v_line) = keys.require("frailty.variance")?;
                let variance = parse_f64(&v, v_line, "frailty.variance")?;
                if kind == "gamma" {
                    FrailtySpec::Gamma { variance }
                } else {
                    FrailtySpec::LogNormal { variance }
                }
            }
            "binary" => {
                let (low, l) = keys.require("frailty.low_value")?;
                let (high, h) = keys.require("frailty.high_value")?;
                let (p, pl) = keys.require("frailty.high_prob")?;
                FrailtySpec::Binary {
                    low: parse_f64(&low, l, "frailty.low_value")?,
                    high: parse_f64(&high, h, "frailty.high_value")?,
                    high_prob: parse_f64(&p, pl, "frailty.high_prob")?,
                }
            }
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "frailty.kind: expected none, gamma, lognormal or binary, got {other:?}"
                    ),
                })
            }
        },
    };

    let dependence = match keys.take("dependence.kind") {
        None => DependenceSpec::None,
        Some((kind, line)) => match kind.as_str() {
            "none" => DependenceSpec::None,
            "gap-multiplier" => {
                let (a, al) = keys.require("dependence.alpha")?;
                let alpha = parse_f64(&a, al, "dependence.alpha")?;
                let cap = match keys.take("dependence.cap") {
                    Some((c, cl)) => Some(parse_u64(&c, cl, "dependence.cap")? as u32),
                    None => None,
                };
                DependenceSpec::GapBaselineMultiplier { alpha, cap }
            }
            "count" => {
                let (p, pl) = keys.require("dependence.phi")?;
                DependenceSpec::CountCovariate {
                    phi: parse_f64(&p, pl, "dependence.phi")?,
                }
            }
            "capped-count" => {
                let (p, pl) = keys.require("dependence.phi")?;
                let (c, cl) = keys.require("dependence.cap")?;
                DependenceSpec::CappedCountCovariate {
                    phi: parse_f64(&p, pl, "dependence.phi")?,
                    cap: parse_u64(&c, cl, "dependence.cap")? as u32,
                }
            }
            "decayed-count" => {
                let (p, pl) = keys.require("dependence.phi")?;
                DependenceSpec::DecayedCountCovariate {
                    phi: parse_f64(&p, pl, "dependence.phi")?,
                }
            }
            "windowed-rate" => {
                let (p, pl) = keys.require("dependence.phi")?;
                let (w, wl) = keys.require("dependence.window")?;
                DependenceSpec::WindowedRateCovariate {
                    phi: parse_f64(&p, pl, "dependence.phi")?,
                    window: parse_f64(&w, wl, "dependence.window")?,
                }
            }
            "general" => {
                let (g0, l0) = keys.require("dependence.g0")?;
                let (g1, l1) = keys.require("dependence.g1")?;
                let (g2, l2) = keys.require("dependence.g2")?;
                DependenceSpec::General {
                    g0: parse_gfunction(&g0, l0, "dependence.g0")?,
                    g1: parse_gfunction(&g1, l1, "dependence.g1")?,
                    g2: parse_gfunction(&g2, l2, "dependence.g2")?,
                }
            }
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("dependence.kind: unknown kind {other:?}"),
                })
            }
        },
    };

    let (ckind, cline) = keys.require("censoring.kind")?;
    let censoring = match ckind.as_str() {
        "fixed" => {
            let (v, vl) = keys.require("censoring.value")?;
            CensoringSpec::Fixed {
                value: parse_f64(&v, vl, "censoring.value")?,
            }
        }
        "exponential" => {
            let (r, rl) = keys.require("censoring.rate")?;
            CensoringSpec::Exponential {
                rate: parse_f64(&r, rl, "censoring.rate")?,
            }
        }
        "uniform" => {
            let (lo, ll) = keys.require("censoring.low")?;
            let (hi, hl) = keys.require("censoring.high")?;
            CensoringSpec::Uniform {
                low: parse_f64(&lo, ll, "censoring.low")?,
                high: parse_f64(&hi, hl, "censoring.high")?,
            }
        }
        other => {
            return Err(Error::Parse {
                line: cline,
                message: format!(
                    "censoring.kind: expected fixed, exponential or uniform, got {other:?}"
                ),
            })
        }
    };

    let (n, nl) = keys.require("n_subjects")?;
    let n_subjects = parse_u64(&n, nl, "n_subjects")? as usize;
    let (seed, sl) = keys.require("seed")?;
    let seed = parse_u64(&seed, sl, "seed")?;
    let (engine, el) = keys.require("engine")?;
    let engine: Engine = engine.parse().map_err(|e| Error::Parse {
        line: el,
        message: e,
    })?;
    let dt = match keys.take("dt") {
        Some((v, vl)) => Some(parse_f64(&v, vl, "dt")?),
        None => None,
    };

    keys.finish()?;

    let config = ScenarioConfig {
        model: IntensityModel {
            timescale,
            baseline,
            beta,
            frailty,
            dependence,
        },
        censoring,
        n_subjects,
        covariates,
        seed,
        engine,
        dt,
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "\
# exercise most of the vocabulary
model.timescale = calendar
model.baseline.kind = weibull
model.baseline.lambda = 1.0
model.baseline.nu = 2.0
model.beta = 0.693, -0.2
covariates = bernoulli(0.5), normal(0, 1)
frailty.kind = gamma
frailty.variance = 0.5
dependence.kind = capped-count
dependence.phi = 0.405
dependence.cap = 4
censoring.kind = fixed
censoring.value = 2.0
n_subjects = 100
seed = 42
engine = inversion
";

    #[test]
    fn parses_a_full_scenario() {
        let config = parse_scenario(FULL).unwrap();
        assert_eq!(config.n_subjects, 100);
        assert_eq!(config.seed, 42);
        assert_eq!(config.engine, Engine::Inversion);
        assert_eq!(config.model.beta, vec![0.693, -0.2]);
        assert_eq!(config.model.frailty, FrailtySpec::Gamma { variance: 0.5 });
        assert_eq!(
            config.model.dependence,
            DependenceSpec::CappedCountCovariate { phi: 0.405, cap: 4 }
        );
        assert_eq!(config.censoring, CensoringSpec::Fixed { value: 2.0 });
    }

    #[test]
    fn unknown_key_is_an_error_naming_key_and_line() {
        let text = format!("{FULL}model.shape = 2.0\n");
        let err = parse_scenario(&text).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 18);
                assert!(message.contains("model.shape"), "message: {message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn inapplicable_key_is_an_error() {
        let text = format!("{FULL}dependence.window = 1.0\n");
        let err = parse_scenario(&text).unwrap_err();
        assert!(
            err.to_string().contains("does not apply"),
            "got: {err}"
        );
    }

    #[test]
    fn duplicate_key_is_an_error() {
        let text = format!("{FULL}seed = 43\n");
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "got: {err}");
    }

    #[test]
    fn missing_required_key_is_an_error() {
        let text = FULL.replace("seed = 42\n", "");
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("seed"), "got: {err}");
    }

    #[test]
    fn nu_on_a_constant_baseline_must_be_one() {
        let text = "\
model.timescale = calendar
model.baseline.kind = constant
model.baseline.lambda = 1.0
model.baseline.nu = 2.0
censoring.kind = fixed
censoring.value = 1.0
n_subjects = 1
seed = 0
engine = inversion
";
        assert!(parse_scenario(text).is_err());
        let ok = text.replace("model.baseline.nu = 2.0", "model.baseline.nu = 1.0");
        assert!(parse_scenario(&ok).is_ok());
    }

    #[test]
    fn general_kind_parses_its_function_catalog() {
        let text = "\
model.timescale = calendar
model.baseline.kind = constant
model.baseline.lambda = 1.0
dependence.kind = general
dependence.g0 = linear(-0.2, 0.1)
dependence.g1 = log(0.3, -0.4)
dependence.g2 = constant(0.05)
censoring.kind = uniform
censoring.low = 0
censoring.high = 10
n_subjects = 5
seed = 1
engine = thinning
";
        let config = parse_scenario(text).unwrap();
        match config.model.dependence {
            DependenceSpec::General { g0, g1, g2 } => {
                assert_eq!(
                    g0,
                    GFunction::Linear {
                        intercept: -0.2,
                        slope: 0.1
                    }
                );
                assert_eq!(
                    g1,
                    GFunction::Log {
                        intercept: 0.3,
                        coeff: -0.4
                    }
                );
                assert_eq!(g2, GFunction::Constant(0.05));
            }
            other => panic!("unexpected dependence {other:?}"),
        }
    }

    #[test]
    fn uncapped_increasing_multiplier_under_thinning_fails_validation() {
        let text = "\
model.timescale = gap
model.baseline.kind = weibull
model.baseline.lambda = 1.0
model.baseline.nu = 2.0
dependence.kind = gap-multiplier
dependence.alpha = 2.0
censoring.kind = fixed
censoring.value = 5.0
n_subjects = 10
seed = 0
engine = thinning
";
        let err = parse_scenario(text).unwrap_err();
        assert!(err.to_string().contains("cap"), "got: {err}");
        // The same model is accepted under inversion (the explosion guard is
        // the runtime protection there).
        let ok = text.replace("engine = thinning", "engine = inversion");
        assert!(parse_scenario(&ok).is_ok());
    }

    #[test]
    fn dt_requires_the_discrete_engine() {
        let text = format!("{FULL}dt = 0.001\n");
        assert!(parse_scenario(&text).is_err());
        let ok = text.replace("engine = inversion", "engine = discrete");
        assert!(parse_scenario(&ok).is_ok());
    }
}
