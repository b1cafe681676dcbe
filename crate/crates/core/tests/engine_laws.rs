//! Monte Carlo checks of each engine against closed-form laws.

use recsim::engines::Engine;
use recsim::models::{IntensityModel, Timescale};
use recsim::study::{simulate_cohort, CensoringSpec, ScenarioConfig};
use recsim::validate::{ks_two_sample, ks_two_sample_critical};
use recsim::BaselineHazard;

fn config(
    model: IntensityModel,
    censor: f64,
    n_subjects: usize,
    seed: u64,
    engine: Engine,
    dt: Option<f64>,
) -> ScenarioConfig {
    ScenarioConfig {
        model,
        censoring: CensoringSpec::Fixed { value: censor },
        n_subjects,
        covariates: Vec::new(),
        seed,
        engine,
        dt,
    }
}

fn count_mean_se(cohort: &[recsim::engines::EventHistory]) -> (f64, f64) {
    let n = cohort.len() as f64;
    let counts: Vec<f64> = cohort.iter().map(|h| h.n_events() as f64).collect();
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn pooled_gaps(cohort: &[recsim::engines::EventHistory]) -> Vec<f64> {
    let mut gaps = Vec::new();
    for h in cohort {
        let mut prev = 0.0;
        for &t in &h.event_times {
            gaps.push(t - prev);
            prev = t;
        }
    }
    gaps
}

#[test]
fn thinning_reproduces_the_nhpp_mean() {
    // E[N(2)] = Lambda(2) = 4 for the calendar Weibull(1, 2) intensity.
    let cfg = config(
        IntensityModel::plain(
            Timescale::Calendar,
            BaselineHazard::weibull(1.0, 2.0).unwrap(),
        ),
        2.0,
        100_000,
        301,
        Engine::Thinning,
        None,
    );
    let cohort = simulate_cohort(&cfg).unwrap();
    let (mean, se) = count_mean_se(&cohort);
    assert!(
        (mean - 4.0).abs() <= 3.0 * se,
        "thinning mean {mean} vs 4 (3 SE = {})",
        3.0 * se
    );
}

#[test]
fn gap_rejection_matches_the_renewal_gap_mean() {
    // Weibull(1, 2) gaps have mean Gamma(1.5) = sqrt(pi)/2. Long windows
    // keep the censoring truncation of the pooled gaps negligible.
    let cfg = config(
        IntensityModel::plain(Timescale::Gap, BaselineHazard::weibull(1.0, 2.0).unwrap()),
        300.0,
        300,
        302,
        Engine::GapRejection,
        None,
    );
    let cohort = simulate_cohort(&cfg).unwrap();
    let gaps = pooled_gaps(&cohort);
    assert!(gaps.len() >= 100_000, "only {} gaps", gaps.len());
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / (n - 1.0);
    let want = 0.886226925452758; // Gamma(1.5)
    let se = (var / n).sqrt();
    assert!(
        (mean - want).abs() <= 3.0 * se,
        "gap mean {mean} vs {want} (3 SE = {})",
        3.0 * se
    );
}

#[test]
fn gap_rejection_and_inversion_generate_the_same_gap_law() {
    let model = IntensityModel::plain(Timescale::Gap, BaselineHazard::constant(1.0).unwrap());
    let run = |engine| {
        let cfg = config(model.clone(), 5.0, 20_000, 303, engine, None);
        pooled_gaps(&simulate_cohort(&cfg).unwrap())
    };
    let a = run(Engine::Inversion);
    let b = run(Engine::GapRejection);
    assert!(a.len() >= 90_000, "only {} gaps", a.len());
    let d = ks_two_sample(&a, &b).unwrap();
    let crit = ks_two_sample_critical(a.len(), b.len(), 0.01);
    assert!(d < crit, "KS {d} vs critical {crit}");
}

#[test]
fn discrete_grid_mean_stays_within_the_bias_window() {
    // Constant rate 1 over [0, 5] at dt = 1e-3: the Bernoulli-grid bias is
    // O(lambda^2 dt t), so the mean count must land in [4.95, 5.05].
    let cfg = config(
        IntensityModel::plain(Timescale::Calendar, BaselineHazard::constant(1.0).unwrap()),
        5.0,
        100_000,
        304,
        Engine::Discrete,
        Some(1e-3),
    );
    let cohort = simulate_cohort(&cfg).unwrap();
    let (mean, _) = count_mean_se(&cohort);
    assert!(
        (4.95..=5.05).contains(&mean),
        "discrete mean {mean} outside [4.95, 5.05]"
    );
}
