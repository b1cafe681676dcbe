//! Property-based invariants for the hazard algebra, the composed intensity
//! and the engines.

use proptest::prelude::*;

use recsim::engines::{self, Engine};
use recsim::hazards::SINGULARITY_OFFSET;
use recsim::models::{DependenceSpec, FrailtySpec, IntensityModel, SubjectState, Timescale};
use recsim::BaselineHazard;

fn baseline_strategy() -> impl Strategy<Value = BaselineHazard> {
    prop_oneof![
        (0.05f64..5.0).prop_map(|l| BaselineHazard::constant(l).unwrap()),
        (0.05f64..5.0, 0.3f64..3.0).prop_map(|(l, n)| BaselineHazard::weibull(l, n).unwrap()),
    ]
}

proptest! {
    #[test]
    fn cumulative_hazard_round_trips(
        baseline in baseline_strategy(),
        y in 0.0f64..1e6,
    ) {
        let w = baseline.inverse_cumulative_hazard(y).unwrap();
        let back = baseline.cumulative_hazard(0.0, w).unwrap();
        prop_assert!(
            (back - y).abs() <= 1e-9 * y.max(1.0),
            "round trip {y} -> {w} -> {back}"
        );
    }

    #[test]
    fn cumulative_hazard_is_strictly_increasing(
        baseline in baseline_strategy(),
        t in 1e-6f64..100.0,
        bump in 1e-3f64..10.0,
    ) {
        let a = baseline.cumulative_hazard(0.0, t).unwrap();
        let b = baseline.cumulative_hazard(0.0, t + bump).unwrap();
        prop_assert!(b > a, "H not increasing: H({t}) = {a}, H({}) = {b}", t + bump);
    }

    #[test]
    fn cumulative_hazard_is_additive(
        baseline in baseline_strategy(),
        a in 0.0f64..50.0,
        d1 in 0.0f64..25.0,
        d2 in 0.0f64..25.0,
    ) {
        let m = a + d1;
        let c = m + d2;
        let whole = baseline.cumulative_hazard(a, c).unwrap();
        let split = baseline.cumulative_hazard(a, m).unwrap()
            + baseline.cumulative_hazard(m, c).unwrap();
        prop_assert!(
            (whole - split).abs() <= 1e-12 * whole.abs().max(1e-12),
            "additivity broke: {whole} vs {split}"
        );
    }

    #[test]
    fn shape_one_weibull_equals_constant_everywhere(lambda in 0.05f64..5.0) {
        let weibull = BaselineHazard::weibull(lambda, 1.0).unwrap();
        let constant = BaselineHazard::constant(lambda).unwrap();
        for i in 0..1000 {
            let t = i as f64 * 0.01;
            prop_assert_eq!(weibull.hazard_at(t).unwrap(), constant.hazard_at(t).unwrap());
            prop_assert_eq!(
                weibull.cumulative_hazard(0.0, t).unwrap(),
                constant.cumulative_hazard(0.0, t).unwrap()
            );
        }
    }

    #[test]
    fn upper_bound_dominates_the_hazard(
        baseline in baseline_strategy(),
        horizon in 0.5f64..20.0,
    ) {
        let bound = baseline.upper_bound(horizon).unwrap();
        for i in 0..=500 {
            let t = SINGULARITY_OFFSET
                + (horizon - SINGULARITY_OFFSET) * i as f64 / 500.0;
            prop_assert!(baseline.hazard_at(t).unwrap() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn intensity_is_nonnegative_and_scales_with_frailty(
        baseline in baseline_strategy(),
        u in 0.1f64..4.0,
        t in 0.01f64..10.0,
    ) {
        let model = IntensityModel {
            timescale: Timescale::Calendar,
            baseline,
            beta: vec![0.4],
            frailty: FrailtySpec::None,
            dependence: DependenceSpec::CountCovariate { phi: -0.3 },
        };
        let mut s1 = SubjectState::new(vec![1.0], u);
        let mut s2 = SubjectState::new(vec![1.0], 2.0 * u);
        for e in [0.003, 0.007] {
            s1.record_event(e).unwrap();
            s2.record_event(e).unwrap();
        }
        let a = model.intensity_at(&s1, t).unwrap();
        let b = model.intensity_at(&s2, t).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((b / a - 2.0).abs() < 1e-9, "doubling u gave ratio {}", b / a);
    }

    #[test]
    fn plain_calendar_intensity_ignores_history(
        baseline in baseline_strategy(),
        t in 1.0f64..10.0,
    ) {
        let model = IntensityModel::plain(Timescale::Calendar, baseline);
        let empty = SubjectState::new(Vec::new(), 1.0);
        let mut busy = SubjectState::new(Vec::new(), 1.0);
        for e in [0.2, 0.5, 0.9] {
            busy.record_event(e).unwrap();
        }
        prop_assert_eq!(
            model.intensity_at(&empty, t).unwrap(),
            model.intensity_at(&busy, t).unwrap()
        );
    }

    #[test]
    fn plain_gap_intensity_depends_only_on_the_gap(
        baseline in baseline_strategy(),
        gap in 0.01f64..5.0,
    ) {
        let model = IntensityModel::plain(Timescale::Gap, baseline);
        let mut one = SubjectState::new(Vec::new(), 1.0);
        one.record_event(1.0).unwrap();
        let mut other = SubjectState::new(Vec::new(), 1.0);
        for e in [0.4, 2.5] {
            other.record_event(e).unwrap();
        }
        // The gap is recovered as t - last, so identical gaps at different
        // calendar times agree only to rounding.
        let a = model.intensity_at(&one, 1.0 + gap).unwrap();
        let b = model.intensity_at(&other, 2.5 + gap).unwrap();
        prop_assert!(
            (a - b).abs() <= 1e-9 * a.abs().max(1e-9),
            "same gap, different histories: {} vs {}",
            a,
            b
        );
    }

    #[test]
    fn capped_count_agrees_with_count_below_the_cap(
        baseline in baseline_strategy(),
        phi in -1.0f64..1.0,
        n_events in 0usize..4,
        t_offset in 0.01f64..5.0,
    ) {
        let capped = IntensityModel {
            timescale: Timescale::Calendar,
            baseline,
            beta: Vec::new(),
            frailty: FrailtySpec::None,
            dependence: DependenceSpec::CappedCountCovariate { phi, cap: 4 },
        };
        let count = IntensityModel {
            dependence: DependenceSpec::CountCovariate { phi },
            ..capped.clone()
        };
        let mut s = SubjectState::new(Vec::new(), 1.0);
        for i in 0..n_events {
            s.record_event(0.1 * (i + 1) as f64).unwrap();
        }
        let t = s.now() + t_offset;
        prop_assert_eq!(
            capped.intensity_at(&s, t).unwrap(),
            count.intensity_at(&s, t).unwrap()
        );
    }

    #[test]
    fn gap_cdf_is_monotone_and_bounded(
        baseline in baseline_strategy(),
        w1 in 0.01f64..5.0,
        bump in 0.01f64..5.0,
    ) {
        let model = IntensityModel {
            timescale: Timescale::Gap,
            baseline,
            beta: Vec::new(),
            frailty: FrailtySpec::None,
            dependence: DependenceSpec::None,
        };
        let mut s = SubjectState::new(Vec::new(), 1.0);
        s.record_event(0.8).unwrap();
        let a = model.conditional_gap_cdf(&s, w1).unwrap();
        let b = model.conditional_gap_cdf(&s, w1 + bump).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a);
    }

    #[test]
    fn engines_respect_censoring_and_seeds(
        baseline in baseline_strategy(),
        seed in any::<u64>(),
        censor in 0.5f64..4.0,
    ) {
        let model = IntensityModel::plain(Timescale::Gap, baseline);
        for engine in [Engine::Inversion, Engine::Thinning, Engine::GapRejection] {
            let run = || {
                engines::simulate(
                    &model,
                    Vec::new(),
                    censor,
                    engine,
                    None,
                    &mut engines::subject_rng(seed, 0),
                )
                .unwrap()
            };
            let a = run();
            prop_assert_eq!(&a, &run(), "{} not deterministic", engine);
            prop_assert!(a.event_times.iter().all(|&t| t < censor && t > 0.0));
            prop_assert!(a.event_times.windows(2).all(|p| p[0] < p[1]));
        }
    }
}
