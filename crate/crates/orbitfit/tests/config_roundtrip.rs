use orbitfit::config::{parse_config, Scenario, ScenarioConfig};
use orbitfit_core::dynamics::ObservationMode;
use proptest::prelude::*;

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![1e-12f64..1e-3, 1e-3f64..10.0, 10.0f64..1e6]
}

prop_compose! {
    fn valid_config()(
        scenario in 0usize..6,
        exact in any::<bool>(),
        seed in any::<u64>(),
        dt in 1e-5f64..1e-2,
        substeps in 1usize..16,
        t_extra in 0.0f64..500.0,
        kmax in 1u32..6,
        amplitude in 0.0f64..3.0,
        factor in 0.01f64..0.99,
        stride in 1usize..50,
        ensemble in 2usize..200,
        grid_n in 1usize..300,
        tols in proptest::collection::vec(positive(), 12),
        dir in "[a-z][a-z0-9_/]{0,12}",
    ) -> ScenarioConfig {
        let scenario = Scenario::ALL[scenario];
        let mode = if exact { ObservationMode::Exact } else { ObservationMode::PositionsOnly };
        let mut c = ScenarioConfig::defaults(scenario, mode);
        c.seed = seed;
        c.dt = dt;
        c.substeps = substeps;
        c.t_final = dt + t_extra;
        c.kmax = kmax;
        c.amplitude = amplitude;
        c.energy_factor = match scenario {
            Scenario::LowEnergy => factor,
            _ => 1.0 + 10.0 * factor,
        };
        c.stride = stride;
        c.csv_stride = stride + 1;
        c.ensemble = ensemble;
        c.grid_n = grid_n;
        c.output_dir = dir.into();
        c.drift_tol = tols[0];
        c.rank_tol = tols[1];
        c.eps_close = tols[2];
        c.t_max = tols[3];
        c.section_radius = tols[4];
        c.period_floor = tols[5];
        c.circle_radius = tols[6];
        c.sup_tol = tols[7];
        c.coef_tol = tols[8];
        c.period_tol = tols[9];
        c.condition_min = tols[10];
        c.agreement_tol = tols[11];
        c
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parse_emit_parse_is_identity(c in valid_config()) {
        let text = c.emit();
        let once = parse_config(&text).unwrap();
        prop_assert_eq!(&once, &c);
        prop_assert_eq!(once.emit(), text);
    }

    #[test]
    fn garbage_lines_are_rejected_with_their_line(n in 0usize..8, junk in "[a-z]{1,8}") {
        let mut text = String::new();
        for _ in 0..n {
            text.push_str("# comment\n");
        }
        text.push_str(&junk);
        text.push('\n');
        let err = parse_config(&text).unwrap_err().to_string();
        let expected = format!("line {}:", n + 1);
        prop_assert!(err.starts_with(&expected), "{}", err);
    }
}
