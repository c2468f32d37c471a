use lmtp_core::data::MarkovLag;
use lmtp_core::oracle::{exhaustive_truth, forward_truth, monte_carlo_truth, simulate_observed, DgpSpec, EndStep, Law, Step, Term, Var, VarRef};
use lmtp_core::policy::{Identity, IpsiRiskRatio, Policy, Static};
use proptest::prelude::*;
use proptest::strategy::ValueTree;

fn law(intercept: f64, coefs: &[(Var, usize, f64)]) -> Law {
    Law::Logistic {
        intercept,
        terms: coefs.iter().map(|&(var, lag, coef)| Term { at: VarRef { var, lag, index: 0 }, coef }).collect(),
    }
}

#[derive(Debug, Clone)]
struct Knobs {
    tau: usize,
    width: usize,
    censoring: bool,
    competing: bool,
    coefs: Vec<f64>,
}

fn knobs() -> impl Strategy<Value = Knobs> {
    (1usize..=4, 0usize..=2, any::<bool>(), any::<bool>(), prop::collection::vec(-3.0f64..3.0, 64))
        .prop_map(|(tau, width, censoring, competing, coefs)| Knobs { tau, width, censoring, competing, coefs })
}

/// Random logistic design with `width` covariates per period.
fn build(k: &Knobs) -> DgpSpec {
    let mut c = k.coefs.iter().copied().cycle();
    let mut next = move || c.next().unwrap();
    let lagged = |w: usize, lag: usize, a: f64, l: f64| {
        let mut v = vec![(Var::A, lag, a)];
        if w > 0 {
            v.push((Var::L, lag, l));
        }
        v
    };
    let steps = (1..=k.tau)
        .map(|t| {
            let events = t >= 2;
            Step {
                competing: (events && k.competing).then(|| law(next() - 2.0, &lagged(k.width, 1, next(), next()))),
                outcome: events.then(|| law(next() - 1.0, &lagged(k.width, 1, next(), next()))),
                covariates: (0..k.width).map(|_| law(next(), &[(Var::A, 1, next())])).collect(),
                exposure: law(next(), &if k.width > 0 { vec![(Var::L, 0, next())] } else { vec![] }),
                censoring: k.censoring.then(|| law(next() + 2.0, &[(Var::A, 0, next())])),
            }
        })
        .collect();
    DgpSpec {
        tau: k.tau,
        exposure_levels: Some(2),
        baseline: vec![Law::Bernoulli { p: 0.4 }],
        steps,
        end: EndStep {
            competing: k.competing.then(|| law(next() - 2.0, &[])),
            outcome: law(next(), &[(Var::A, 1, next()), (Var::W, 0, next())]),
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn generated_data_always_validates(k in knobs(), seed in any::<u64>()) {
        let spec = build(&k);
        prop_assert!(spec.validate().is_ok());
        let data = simulate_observed(&spec, 40, seed).unwrap();
        prop_assert!(data.validate().is_ok());
        let r = data.risk_indicators();
        for i in 0..data.n() {
            prop_assert_eq!(r.get(i, 1), 1);
            for t in 1..data.tau() {
                prop_assert!(r.get(i, t + 1) <= r.get(i, t));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn engines_agree_and_stay_in_range(k in knobs(), delta in 0.05f64..1.0) {
        let spec = build(&k);
        let ipsi = IpsiRiskRatio::new(delta).unwrap();
        let policies: [&dyn Policy; 3] = [&Identity, &Static { value: 1.0 }, &ipsi];
        for policy in policies {
            for h in 1..=k.tau {
                let back = exhaustive_truth(&spec, policy, h).unwrap().theta;
                let fwd = forward_truth(&spec, policy, h).unwrap();
                prop_assert!((back - fwd).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&back));
            }
        }
    }
}

#[test]
fn monte_carlo_agrees_with_enumeration_on_random_specs() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    for _ in 0..5 {
        let k = knobs().new_tree(&mut runner).unwrap().current();
        let spec = build(&k);
        let mc = monte_carlo_truth(&spec, &Static { value: 0.0 }, 100_000, 3).unwrap();
        for r in mc {
            let exact = exhaustive_truth(&spec, &Static { value: 0.0 }, r.horizon).unwrap().theta;
            let se = r.mc_se.unwrap().max(1e-9);
            assert!((r.theta - exact).abs() < 4.0 * se + 1e-12, "{k:?} h={}: {} vs {exact}", r.horizon, r.theta);
        }
    }
}

#[test]
fn outcome_independent_of_exposure_gives_policy_free_truth() {
    let mut spec = build(&Knobs { tau: 2, width: 1, censoring: true, competing: false, coefs: vec![0.3; 64] });
    spec.steps[1].outcome = Some(law(-1.0, &[(Var::L, 1, 0.5)]));
    spec.steps[0].covariates = vec![law(0.2, &[])];
    spec.steps[1].covariates = vec![law(0.1, &[(Var::L, 1, 0.7)])];
    spec.end.outcome = law(-0.5, &[(Var::L, 1, 0.4)]);
    let base = exhaustive_truth(&spec, &Identity, 2).unwrap().theta;
    for policy in [&Static { value: 1.0 } as &dyn Policy, &IpsiRiskRatio::new(0.2).unwrap()] {
        assert!((exhaustive_truth(&spec, policy, 2).unwrap().theta - base).abs() < 1e-14);
        let mc = &monte_carlo_truth(&spec, policy, 100_000, 9).unwrap()[1];
        assert!((mc.theta - base).abs() < 4.0 * mc.mc_se.unwrap());
    }
}

#[test]
fn lagged_history_is_a_restriction_of_the_full_history() {
    let spec = build(&Knobs { tau: 4, width: 2, censoring: false, competing: false, coefs: vec![0.5, -0.2, 0.1] });
    let data = simulate_observed(&spec, 50, 1).unwrap();
    for t in 1..=4 {
        let full_labels = data.history_labels(t, MarkovLag::Unbounded);
        let lag_labels = data.history_labels(t, MarkovLag::Lag(2));
        for i in 0..data.n() {
            let full = data.history(i, t, MarkovLag::Unbounded).unwrap().row;
            let lagged = data.history(i, t, MarkovLag::Lag(2)).unwrap().row;
            assert_eq!(lagged.len(), lag_labels.len());
            for (label, v) in lag_labels.iter().zip(&lagged) {
                let k = full_labels.iter().position(|l| l == label).unwrap();
                assert_eq!(full[k].to_bits(), v.to_bits());
            }
        }
    }
    assert!(data.history(0, 5, MarkovLag::Unbounded).is_err());
}
