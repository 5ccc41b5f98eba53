use proptest::prelude::*;
use sellerfair_core::oracle::{self, DualSolverOptions, HindsightInstance};
use sellerfair_core::{regularizer, Catalog, OutcomeBasis, RegularizerKind, RegularizerSpec};

#[derive(Debug, Clone)]
struct Tiny {
    prices: Vec<Vec<f64>>,
    rates: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    kind: RegularizerKind,
}

impl Tiny {
    fn instance(&self) -> HindsightInstance {
        let m = self.prices.len();
        let spec = match self.kind {
            RegularizerKind::MaxMin => RegularizerSpec::max_min(OutcomeBasis::Click, self.beta[0], m),
            kind => RegularizerSpec {
                kind,
                outcome_basis: OutcomeBasis::Click,
                alpha: self.alpha.clone(),
                beta: self.beta.clone(),
            },
        };
        HindsightInstance::per_round(Catalog::new(self.prices.clone()).unwrap(), spec, self.rates.clone()).unwrap()
    }
}

fn tiny() -> impl Strategy<Value = Tiny> {
    (1usize..=3, 1usize..=5).prop_flat_map(|(m, t)| {
        (
            prop::collection::vec(prop::collection::vec(0.0..2.0f64, 1..=2), m),
            prop::collection::vec(0.0..3.0f64, m),
            prop::collection::vec(0.0..2.0f64, m),
            prop_oneof![
                Just(RegularizerKind::None),
                Just(RegularizerKind::AboveTarget),
                Just(RegularizerKind::MaxMin)
            ],
            Just(t),
        )
            .prop_filter("at least two items", |(p, ..)| {
                p.iter().map(Vec::len).sum::<usize>() >= 2
            })
            .prop_flat_map(|(prices, alpha, beta, kind, t)| {
                let items = prices.iter().map(Vec::len).sum::<usize>();
                (
                    Just(prices),
                    prop::collection::vec(prop::collection::vec(0.0..1.0f64, items), t),
                    Just(alpha),
                    Just(beta),
                    Just(kind),
                )
            })
            .prop_map(|(prices, rates, alpha, beta, kind)| Tiny {
                prices,
                rates,
                alpha,
                beta,
                kind,
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn every_feasible_dual_point_bounds_the_optimum(case in tiny(), weights in prop::collection::vec(0.0..1.0f64, 3)) {
        let instance = case.instance();
        let spec = instance.spec().clone();
        let brute = oracle::brute_force_opt(&instance).unwrap();
        let lambda: Vec<f64> = match spec.kind {
            RegularizerKind::MaxMin => {
                let w = &weights[..spec.num_sellers()];
                let total: f64 = w.iter().sum();
                let m = w.len() as f64;
                w.iter().map(|x| if total > 0.0 { spec.beta[0] * x / total } else { spec.beta[0] / m }).collect()
            }
            _ => regularizer::dual_box(&spec).iter().zip(&weights).map(|((lo, hi), w)| lo + w * (hi - lo)).collect(),
        };
        prop_assert!(oracle::dual_objective(&instance, &lambda) >= brute.objective - 1e-9);
    }

    #[test]
    fn brute_force_dominates_heuristics(case in tiny(), pick in prop::collection::vec(any::<prop::sample::Index>(), 5)) {
        let instance = case.instance();
        let catalog = instance.catalog();
        let brute = oracle::brute_force_opt(&instance).unwrap();
        prop_assert_eq!(oracle::primal_value(&instance, &brute.assignment).unwrap(), brute.objective);
        let items: Vec<_> = catalog.items().collect();
        let random: Vec<_> = (0..instance.horizon() as usize).map(|t| items[pick[t].index(items.len())]).collect();
        prop_assert!(oracle::primal_value(&instance, &random).unwrap() <= brute.objective + 1e-12);
        let dual = oracle::dual_solve_offline(&instance, DualSolverOptions { iterations: 500, ..Default::default() }).unwrap();
        prop_assert!(dual.objective <= brute.objective + 1e-12);
        prop_assert!(dual.dual_value.unwrap() >= brute.objective - 1e-6);
    }

    #[test]
    fn dual_trace_is_nonincreasing(case in tiny()) {
        let dual = oracle::dual_solve_offline(&case.instance(), DualSolverOptions { iterations: 300, ..Default::default() }).unwrap();
        prop_assert!(dual.dual_trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(dual.dual_trace.last().copied(), dual.dual_value);
    }
}

#[test]
fn stationary_blocks_match_per_round_rates() {
    let catalog = Catalog::single_item(&[1.0, 0.5]).unwrap();
    let spec = RegularizerSpec::above_target(OutcomeBasis::Click, vec![1.0, 2.0], vec![0.3, 0.7]);
    let rates = vec![0.4, 0.9];
    let blocked = HindsightInstance::stationary(catalog.clone(), spec.clone(), 4, rates.clone()).unwrap();
    let flat = HindsightInstance::per_round(catalog, spec, vec![rates; 4]).unwrap();
    assert_eq!(
        oracle::brute_force_opt(&blocked).unwrap().objective,
        oracle::brute_force_opt(&flat).unwrap().objective
    );
    for lambda in [[0.0, 0.0], [0.3, 0.7], [0.1, 0.5]] {
        assert_eq!(
            oracle::dual_objective(&blocked, &lambda),
            oracle::dual_objective(&flat, &lambda)
        );
    }
}
