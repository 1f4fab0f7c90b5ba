use barenblatt_core::oracle::{bs_call, bs_digital};
use barenblatt_core::*;
use proptest::prelude::*;

const RATE: f64 = 0.1;
const MATURITY: f64 = 0.5;

fn band() -> ModelParams {
    ModelParams::new(RATE, 0.15, 0.25, MATURITY).unwrap()
}

fn digital() -> Payoff {
    Payoff::ask(PayoffKind::DigitalCall { strike: 100.0 }).unwrap()
}

fn butterfly() -> Payoff {
    Payoff::ask(PayoffKind::Butterfly { k1: 90.0, k2: 110.0 }).unwrap()
}

fn call() -> Payoff {
    Payoff::ask(PayoffKind::VanillaCall { strike: 100.0 }).unwrap()
}

struct Setup {
    params: ModelParams,
    boundary: BoundarySpec,
    grid: Grid,
}

fn setup(payoff: &Payoff, params: ModelParams, s_max: f64, n: usize, m: usize) -> Setup {
    let boundary = BoundarySpec::for_payoff(payoff, Some(s_max)).unwrap();
    let grid = build_grid(&params, &boundary, n, m, Spacing::Uniform).unwrap();
    Setup { params, boundary, grid }
}

fn run(payoff: &Payoff, s: &Setup) -> PriceSurface {
    solve(payoff, &s.params, &s.boundary, &s.grid, &PolicySettings::default()).unwrap()
}

fn max_violation(upper: &PriceSurface, lower: &PriceSurface) -> f64 {
    upper
        .levels()
        .iter()
        .zip(lower.levels())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| y - x))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn collapsed_band_digital_tracks_closed_form() {
    let fixed = ModelParams::fixed_volatility(RATE, 0.2, MATURITY).unwrap();
    let exact = bs_digital(100.0, 100.0, RATE, 0.2, MATURITY).unwrap();
    let mut errors = Vec::new();
    for n in [100, 200, 400] {
        let s = setup(&digital(), fixed, 200.0, n, n);
        let surface = run(&digital(), &s);
        assert!(surface.reports().iter().all(|r| r.iterations == 1));
        errors.push((surface.price_at(100.0) - exact).abs() / exact);
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[2] < 0.011, "{errors:?}");
}

#[test]
fn convex_call_runs_at_the_upper_volatility() {
    let s = setup(&call(), band(), 200.0, 200, 200);
    let ask = run(&call(), &s);
    assert!(ask.policies().iter().all(|p| p.is_all(Control::High)));
    let bid = run(&call().with_side(Side::Bid), &s);
    let hi = bs_call(100.0, 100.0, RATE, 0.25, MATURITY).unwrap();
    let lo = bs_call(100.0, 100.0, RATE, 0.15, MATURITY).unwrap();
    // first-order scheme: a couple of percent at Δs = 1
    assert!((ask.price_at(100.0) / hi - 1.0).abs() < 0.01);
    assert!((bid.price_at(100.0) / lo - 1.0).abs() < 0.02);
}

#[test]
fn convexity_is_preserved_level_by_level() {
    let s = setup(&call(), band(), 200.0, 100, 100);
    let ask = run(&call(), &s);
    let x = s.grid.nodes();
    for level in ask.levels() {
        for i in 1..x.len() - 1 {
            let d = (level[i + 1] - level[i]) / (x[i + 1] - x[i]) - (level[i] - level[i - 1]) / (x[i] - x[i - 1]);
            assert!(d >= -1e-12, "node {i}: {d}");
        }
    }
    // a concave claim is priced at σ̲ on the ask side
    let short = call().negate();
    let s = setup(&short, band(), 200.0, 100, 100);
    let ask = run(&short, &s);
    for n in 1..=100 {
        let level = ask.level(n);
        for i in 1..x.len() - 1 {
            let d = (level[i + 1] - level[i]) / (x[i + 1] - x[i]) - (level[i] - level[i - 1]) / (x[i] - x[i - 1]);
            assert!(d <= 1e-12, "level {n} node {i}: {d}");
            // flat stretches tie and may keep σ̄; any real curvature selects σ̲
            if d < -1e-9 {
                assert_eq!(ask.policy(n).at_node(i), Control::Low);
            }
        }
    }
}

#[test]
fn bid_never_exceeds_ask() {
    for payoff in [digital(), butterfly(), call()] {
        let s_max = payoff.default_s_max().unwrap();
        let s = setup(&payoff, band(), s_max, 110, 100);
        let ask = run(&payoff, &s);
        let bid = run(&payoff.clone().with_side(Side::Bid), &s);
        assert!(max_violation(&ask, &bid) <= 1e-12);
    }
}

#[test]
fn stability_bound_holds_for_both_examples() {
    for (payoff, bound) in [(digital(), 1.0), (butterfly(), 10.0)] {
        let s_max = payoff.default_s_max().unwrap();
        let s = setup(&payoff, band(), s_max, (s_max as usize) / 2, 100);
        for side in [Side::Ask, Side::Bid] {
            let report = stability_audit(&run(&payoff.clone().with_side(side), &s));
            assert!(report.passed, "{report:?}");
            assert_eq!(report.bound, bound);
        }
    }
}

#[test]
fn every_step_assembles_an_m_matrix() {
    let s = setup(&digital(), band(), 200.0, 200, 200);
    let ask = run(&digital(), &s);
    for (n, policy) in ask.policies().iter().enumerate() {
        let op = assemble(&s.grid, &s.params, policy).unwrap();
        assert!(op.m_matrix_check(s.grid.steps()[n]).passed());
    }
}

#[test]
fn bid_is_the_negated_ask_of_the_negated_claim() {
    let s = setup(&butterfly(), band(), 220.0, 110, 100);
    let bid = run(&butterfly().with_side(Side::Bid), &s);
    let neg = butterfly().negate();
    let ask = solve(&neg, &s.params, &s.boundary.negated(), &s.grid, &PolicySettings::default()).unwrap();
    for (b, a) in bid.levels().iter().zip(ask.levels()) {
        for (x, y) in b.iter().zip(a) {
            assert_eq!(x.to_bits(), (-y).to_bits());
        }
    }
}

#[test]
fn restart_reproduces_the_tail_exactly() {
    let s = setup(&digital(), band(), 200.0, 100, 80);
    for side in [Side::Ask, Side::Bid] {
        let full = run(&digital().with_side(side), &s);
        let tail = full.restart_from(37, &s.params, &s.boundary, &PolicySettings::default()).unwrap();
        for n in 37..=80 {
            assert_eq!(tail.level(n), full.level(n));
        }
        assert_eq!(tail.policies(), &full.policies()[37..]);
    }
}

#[test]
fn adding_claims_costs_no_more_than_pricing_them_apart() {
    let combined = Payoff::ask(PayoffKind::Portfolio(vec![
        (1.0, PayoffKind::DigitalCall { strike: 100.0 }),
        (1.0, PayoffKind::Butterfly { k1: 90.0, k2: 110.0 }),
    ]))
    .unwrap();
    let s = setup(&combined, band(), 220.0, 220, 200);
    let sum = run(&combined, &s);
    let d = solve(&digital(), &s.params, &BoundarySpec::for_payoff(&digital(), Some(220.0)).unwrap(), &s.grid, &PolicySettings::default()).unwrap();
    let b = run(&butterfly(), &s);
    for i in 0..s.grid.nodes().len() {
        assert!(sum.today()[i] <= d.today()[i] + b.today()[i] + 1e-9, "node {i}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fixed_volatility_solves_sit_between_bid_and_ask(sigma in 0.15f64..=0.25) {
        let s = setup(&digital(), band(), 200.0, 60, 40);
        let ask = run(&digital(), &s);
        let bid = run(&digital().with_side(Side::Bid), &s);
        let fixed = ModelParams::fixed_volatility(RATE, sigma, MATURITY).unwrap();
        let mid = solve(&digital(), &fixed, &s.boundary, &s.grid, &PolicySettings::default()).unwrap();
        prop_assert!(max_violation(&ask, &mid) <= 1e-8);
        prop_assert!(max_violation(&mid, &bid) <= 1e-8);
    }

    #[test]
    fn larger_payoffs_give_larger_surfaces(shift in 0.0f64..2.0, k in 60.0f64..140.0) {
        let base = Payoff::ask(PayoffKind::DigitalCall { strike: k }).unwrap();
        let shifted = Payoff::ask(PayoffKind::Portfolio(vec![
            (1.0, PayoffKind::DigitalCall { strike: k }),
            (1.0, PayoffKind::Constant(shift)),
        ]))
        .unwrap();
        let s = setup(&base, band(), 200.0, 60, 40);
        let lo = run(&base, &s);
        let hi = solve(&shifted, &s.params, &BoundarySpec::for_payoff(&shifted, Some(200.0)).unwrap(), &s.grid, &PolicySettings::default()).unwrap();
        prop_assert!(max_violation(&hi, &lo) <= 1e-12);
    }

    #[test]
    fn scaling_the_claim_scales_the_surface(lambda in 0.01f64..100.0) {
        let s = setup(&butterfly(), band(), 220.0, 55, 40);
        let base = run(&butterfly(), &s);
        let scaled = solve(&butterfly().scaled(lambda).unwrap(), &s.params, &s.boundary.scaled(lambda), &s.grid, &PolicySettings::default()).unwrap();
        prop_assert_eq!(base.policies(), scaled.policies());
        for (a, b) in base.levels().iter().zip(scaled.levels()) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((lambda * x - y).abs() <= 1e-12 * lambda.max(1.0) * 10.0);
            }
        }
    }

    #[test]
    fn policy_iterates_never_decrease(k in 70.0f64..130.0, sigma_lo in 0.05f64..0.2, width in 0.01f64..0.3) {
        let params = ModelParams::new(RATE, sigma_lo, sigma_lo + width, MATURITY).unwrap();
        let payoff = Payoff::ask(PayoffKind::Butterfly { k1: k - 10.0, k2: k + 10.0 }).unwrap();
        let s = setup(&payoff, params, 200.0, 100, 50);
        let surface = run(&payoff, &s);
        for r in surface.reports() {
            prop_assert!(r.converged);
            prop_assert!(r.min_increment() >= -1e-12);
        }
    }
}
