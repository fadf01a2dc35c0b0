use logweight::ball::{ball_lower_bound_check, build_ball_functions, BallCheckOptions, Monomial};
use logweight::construction::{run_construction, verify_tangent_lemmas, ConstructionParams, ConstructionState};
use logweight::envelope::{equivalence_constants_log, log_convex_envelope, DEFAULT_GAP_BOUND};
use logweight::grid::{geomspace, t_grid, Spacing};
use logweight::series::{modulus_sum, sandwich_check, split_parity};
use logweight::weight::WeightFunction;
use logweight::{Complex64, Error};
use std::sync::Arc;

fn params() -> ConstructionParams {
    ConstructionParams::from_t0(2.0, 0.95, 0.9999)
}

#[test]
fn bump_inside_the_range_is_regularized_and_certified() {
    let bumped = WeightFunction::named("perturbed_bump", &[3.0, -0.01, 1e-3]).unwrap();
    assert!(matches!(
        run_construction(&bumped, &params()),
        Err(Error::NotStrictlyConvex(_))
    ));

    let mut grid = geomspace(-2.0, -1e-3, 400);
    grid.extend(bumped.landmarks());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let env = log_convex_envelope(&bumped, &grid, DEFAULT_GAP_BOUND).unwrap();
    assert!(env.equivalent);
    assert!((env.gap - 3.0).abs() < 0.01, "gap {}", env.gap);

    let eps = 1e-3;
    let regular = env.regularized(eps, &bumped).unwrap();
    let state = run_construction(&regular, &params()).unwrap();
    let pair = split_parity(&state).unwrap();
    let ts = t_grid(0.95, 0.9999, 300, Spacing::Log);
    let rep = sandwich_check(&pair, &regular, &ts, 64).unwrap();
    assert!(rep.passed, "{rep:?}");

    // The original weight sits between the regularized one and e^{gap + eps}
    // times it, so the pair is equivalent to the original weight as well.
    // Between hull knots the chords lie slightly above Φ, hence the 1e-4.
    let lo: Vec<f64> = ts.iter().map(|&t| regular.log_omega(t).unwrap()).collect();
    let hi: Vec<f64> = ts.iter().map(|&t| bumped.log_omega(t).unwrap()).collect();
    let eq = equivalence_constants_log(&lo, &hi, DEFAULT_GAP_BOUND).unwrap();
    assert!(eq.log_c1 >= -1e-4, "{eq:?}");
    assert!(eq.log_c2 <= env.gap + eps + 1e-6, "{eq:?}");
}

#[test]
fn serialized_state_gives_the_same_certificate() {
    let w = WeightFunction::exp_power(1.0).unwrap();
    let state = run_construction(&w, &params()).unwrap();
    let back = ConstructionState::from_json(&state.to_json().unwrap()).unwrap();
    assert_eq!(back, state);
    let ts = t_grid(0.95, 0.9999, 200, Spacing::Log);
    let a = sandwich_check(&split_parity(&state).unwrap(), &w, &ts, 32).unwrap();
    let b = sandwich_check(&split_parity(&back).unwrap(), &w, &ts, 32).unwrap();
    assert_eq!(a, b);
    assert!(verify_tangent_lemmas(&back, &w, 20, None).unwrap().passed);
    let other = WeightFunction::ramey_ullrich();
    assert!(matches!(
        verify_tangent_lemmas(&back, &other, 20, None),
        Err(Error::Input(_))
    ));
}

#[test]
fn ball_over_monomials_matches_the_disk_for_exp_power() {
    let w = WeightFunction::exp_power(1.0).unwrap();
    let state = run_construction(&w, &params()).unwrap();
    let sys = build_ball_functions(&state, Arc::new(Monomial::default()), 64, 0).unwrap();
    let ts = t_grid(0.95, 0.9999, 100, Spacing::Log);
    let rep = ball_lower_bound_check(
        &sys,
        &w,
        &ts,
        BallCheckOptions {
            sphere_samples: 64,
            ..Default::default()
        },
    );
    assert!(rep.unwrap().passed);
    let pair = split_parity(&state).unwrap();
    for &t in &[0.5, 0.96, 0.999] {
        let z = Complex64::from_polar(t, 2.0);
        let disk = modulus_sum(&pair, z).unwrap();
        let ball = (
            sys.eval(0, &[z]).unwrap().log_abs(),
            sys.eval(1, &[z]).unwrap().log_abs(),
        );
        let ball = logweight::numeric::log_add_exp(ball.0, ball.1);
        assert!((disk - ball).abs() < 1e-12);
    }
}
