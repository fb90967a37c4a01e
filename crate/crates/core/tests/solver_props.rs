use proptest::prelude::*;

use rootlip::domain::DomainCase;
use rootlip::initial::{Family, InitialCondition};
use rootlip::solver::{solve, SolveResult, SolverConfig};
use rootlip::transform::{v_to_u, Transform};

fn interval_solve(amp: f64, t_end: f64) -> SolveResult {
    let case = DomainCase::interval(1.0, 1.0, 4.0).unwrap();
    let tr = Transform::with_default_range(case).unwrap();
    let u0 = Family::BumpOnInterval { amp }.build(&case).unwrap();
    let cfg = SolverConfig { dy: 0.05, dt_initial: 1e-4, t_end, n_snapshots: 4, ..Default::default() };
    solve(&u0, &tr, &cfg).unwrap()
}

fn max_dev(a: &SolveResult, b: &SolveResult, scale_a: f64) -> (f64, f64) {
    let mut dev: f64 = 0.0;
    let mut top: f64 = 0.0;
    for k in 0..a.trajectory.len() {
        let (ua, ub) = (v_to_u(&a.trajectory[k], &a.geometry), v_to_u(&b.trajectory[k], &b.geometry));
        let lo = a.trust[k].0.max(b.trust[k].0);
        let hi = a.trust[k].1.min(b.trust[k].1);
        for i in lo..=hi {
            dev = dev.max((scale_a * ua[i] - ub[i]).abs());
            top = top.max(ub[i].abs());
        }
    }
    (dev, top)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    // w(t, x) = c u(ct, x) solves the same equation
    #[test]
    fn time_rescaling_symmetry(c in 0.5..2.0f64) {
        let t_end = 0.2;
        let base = interval_solve(0.5, c * t_end);
        let scaled = interval_solve(0.5 * c, t_end);
        prop_assert!(base.is_completed() && scaled.is_completed());
        let (dev, top) = max_dev(&base, &scaled, c);
        prop_assert!(dev <= 1e-5 * top, "dev {dev:e} vs sup {top:e}");
    }

    // ordered data stay ordered, and the solution stays nonnegative
    #[test]
    fn comparison_and_nonnegativity(a in 0.1..0.5f64, gap in 0.05..0.5f64) {
        let lo = interval_solve(a, 0.2);
        let hi = interval_solve(a + gap, 0.2);
        for k in 0..lo.trajectory.len() {
            let (ul, uh) = (v_to_u(&lo.trajectory[k], &lo.geometry), v_to_u(&hi.trajectory[k], &hi.geometry));
            for i in 0..ul.len() {
                prop_assert!(ul[i] >= 0.0);
                prop_assert!(ul[i] <= uh[i] * (1.0 + 1e-9) + 1e-14, "t {} i {i}: {} > {}", lo.trajectory[k].t, ul[i], uh[i]);
            }
        }
    }
}

#[test]
fn custom_profile_without_certificate_is_refused() {
    let case = DomainCase::interval(1.0, 1.0, 4.0).unwrap();
    let tr = Transform::with_default_range(case).unwrap();
    // touches zero inside the interval, so no certificate can hold
    let u0 = InitialCondition::new("dip", |x: f64| (x - 0.5).powi(2) * x * x * (1.0 - x) * (1.0 - x));
    let cfg = SolverConfig { t_end: 0.05, ..Default::default() };
    assert!(solve(&u0, &tr, &cfg).is_err());
}
