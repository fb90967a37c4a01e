use proptest::prelude::*;

use rootlip::domain::{CaseKind, DomainCase};
use rootlip::transform::{default_y_range, u_to_v, v_to_u, Geometry, Grid, Transform};

fn kind_strategy() -> impl Strategy<Value = CaseKind> {
    prop_oneof![
        (0.5..5.0f64).prop_map(|length| CaseKind::BoundedInterval { length }),
        Just(CaseKind::WholeLine { gamma: 2.0 }),
        (0.0..1.95f64).prop_map(|gamma| CaseKind::WholeLine { gamma }),
        Just(CaseKind::HalfLine { gamma: 2.0 }),
        (0.0..1.95f64).prop_map(|gamma| CaseKind::HalfLine { gamma }),
    ]
}

fn transform(kind: CaseKind) -> Transform {
    let case = DomainCase::new(kind, 1.0, 1.0).unwrap();
    Transform::with_default_range(case).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zeta_is_increasing_and_inverts(kind in kind_strategy(), a in -0.9..0.9f64, b in -0.9..0.9f64) {
        let tr = transform(kind);
        let (lo, hi) = default_y_range(&tr.case);
        let (ya, yb) = (0.5 * (lo + hi) + 0.4 * (hi - lo) * a, 0.5 * (lo + hi) + 0.4 * (hi - lo) * b);
        prop_assume!((ya - yb).abs() > 1e-3);
        let (ya, yb) = if ya < yb { (ya, yb) } else { (yb, ya) };
        prop_assert!(tr.zeta(ya) < tr.zeta(yb));
        prop_assert!(tr.zeta1(ya) > 0.0);
        let back = tr.inverse(tr.zeta(ya));
        prop_assert!((back - ya).abs() < 1e-8 * (1.0 + ya.abs()), "{ya} -> {back}");
    }

    #[test]
    fn image_stays_in_domain(kind in kind_strategy(), s in 0.0..1.0f64) {
        let tr = transform(kind);
        let (lo, hi) = default_y_range(&tr.case);
        let x = tr.zeta(lo + s * (hi - lo));
        match kind {
            CaseKind::BoundedInterval { length } => prop_assert!(x >= 0.0 && x <= length),
            CaseKind::HalfLine { .. } => prop_assert!(x >= 0.0),
            CaseKind::WholeLine { .. } => prop_assert!(x.is_finite()),
        }
    }

    #[test]
    fn u_v_round_trip(kind in kind_strategy(), amp in 0.01..100.0f64, freq in 0.1..3.0f64) {
        let tr = transform(kind);
        let geo = Geometry::new(&tr, Grid::new(-4.0, 4.0, 0.05).unwrap());
        let u: Vec<f64> = geo.x.iter().map(|x| amp * (1.5 + (freq * x).sin())).collect();
        let v = u_to_v(&u, &geo, 0.0).unwrap();
        let back = v_to_u(&v, &geo);
        for (a, b) in u.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }
}

#[test]
fn negative_values_rejected() {
    let tr = transform(CaseKind::WholeLine { gamma: 2.0 });
    let geo = Geometry::new(&tr, Grid::new(-1.0, 1.0, 0.1).unwrap());
    let mut u = vec![1.0; geo.len()];
    u[3] = -1e-3;
    assert!(u_to_v(&u, &geo, 0.0).is_err());
    assert!(u_to_v(&u[1..], &geo, 0.0).is_err());
}
