use std::f64::consts::TAU;

use hetsync::integrate::{rk4_path, Schedule};
use hetsync::model::{Field, Params, ReducedField};
use hetsync::region::{admissible, potential_v, v_dot, verify_connection, ConnectionOptions, Subspace};
use proptest::prelude::*;

fn reduced(r: f64, k: f64) -> ReducedField {
    Field::new(&Params::new(3, 3).with_rk(r, k)).unwrap().reduced().unwrap()
}

fn interior() -> impl Strategy<Value = (f64, f64)> {
    (0.0..TAU, 0.0..TAU)
        .prop_map(|(a, b)| (a.min(b), a.max(b)))
        .prop_filter("admissible", |&(a, b)| admissible(a, b))
}

fn path(field: &ReducedField, sub: Subspace, p: (f64, f64), dt: f64, t: f64) -> Vec<Vec<f64>> {
    let sched = Schedule::new(dt, t, 100).unwrap();
    rk4_path(|x: &[f64], out: &mut [f64]| field.eval_into(x, out), &sub.embed(p.0, p.1), &sched).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn potential_conserved_without_coupling(p in interior()) {
        let field = reduced(0.0, 0.0);
        let v0 = potential_v(p.0, p.1);
        for x in path(&field, Subspace::DPsiS, p, 1e-3, 100.0) {
            prop_assert!((potential_v(x[2], x[3]) - v0).abs() < 1e-8);
        }
    }

    #[test]
    fn phase_order_is_preserved(p in interior()) {
        let field = reduced(0.01, 0.16);
        for sub in [Subspace::DPsiS, Subspace::PsiDS] {
            let o = sub.offset();
            for x in path(&field, sub, p, 1e-2, 200.0) {
                prop_assert!(x[o] > -1e-9 && x[o] <= x[o + 1] + 1e-9 && x[o + 1] < TAU + 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn potential_monotone_in_window(p in interior()) {
        prop_assert!(v_dot(p.0, p.1, 0.01, 0.16, Subspace::PsiDS) < 0.0);
        prop_assert!(v_dot(p.0, p.1, 0.01, 0.16, Subspace::DPsiS) > 0.0);
    }
}

#[test]
fn n3_fan_increases_potential() {
    let p = Params::new(3, 3).with_rk(0.01, 0.16);
    let ev = verify_connection(&"DSS".parse().unwrap(), &"DDS".parse().unwrap(), &p, &ConnectionOptions::default())
        .unwrap();
    assert_eq!(ev.paths.len(), 8);
    for path in &ev.paths {
        let c = path.v_certificate.unwrap();
        assert!(c > 0.0, "V not increasing along angle {}: min V' {c:e}", path.angle);
    }
}
