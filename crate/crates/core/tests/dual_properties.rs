use dualsep_core::calculus::{bound_constants, h_derivative};
use dualsep_core::dual::{apply_lift, choose_envelope, dual_sup_bound, dual_value, h};
use dualsep_core::ifs::{Ifs, System};
use dualsep_core::symbolic::{common_prefix, compose_eval, Orientation, Word};
use proptest::prelude::*;
use std::sync::OnceLock;

fn three_maps() -> &'static Ifs {
    static S: OnceLock<Ifs> = OnceLock::new();
    S.get_or_init(|| {
        Ifs::from_sources(&["x/8", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32"], 0.05).unwrap()
    })
}

fn word(max: usize) -> impl Strategy<Value = Word> {
    proptest::collection::vec(1u32..=3, 1..=max).prop_map(Word::new)
}

fn grid() -> impl Iterator<Item = f64> {
    (0..=16).map(|k| k as f64 / 16.0)
}

// F_w h for a general function h, letter by letter from the outside in.
fn lifted(sys: &Ifs, letters: &[u32], h: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    match letters.split_first() {
        None => h(x),
        Some((&l, rest)) => {
            apply_lift(sys, l as usize - 1, |y| lifted(sys, rest, h, y), x).unwrap()
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orientations_are_dual(w in word(6), x in 0.0f64..=1.0) {
        let s = three_maps();
        let f = compose_eval(s, &w, Orientation::Forward, x, 0).unwrap().jet.value();
        let r = compose_eval(s, &w.reverse(), Orientation::Reversed, x, 0).unwrap().jet.value();
        prop_assert_eq!(f, r);
    }

    #[test]
    fn chain_rule_along_the_orbit(w in word(6), x in 0.0f64..=1.0) {
        let s = three_maps();
        let d = compose_eval(s, &w, Orientation::Reversed, x, 1).unwrap().jet.derivative(1);
        let mut y = x;
        let mut prod = 1.0;
        for &l in w.letters() {
            let j = s.map_jet(l as usize - 1, &dualsep_core::Jet::variable(y, 1).unwrap()).unwrap();
            prod *= j.derivative(1);
            y = j.value();
        }
        prop_assert!((d - prod).abs() <= 1e-12 * prod.abs());
    }

    #[test]
    fn cocycle_identity(a in word(4), b in word(4)) {
        let s = three_maps();
        let ab = a.concat(&b);
        for x in grid() {
            let da = dual_value(s, &a, x).unwrap();
            let lhs = h(s, &ab, x).unwrap();
            let rhs = da.slope * h(s, &b, da.image).unwrap() + da.h;
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }
    }

    #[test]
    fn holder_bound(n in 1usize..=6, a in proptest::collection::vec(1u32..=3, 6), b in proptest::collection::vec(1u32..=3, 6)) {
        let s = three_maps();
        let (wa, wb) = (Word::new(a[..n].to_vec()), Word::new(b[..n].to_vec()));
        let c0 = dual_sup_bound(s);
        let c = s.c_max().hi();
        let shared = common_prefix(&wa, &wb).len();
        let bound = 2.0 * c0 * c.powi(shared as i32);
        for x in grid() {
            let d = (h(s, &wa, x).unwrap() - h(s, &wb, x).unwrap()).abs();
            prop_assert!(d <= bound, "{d} > {bound}");
        }
    }

    #[test]
    fn lifts_converge_to_the_dual_projection(letters in proptest::collection::vec(1u32..=3, 20), u in 0.0f64..=1.0, v in 0.0f64..=1.0) {
        let s = three_maps();
        let env = choose_envelope(s).unwrap();
        let (k, kk) = (env.lower, env.upper);
        let h0 = move |y: f64| k + (kk - k) * (u + (v - u) * y * y);
        let c = s.c_max().hi();
        for n in 1..=20 {
            let w = Word::new(letters[..n].to_vec());
            for x in grid() {
                let d = (lifted(s, &letters[..n], &h0, x) - h(s, &w, x).unwrap()).abs();
                prop_assert!(d <= c.powi(n as i32) * env.width());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn derivative_bounds_hold(a in word(5), b in word(5), x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let s = three_maps();
        let consts = bound_constants(s, 3).unwrap();
        for k in 0..=2 {
            let (ha, hb) = (h_derivative(s, &a, x, k).unwrap(), h_derivative(s, &b, x, k).unwrap());
            prop_assert!(ha.abs() <= consts.c[k]);
            let hy = h_derivative(s, &a, y, k).unwrap();
            prop_assert!((ha - hy).abs() <= consts.c[k + 1] * (x - y).abs() + 1e-12);
            if a.len() == b.len() {
                let shared = common_prefix(&a, &b).len();
                if shared < a.len() {
                    prop_assert!((ha - hb).abs() <= 2.0 * consts.c[k] * consts.c_max.powi(shared as i32));
                }
            }
        }
    }
}
