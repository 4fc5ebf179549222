use dualsep_core::dimension::{
    chaos_point, conformality_dimension, PressureTable, ProbabilityVector, PRESSURE_GRID,
};
use dualsep_core::ifs::Ifs;
use proptest::prelude::*;

fn three_maps() -> Ifs {
    Ifs::from_sources(&["x/8", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32"], 0.05).unwrap()
}

#[test]
fn pressure_at_zero_is_log_n() {
    let s = three_maps();
    for n in 1..=4 {
        let t = PressureTable::new(&s, n, PRESSURE_GRID).unwrap();
        assert_eq!(t.pressure(0.0), 3f64.ln());
    }
}

#[test]
fn pressure_is_decreasing_and_convex() {
    let s = three_maps();
    for n in 1..=4 {
        let t = PressureTable::new(&s, n, PRESSURE_GRID).unwrap();
        let ts: Vec<f64> = (0..10).map(|k| k as f64 * 0.25).collect();
        let p: Vec<f64> = ts.iter().map(|&x| t.pressure(x)).collect();
        for k in 1..p.len() {
            assert!(p[k] < p[k - 1]);
        }
        for k in 1..p.len() - 1 {
            let mid = t.pressure(0.5 * (ts[k - 1] + ts[k + 1]));
            assert!(mid <= 0.5 * (p[k - 1] + p[k + 1]) + 1e-12);
        }
    }
}

#[test]
fn root_is_bracketed() {
    let s = three_maps();
    let tol = 1e-10;
    for n in 2..=4 {
        let d = conformality_dimension(&s, n, tol).unwrap();
        let t = PressureTable::new(&s, n, PRESSURE_GRID).unwrap();
        assert!(t.pressure(d.value - tol) > 0.0);
        assert!(t.pressure(d.value + tol) < 0.0);
        assert!(d.lo <= d.value && d.value <= d.hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chaos_game_stays_in_unit_interval(seed in any::<u64>(), k in 0u64..1000, horizon in 1usize..200, a in 0.01f64..1.0, b in 0.01f64..1.0) {
        let s = three_maps();
        let total = a + b + 1.0;
        let p = ProbabilityVector::new(vec![a / total, b / total, 1.0 / total]).unwrap();
        let x = chaos_point(&s, &p, k, horizon, seed).unwrap();
        prop_assert!((0.0..=1.0).contains(&x));
    }
}
