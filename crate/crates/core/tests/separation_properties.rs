use dualsep_core::dual::{dual_ssc_check, DualSscVerdict};
use dualsep_core::ifs::Ifs;
use dualsep_core::separation::{
    d2_distance, separation_scan, sesc_certify, sesc_certify_with, stability_constant, SescVerdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn three_maps() -> Ifs {
    Ifs::from_sources(&["x/8", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32"], 0.05).unwrap()
}

fn coefficients(c: &[f64; 6]) -> Ifs {
    let src = [
        format!("{}*x", c[0]),
        format!("{}*x + {}*x^2", c[1], c[2]),
        format!("{}*x + {}*x^2 + {}", c[3], c[4], c[5]),
    ];
    let refs: Vec<&str> = src.iter().map(String::as_str).collect();
    Ifs::from_sources(&refs, 0.05).unwrap()
}

const COEFFS: [f64; 6] = [0.125, 0.125, 0.03125, 0.0625, 0.03125, 0.90625];

#[test]
fn accepted_certificate_agrees_with_scan() {
    let s = three_maps();
    assert_eq!(sesc_certify(&s).unwrap().verdict, SescVerdict::Accept);
    let series = separation_scan(&s, 5, 65).unwrap();
    assert!(series
        .rows
        .iter()
        .all(|r| r.delta > 0.0 && !r.exact_overlap));
    let c = series
        .rows
        .iter()
        .map(|r| r.delta.powf(1.0 / r.depth as f64))
        .fold(f64::INFINITY, f64::min)
        * (1.0 - 1e-6);
    for r in &series.rows {
        assert!(r.delta >= c.powi(r.depth as i32));
    }
}

#[test]
fn finer_grids_never_lower_alpha() {
    let s = three_maps();
    let mut last = f64::NEG_INFINITY;
    for grid in [9, 17, 33, 65, 129] {
        let a = sesc_certify_with(&s, grid).unwrap().alpha;
        assert!(a >= last, "grid {grid}: {a} < {last}");
        last = a;
    }
}

#[test]
fn d2_is_a_distance() {
    let s = three_maps();
    let t = coefficients(&[0.125, 0.125, 0.03, 0.0625, 0.03125, 0.9]);
    assert_eq!(d2_distance(&s, &s).unwrap().value, 0.0);
    let (a, b) = (d2_distance(&s, &t).unwrap(), d2_distance(&t, &s).unwrap());
    assert_eq!(a.value, b.value);
    assert!(a.value > 0.0 && a.value <= a.upper);
}

#[test]
fn dual_ssc_survives_small_perturbations() {
    let s = three_maps();
    let depth = 4;
    let base = dual_ssc_check(&s, depth).unwrap();
    assert_eq!(base.verdict, DualSscVerdict::Pass);
    let gamma = base.min_gap.unwrap();
    let budget = gamma / (3.0 * stability_constant(&s).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let mut c = COEFFS;
        // Coefficients move by at most budget/16; the constant of f3 keeps
        // f3(1) <= 1 and moves by at most 3 budget/16. The d2 distance of
        // these quadratics is then below budget.
        for v in c.iter_mut().take(5) {
            *v += rng.random_range(-1.0..1.0) * budget / 16.0;
        }
        c[5] = 1.0 - c[3] - c[4] - rng.random_range(0.0..1.0) * budget / 16.0;
        let t = coefficients(&c);
        assert!(d2_distance(&s, &t).unwrap().upper <= budget);
        assert_eq!(
            dual_ssc_check(&t, depth).unwrap().verdict,
            DualSscVerdict::Pass
        );
    }
}
