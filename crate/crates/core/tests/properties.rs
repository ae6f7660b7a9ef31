//! Property tests for the invariants each module promises.

use proptest::prelude::*;
use rug::{Integer, Rational};

use cantor_shrink::covertree::{
    build_cover, hausdorff_sum, level_masses, manual_schedule, verify_nesting, FrostmanConstant,
    ScheduleOptions, DEFAULT_ENUMERATION_CAP,
};
use cantor_shrink::dimension::{
    bowen_parameter, dimension_limsup, pressure_estimate, pressure_term, DEFAULT_TOL,
    DEFAULT_WINDOW,
};
use cantor_shrink::expansion::{
    cantor_digits, iterate, iterate_from, nearest_integer_distance, nearest_qadic, reconstruct,
};
use cantor_shrink::targets::{hit_test, make_level, witness_search, Status, Witness};
use cantor_shrink::{CumulativeCache, ExactPoint, LogReal, Target};

fn base_spec() -> impl Strategy<Value = String> {
    prop_oneof![
        (2u32..10).prop_map(|k| format!("const:{k}")),
        prop::collection::vec(2u32..8, 1..4).prop_map(|v| {
            let v: Vec<String> = v.iter().map(u32::to_string).collect();
            format!("periodic:{}", v.join(","))
        }),
        (2u32..8, 2u32..6).prop_map(|(a, b)| format!("eventually:{a}|{b},2")),
        Just("expr:n+1".to_string()),
        Just("expr:floor(sqrt(n))+2".to_string()),
    ]
}

fn weight_spec() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec!["0", "0.5", "1", "2", "3.25"]).prop_map(|c| format!("const:{c}")),
        (1u32..4).prop_map(|c| format!("expr:{c}*log(n+1)")),
        prop::sample::select(vec!["0.25", "1", "2"]).prop_map(|c| format!("periodic:{c},0")),
    ]
}

fn base(text: &str) -> CumulativeCache {
    CumulativeCache::parse(text, Target::Base).unwrap()
}

fn weight(text: &str) -> CumulativeCache {
    CumulativeCache::parse(text, Target::Weight).unwrap()
}

fn point() -> impl Strategy<Value = ExactPoint> {
    (1u64..=1_000_000)
        .prop_flat_map(|den| (0..den, Just(den)))
        .prop_map(|(num, den)| ExactPoint::from_ratio(num as i64, den))
}

/// T_Q^n x by forming Q_n·x and reducing mod 1.
fn iterate_oracle(x: &ExactPoint, q: &mut CumulativeCache, n: usize) -> Rational {
    let qn = q.partial_product(n).unwrap().clone();
    let y = Rational::from(x.value() * qn);
    let (frac, _) = y.fract_floor(Integer::new());
    frac
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn digits_round_trip(spec in base_spec(), x in point(), n in 1usize..=30) {
        let mut q = base(&spec);
        let d = cantor_digits(&x, &q, n).unwrap();
        let head = reconstruct(&d.digits, &q).unwrap();
        let qn = q.partial_product(n).unwrap().clone();
        let back: Rational = head.value() + Rational::from(d.remainder.value() / qn);
        prop_assert_eq!(&back, x.value());
    }

    #[test]
    fn digits_are_bounded_by_bases(spec in base_spec(), x in point(), n in 1usize..=30) {
        let q = base(&spec);
        let d = cantor_digits(&x, &q, n).unwrap();
        for (j, w) in d.digits.iter().enumerate() {
            let qj = q.base_term(j + 1).unwrap();
            prop_assert!(*w >= 0 && *w < qj);
        }
    }

    #[test]
    fn iterate_matches_direct_product(spec in base_spec(), x in point(), n in 0usize..=30) {
        let mut q = base(&spec);
        let y = iterate(&x, &q, n).unwrap();
        prop_assert_eq!(y.value(), &iterate_oracle(&x, &mut q, n));
    }

    #[test]
    fn iteration_is_a_semigroup(spec in base_spec(), x in point(), m in 0usize..=15, k in 0usize..=15) {
        let q = base(&spec);
        let mid = iterate(&x, &q, m).unwrap();
        let two_step = iterate_from(&mid, &q, m, k).unwrap();
        prop_assert_eq!(two_step, iterate(&x, &q, m + k).unwrap());
    }

    #[test]
    fn orbit_distance_equals_scaled_grid_distance(spec in base_spec(), x in point(), n in 1usize..=20) {
        let mut q = base(&spec);
        let orbit = nearest_integer_distance(iterate(&x, &q, n).unwrap().value());
        let near = nearest_qadic(&x, &mut q, n).unwrap();
        let qn = q.partial_product(n).unwrap().clone();
        prop_assert_eq!(orbit, Rational::from(&near.distance * qn));
    }

    #[test]
    fn remainder_equals_iterate(spec in base_spec(), x in point(), n in 1usize..=30) {
        let q = base(&spec);
        prop_assert_eq!(cantor_digits(&x, &q, n).unwrap().remainder, iterate(&x, &q, n).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hit_iff_witness(
        spec in prop::sample::select(vec!["const:2", "periodic:2,3", "expr:n+1"]),
        a in weight_spec(),
        den in 1u64..=300,
        num_seed in any::<u64>(),
        n in 1usize..=12,
    ) {
        let (mut q, mut alpha) = (base(spec), weight(&a));
        let x = ExactPoint::from_ratio((num_seed % den) as i64, den);
        let verdict = hit_test(&x, &q, &mut alpha, n, 128).unwrap();
        let witness = witness_search(&x, &mut q, &mut alpha, n, 128).unwrap();
        let found = matches!(witness, Witness::Found { .. });
        let absent = matches!(witness, Witness::Absent { .. });
        match verdict.status {
            Status::Hit => prop_assert!(found),
            Status::Miss => prop_assert!(absent),
            Status::Uncertain => prop_assert!(!absent),
        }
    }

    #[test]
    fn hit_margin_is_scaled_grid_distance(spec in base_spec(), a in weight_spec(), x in point(), n in 1usize..=12) {
        let (mut q, mut alpha) = (base(&spec), weight(&a));
        let verdict = hit_test(&x, &q, &mut alpha, n, 128).unwrap();
        let near = nearest_qadic(&x, &mut q, n).unwrap();
        let qn = q.partial_product(n).unwrap().clone();
        let scaled = Rational::from(&near.distance * qn);
        if scaled == 0 {
            prop_assert_eq!(verdict.status, Status::Hit);
        } else {
            let expect = LogReal::from_rational(256, &scaled).ln().unwrap().to_f64()
                + alpha.sum(n).unwrap().to_f64();
            let margin = verdict.margin.expect("finite margin for a nonzero distance").to_f64();
            prop_assert!((margin - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn target_radii_strictly_decrease(spec in base_spec(), a in weight_spec(), n in 1usize..200) {
        let (mut q, mut alpha) = (base(&spec), weight(&a));
        let here = make_level(&mut q, &mut alpha, n).unwrap().log_radius;
        let next = make_level(&mut q, &mut alpha, n + 1).unwrap().log_radius;
        prop_assert_eq!(next.cmp_certified(&here), Some(std::cmp::Ordering::Less));
    }

    #[test]
    fn log_products_grow_at_least_like_powers_of_two(spec in base_spec(), n in 1usize..500) {
        let mut q = base(&spec);
        let log_q = q.log_partial_product(n).unwrap().clone();
        let bound = &LogReal::ln2(256) * &LogReal::from_i64(256, n as i64);
        prop_assert_ne!(log_q.cmp_certified(&bound), Some(std::cmp::Ordering::Less));
    }

    #[test]
    fn log_products_match_exact_products(spec in base_spec(), n in 1usize..60) {
        let mut q = base(&spec);
        let exact = q.partial_product(n).unwrap().clone();
        let log_q = q.log_partial_product(n).unwrap().clone();
        let direct = LogReal::from_integer(256, &exact).ln().unwrap();
        prop_assert!((log_q.to_f64() - direct.to_f64()).abs() <= 1e-12 * direct.to_f64());
    }

    #[test]
    fn weight_sums_are_nondecreasing(a in weight_spec(), n in 1usize..500) {
        let mut alpha = weight(&a);
        let here = alpha.sum(n).unwrap().clone();
        let next = alpha.sum(n + 1).unwrap().clone();
        prop_assert_ne!(next.cmp_certified(&here), Some(std::cmp::Ordering::Less));
    }

    #[test]
    fn cached_sums_are_reproducible(spec in base_spec(), a in weight_spec(), n in 1usize..300) {
        let mut q = base(&spec);
        q.extend_to(n + 50).unwrap();
        let cached = q.sum(n).unwrap().clone();
        let fresh = base(&spec).sum(n).unwrap().clone();
        prop_assert_eq!(cached.mid(), fresh.mid());
        prop_assert_eq!(cached.rad(), fresh.rad());
        let mut alpha = weight(&a);
        alpha.extend_to(n + 50).unwrap();
        let cached = alpha.sum(n).unwrap().clone();
        let fresh = weight(&a).sum(n).unwrap().clone();
        prop_assert_eq!(cached.mid(), fresh.mid());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pressure_terms_are_affine_in_s(spec in base_spec(), a in weight_spec(), n in 1usize..300) {
        let (mut q, mut alpha) = (base(&spec), weight(&a));
        let at = |s: f64, q: &mut CumulativeCache, alpha: &mut CumulativeCache| {
            pressure_term(q, alpha, n, &LogReal::from_f64(256, s)).unwrap()
        };
        let f0 = at(0.0, &mut q, &mut alpha);
        let f1 = at(1.0, &mut q, &mut alpha);
        let fh = at(0.5, &mut q, &mut alpha);
        let avg = (&f0 + &f1).div(&LogReal::from_i64(256, 2)).unwrap();
        let gap = (&fh - &avg).abs().to_f64();
        prop_assert!(gap <= 1e-60, "gap {gap}");
        let ln2 = std::f64::consts::LN_2;
        prop_assert!(f0.to_f64() >= ln2 - 1e-12);
    }

    #[test]
    fn pressure_strictly_decreases(spec in base_spec(), a in weight_spec(), s1 in 0.0f64..1.0, ds in 0.01f64..0.5) {
        let (mut q, mut alpha) = (base(&spec), weight(&a));
        let s2 = (s1 + ds).min(1.0);
        prop_assume!(s2 > s1);
        let (p1, _) = pressure_estimate(&mut q, &mut alpha, s1, 400, DEFAULT_WINDOW).unwrap();
        let (p2, _) = pressure_estimate(&mut q, &mut alpha, s2, 400, DEFAULT_WINDOW).unwrap();
        prop_assert!(p2 < p1);
    }

    #[test]
    fn estimates_lie_in_unit_interval_and_bracket_pressure(spec in base_spec(), a in weight_spec()) {
        let (mut q, mut alpha) = (base(&spec), weight(&a));
        let d = dimension_limsup(&mut q, &mut alpha, 400, DEFAULT_WINDOW).unwrap();
        let b = bowen_parameter(&mut q, &mut alpha, 400, DEFAULT_TOL, DEFAULT_WINDOW).unwrap();
        for e in [&d, &b] {
            prop_assert!((0.0..=1.0).contains(&e.value));
        }
        prop_assert!((d.value - b.value).abs() <= DEFAULT_TOL.max(d.residual + b.residual));
        let slack = d.residual + 2.0 * DEFAULT_TOL;
        if d.value - slack > 0.0 {
            let (p, _) = pressure_estimate(&mut q, &mut alpha, d.value - slack, 400, DEFAULT_WINDOW).unwrap();
            prop_assert!(p > 0.0);
        }
        if d.value + slack < 1.0 {
            let (p, _) = pressure_estimate(&mut q, &mut alpha, d.value + slack, 400, DEFAULT_WINDOW).unwrap();
            prop_assert!(p < 0.0);
        }
    }

    #[test]
    fn zero_weight_gives_full_dimension(spec in base_spec()) {
        let (mut q, mut alpha) = (base(&spec), weight("const:0"));
        prop_assert_eq!(dimension_limsup(&mut q, &mut alpha, 200, DEFAULT_WINDOW).unwrap().value, 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn covers_conserve_mass_and_nest(
        k in 2u32..=3,
        c in prop::sample::select(vec!["0.75", "1", "1.5"]),
        n1 in 1usize..=3,
        gaps in prop::collection::vec(1usize..=4, 1..=2),
    ) {
        let (mut q, mut alpha) = (base(&format!("const:{k}")), weight(&format!("const:{c}")));
        let mut levels = vec![n1];
        for g in gaps {
            levels.push(levels.last().unwrap() + g);
        }
        let opts = ScheduleOptions { frostman: FrostmanConstant::Fixed(0.0), ..Default::default() };
        let schedule = manual_schedule(&mut q, &mut alpha, 0.1, &levels, 200, opts).unwrap();
        let tree = build_cover(&mut q, &mut alpha, &schedule, DEFAULT_ENUMERATION_CAP).unwrap();
        for m in level_masses(&tree) {
            prop_assert_eq!(m, 1);
        }
        for (l, nodes) in tree.levels.iter().enumerate().skip(1) {
            for node in nodes {
                let parent = &tree.levels[l - 1][node.parent.unwrap()];
                prop_assert_eq!(Rational::from(&parent.mass / parent.child_count), node.mass.clone());
            }
        }
        prop_assert!(verify_nesting(&tree).holds());
    }

    #[test]
    fn hausdorff_sum_matches_closed_form(spec in base_spec(), a in weight_spec(), t in 0.0f64..=1.0, n in 1usize..=10) {
        let (mut q, mut alpha) = (base(&spec), weight(&a));
        let h = hausdorff_sum(&mut q, &mut alpha, t, n, 128, DEFAULT_ENUMERATION_CAP).unwrap();
        prop_assume!(h.relative_error.is_some());
        prop_assert!(h.relative_error.unwrap() <= 2f64.powi(-120));
    }
}
