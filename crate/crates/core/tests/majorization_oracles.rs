mod common;

use common::{blackwell_instance, blackwell_lp, join_lp, random_dichotomy};
use dyndiv::channels::ProbVector;
use dyndiv::classical::ClassicalDivergence;
use dyndiv::majorization::{
    classical_channel_max_ext, classical_channel_min_ext, dichotomy_join, dichotomy_join_greedy,
    lorenz_curve, rational_flatten, relatively_majorizes, Dichotomy,
};
use dyndiv::random::{random_prob_vector, random_stochastic, rng_from_seed};
use rand::Rng;

#[test]
fn blackwell_agrees_with_lp() {
    let mut rng = rng_from_seed(1001);
    let (mut yes, mut no) = (0, 0);
    for _ in 0..300 {
        let (d, t) = blackwell_instance(&mut rng);
        let fast = relatively_majorizes(&d, &t);
        assert_eq!(fast, blackwell_lp(&d, &t), "{d:?} vs {t:?}");
        if fast { yes += 1 } else { no += 1 }
    }
    assert!(yes > 50 && no > 50, "{yes} / {no}");
}

#[test]
fn join_is_lp_optimal_and_an_upper_bound() {
    let mut rng = rng_from_seed(1002);
    for _ in 0..200 {
        let x = rng.random_range(1..=3);
        let y = rng.random_range(2..=4);
        let ds: Vec<Dichotomy> = (0..x).map(|_| random_dichotomy(&mut rng, y)).collect();
        let j = dichotomy_join(&ds).unwrap();
        assert!(ds.iter().all(|d| relatively_majorizes(&j, d)));
        let curve = lorenz_curve(&j);
        assert!(curve.is_convex(1e-9));
        for (a, g) in join_lp(&ds) {
            assert!((curve.evaluate(a) - g).abs() <= 1e-8, "a={a}: {} vs {g}", curve.evaluate(a));
        }
    }
}

#[test]
fn join_is_below_every_common_upper_bound() {
    let mut rng = rng_from_seed(1003);
    for _ in 0..50 {
        // inputs are processings of a common d*, so d* bounds them all
        let dim = rng.random_range(2..=5);
        let star = random_dichotomy(&mut rng, dim);
        let ds: Vec<Dichotomy> = (0..3)
            .map(|_| {
                let m = rng.random_range(2..=4);
                star.process(&random_stochastic(&mut rng, star.dim(), m)).unwrap()
            })
            .collect();
        let j = dichotomy_join(&ds).unwrap();
        assert!(relatively_majorizes(&star, &j));
    }
}

#[test]
fn rational_flattening_is_equivalent() {
    let mut rng = rng_from_seed(1004);
    for _ in 0..100 {
        let k = rng.random_range(2..=4);
        let nums: Vec<u64> = (0..k).map(|_| rng.random_range(1..=4)).collect();
        let n: u64 = nums.iter().sum();
        let q = ProbVector::new(nums.iter().map(|&x| x as f64 / n as f64).collect()).unwrap();
        let d = Dichotomy::new(random_prob_vector(&mut rng, k), q).unwrap();
        let f = rational_flatten(&d.p, &nums).unwrap();
        assert!(blackwell_lp(&d, &f) && blackwell_lp(&f, &d));
        assert!(relatively_majorizes(&d, &f) && relatively_majorizes(&f, &d));
    }
}

/// The level-by-level greedy matches the envelope only on some inputs;
/// count how often, and check it never beats the true join.
#[test]
fn greedy_join_cross_check() {
    let mut rng = rng_from_seed(1005);
    let (mut defined, mut agree) = (0, 0);
    for _ in 0..500 {
        let ds: Vec<Dichotomy> = (0..2).map(|_| random_dichotomy(&mut rng, 4)).collect();
        let j = dichotomy_join(&ds).unwrap();
        let Some(g) = dichotomy_join_greedy(&ds) else { continue };
        defined += 1;
        let both = relatively_majorizes(&j, &g) && relatively_majorizes(&g, &j);
        if both {
            agree += 1;
        } else {
            // whenever the greedy output bounds every input, the join lies below it
            if ds.iter().all(|d| relatively_majorizes(&g, d)) {
                assert!(relatively_majorizes(&g, &j));
            }
        }
    }
    println!("greedy join: defined on {defined}/500, agrees with envelope on {agree}");
    assert!(defined > 0);
}

#[test]
fn extension_sandwich_and_non_additivity() {
    let mut rng = rng_from_seed(1006);
    let divs = [ClassicalDivergence::Kl, ClassicalDivergence::Renyi(2.0), ClassicalDivergence::Dmax];
    let mut witnesses = 0;
    for _ in 0..100 {
        let (x, y) = (rng.random_range(1..=3), rng.random_range(2..=4));
        let m = random_stochastic(&mut rng, x, y);
        let n = random_stochastic(&mut rng, x, y);
        for div in divs {
            let lo = classical_channel_min_ext(div, &m, &n).unwrap().value;
            let hi = classical_channel_max_ext(div, &m, &n).unwrap().value;
            assert!(lo <= hi + 1e-9, "{div:?}: {lo} > {hi}");
        }
        let m2 = random_stochastic(&mut rng, 2, 2);
        let n2 = random_stochastic(&mut rng, 2, 2);
        let joint = classical_channel_max_ext(ClassicalDivergence::Kl, &m.tensor(&m2), &n.tensor(&n2)).unwrap().value;
        let parts = classical_channel_max_ext(ClassicalDivergence::Kl, &m, &n).unwrap().value
            + classical_channel_max_ext(ClassicalDivergence::Kl, &m2, &n2).unwrap().value;
        assert!(joint <= parts + 1e-8);
        if joint < parts - 1e-6 {
            witnesses += 1;
        }
    }
    println!("strictly sub-additive max extension on {witnesses}/100 instances");
}
