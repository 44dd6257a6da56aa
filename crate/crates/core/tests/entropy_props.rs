use condphase::entropy::{
    build_joint, filter_stability_gap, information_identity_check, intermediate_entropy_gap, prediction_gap,
    t_operator_apply, t_operator_invert, Channel, FiniteHMM, Var,
};
use condphase::SeedSpec;
use proptest::prelude::*;

fn random_hmm(r: usize, seed: u64, p: f64, product: bool) -> FiniteHMM {
    let mut rng = SeedSpec::new(seed).stream();
    let s = 1 << r;
    let mut row = || {
        let v: Vec<f64> = (0..s).map(|_| rng.next_f64() + 0.01).collect();
        let t: f64 = v.iter().sum();
        v.into_iter().map(|x| x / t).collect::<Vec<_>>()
    };
    let init = row();
    let trans: Vec<f64> = (0..s).flat_map(|_| row()).collect();
    let ch = if product { Channel::ProductFlip { p } } else { Channel::VertexFlip { p } };
    FiniteHMM::new(r, trans, init, ch).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chain_rule_identity(r in 1usize..=3, n in 1usize..=4, seed in any::<u64>(), p in 0.0f64..0.5, product in any::<bool>()) {
        prop_assume!(r * (2 * n + 1) <= 24);
        let hmm = random_hmm(r, seed, p, product);
        let c = information_identity_check(&hmm, n).unwrap();
        prop_assert!((c.lhs - c.rhs).abs() < 1e-10);
        prop_assert!(c.rhs <= c.h_x0 + 1e-12);
    }

    #[test]
    fn pinsker_dominates(r in 1usize..=2, k in 1usize..=3, seed in any::<u64>(), p in 0.0f64..0.5) {
        let g = prediction_gap(&random_hmm(r, seed, p, false), k).unwrap();
        prop_assert!(g.tv <= g.pinsker + 1e-12);
        prop_assert!(g.entropy_gap >= -1e-12);
    }

    #[test]
    fn t_algebra(r in 1usize..=4, i in 0usize..4, j in 0usize..4, seed in any::<u64>()) {
        prop_assume!(i < r && j < r);
        let mut rng = SeedSpec::new(seed).stream();
        let g: Vec<f64> = (0..1 << r).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        for p in [0.1, 0.3, 0.49] {
            let a = t_operator_apply(&t_operator_apply(&g, i, p).unwrap(), j, p).unwrap();
            let b = t_operator_apply(&t_operator_apply(&g, j, p).unwrap(), i, p).unwrap();
            let back = t_operator_invert(&t_operator_apply(&g, i, p).unwrap(), i, p).unwrap();
            for x in 0..g.len() {
                prop_assert!((a[x] - b[x]).abs() < 1e-12);
                prop_assert!((back[x] - g[x]).abs() < 1e-12);
            }
        }
        prop_assert!(t_operator_invert(&g, i, 0.5).is_err());
    }
}

#[test]
fn data_processing() {
    for seed in 0..5 {
        let hmm = random_hmm(2, seed, 0.2, false);
        let t = build_joint(&hmm, 5).unwrap();
        let mut last = f64::INFINITY;
        for n in 0..=5 {
            let ys: Vec<Var> = (1..=n).map(Var::Y).collect();
            let h = t.conditional_entropy(&[Var::X(0)], &ys);
            assert!(h <= last + 1e-12);
            last = h;
        }
    }
}

#[test]
fn markov_chain_oracle_values() {
    // r=1, flip rate 0.2, p=0.3: two-state forward filter by hand
    let hmm = FiniteHMM::symmetric_chain(1, 0.2, Channel::VertexFlip { p: 0.3 }).unwrap();
    let gaps = filter_stability_gap(&hmm, 3).unwrap();
    let oracle = |k: usize| -> f64 {
        let mut total = 0.0;
        for x0 in 0..2usize {
            for ys in 0..1usize << k {
                // joint over x_k of (x0 fixed) and (x0 free), unnormalized
                let mut fixed = [0.0; 2];
                let mut free = [0.5, 0.5];
                fixed[x0] = 0.5;
                for j in 0..k {
                    let y = (ys >> j) & 1;
                    let step = |v: [f64; 2]| {
                        let mut o = [0.0; 2];
                        for (a, va) in v.iter().enumerate() {
                            for (b, ob) in o.iter_mut().enumerate() {
                                let tr = if a == b { 0.8 } else { 0.2 };
                                let ch = if b == y { 0.7 } else { 0.3 };
                                *ob += va * tr * ch;
                            }
                        }
                        o
                    };
                    fixed = step(fixed);
                    free = step(free);
                }
                let (zf, zr) = (fixed[0] + fixed[1], free[0] + free[1]);
                total += zf * (fixed[0] / zf - free[0] / zr).abs();
            }
        }
        total
    };
    for k in 1..=3 {
        assert!((gaps[k - 1] - oracle(k)).abs() < 1e-12, "{k}: {} vs {}", gaps[k - 1], oracle(k));
    }
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
}

#[test]
fn intermediate_gap_k1_is_mutual_information() {
    // k=1, m=0: Y_1 = X_1 X_0 xi, a single observation; I(Y_1; X_0) = 0
    let g = intermediate_entropy_gap(0.1, 1, 0, 0).unwrap();
    assert!(g.value.abs() < 1e-12);
    for v in -1..=1 {
        let g = intermediate_entropy_gap(0.2, 2, 1, v).unwrap();
        assert!(g.value >= -1e-12 && g.surrogate);
    }
    assert!(intermediate_entropy_gap(0.5, 2, 1, 0).unwrap().value.abs() < 1e-12);
}
