mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relbound::structures::{parse_structure, StructureNode};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn recursive_evaluation_matches_enumeration(seed in any::<u64>(), s in 1usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = common::random_tree(&mut rng, s);
        let r = common::random_reliabilities(&mut rng, s);
        let fast = tree.eval_reliability(&r).unwrap();
        let slow = tree.eval_reliability_bruteforce(&r).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-12, "{tree}: {fast} vs {slow}");
    }

    #[test]
    fn printed_trees_parse_back(seed in any::<u64>(), s in 1usize..=16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = common::random_tree(&mut rng, s);
        let back = parse_structure(&tree.to_string()).unwrap();
        prop_assert_eq!(back, tree);
    }

    #[test]
    fn reliability_is_monotone_in_each_component(seed in any::<u64>(), s in 1usize..=10, bump in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = common::random_tree(&mut rng, s);
        let r = common::random_reliabilities(&mut rng, s);
        let base = tree.eval(&r);
        for i in 0..s {
            let mut up = r.clone();
            up[i] = (up[i] + bump).min(1.0);
            prop_assert!(tree.eval(&up) >= base - 1e-12);
        }
    }

    #[test]
    fn partials_match_finite_differences(seed in any::<u64>(), s in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = common::random_tree(&mut rng, s);
        let r: Vec<f64> = (0..s).map(|_| 0.05 + 0.9 * rand::Rng::random::<f64>(&mut rng)).collect();
        let g = tree.structure_partials(&r).unwrap();
        let h = 1e-6;
        for i in 0..s {
            let (mut lo, mut hi) = (r.clone(), r.clone());
            lo[i] -= h;
            hi[i] += h;
            let fd = (tree.eval(&hi) - tree.eval(&lo)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() < 1e-6, "c{}: {} vs {}", i + 1, g[i], fd);
        }
    }
}

#[test]
fn documented_examples() {
    let sp = StructureNode::parse("parallel(series(c1,c2),series(c3,c4))").unwrap();
    assert!((sp.eval_reliability(&[0.9, 0.8, 0.7, 0.6]).unwrap() - 0.8376).abs() < 1e-12);
    let ps = StructureNode::parse("series(parallel(c1,c2),parallel(c3,c4))").unwrap();
    assert!((ps.eval_reliability(&[0.9, 0.8, 0.7, 0.6]).unwrap() - 0.8624).abs() < 1e-12);
    let big = StructureNode::parse(
        "koutofn(9; c1,c2,c3,c4,c5,c6,c7,c8,c9,c10,c11,c12,c13,c14,c15,c16)",
    )
    .unwrap();
    assert_eq!(big.component_count(), 16);
    let r = [0.5; 16];
    assert!((big.eval(&r) - big.eval_reliability_bruteforce(&r).unwrap()).abs() < 1e-12);
}
