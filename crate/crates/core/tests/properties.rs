mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pphpc::sim::{run_simulation, AgentKind, World};
use pphpc::stats::{bh_adjust, compare_models, energy_statistic, CompareConfig, Pca};
use pphpc::SimParams;

use common::{
    bh_oracle, check_invariants, energy_oracle, random_matrix, random_params, small_params,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulation_invariants_hold(seed in any::<u64>(), pseed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(pseed);
        let params = random_params(&mut rng, 25, 60);
        prop_assert_eq!(check_invariants(&params, seed), Ok(()));
    }

    #[test]
    fn no_gain_no_reproduction_never_grows(seed in any::<u64>(), pseed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(pseed);
        let mut v = random_params(&mut rng, 20, 50).values();
        v[5] = 0;
        v[6] = 0;
        v[11] = 0;
        v[12] = 0;
        let params = SimParams::from_values(&v).unwrap();
        let out = run_simulation(&params, seed).unwrap();
        for w in out.rows.windows(2) {
            prop_assert!(w[1].total_prey <= w[0].total_prey);
            prop_assert!(w[1].total_predators <= w[0].total_predators);
        }
    }

    #[test]
    fn energy_matches_oracle(
        seed in any::<u64>(),
        n in 1usize..25,
        m in 1usize..25,
        d in 1usize..8,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, n, d);
        let y = random_matrix(&mut rng, m, d);
        let fast = energy_statistic(&x, &y).unwrap();
        prop_assert!((fast - energy_oracle(&x, &y)).abs() < 1e-10);
        prop_assert_eq!(fast, energy_statistic(&y, &x).unwrap());
    }

    #[test]
    fn bh_matches_oracle_and_commutes_with_permutation(
        p in prop::collection::vec(1e-6f64..=1.0, 1..40),
        shift in any::<prop::sample::Index>(),
    ) {
        let adjusted = bh_adjust(&p).unwrap();
        prop_assert_eq!(&adjusted, &bh_oracle(&p));
        for (a, r) in adjusted.iter().zip(&p) {
            prop_assert!(a >= r);
        }
        let k = shift.index(p.len());
        let mut rotated = p.clone();
        rotated.rotate_left(k);
        let mut expected = adjusted.clone();
        expected.rotate_left(k);
        prop_assert_eq!(bh_adjust(&rotated).unwrap(), expected);
    }

    #[test]
    fn pca_ratios_and_reconstruction(seed in any::<u64>(), n in 2usize..20, p in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_matrix(&mut rng, n, p);
        let pca = Pca::fit(&data).unwrap();
        let total: f64 = pca.explained_ratios.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        for j in 0..pca.scores.ncols() {
            prop_assert!(pca.scores.column(j).mean().abs() < 1e-9);
        }
        let mut centered = data.clone();
        for j in 0..p {
            let mean = data.column(j).mean();
            centered.column_mut(j).add_scalar_mut(-mean);
        }
        let full = pca.reconstruct_centered(pca.scores.ncols());
        let err = (full - &centered).norm() / centered.norm().max(f64::MIN_POSITIVE);
        prop_assert!(err < 1e-7);
    }
}

#[test]
fn identical_multisets_have_zero_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_matrix(&mut rng, 12, 4);
    let rows: Vec<usize> = (0..12).rev().collect();
    let y = x.select_rows(&rows);
    assert_eq!(energy_statistic(&x, &y).unwrap(), 0.0);
}

#[test]
fn pca_handles_wide_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data: DMatrix<f64> = random_matrix(&mut rng, 10, 600);
    let pca = Pca::fit(&data).unwrap();
    assert!(pca.scores.ncols() <= 9);
    let sum: f64 = pca.explained_ratios.iter().sum();
    assert!((sum - 1.0).abs() < 1e-9);
}

#[test]
fn comparison_is_symmetric_in_the_groups() {
    let params = small_params(30);
    let a: Vec<_> = (0..6)
        .map(|s| run_simulation(&params, s).unwrap())
        .collect();
    let b: Vec<_> = (100..106)
        .map(|s| run_simulation(&params, s).unwrap())
        .collect();
    let config = CompareConfig {
        n_permutations: 199,
        ..CompareConfig::default()
    };
    let ab = compare_models(&[a.clone()], &[b.clone()], &config).unwrap();
    let ba = compare_models(&[b], &[a], &config).unwrap();
    assert_eq!(ab.overall_score, ba.overall_score);
    assert_eq!(ab.paramsets[0].test.k, ba.paramsets[0].test.k);
    let (s1, s2) = (
        ab.paramsets[0].test.statistic,
        ba.paramsets[0].test.statistic,
    );
    assert!((s1 - s2).abs() <= 1e-9 * s1.abs().max(1.0));
}

#[test]
fn newborns_are_counted_in_the_same_iteration() {
    let params = SimParams::from_values(&[4, 4, 0, 0, 1, 5, 5, 1, 1, 1, 1, 100, 100, 3]).unwrap();
    let mut world = World::new(params, 1).unwrap();
    world.place_agent(pphpc::sim::Agent {
        kind: AgentKind::Predator,
        energy: 10,
        x: 0,
        y: 0,
    });
    let events = world.step();
    assert_eq!(events.births(AgentKind::Predator), 1);
    assert_eq!(world.collect_outputs().total_predators, 2);
    let total: i64 = world.agents().iter().map(|a| a.energy).sum();
    assert_eq!(total, 9);
}
