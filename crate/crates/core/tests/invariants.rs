use proptest::prelude::*;
use rand::seq::SliceRandom;

use tgbs::gaussian::{
    apply_interferometer, apply_loss, apply_uniform_loss, haar_unitary, squeezed_vacuum,
    squeezing_from_db, transmission_from_db,
};
use tgbs::mixture::StateMixture;
use tgbs::oracle::{enumerate_distribution, probabilities_agree};
use tgbs::rng::stream;
use tgbs::sampler::pattern_probability;
use tgbs::tolerance::TAU_PHYS;
use tgbs::{ClickPattern, GaussianState, StepConfig};

fn instance(modes: usize, seed: u64, squeeze: &[f64]) -> GaussianState {
    let mut rng = stream(seed, "invariants", 0);
    let u = haar_unitary(modes, &mut rng).unwrap();
    apply_interferometer(&squeezed_vacuum(&squeeze[..modes]).unwrap(), &u).unwrap()
}

fn squeezings() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=squeezing_from_db(8.0), 6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn pattern_probability_is_order_invariant(
        modes in 2usize..=6,
        seed in any::<u64>(),
        r in squeezings(),
        index in any::<usize>(),
    ) {
        let state = instance(modes, seed, &r);
        let pattern = ClickPattern::from_index(index % (1 << modes), modes);
        let cfg = StepConfig::sequential();
        let base = pattern_probability(&state, &pattern, None, &cfg).unwrap().value;
        let mut order: Vec<usize> = (0..modes).collect();
        order.shuffle(&mut stream(seed, "order", 0));
        let shuffled = pattern_probability(&state, &pattern, Some(&order), &cfg).unwrap().value;
        prop_assert!(probabilities_agree(base, shuffled), "{base} vs {shuffled}");
    }

    #[test]
    fn distribution_is_complete(
        modes in 1usize..=6,
        seed in any::<u64>(),
        r in squeezings(),
        loss in 0.0f64..6.0,
    ) {
        let state = apply_uniform_loss(&instance(modes, seed, &r), transmission_from_db(loss)).unwrap();
        let table = enumerate_distribution(&state, 6, &StepConfig::sequential()).unwrap();
        prop_assert!((table.total() - 1.0).abs() <= 1e-9);
        prop_assert!(table.probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn loss_reduces_clicks(
        modes in 1usize..=5,
        seed in any::<u64>(),
        r in squeezings(),
        lo in 0.0f64..3.0,
        extra in 0.1f64..3.0,
    ) {
        let state = instance(modes, seed, &r);
        let cfg = StepConfig::sequential();
        let a = apply_uniform_loss(&state, transmission_from_db(lo)).unwrap();
        let b = apply_uniform_loss(&state, transmission_from_db(lo + extra)).unwrap();
        let ca = enumerate_distribution(&a, 5, &cfg).unwrap().expected_clicks();
        let cb = enumerate_distribution(&b, 5, &cfg).unwrap().expected_clicks();
        prop_assert!(cb <= ca + 1e-12, "{cb} > {ca}");
        for mode in 0..modes {
            let qa = StateMixture::new(&a).no_click_probability(mode, &cfg).unwrap();
            let qb = StateMixture::new(&b).no_click_probability(mode, &cfg).unwrap();
            prop_assert!(qb >= qa - 1e-12);
        }
    }

    #[test]
    fn branches_stay_physical(
        modes in 2usize..=6,
        seed in any::<u64>(),
        r in squeezings(),
        clicks in prop::collection::vec(any::<bool>(), 6),
        t in prop::collection::vec(0.25f64..=1.0, 6),
    ) {
        let state = apply_loss(&instance(modes, seed, &r), &t[..modes]).unwrap();
        let cfg = StepConfig::sequential();
        let mut mixture = StateMixture::new(&state);
        for mode in (1..modes).rev() {
            match mixture.measure_mode(mode, Some(clicks[mode]), 0.0, &cfg) {
                Ok(m) => mixture = m.mixture,
                Err(tgbs::Error::ImpossibleOutcome { .. }) => break,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
            prop_assert_eq!(mixture.branch_count(), 1 << mixture.clicks());
            for b in mixture.branches() {
                prop_assert!(b.state.min_symplectic_eigenvalue() >= 1.0 - TAU_PHYS);
            }
        }
    }
}

#[test]
fn sampled_frequencies_match_enumeration() {
    let r = [0.9, 0.5, 0.7, 0.3];
    let state = instance(4, 11, &r);
    let cfg = StepConfig::sequential();
    let table = enumerate_distribution(&state, 4, &cfg).unwrap();
    let sampler = tgbs::Sampler::new(state, None, 5, cfg).unwrap();
    let mut counts = vec![0u64; 16];
    for i in 0..50_000 {
        counts[sampler.draw(i).unwrap().pattern.index()] += 1;
    }
    assert!(table.total_variation(&counts) < 0.02);
}
