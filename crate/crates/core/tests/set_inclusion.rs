//! Set-inclusion invariants across the relaxation machinery: quantum
//! behaviors are almost-quantum members, and the relaxation levels order.

use corrset_core::moment::{
    maximize_over_aqc, maximize_over_level, membership_test, RelaxationLevel,
};
use corrset_core::quantum::{behavior_from_model, random_model, seesaw_maximize};
use corrset_core::random::rng_from_seed;
use corrset_core::scenario::{BellFunctional, Scenario};
use corrset_core::tensor::PartyDims;
use corrset_sdp::SolveOptions;
use rand::Rng;

#[test]
fn fifty_random_quantum_behaviors_are_aqc_members() {
    let s = Scenario::symmetric(2, 2, 2).unwrap();
    let dims = PartyDims::new(vec![2, 2]).unwrap();
    let opts = SolveOptions::default();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = rng_from_seed(1000 + seed);
        let m = random_model(&s, &dims, &mut rng);
        let b = behavior_from_model(&m).unwrap();
        let member = membership_test(&b, RelaxationLevel::AlmostQuantum, &opts).unwrap();
        assert!(member.feasible, "seed {seed}: slack {}", member.slack);
        worst = worst.max(member.max_violation);
    }
    assert!(worst <= 1e-7, "worst membership violation {worst:.3e}");
}

#[test]
fn relaxation_levels_are_ordered_for_random_functionals() {
    // seesaw - 1e-6 <= aqc <= npa1 + 1e-6 on random bipartite functionals.
    let s = Scenario::symmetric(2, 2, 2).unwrap();
    let dims = PartyDims::new(vec![2, 2]).unwrap();
    let opts = SolveOptions::default();
    let mut rng = rng_from_seed(2200);
    for round in 0..5 {
        let mut f = BellFunctional::new(s.clone());
        for x in 0..2usize {
            for y in 0..2usize {
                for a in 0..2usize {
                    for b in 0..2usize {
                        f.add_coefficient(&[a, b], &[x, y], rng.gen_range(-1.0..1.0))
                            .unwrap();
                    }
                }
            }
        }
        let (lower, _) = seesaw_maximize(&f, &dims, 6, 31 + round).unwrap();
        let aqc = maximize_over_aqc(&f, &opts).unwrap();
        let npa1 = maximize_over_level(&f, RelaxationLevel::Npa1, &opts).unwrap();
        let npa2 = maximize_over_level(&f, RelaxationLevel::Npa2, &opts).unwrap();
        assert!(
            aqc.value >= lower - 1e-6,
            "round {round}: aqc {} < seesaw {}",
            aqc.value,
            lower
        );
        assert!(
            aqc.value <= npa1.value + 1e-6,
            "round {round}: aqc {} > npa1 {}",
            aqc.value,
            npa1.value
        );
        assert!(
            npa2.value <= aqc.value + 1e-6,
            "round {round}: npa2 {} > aqc {}",
            npa2.value,
            aqc.value
        );
    }
}

#[test]
fn i3322_seesaw_reaches_the_qubit_optimum() {
    // On qubit pairs the I3322 maximum is exactly 1/4; the see-saw finds it
    // and stays sandwiched under the level-2 relaxation (whose value,
    // 0.2509397, is only approachable with higher local dimensions).
    let f = corrset_core::scenario::i3322_functional();
    let dims = PartyDims::new(vec![2, 2]).unwrap();
    let (v, model) = seesaw_maximize(&f, &dims, 24, 17).unwrap();
    assert!((v - 0.25).abs() <= 1e-7, "qubit see-saw gave {v}");
    assert!(corrset_core::quantum::validate_assembly(&model.assembly).is_valid());
    let npa2 = maximize_over_level(&f, RelaxationLevel::Npa2, &SolveOptions::default()).unwrap();
    assert!(v <= npa2.value + 1e-6);
}
