//! Fuzzed invariants over the simulator: impenetrability after
//! projection, episode accounting, the energy budget, and bit-exact
//! determinism. Each check runs on every environment variant.

use lob_core::sim::{Env, Variant};
use lob_core::DetRng;
use rand::{Rng, SeedableRng};

fn random_action(rng: &mut DetRng) -> [f64; 4] {
    [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ]
}

#[test]
fn fuzzed_episodes_respect_impenetrability_and_accounting() {
    for variant in Variant::ALL {
        let mut env = Env::from_variant(variant).unwrap();
        let mut rng = DetRng::seed_from_u64(0x51_0000 + variant as u64);
        for _ in 0..25 {
            env.reset(&mut rng);
            let mut total = 0.0;
            let mut steps = 0;
            loop {
                match env.step(&random_action(&mut rng)) {
                    Ok((obs, reward, _)) => {
                        steps += 1;
                        total += reward;
                        assert!(
                            reward == 0.0 || reward == -1.0,
                            "{}: reward {reward} outside the sparse alphabet",
                            variant.name()
                        );
                        assert_eq!(obs.state.len(), env.cfg().obs_dim());
                        assert!(obs.state.iter().all(|v| v.is_finite()));
                    }
                    Err(lob_core::Error::EpisodeOver) => break,
                    Err(e) => panic!("{}: unexpected error {e}", variant.name()),
                }
            }
            assert_eq!(steps, 60, "{}: episode length", variant.name());
            assert!((-60.0..=0.0).contains(&total));
            let (floor, face) = env.max_penetrations();
            assert!(
                floor <= env.cfg().max_penetration_floor + 1e-6,
                "{}: floor penetration {floor}",
                variant.name()
            );
            assert!(
                face <= env.cfg().max_penetration_face + 1e-6,
                "{}: face penetration {face}",
                variant.name()
            );
        }
    }
}

#[test]
fn fuzzed_energy_stays_within_injected_work() {
    for variant in Variant::ALL {
        let mut env = Env::from_variant(variant).unwrap();
        let mut rng = DetRng::seed_from_u64(0xE6_0000 + variant as u64);
        for _ in 0..10 {
            env.reset(&mut rng);
            let e0 = env.mechanical_energy();
            for _ in 0..60 {
                env.step(&random_action(&mut rng)).unwrap();
                let (w, w_pos) = env.gripper_work();
                let e = env.mechanical_energy();
                assert!(
                    e <= e0 + w + 0.01 * w_pos + 2e-3,
                    "{}: energy {e} over budget {} at step {}",
                    variant.name(),
                    e0 + w + 0.01 * w_pos + 2e-3,
                    env.state().step_index
                );
            }
        }
    }
}

#[test]
fn replayed_episodes_are_bit_identical() {
    for variant in Variant::ALL {
        for seed in [3u64, 1009] {
            let run = |_: ()| {
                let mut env = Env::from_variant(variant).unwrap();
                let mut rng = DetRng::seed_from_u64(seed);
                let mut trace = Vec::new();
                for _ in 0..4 {
                    env.reset(&mut rng);
                    for _ in 0..60 {
                        let (obs, reward, _) = env.step(&random_action(&mut rng)).unwrap();
                        trace.push((obs.state, obs.achieved_goal, reward));
                    }
                }
                trace
            };
            let a = run(());
            let b = run(());
            assert_eq!(a, b, "{} seed {seed}: replay diverged", variant.name());
        }
    }
}

#[test]
fn reduced_variant_reports_smaller_observation() {
    let full = Env::from_variant(Variant::Flat).unwrap();
    let reduced = Env::from_variant(Variant::RStateSp).unwrap();
    assert_eq!(full.cfg().obs_dim(), 25);
    assert_eq!(reduced.cfg().obs_dim(), 19);
    assert_eq!(full.observe().state.len(), 25);
    assert_eq!(reduced.observe().state.len(), 19);
}
