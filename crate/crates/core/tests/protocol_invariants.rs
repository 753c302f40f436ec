mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use a2sc_core::protocol::sim::{contract_net_session, request_session};
use support::protocol_oracle::{check_contract_net, check_request};

proptest! {
    #![proptest_config(ProptestConfig { cases: 400, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn contract_net_sessions_hold_invariants(seed in any::<u64>(), max in 1usize..8) {
        let session = contract_net_session(&mut ChaCha8Rng::seed_from_u64(seed), max);
        prop_assert_eq!(check_contract_net(&session), Ok(()));
    }

    #[test]
    fn request_sessions_hold_invariants(seed in any::<u64>()) {
        let session = request_session(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(check_request(&session), Ok(()));
    }
}

#[test]
fn sessions_exercise_every_outcome() {
    use a2sc_core::protocol::{DialogueState, InitiatorState, Outcome};
    let mut seen = std::collections::BTreeSet::new();
    let mut injections = 0;
    for seed in 0..500 {
        let s = contract_net_session(&mut ChaCha8Rng::seed_from_u64(seed), 5);
        injections += s.injections.len();
        if let DialogueState::Initiator(InitiatorState::Concluded(o)) = s.dialogues[0].state {
            seen.insert(format!("{o:?}"));
        }
    }
    for o in [Outcome::Completed, Outcome::AllRefused, Outcome::Failed, Outcome::TimedOut] {
        assert!(seen.contains(&format!("{o:?}")), "never saw {o:?}: {seen:?}");
    }
    assert!(injections > 0);
}

