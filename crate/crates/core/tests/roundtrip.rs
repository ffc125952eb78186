mod support;

use iotforge_core::validate::validate_project;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{gen, load, mutate, roundtrip, CORPORA};

#[test]
fn corpora_roundtrip() {
    for name in CORPORA {
        let p = load(name);
        assert_eq!(roundtrip(&p).unwrap(), p, "{name}");
    }
}

#[test]
fn generated_projects_are_valid() {
    for seed in 0..200 {
        let p = gen::project(&mut ChaCha8Rng::seed_from_u64(seed));
        let errors: Vec<_> = validate_project(&p).into_iter().filter(|d| d.is_error()).collect();
        assert!(errors.is_empty(), "seed {seed}: {errors:?}");
    }
}

#[test]
fn every_mutation_is_an_error() {
    for name in CORPORA {
        let p = load(name);
        let all = mutate::mutations(&p);
        assert!(all.len() > 20, "{name}: only {} sites", all.len());
        for (label, m) in all {
            let diags = validate_project(&m);
            assert!(diags.iter().any(|d| d.is_error()), "{name}: `{label}` went unnoticed");
        }
    }
}

#[test]
fn generated_mutations_are_errors() {
    for seed in 0..30 {
        let p = gen::project(&mut ChaCha8Rng::seed_from_u64(seed));
        for (label, m) in mutate::mutations(&p) {
            assert!(validate_project(&m).iter().any(|d| d.is_error()), "seed {seed}: `{label}` went unnoticed");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn random_projects_roundtrip(seed in any::<u64>()) {
        let p = gen::project(&mut ChaCha8Rng::seed_from_u64(seed));
        let back = roundtrip(&p).map_err(TestCaseError::fail)?;
        prop_assert_eq!(back, p);
    }
}
