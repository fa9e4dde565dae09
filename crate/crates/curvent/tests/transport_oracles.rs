//! Cross-checks the transport solvers against independently written
//! oracles: an exact two-phase tableau simplex for the 1-Wasserstein
//! linear program, and a Gale-Hoffman subset-feasibility scan over
//! distance thresholds for the bottleneck distance. Rational runs must
//! agree exactly; the float pipeline must land within 1e-10 of the
//! exact value on the same instances.

mod support;

use curvent::{Metric, Rat, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{check_against_oracles, random_transport_case, w1_oracle, winf_oracle};

#[test]
fn oracles_agree_on_hand_checked_instances() {
    let metric = Metric::new(vec![
        vec![Rat::from_int(0), Rat::from_int(1)],
        vec![Rat::from_int(1), Rat::from_int(0)],
    ])
    .unwrap();
    let mu = vec![Rat::from_ratio(1, 2), Rat::from_ratio(1, 2)];
    let nu = vec![Rat::from_ratio(1, 4), Rat::from_ratio(3, 4)];
    assert_eq!(w1_oracle(&metric, &mu, &nu), Rat::from_ratio(1, 4));
    assert_eq!(winf_oracle(&metric, &mu, &nu), Rat::from_int(1));
    assert_eq!(w1_oracle(&metric, &mu, &mu), Rat::from_int(0));

    let point = vec![Rat::from_int(1), Rat::from_int(0)];
    let other = vec![Rat::from_int(0), Rat::from_int(1)];
    assert_eq!(w1_oracle(&metric, &point, &other), Rat::from_int(1));
    assert_eq!(winf_oracle(&metric, &point, &other), Rat::from_int(1));
}

#[test]
fn solvers_match_oracles_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7245);
    for trial in 0..200 {
        let (metric, mu, nu) = random_transport_case(&mut rng, trial);
        check_against_oracles(&metric, &mu, &nu, &format!("trial {trial}"));
    }
}
