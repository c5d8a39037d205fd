//! The two small instances used throughout as worked examples.

use crate::model::{AgentSpec, Instance};
use crate::rational::Rational;

fn agent(u: &[i64], tau: i64) -> AgentSpec {
    AgentSpec::new(
        u.iter().map(|&v| Rational::ratio(v, 10)).collect(),
        Rational::ratio(tau, 10),
    )
}

/// Two agents, each wanting at least 60% on their own favourite of two
/// alternatives. No lottery satisfies both.
pub fn example_2_1() -> Instance {
    Instance::new(2, 10, vec![agent(&[10, 0], 6), agent(&[0, 10], 6)])
        .expect("example 2.1 is a valid instance")
}

/// Three agents over three alternatives; `(1/4, 3/5, 3/20)` is unanimously
/// acceptable.
pub fn example_2_3() -> Instance {
    Instance::new(
        3,
        10,
        vec![
            agent(&[10, 6, 2], 6),
            agent(&[2, 10, 5], 7),
            agent(&[2, 2, 10], 3),
        ],
    )
    .expect("example 2.3 is a valid instance")
}
