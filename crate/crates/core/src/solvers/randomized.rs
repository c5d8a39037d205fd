use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_hint, select_or_witness, Advice, Knowledge, Learned, NullWitness, Outcome, Round, SolveReport, SolverKind};
use crate::error::{Error, Result};
use crate::oracle::{Oracle, QueryCategory};

/// Recorded in every randomized report so runs can be replayed.
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.3, seed_from_u64)";

/// Integer sampling weights, one per agent, all at least 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightVector {
    weights: Vec<BigUint>,
    total: BigUint,
}

impl WeightVector {
    pub fn uniform(n: usize) -> Self {
        WeightVector {
            weights: vec![BigUint::one(); n],
            total: BigUint::from(n),
        }
    }

    pub fn new(weights: Vec<BigUint>) -> Result<Self> {
        if weights.iter().any(Zero::is_zero) {
            return Err(Error::InvalidParams("weights must be at least 1".into()));
        }
        let total = weights.iter().sum();
        Ok(WeightVector { weights, total })
    }

    /// `w_i = ceil(n / rank(i))`, with `rank` 1-based position in `order`.
    pub fn from_order(order: &[usize]) -> Self {
        let n = order.len();
        let mut weights = vec![BigUint::one(); n];
        for (pos, &i) in order.iter().enumerate() {
            weights[i] = BigUint::from(n.div_ceil(pos + 1));
        }
        let total = weights.iter().sum();
        WeightVector { weights, total }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize) -> &BigUint {
        &self.weights[i]
    }

    pub fn total(&self) -> &BigUint {
        &self.total
    }

    pub fn double(&mut self, i: usize) {
        self.total += &self.weights[i];
        self.weights[i] <<= 1;
    }
}

/// Draws `r_prime` copies uniformly without replacement from the multiset
/// holding `w_i` copies of agent `i`; returns copies drawn per agent.
///
/// Each draw picks a remaining copy uniformly, i.e. agent `i` with
/// probability proportional to its remaining copies.
pub fn weighted_sample<R: Rng + ?Sized>(
    w: &WeightVector,
    r_prime: u64,
    rng: &mut R,
) -> Result<BTreeMap<usize, u64>> {
    if BigUint::from(r_prime) > w.total {
        return Err(Error::InvalidParams(format!(
            "cannot draw {r_prime} copies from a multiset of {}",
            w.total
        )));
    }
    let mut taken: BTreeMap<usize, u64> = BTreeMap::new();
    let mut remaining = w.total.clone();
    for _ in 0..r_prime {
        let mut t = rng.gen_biguint_below(&remaining);
        let mut pick = None;
        for (i, wi) in w.weights.iter().enumerate() {
            let used = taken.get(&i).copied().unwrap_or(0);
            let left = wi - BigUint::from(used);
            if t < left {
                pick = Some(i);
                break;
            }
            t -= left;
        }
        let i = pick.ok_or_else(|| Error::InternalLogic("sampling ran past the multiset".into()))?;
        *taken.entry(i).or_insert(0) += 1;
        remaining -= 1u32;
    }
    Ok(taken)
}

/// Clarkson-style sampling: learn a weighted sample of `16 (m - 1)^2`
/// copies, solve on it, check everyone, double the violators' weights.
pub fn solve_randomized(o: &mut Oracle, advice: &Advice, seed: u64) -> Result<SolveReport> {
    let (n, m) = (o.n(), o.m());
    if n == 0 || m < 2 {
        return Err(Error::InvalidParams(
            "the randomized solver needs n >= 1 and m >= 2".into(),
        ));
    }
    advice.validate(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = 16 * (m as u64 - 1).pow(2);
    let mut w = match &advice.order {
        Some(order) => WeightVector::from_order(order),
        None => WeightVector::uniform(n),
    };
    let mut known = Knowledge::default();
    let mut rounds = Vec::new();
    let mut iterations = 0u64;
    let warm = advice.hint.as_ref();

    let finish = |o: &Oracle, outcome: Outcome, known: &Knowledge, rounds: Vec<Round>, iterations: u64| SolveReport {
        solver: SolverKind::Randomized,
        advice: advice.kind(),
        n,
        m,
        inv_epsilon: o.inv_epsilon(),
        outcome,
        ledger: o.snapshot_ledger(),
        learned_agents: known.agents(),
        record_count: None,
        iterations: Some(iterations),
        rng_seed: Some(seed),
        rng_algorithm: Some(RNG_ALGORITHM.to_string()),
        rounds,
    };

    if let Some(hint) = warm {
        if check_hint(o, hint)? {
            let outcome = Outcome::Accepted { lottery: hint.clone() };
            return Ok(finish(o, outcome, &known, rounds, iterations));
        }
    }

    loop {
        iterations += 1;
        let r_prime = w.total().to_u64().map_or(r, |total| total.min(r));
        let sample: BTreeSet<usize> = weighted_sample(&w, r_prime, &mut rng)?.into_keys().collect();
        let mut learned = Vec::new();
        for &i in &sample {
            if known.knows(i) {
                continue;
            }
            learned.push(i);
            if let Learned::RejectAll = known.learn(o, i, warm)? {
                rounds.push(Round {
                    constraints_from: BTreeSet::new(),
                    candidate: None,
                    violators: Vec::new(),
                    learned,
                });
                let outcome = Outcome::Null {
                    witness: NullWitness::RejectAll { agent: i },
                };
                return Ok(finish(o, outcome, &known, rounds, iterations));
            }
        }
        let set = known.constraints(m, &sample)?;
        let x = match select_or_witness(&set)? {
            Ok(x) => x,
            Err(witness) => {
                rounds.push(Round {
                    constraints_from: set.owners(),
                    candidate: None,
                    violators: Vec::new(),
                    learned,
                });
                return Ok(finish(o, Outcome::Null { witness }, &known, rounds, iterations));
            }
        };
        let mut violators = Vec::new();
        for i in 0..n {
            if !o.query(i, &x, QueryCategory::Verification)? {
                violators.push(i);
            }
        }
        for &i in &violators {
            w.double(i);
        }
        log::debug!(
            "iteration {iterations}: sampled {}, violators {}, W = {}",
            sample.len(),
            violators.len(),
            w.total()
        );
        let done = violators.is_empty();
        rounds.push(Round {
            constraints_from: set.owners(),
            candidate: Some(x.clone()),
            violators,
            learned,
        });
        if done {
            return Ok(finish(o, Outcome::Accepted { lottery: x }, &known, rounds, iterations));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::examples::{example_2_1, example_2_3};
    use crate::model::Instance;
    use std::sync::Arc;

    fn big(v: &[u64]) -> WeightVector {
        WeightVector::new(v.iter().map(|&x| BigUint::from(x)).collect()).unwrap()
    }

    #[test]
    fn exhaustive_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            weighted_sample(&big(&[1, 1]), 2, &mut rng).unwrap(),
            BTreeMap::from([(0, 1), (1, 1)])
        );
        assert_eq!(
            weighted_sample(&big(&[2, 2, 2]), 6, &mut rng).unwrap(),
            BTreeMap::from([(0, 2), (1, 2), (2, 2)])
        );
        assert!(weighted_sample(&big(&[1, 2]), 4, &mut rng).is_err());
    }

    #[test]
    fn heavy_agent_drawn_three_quarters_of_the_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = big(&[3, 1]);
        let hits = (0..20_000)
            .filter(|_| weighted_sample(&w, 1, &mut rng).unwrap().contains_key(&0))
            .count();
        let p = hits as f64 / 20_000.0;
        assert!((p - 0.75).abs() < 0.015, "{p}");
    }

    #[test]
    fn weights_from_order() {
        let w = WeightVector::from_order(&[2, 0, 1]);
        assert_eq!(w.weight(2), &BigUint::from(3u32));
        assert_eq!(w.weight(0), &BigUint::from(2u32));
        assert_eq!(w.weight(1), &BigUint::from(1u32));
        assert_eq!(w.total(), &BigUint::from(6u32));
    }

    #[test]
    fn doubling_tracks_total() {
        let mut w = WeightVector::uniform(3);
        w.double(1);
        w.double(1);
        assert_eq!(w.weight(1), &BigUint::from(4u32));
        assert_eq!(w.total(), &BigUint::from(6u32));
        assert!(WeightVector::new(vec![BigUint::zero()]).is_err());
    }

    #[test]
    fn examples_over_many_seeds() {
        let ex3 = Arc::new(example_2_3());
        let ex1 = Arc::new(example_2_1());
        for seed in 0..100 {
            let rep = solve_randomized(&mut Oracle::simulated(Arc::clone(&ex3)), &Advice::none(), seed).unwrap();
            assert!(ex3.unanimous(rep.outcome.lottery().unwrap()).unwrap());
            assert_eq!(rep.rng_seed, Some(seed));
            let rep = solve_randomized(&mut Oracle::simulated(Arc::clone(&ex1)), &Advice::none(), seed).unwrap();
            assert_eq!(
                rep.outcome,
                Outcome::Null {
                    witness: NullWitness::Helly { agents: BTreeSet::from([0, 1]) }
                }
            );
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let inst = Arc::new(example_2_3());
        let a = solve_randomized(&mut Oracle::simulated(Arc::clone(&inst)), &Advice::none(), 7).unwrap();
        let b = solve_randomized(&mut Oracle::simulated(inst), &Advice::none(), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_single_alternative() {
        let inst = Instance::new(1, 10, vec![]).unwrap();
        assert!(solve_randomized(&mut Oracle::simulated(Arc::new(inst)), &Advice::none(), 0).is_err());
    }
}
