use std::collections::BTreeSet;
use std::sync::Arc;

use super::{check_hint, select_or_witness, Advice, Knowledge, Learned, NullWitness, Outcome, Round, SolveReport, SolverKind};
use crate::error::{Error, Result};
use crate::model::{Instance, Lottery};
use crate::oracle::{Oracle, QueryCategory};

fn report(o: &Oracle, solver: SolverKind, advice: &Advice, outcome: Outcome, known: &Knowledge, rounds: Vec<Round>) -> SolveReport {
    let learned_agents = known.agents();
    SolveReport {
        solver,
        advice: advice.kind(),
        n: o.n(),
        m: o.m(),
        inv_epsilon: o.inv_epsilon(),
        outcome,
        ledger: o.snapshot_ledger(),
        record_count: (solver == SolverKind::Deterministic).then_some(learned_agents.len()),
        learned_agents,
        iterations: None,
        rng_seed: None,
        rng_algorithm: None,
        rounds,
    }
}

/// Learns every agent (stopping at the first that rejects everything), then
/// solves the full constraint system once.
pub fn solve_baseline(o: &mut Oracle) -> Result<SolveReport> {
    let advice = Advice::none();
    let mut known = Knowledge::default();
    let mut learned = Vec::new();
    for i in 0..o.n() {
        learned.push(i);
        if let Learned::RejectAll = known.learn(o, i, None)? {
            let round = Round {
                constraints_from: BTreeSet::new(),
                candidate: None,
                violators: Vec::new(),
                learned,
            };
            let outcome = Outcome::Null {
                witness: NullWitness::RejectAll { agent: i },
            };
            return Ok(report(o, SolverKind::Baseline, &advice, outcome, &known, vec![round]));
        }
    }
    let all = known.agents();
    let set = known.constraints(o.m(), &all)?;
    let (candidate, outcome) = match select_or_witness(&set)? {
        Ok(x) => (Some(x.clone()), Outcome::Accepted { lottery: x }),
        Err(witness) => (None, Outcome::Null { witness }),
    };
    let round = Round {
        constraints_from: set.owners(),
        candidate,
        violators: Vec::new(),
        learned,
    };
    Ok(report(o, SolverKind::Baseline, &advice, outcome, &known, vec![round]))
}

/// Adaptive scan: propose the lex-max lottery of what has been learned, ask
/// the unlearned agents in order, and learn only the first that objects.
///
/// Agents already learned are not re-asked; the candidate satisfies their
/// constraints by construction.
pub fn solve_deterministic(o: &mut Oracle, advice: &Advice) -> Result<SolveReport> {
    advice.validate(o.n(), o.m())?;
    let mut known = Knowledge::default();
    let mut rounds = Vec::new();
    let warm = advice.hint.as_ref();
    if let Some(hint) = warm {
        if check_hint(o, hint)? {
            let outcome = Outcome::Accepted { lottery: hint.clone() };
            return Ok(report(o, SolverKind::Deterministic, advice, outcome, &known, rounds));
        }
    }
    let order = advice.scan_order(o.n());
    loop {
        let owners = known.agents();
        let set = known.constraints(o.m(), &owners)?;
        let x: Lottery = match select_or_witness(&set)? {
            Ok(x) => x,
            Err(witness) => {
                rounds.push(Round {
                    constraints_from: owners,
                    candidate: None,
                    violators: Vec::new(),
                    learned: Vec::new(),
                });
                let outcome = Outcome::Null { witness };
                return Ok(report(o, SolverKind::Deterministic, advice, outcome, &known, rounds));
            }
        };
        let mut violator = None;
        for &i in &order {
            if known.knows(i) {
                continue;
            }
            if !o.query(i, &x, QueryCategory::Verification)? {
                violator = Some(i);
                break;
            }
        }
        let mut round = Round {
            constraints_from: owners,
            candidate: Some(x.clone()),
            violators: violator.into_iter().collect(),
            learned: violator.into_iter().collect(),
        };
        let Some(j) = violator else {
            rounds.push(round);
            let outcome = Outcome::Accepted { lottery: x };
            return Ok(report(o, SolverKind::Deterministic, advice, outcome, &known, rounds));
        };
        let learned = known.learn(o, j, warm)?;
        round.learned = vec![j];
        rounds.push(round);
        if let Learned::RejectAll = learned {
            let outcome = Outcome::Null {
                witness: NullWitness::RejectAll { agent: j },
            };
            return Ok(report(o, SolverKind::Deterministic, advice, outcome, &known, rounds));
        }
        if known.constraints(o.m(), &[j])?.is_empty() {
            return Err(Error::InternalLogic(format!(
                "agent {j} rejected a lottery but was learned as accepting everything"
            )));
        }
    }
}

/// Number of agents the deterministic scan learns under `order`.
pub fn compute_record_count(inst: &Instance, order: &[usize]) -> Result<usize> {
    let mut o = Oracle::simulated(Arc::new(inst.clone()));
    let r = solve_deterministic(&mut o, &Advice::permutation(order.to_vec()))?;
    Ok(r.learned_agents.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::feasible_full;
    use crate::geometry::learn_budget;
    use crate::instances::examples::{example_2_1, example_2_3};
    use crate::model::AgentSpec;
    use crate::rational::Rational;

    fn oracle(inst: Instance) -> Oracle {
        Oracle::simulated(Arc::new(inst))
    }

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn baseline_examples() {
        let inst = example_2_3();
        let rep = solve_baseline(&mut oracle(inst.clone())).unwrap();
        let x = rep.outcome.lottery().unwrap();
        assert!(inst.unanimous(x).unwrap());
        assert_eq!(rep.learned_agents.len(), 3);

        let rep = solve_baseline(&mut oracle(example_2_1())).unwrap();
        assert_eq!(
            rep.outcome,
            Outcome::Null {
                witness: NullWitness::Helly { agents: BTreeSet::from([0, 1]) }
            }
        );
    }

    #[test]
    fn baseline_stops_at_reject_all() {
        let inst = Instance::new(
            3,
            10,
            vec![
                AgentSpec::new(vec![r("1"), r("1"), r("1")], r("1/2")),
                AgentSpec::new(vec![r("0"), r("0"), r("0")], r("1/10")),
                AgentSpec::new(vec![r("1"), r("0"), r("0")], r("1/2")),
            ],
        )
        .unwrap();
        let rep = solve_baseline(&mut oracle(inst)).unwrap();
        assert_eq!(
            rep.outcome,
            Outcome::Null { witness: NullWitness::RejectAll { agent: 1 } }
        );
        assert_eq!(rep.ledger.agent(1), 3);
        assert_eq!(rep.ledger.agent(2), 0);
    }

    #[test]
    fn deterministic_worked_example() {
        let inst = example_2_3();
        let rep = solve_deterministic(&mut oracle(inst.clone()), &Advice::none()).unwrap();
        let x = rep.outcome.lottery().unwrap();
        assert!(inst.unanimous(x).unwrap());
        assert_eq!(Some(x), feasible_full(&inst).unwrap().lottery());
        assert!(rep.record_count.unwrap() <= 3);
        assert!(rep.ledger.is_consistent());
    }

    #[test]
    fn deterministic_infeasible_example() {
        let rep = solve_deterministic(&mut oracle(example_2_1()), &Advice::none()).unwrap();
        assert_eq!(rep.outcome.kind_str(), "null");
        assert_eq!(
            rep.outcome,
            Outcome::Null {
                witness: NullWitness::Helly { agents: BTreeSet::from([0, 1]) }
            }
        );
    }

    #[test]
    fn first_candidate_already_unanimous() {
        let inst = Instance::new(
            2,
            10,
            vec![
                AgentSpec::new(vec![r("1"), r("0")], r("1/2")),
                AgentSpec::new(vec![r("7/10"), r("1")], r("7/10")),
                AgentSpec::new(vec![r("1"), r("1")], r("1")),
            ],
        )
        .unwrap();
        let rep = solve_deterministic(&mut oracle(inst), &Advice::none()).unwrap();
        assert_eq!(rep.outcome.lottery(), Some(&Lottery::vertex(0, 2).unwrap()));
        assert_eq!(rep.ledger.total(), 3);
        assert_eq!(rep.record_count, Some(0));
    }

    #[test]
    fn perfect_hint_costs_n_queries() {
        let inst = example_2_3();
        let hint = Lottery::parse_list("0.25,0.60,0.15").unwrap();
        let rep = solve_deterministic(&mut oracle(inst), &Advice::lottery(hint.clone())).unwrap();
        assert_eq!(rep.outcome, Outcome::Accepted { lottery: hint });
        assert_eq!(rep.ledger.total(), 3);
        assert_eq!(rep.ledger.category(QueryCategory::AdviceCheck), 3);
    }

    #[test]
    fn bad_hint_still_correct() {
        let inst = example_2_3();
        let hint = Lottery::vertex(2, 3).unwrap();
        let rep = solve_deterministic(&mut oracle(inst.clone()), &Advice::lottery(hint)).unwrap();
        assert!(inst.unanimous(rep.outcome.lottery().unwrap()).unwrap());
        let rep = solve_deterministic(
            &mut oracle(example_2_1()),
            &Advice::lottery(Lottery::parse_list("1/2,1/2").unwrap()),
        )
        .unwrap();
        assert!(!rep.outcome.is_accepted());
    }

    #[test]
    fn query_budget_holds_on_examples() {
        for inst in [example_2_3(), example_2_1()] {
            let rep = solve_deterministic(&mut oracle(inst.clone()), &Advice::none()).unwrap();
            let (n, rr) = (inst.n() as u64, rep.record_count.unwrap() as u64);
            let budget = n * (rr + 1) + rr * learn_budget(inst.m(), inst.inv_epsilon());
            assert!(rep.ledger.total() <= budget);
        }
    }

    #[test]
    fn record_counts() {
        // one tight agent pins x_0 <= 3/10; the others are slack
        let inst = Instance::new(
            2,
            10,
            vec![
                AgentSpec::new(vec![r("1/10"), r("1/10")], r("1/10")),
                AgentSpec::new(vec![r("1/10"), r("1/10")], r("1/10")),
                AgentSpec::new(vec![r("0"), r("1")], r("7/10")),
            ],
        )
        .unwrap();
        assert_eq!(compute_record_count(&inst, &[2, 0, 1]).unwrap(), 1);
        assert_eq!(compute_record_count(&inst, &[0, 1, 2]).unwrap(), 1);

        let easy = Instance::new(2, 10, vec![AgentSpec::new(vec![r("1"), r("0")], r("1"))]).unwrap();
        assert_eq!(compute_record_count(&easy, &[0]).unwrap(), 0);

        let ex = example_2_3();
        for order in [[0, 1, 2], [2, 1, 0]] {
            let rc = compute_record_count(&ex, &order).unwrap();
            assert!((1..=3).contains(&rc));
        }
    }
}
