//! End-to-end solvers: full elicitation, the adaptive deterministic scan,
//! and Clarkson-style weighted sampling, each optionally guided by advice.

mod deterministic;
mod randomized;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use deterministic::{compute_record_count, solve_baseline, solve_deterministic};
pub use randomized::{solve_randomized, weighted_sample, WeightVector, RNG_ALGORITHM};

use crate::error::{Error, Result};
use crate::feasibility::{helly_witness, select, ConstraintSet, SelectResult};
use crate::geometry::{learn_hyperplane, LearnedHalfspace};
use crate::model::{Instance, Lottery};
use crate::oracle::{Oracle, QueryCategory, QueryLedger};

/// Predictions handed to a solver. Either part may be missing.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Advice {
    /// Agents in predicted order of importance, most binding first.
    pub order: Option<Vec<usize>>,
    /// A predicted lottery, used for an up-front check and warm starts.
    pub hint: Option<Lottery>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdviceKind {
    None,
    Permutation,
    LotteryHint,
    Both,
}

impl AdviceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AdviceKind::None => "none",
            AdviceKind::Permutation => "permutation",
            AdviceKind::LotteryHint => "lottery_hint",
            AdviceKind::Both => "both",
        }
    }
}

impl fmt::Display for AdviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Advice {
    pub fn none() -> Self {
        Advice::default()
    }

    pub fn permutation(order: Vec<usize>) -> Self {
        Advice {
            order: Some(order),
            hint: None,
        }
    }

    pub fn lottery(hint: Lottery) -> Self {
        Advice {
            order: None,
            hint: Some(hint),
        }
    }

    pub fn kind(&self) -> AdviceKind {
        match (&self.order, &self.hint) {
            (None, None) => AdviceKind::None,
            (Some(_), None) => AdviceKind::Permutation,
            (None, Some(_)) => AdviceKind::LotteryHint,
            (Some(_), Some(_)) => AdviceKind::Both,
        }
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        if let Some(order) = &self.order {
            let mut seen = vec![false; n];
            if order.len() != n {
                return Err(Error::InvalidAdvice(format!(
                    "permutation has {} entries, expected {n}",
                    order.len()
                )));
            }
            for &i in order {
                if i >= n || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidAdvice(format!(
                        "permutation is not a bijection on 0..{n} (entry {i})"
                    )));
                }
            }
        }
        if let Some(x) = &self.hint {
            if x.m() != m {
                return Err(Error::InvalidAdvice(format!(
                    "lottery hint has {} coordinates, expected {m}",
                    x.m()
                )));
            }
        }
        Ok(())
    }

    /// Scan order: the permutation if given, otherwise `0..n`.
    pub(crate) fn scan_order(&self, n: usize) -> Vec<usize> {
        self.order.clone().unwrap_or_else(|| (0..n).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Baseline,
    Deterministic,
    Randomized,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Baseline, SolverKind::Deterministic, SolverKind::Randomized];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Baseline => "baseline",
            SolverKind::Deterministic => "deterministic",
            SolverKind::Randomized => "randomized",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown solver {s:?}")))
    }
}

/// Why a run concluded that no unanimously acceptable lottery exists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NullWitness {
    /// This agent rejects every lottery.
    RejectAll { agent: usize },
    /// These agents' acceptable sets have empty intersection.
    Helly { agents: BTreeSet<usize> },
}

impl NullWitness {
    pub fn agents(&self) -> BTreeSet<usize> {
        match self {
            NullWitness::RejectAll { agent } => BTreeSet::from([*agent]),
            NullWitness::Helly { agents } => agents.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Accepted { lottery: Lottery },
    Null { witness: NullWitness },
}

impl Outcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Outcome::Accepted { .. })
    }

    pub fn lottery(&self) -> Option<&Lottery> {
        match self {
            Outcome::Accepted { lottery } => Some(lottery),
            Outcome::Null { .. } => None,
        }
    }

    pub fn kind_str(&self) -> &'static str {
        match self {
            Outcome::Accepted { .. } => "accepted",
            Outcome::Null { .. } => "null",
        }
    }
}

/// One pass of a solver's main loop.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    /// Agents whose constraints fed `select` this round.
    pub constraints_from: BTreeSet<usize>,
    /// Absent when `select` was infeasible.
    pub candidate: Option<Lottery>,
    /// Agents found rejecting the candidate.
    pub violators: Vec<usize>,
    /// Agents elicited this round.
    pub learned: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: SolverKind,
    pub advice: AdviceKind,
    pub n: usize,
    pub m: usize,
    pub inv_epsilon: u64,
    pub outcome: Outcome,
    pub ledger: QueryLedger,
    pub learned_agents: BTreeSet<usize>,
    /// Number of agents the deterministic scan was forced to learn.
    pub record_count: Option<usize>,
    /// Main-loop iterations of the randomized solver.
    pub iterations: Option<u64>,
    pub rng_seed: Option<u64>,
    pub rng_algorithm: Option<String>,
    pub rounds: Vec<Round>,
}

impl SolveReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Runs `solver` on a fresh simulated oracle over `inst`.
pub fn run(inst: &Arc<Instance>, solver: SolverKind, advice: &Advice, seed: u64) -> Result<SolveReport> {
    let mut o = Oracle::simulated(Arc::clone(inst));
    match solver {
        SolverKind::Baseline => solve_baseline(&mut o),
        SolverKind::Deterministic => solve_deterministic(&mut o, advice),
        SolverKind::Randomized => solve_randomized(&mut o, advice, seed),
    }
}

/// Learned halfspaces, keyed by agent.
#[derive(Default)]
pub(crate) struct Knowledge {
    rows: std::collections::BTreeMap<usize, LearnedHalfspace>,
}

/// Result of eliciting one agent.
pub(crate) enum Learned {
    RejectAll,
    Done,
}

impl Knowledge {
    pub(crate) fn knows(&self, i: usize) -> bool {
        self.rows.contains_key(&i)
    }

    pub(crate) fn agents(&self) -> BTreeSet<usize> {
        self.rows.keys().copied().collect()
    }

    pub(crate) fn learn(&mut self, o: &mut Oracle, i: usize, warm: Option<&Lottery>) -> Result<Learned> {
        let e = learn_hyperplane(o, i, warm)?;
        let reject = e.halfspace == LearnedHalfspace::RejectAll;
        self.rows.insert(i, e.halfspace);
        Ok(if reject { Learned::RejectAll } else { Learned::Done })
    }

    /// Constraint rows of the given known agents (accept-all agents add none).
    pub(crate) fn constraints<'a>(
        &self,
        m: usize,
        agents: impl IntoIterator<Item = &'a usize>,
    ) -> Result<ConstraintSet> {
        let mut set = ConstraintSet::new(m);
        for &i in agents {
            match self.rows.get(&i) {
                Some(LearnedHalfspace::Coeffs(c)) => set.push(i, c.clone())?,
                Some(LearnedHalfspace::AcceptAll) => {}
                Some(LearnedHalfspace::RejectAll) | None => {
                    return Err(Error::InternalLogic(format!(
                        "agent {i} has no usable constraint"
                    )))
                }
            }
        }
        Ok(set)
    }
}

/// `select`, or the Helly witness of `set` when it is infeasible.
pub(crate) fn select_or_witness(set: &ConstraintSet) -> Result<std::result::Result<Lottery, NullWitness>> {
    match select(set)? {
        SelectResult::Feasible(x) => Ok(Ok(x)),
        SelectResult::Infeasible => Ok(Err(NullWitness::Helly {
            agents: helly_witness(set)?.agents,
        })),
    }
}

/// Up-front hint check: `n` queries, no short-circuit. `true` iff unanimous.
pub(crate) fn check_hint(o: &mut Oracle, hint: &Lottery) -> Result<bool> {
    let mut all = true;
    for i in 0..o.n() {
        all &= o.query(i, hint, QueryCategory::AdviceCheck)?;
    }
    Ok(all)
}
