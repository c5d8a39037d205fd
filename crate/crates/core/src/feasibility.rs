//! Offline feasibility over learned halfspaces: the lexicographic `select`
//! rule, Helly witness extraction, and a query-free reference solver that
//! reads the hidden instance directly.
//!
//! Nothing here touches an oracle.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::lp::{self, LpOutcome};
use crate::model::{AgentSpec, Instance, Lottery};
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintRow {
    pub owner: usize,
    pub coeffs: Vec<Rational>,
}

/// Rows `<c, x> >= 1` over the simplex, at most one per owner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintSet {
    m: usize,
    rows: Vec<ConstraintRow>,
}

impl ConstraintSet {
    pub fn new(m: usize) -> Self {
        ConstraintSet { m, rows: Vec::new() }
    }

    pub fn from_rows(m: usize, rows: impl IntoIterator<Item = (usize, Vec<Rational>)>) -> Result<Self> {
        let mut set = ConstraintSet::new(m);
        for (owner, coeffs) in rows {
            set.push(owner, coeffs)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, owner: usize, coeffs: Vec<Rational>) -> Result<()> {
        if coeffs.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                actual: coeffs.len(),
            });
        }
        if coeffs.iter().all(Rational::is_zero) {
            return Err(Error::InvalidConstraint(format!(
                "row of agent {owner} is all zero"
            )));
        }
        if self.rows.iter().any(|r| r.owner == owner) {
            return Err(Error::InvalidConstraint(format!(
                "agent {owner} already has a row"
            )));
        }
        self.rows.push(ConstraintRow { owner, coeffs });
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> &[ConstraintRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn owners(&self) -> BTreeSet<usize> {
        self.rows.iter().map(|r| r.owner).collect()
    }

    /// The rows whose owners are in `owners`.
    pub fn restrict(&self, owners: &BTreeSet<usize>) -> ConstraintSet {
        ConstraintSet {
            m: self.m,
            rows: self
                .rows
                .iter()
                .filter(|r| owners.contains(&r.owner))
                .cloned()
                .collect(),
        }
    }

    pub fn satisfied_by(&self, x: &Lottery) -> bool {
        self.rows.iter().all(|r| {
            let dot: Rational = r.coeffs.iter().zip(x.probs()).map(|(c, p)| c * p).sum();
            dot >= Rational::one()
        })
    }

    /// Equality system over `(x, slack)`: `sum x = 1`, `<c_r, x> - s_r = 1`,
    /// plus `x_j = v_j` for each fixed prefix coordinate.
    fn system(&self, fixed: &[Rational]) -> (Vec<Vec<Rational>>, Vec<Rational>) {
        let m = self.m;
        let width = m + self.rows.len();
        let mut a = Vec::with_capacity(1 + self.rows.len() + fixed.len());
        let mut b = Vec::with_capacity(a.capacity());
        let mut simplex = vec![Rational::zero(); width];
        for v in simplex.iter_mut().take(m) {
            *v = Rational::one();
        }
        a.push(simplex);
        b.push(Rational::one());
        for (r, row) in self.rows.iter().enumerate() {
            let mut line = vec![Rational::zero(); width];
            line[..m].clone_from_slice(&row.coeffs);
            line[m + r] = -Rational::one();
            a.push(line);
            b.push(Rational::one());
        }
        for (j, v) in fixed.iter().enumerate() {
            let mut line = vec![Rational::zero(); width];
            line[j] = Rational::one();
            a.push(line);
            b.push(v.clone());
        }
        (a, b)
    }

    pub fn is_feasible(&self) -> Result<bool> {
        let (a, b) = self.system(&[]);
        Ok(lp::feasible_point(&a, &b)?.is_some())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SelectResult {
    Feasible(Lottery),
    Infeasible,
}

impl SelectResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SelectResult::Feasible(_))
    }

    pub fn lottery(&self) -> Option<&Lottery> {
        match self {
            SelectResult::Feasible(x) => Some(x),
            SelectResult::Infeasible => None,
        }
    }
}

/// Lexicographically maximum lottery satisfying every row: maximize `x_1`,
/// fix it, then `x_2`, and so on.
pub fn select(c: &ConstraintSet) -> Result<SelectResult> {
    let m = c.m;
    let width = m + c.rows.len();
    let mut fixed: Vec<Rational> = Vec::with_capacity(m);
    let mut last: Option<Vec<Rational>> = None;
    for j in 0..m.saturating_sub(1) {
        let (a, b) = c.system(&fixed);
        let mut objective = vec![Rational::zero(); width];
        objective[j] = Rational::one();
        match lp::maximize(&a, &b, &objective)? {
            LpOutcome::Infeasible => {
                if j == 0 {
                    return Ok(SelectResult::Infeasible);
                }
                return Err(Error::InternalLogic(format!(
                    "fixing x_{} at its optimum made the system infeasible",
                    j - 1
                )));
            }
            LpOutcome::Optimal { x, value } => {
                fixed.push(value);
                last = Some(x);
            }
        }
    }
    let point = match last {
        Some(x) => x,
        None => {
            let (a, b) = c.system(&[]);
            match lp::feasible_point(&a, &b)? {
                Some(x) => x,
                None => return Ok(SelectResult::Infeasible),
            }
        }
    };
    let lottery = Lottery::new(point[..m].to_vec())?;
    if !c.satisfied_by(&lottery) {
        return Err(Error::InternalLogic("selected lottery violates a row".into()));
    }
    Ok(SelectResult::Feasible(lottery))
}

/// A set of agents whose rows are jointly infeasible over the simplex, and
/// minimal with that property.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HellyWitness {
    pub agents: BTreeSet<usize>,
}

/// Deletion filter in ascending owner order: drop each row and keep it
/// dropped iff the rest stays infeasible.
pub fn helly_witness(c: &ConstraintSet) -> Result<HellyWitness> {
    if c.is_feasible()? {
        return Err(Error::ContractViolation(
            "helly_witness called on a feasible constraint set".into(),
        ));
    }
    let mut keep = c.owners();
    let order: Vec<usize> = keep.iter().copied().collect();
    for owner in order {
        keep.remove(&owner);
        if c.restrict(&keep).is_feasible()? {
            keep.insert(owner);
        }
    }
    Ok(HellyWitness { agents: keep })
}

/// How an agent's acceptable set looks, read directly from its parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AgentRegion {
    AcceptAll,
    RejectAll,
    Row(Vec<Rational>),
}

/// Normalized row `c_j = (u_j - u_r) / (tau - u_r)` with `r` the smallest
/// rejected alternative.
pub fn normalized_region(agent: &AgentSpec) -> AgentRegion {
    let tau = &agent.threshold;
    let Some(r) = agent.utilities.iter().position(|u| u < tau) else {
        return AgentRegion::AcceptAll;
    };
    if agent.utilities.iter().all(|u| u < tau) {
        return AgentRegion::RejectAll;
    }
    let u_r = &agent.utilities[r];
    let denom = tau - u_r;
    AgentRegion::Row(
        agent
            .utilities
            .iter()
            .map(|u| (u - u_r) / &denom)
            .collect(),
    )
}

/// Constraint set of the given agents built from their hidden parameters;
/// `Err(i)` names an agent that rejects everything.
pub fn direct_constraints(
    inst: &Instance,
    agents: impl IntoIterator<Item = usize>,
) -> Result<std::result::Result<ConstraintSet, usize>> {
    let mut set = ConstraintSet::new(inst.m());
    for i in agents {
        match normalized_region(inst.agent(i)?) {
            AgentRegion::AcceptAll => {}
            AgentRegion::RejectAll => return Ok(Err(i)),
            AgentRegion::Row(c) => set.push(i, c)?,
        }
    }
    Ok(Ok(set))
}

/// Reference answer computed from the hidden instance with zero queries.
pub fn feasible_full(inst: &Instance) -> Result<SelectResult> {
    match direct_constraints(inst, 0..inst.n())? {
        Err(_) => Ok(SelectResult::Infeasible),
        Ok(set) => select(&set),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::examples::{example_2_1, example_2_3};

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn rows(m: usize, rows: &[(usize, &[&str])]) -> ConstraintSet {
        ConstraintSet::from_rows(
            m,
            rows.iter()
                .map(|(o, c)| (*o, c.iter().map(|s| r(s)).collect())),
        )
        .unwrap()
    }

    /// Independent oracle: enumerate basic solutions of the 3-alternative
    /// system (intersections of pairs of tight constraints among the rows and
    /// the coordinate hyperplanes, inside the simplex) and take the
    /// lexicographic maximum among feasible ones.
    fn lex_max_by_vertex_enumeration(set: &ConstraintSet) -> Option<Vec<Rational>> {
        assert_eq!(set.m(), 3);
        // each hyperplane as (a, rhs) with a.x = rhs
        let mut planes: Vec<(Vec<Rational>, Rational)> = Vec::new();
        for j in 0..3 {
            let mut a = vec![Rational::zero(); 3];
            a[j] = Rational::one();
            planes.push((a, Rational::zero()));
        }
        for row in set.rows() {
            planes.push((row.coeffs.clone(), Rational::one()));
        }
        let ones = vec![Rational::one(); 3];
        let mut best: Option<Vec<Rational>> = None;
        for p in 0..planes.len() {
            for q in p + 1..planes.len() {
                let m = [&ones, &planes[p].0, &planes[q].0];
                let rhs = [Rational::one(), planes[p].1.clone(), planes[q].1.clone()];
                let det3 = |m: [&Vec<Rational>; 3]| {
                    &m[0][0] * &(&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1])
                        - &m[0][1] * &(&m[1][0] * &m[2][2] - &m[1][2] * &m[2][0])
                        + &m[0][2] * &(&m[1][0] * &m[2][1] - &m[1][1] * &m[2][0])
                };
                let d = det3(m);
                if d.is_zero() {
                    continue;
                }
                let mut x = Vec::new();
                for col in 0..3 {
                    let cols: Vec<Vec<Rational>> = (0..3)
                        .map(|row| {
                            (0..3)
                                .map(|c| if c == col { rhs[row].clone() } else { m[row][c].clone() })
                                .collect()
                        })
                        .collect();
                    x.push(det3([&cols[0], &cols[1], &cols[2]]) / &d);
                }
                if x.iter().any(Rational::is_negative) {
                    continue;
                }
                let lot = Lottery::new(x.clone()).unwrap();
                if !set.satisfied_by(&lot) {
                    continue;
                }
                if best.as_ref().map_or(true, |b| x > *b) {
                    best = Some(x);
                }
            }
        }
        best
    }

    #[test]
    fn empty_set_selects_first_vertex() {
        let out = select(&ConstraintSet::new(3)).unwrap();
        assert_eq!(out, SelectResult::Feasible(Lottery::vertex(0, 3).unwrap()));
    }

    #[test]
    fn single_alternative() {
        let out = select(&ConstraintSet::new(1)).unwrap();
        assert_eq!(out, SelectResult::Feasible(Lottery::vertex(0, 1).unwrap()));
        let bad = rows(1, &[(0, &["1/2"])]);
        assert_eq!(select(&bad).unwrap(), SelectResult::Infeasible);
    }

    #[test]
    fn worked_example_rows() {
        let set = rows(
            3,
            &[(0, &["2", "1", "0"]), (1, &["0", "8/5", "3/5"]), (2, &["0", "0", "8"])],
        );
        let oracle = lex_max_by_vertex_enumeration(&set).unwrap();
        assert_eq!(oracle, vec![r("19/64"), r("37/64"), r("8/64")]);
        let out = select(&set).unwrap();
        assert_eq!(out.lottery().unwrap().probs(), oracle.as_slice());
    }

    #[test]
    fn worked_example_infeasible_pair() {
        let set = rows(2, &[(0, &["5/3", "0"]), (1, &["0", "5/3"])]);
        assert_eq!(select(&set).unwrap(), SelectResult::Infeasible);
        let w = helly_witness(&set).unwrap();
        assert_eq!(w.agents, BTreeSet::from([0, 1]));
    }

    #[test]
    fn witness_on_feasible_set_is_contract_violation() {
        let set = rows(2, &[(0, &["1", "0"])]);
        assert!(matches!(helly_witness(&set), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn reject_all_row_gives_singleton_witness() {
        let set = rows(3, &[(0, &["2", "1", "0"]), (4, &["1/2", "1/2", "1/2"]), (7, &["0", "0", "8"])]);
        assert_eq!(helly_witness(&set).unwrap().agents, BTreeSet::from([4]));
    }

    /// Three rows, pairwise feasible, jointly infeasible. Found by brute-force
    /// search over epsilon-grid agents with m = 3, 1/eps = 10.
    #[test]
    fn triple_only_infeasible() {
        let inv = 10i64;
        let mut found = None;
        // agent j: u = 1 on alternative j, 0 elsewhere, threshold t_j / 10
        'outer: for t0 in 1..=inv {
            for t1 in 1..=inv {
                for t2 in 1..=inv {
                    let ts = [t0, t1, t2];
                    let pair_ok = (0..3).all(|a| (a + 1..3).all(|b| ts[a] + ts[b] <= inv));
                    if pair_ok && t0 + t1 + t2 > inv {
                        found = Some(ts);
                        break 'outer;
                    }
                }
            }
        }
        let ts = found.unwrap();
        let mut set = ConstraintSet::new(3);
        for (j, t) in ts.iter().enumerate() {
            let mut c = vec![Rational::zero(); 3];
            c[j] = Rational::ratio(inv, *t);
            set.push(j, c).unwrap();
        }
        assert!(!set.is_feasible().unwrap());
        for drop in 0..3 {
            let keep: BTreeSet<usize> = (0..3).filter(|&k| k != drop).collect();
            assert!(set.restrict(&keep).is_feasible().unwrap());
        }
        assert_eq!(helly_witness(&set).unwrap().agents, BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn degenerate_and_duplicate_rows_rejected() {
        let mut set = ConstraintSet::new(2);
        assert!(set.push(0, vec![r("0"), r("0")]).is_err());
        set.push(0, vec![r("1"), r("0")]).unwrap();
        assert!(set.push(0, vec![r("0"), r("1")]).is_err());
        assert!(set.push(1, vec![r("1")]).is_err());
    }

    #[test]
    fn reference_solver_examples() {
        assert_eq!(
            feasible_full(&example_2_3()).unwrap().lottery().unwrap().probs(),
            &[r("19/64"), r("37/64"), r("8/64")]
        );
        assert_eq!(feasible_full(&example_2_1()).unwrap(), SelectResult::Infeasible);
        let inst = Instance::new(2, 10, vec![AgentSpec::new(vec![r("1"), r("1")], r("1"))]).unwrap();
        assert_eq!(
            feasible_full(&inst).unwrap(),
            SelectResult::Feasible(Lottery::vertex(0, 2).unwrap())
        );
    }

    #[test]
    fn normalized_row_matches_worked_example() {
        let inst = example_2_3();
        assert_eq!(
            normalized_region(&inst.agents()[0]),
            AgentRegion::Row(vec![r("2"), r("1"), r("0")])
        );
        assert_eq!(
            normalized_region(&inst.agents()[2]),
            AgentRegion::Row(vec![r("0"), r("0"), r("8")])
        );
    }
}
