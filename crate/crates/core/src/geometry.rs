//! Single-agent elicitation.
//!
//! An agent's acceptable set is a halfspace intersected with the simplex.
//! Along an edge from a rejected vertex `e_k` to an accepted vertex `e_k'`
//! the answer flips exactly once, at a turning point whose reduced
//! denominator is at most `1/eps`. Bisection to a bracket of width
//! `eps^2 / 2` isolates it, and [`rational_reconstruct`] recovers it exactly.
//! [`learn_hyperplane`] collects `m - 1` such turning points and rebuilds the
//! normalized halfspace `<c, x> >= 1`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{edge_lottery, pairwise_projection, EdgePoint, Lottery};
use crate::oracle::{Oracle, QueryCategory};
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LearnedHalfspace {
    AcceptAll,
    RejectAll,
    /// Accepts exactly the lotteries with `<c, x> >= 1`.
    Coeffs(Vec<Rational>),
}

impl LearnedHalfspace {
    pub fn accepts(&self, x: &Lottery) -> bool {
        match self {
            LearnedHalfspace::AcceptAll => true,
            LearnedHalfspace::RejectAll => false,
            LearnedHalfspace::Coeffs(c) => {
                let dot: Rational = c
                    .iter()
                    .zip(x.probs())
                    .filter(|(_, p)| !p.is_zero())
                    .map(|(c, p)| c * p)
                    .sum();
                dot >= Rational::one()
            }
        }
    }

    pub fn coeffs(&self) -> Option<&[Rational]> {
        match self {
            LearnedHalfspace::Coeffs(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TurningPoint {
    /// Rejected endpoint.
    pub k: usize,
    /// Accepted endpoint.
    pub kprime: usize,
    pub alpha_star: Rational,
}

/// Distance between the warm-start projection and the true turning point on
/// each searched edge.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ProjectionError {
    pub per_edge: BTreeMap<(usize, usize), Rational>,
    pub max: Rational,
}

impl ProjectionError {
    fn record(&mut self, k: usize, kprime: usize, delta: Rational) {
        if delta > self.max {
            self.max = delta.clone();
        }
        self.per_edge.insert((k, kprime), delta);
    }
}

#[derive(Clone, Debug)]
pub struct Elicitation {
    pub halfspace: LearnedHalfspace,
    pub turning_points: Vec<TurningPoint>,
    /// Present iff a warm-start lottery was supplied.
    pub projection_error: Option<ProjectionError>,
}

/// Bracket width at which a turning point is isolated: `eps^2 / 2`.
pub fn isolation_width(inv_epsilon: u64) -> Rational {
    let q = inv_epsilon as i64;
    Rational::ratio(1, 2 * q * q)
}

/// Worst-case number of bisection queries of [`exact_threshold`]:
/// `ceil(log2(2 / eps^2))`.
pub fn bisection_budget(inv_epsilon: u64) -> u32 {
    let target = 2u128 * (inv_epsilon as u128) * (inv_epsilon as u128);
    let mut t = 0;
    while (1u128 << t) < target {
        t += 1;
    }
    t
}

/// Query bound of [`learn_hyperplane`] without a warm start:
/// `m + (m - 1) * ceil(log2(2 / eps^2))`.
pub fn learn_budget(m: usize, inv_epsilon: u64) -> u64 {
    m as u64 + (m as u64).saturating_sub(1) * bisection_budget(inv_epsilon) as u64
}

fn edge_query(o: &mut Oracle, i: usize, k: usize, kprime: usize, alpha: &Rational) -> Result<bool> {
    let x = edge_lottery(&EdgePoint::new(k, kprime, alpha.clone()), o.m())?;
    o.query(i, &x, QueryCategory::ThresholdSearch)
}

fn check_edge(o: &Oracle, i: usize, k: usize, kprime: usize) -> Result<()> {
    if i >= o.n() {
        return Err(Error::AgentOutOfRange { agent: i, n: o.n() });
    }
    if k == kprime || k >= o.m() || kprime >= o.m() {
        return Err(Error::InvalidEdge(format!(
            "({k}, {kprime}) is not an edge for m = {}",
            o.m()
        )));
    }
    Ok(())
}

/// Halves `[lower, upper]` until its width is at most `eps^2 / 2`, keeping
/// `lower` rejected and `upper` accepted, then reconstructs the turning point.
fn bisect_and_reconstruct(
    o: &mut Oracle,
    i: usize,
    k: usize,
    kprime: usize,
    mut lower: Rational,
    mut upper: Rational,
) -> Result<TurningPoint> {
    let q = o.inv_epsilon();
    let width = isolation_width(q);
    while &upper - &lower > width {
        let mid = lower.midpoint(&upper);
        if edge_query(o, i, k, kprime, &mid)? {
            upper = mid;
        } else {
            lower = mid;
        }
    }
    let alpha_star = rational_reconstruct(&lower, &upper, q)?;
    if alpha_star <= lower || alpha_star > upper || !alpha_star.is_positive() {
        return Err(Error::InternalLogic(format!(
            "agent {i}, edge ({k}, {kprime}): reconstructed {alpha_star} outside ({lower}, {upper}]; \
             endpoint answers were not (reject, accept)"
        )));
    }
    Ok(TurningPoint {
        k,
        kprime,
        alpha_star,
    })
}

/// Exact turning point on edge `(e_k, e_k')` by bisection from `[0, 1]`.
///
/// The caller must already know that agent `i` rejects `e_k` and accepts
/// `e_k'`; the endpoints are not queried again. Uses at most
/// [`bisection_budget`] queries, all categorized `ThresholdSearch`.
pub fn exact_threshold(o: &mut Oracle, i: usize, k: usize, kprime: usize) -> Result<TurningPoint> {
    check_edge(o, i, k, kprime)?;
    bisect_and_reconstruct(o, i, k, kprime, Rational::zero(), Rational::one())
}

/// The unique rational in `[lower, upper]` with reduced denominator at most
/// `q_max`, found by scanning `q = 1..=q_max` with `p = ceil(q * lower)` and
/// returning the first `p/q <= upper`.
///
/// Uniqueness requires `upper - lower <= 1 / (2 q_max^2)`; that is the
/// caller's guarantee. With a wider bracket the smallest-denominator
/// candidate is returned.
pub fn rational_reconstruct(lower: &Rational, upper: &Rational, q_max: u64) -> Result<Rational> {
    for q in 1..=q_max {
        let qr = Rational::from_integer(q);
        let p = (&qr * lower).ceil();
        let candidate = Rational::new(p, q)?;
        if &candidate <= upper {
            return Ok(candidate);
        }
    }
    Err(Error::InternalLogic(format!(
        "no rational with denominator <= {q_max} in [{lower}, {upper}]"
    )))
}

/// Warm-started turning-point search.
///
/// Probes `alpha_hat`, then walks away from it with doubling steps starting
/// at `eps^2 / 2` until the answer flips (clamped to `[0, 1]`), and finishes
/// by bisection and reconstruction. Returns the same turning point as
/// [`exact_threshold`]; when `alpha_hat` is exact it costs two queries.
pub fn exact_threshold_pred(
    o: &mut Oracle,
    i: usize,
    k: usize,
    kprime: usize,
    alpha_hat: &Rational,
) -> Result<TurningPoint> {
    check_edge(o, i, k, kprime)?;
    if !alpha_hat.in_unit_interval() {
        return Err(Error::InvalidParams(format!(
            "warm start {alpha_hat} is outside [0, 1]"
        )));
    }
    let zero = Rational::zero();
    let one = Rational::one();
    let mut step = isolation_width(o.inv_epsilon());
    let (lower, upper) = if edge_query(o, i, k, kprime, alpha_hat)? {
        let mut upper = alpha_hat.clone();
        loop {
            let probe = &upper - &step;
            if probe <= zero || !edge_query(o, i, k, kprime, &probe)? {
                break;
            }
            upper = probe;
            step = &step + &step;
        }
        let lower = std::cmp::max(zero, &upper - &step);
        (lower, upper)
    } else {
        let mut lower = alpha_hat.clone();
        loop {
            let probe = &lower + &step;
            if probe >= one || edge_query(o, i, k, kprime, &probe)? {
                break;
            }
            lower = probe;
            step = &step + &step;
        }
        let upper = std::cmp::min(one, &lower + &step);
        (lower, upper)
    };
    bisect_and_reconstruct(o, i, k, kprime, lower, upper)
}

/// Learns agent `i`'s acceptable set as a normalized halfspace.
///
/// Queries the `m` pure lotteries, then finds `m - 1` turning points: on
/// `(e_r, e_j)` for every accepted `j` and, unless every such turning point
/// is 1, on `(e_k, e_a)` for every other rejected `k`. `r` is the smallest
/// rejected index and `a` the smallest accepted index with a turning point
/// below 1. With `warm`, every search is warm-started at the pairwise
/// projection of `warm` onto the edge.
pub fn learn_hyperplane(o: &mut Oracle, i: usize, warm: Option<&Lottery>) -> Result<Elicitation> {
    let m = o.m();
    if i >= o.n() {
        return Err(Error::AgentOutOfRange { agent: i, n: o.n() });
    }
    if let Some(w) = warm {
        if w.m() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: w.m(),
            });
        }
    }

    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for j in 0..m {
        if o.query(i, &Lottery::vertex(j, m)?, QueryCategory::PureVertex)? {
            accepted.push(j);
        } else {
            rejected.push(j);
        }
    }
    let mut projection_error = warm.map(|_| ProjectionError::default());
    if rejected.is_empty() || accepted.is_empty() {
        let halfspace = if rejected.is_empty() {
            LearnedHalfspace::AcceptAll
        } else {
            LearnedHalfspace::RejectAll
        };
        return Ok(Elicitation {
            halfspace,
            turning_points: Vec::new(),
            projection_error,
        });
    }

    let mut turning_points = Vec::with_capacity(m - 1);
    let mut search = |o: &mut Oracle, k: usize, kprime: usize| -> Result<Rational> {
        let tp = match warm {
            Some(w) => {
                let hat = pairwise_projection(w, k, kprime);
                let tp = exact_threshold_pred(o, i, k, kprime, &hat)?;
                if let Some(err) = projection_error.as_mut() {
                    err.record(k, kprime, (&hat - &tp.alpha_star).abs());
                }
                tp
            }
            None => exact_threshold(o, i, k, kprime)?,
        };
        let alpha = tp.alpha_star.clone();
        turning_points.push(tp);
        Ok(alpha)
    };

    let r = rejected[0];
    let mut from_pivot = Vec::with_capacity(accepted.len());
    for &j in &accepted {
        from_pivot.push((j, search(o, r, j)?));
    }

    let one = Rational::one();
    let mut coeffs = vec![Rational::zero(); m];
    let halfspace = match from_pivot.iter().find(|(_, alpha)| *alpha < one) {
        None => {
            // Accepted vertices sit exactly on the threshold: only the face
            // spanned by them is acceptable.
            for &j in &accepted {
                coeffs[j] = one.clone();
            }
            LearnedHalfspace::Coeffs(coeffs)
        }
        Some((a, _)) => {
            let a = *a;
            for (j, alpha) in &from_pivot {
                coeffs[*j] = alpha.recip()?;
            }
            let c_a = coeffs[a].clone();
            for &k in rejected.iter().skip(1) {
                let alpha = search(o, k, a)?;
                let denom = &one - &alpha;
                if denom.is_zero() {
                    return Err(Error::InternalLogic(format!(
                        "agent {i}: turning point on ({k}, {a}) is 1 although e_{a} is strictly accepted"
                    )));
                }
                coeffs[k] = (&one - &alpha * &c_a).checked_div(&denom)?;
            }
            LearnedHalfspace::Coeffs(coeffs)
        }
    };
    drop(search);

    Ok(Elicitation {
        halfspace,
        turning_points,
        projection_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::examples::example_2_3;
    use crate::model::{AgentSpec, Instance};
    use std::sync::Arc;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn single(u: &[&str], tau: &str, inv_eps: u64) -> Oracle {
        let a = AgentSpec::new(u.iter().map(|s| r(s)).collect(), r(tau));
        Oracle::simulated(Arc::new(Instance::new(u.len(), inv_eps, vec![a]).unwrap()))
    }

    #[test]
    fn budget_values() {
        assert_eq!(bisection_budget(10), 8);
        assert_eq!(bisection_budget(4), 5);
        assert_eq!(bisection_budget(2), 3);
        assert_eq!(learn_budget(3, 10), 19);
    }

    #[test]
    fn threshold_direct_substitution() {
        let mut o = single(&["0", "1"], "0.6", 10);
        let tp = exact_threshold(&mut o, 0, 0, 1).unwrap();
        assert_eq!(tp.alpha_star, r("3/5"));
        assert!(o.ledger().category(QueryCategory::ThresholdSearch) <= 8);
    }

    #[test]
    fn threshold_worked_example_edges() {
        let mut o = Oracle::simulated(Arc::new(example_2_3()));
        // closed form (tau - u_k) / (u_k' - u_k) for agent 1
        let edge_31 = (r("0.6") - r("0.2")) / (r("1.0") - r("0.2"));
        let edge_32 = (r("0.6") - r("0.2")) / (r("0.6") - r("0.2"));
        assert_eq!(exact_threshold(&mut o, 0, 2, 0).unwrap().alpha_star, edge_31);
        assert_eq!(exact_threshold(&mut o, 0, 2, 1).unwrap().alpha_star, edge_32);
        assert_eq!(edge_31, r("1/2"));
        assert_eq!(edge_32, Rational::one());
    }

    #[test]
    fn threshold_detects_broken_precondition() {
        // both endpoints accepted: bisection collapses onto 0
        let mut o = single(&["1", "1"], "0.5", 10);
        assert!(matches!(
            exact_threshold(&mut o, 0, 0, 1),
            Err(Error::InternalLogic(_))
        ));
    }

    #[test]
    fn reconstruct_examples() {
        assert_eq!(
            rational_reconstruct(&r("0.598"), &r("0.602"), 10).unwrap(),
            r("3/5")
        );
        let half = r("1/2");
        let lo = &half - &r("1/400");
        assert_eq!(rational_reconstruct(&lo, &half, 10).unwrap(), half);
    }

    /// Brute force: every p/q with q <= q_max lying in [lo, hi].
    fn scan_candidates(lo: &Rational, hi: &Rational, q_max: i64) -> Vec<Rational> {
        let mut out = Vec::new();
        for q in 1..=q_max {
            for p in 0..=q {
                let c = Rational::ratio(p, q);
                if &c >= lo && &c <= hi && !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        out
    }

    #[test]
    fn reconstruct_matches_bruteforce_scan() {
        let hi = r("7/30");
        let lo = &hi - &r("1/250");
        let candidates = scan_candidates(&lo, &hi, 15);
        assert_eq!(candidates, vec![r("3/13")]);
        assert_eq!(rational_reconstruct(&lo, &hi, 15).unwrap(), candidates[0]);
    }

    #[test]
    fn reconstruct_without_candidate_fails() {
        let lo = r("1/7") + r("1/1000");
        let hi = r("1/7") + r("1/500");
        assert!(rational_reconstruct(&lo, &hi, 5).is_err());
    }

    #[test]
    fn warm_start_exact_hint_costs_two_queries() {
        let mut o = single(&["0", "1"], "0.6", 10);
        let tp = exact_threshold_pred(&mut o, 0, 0, 1, &r("3/5")).unwrap();
        assert_eq!(tp.alpha_star, r("3/5"));
        assert_eq!(o.ledger().total(), 2);
    }

    #[test]
    fn warm_start_worst_case() {
        let mut plain = single(&["0", "1"], "1", 10);
        assert_eq!(exact_threshold(&mut plain, 0, 0, 1).unwrap().alpha_star, Rational::one());
        let mut o = single(&["0", "1"], "1", 10);
        let tp = exact_threshold_pred(&mut o, 0, 0, 1, &Rational::zero()).unwrap();
        assert_eq!(tp.alpha_star, Rational::one());
        // 1 probe + at most 2j + 1 further queries with j = floor(log2(1 + d / (eps^2/2)))
        // = floor(log2(201)) = 7 for d = 1, eps = 1/10
        assert!(o.ledger().total() <= 2 + 2 * 7);
        assert!(o.ledger().total() <= 2 * plain.ledger().total() + 2);
    }

    #[test]
    fn warm_start_rejects_out_of_range_hint() {
        let mut o = single(&["0", "1"], "0.6", 10);
        assert!(exact_threshold_pred(&mut o, 0, 0, 1, &r("5/4")).is_err());
    }

    #[test]
    fn learn_worked_example_agents() {
        let mut o = Oracle::simulated(Arc::new(example_2_3()));
        let e1 = learn_hyperplane(&mut o, 0, None).unwrap();
        assert_eq!(
            e1.halfspace,
            LearnedHalfspace::Coeffs(vec![r("2"), r("1"), r("0")])
        );
        let e3 = learn_hyperplane(&mut o, 2, None).unwrap();
        assert_eq!(
            e3.halfspace,
            LearnedHalfspace::Coeffs(vec![r("0"), r("0"), r("8")])
        );
        assert!(o.ledger().agent(0) <= learn_budget(3, 10));
        assert!(o.ledger().agent(2) <= learn_budget(3, 10));
    }

    #[test]
    fn learn_trivial_agents() {
        let mut o = single(&["1", "1", "1"], "1", 10);
        assert_eq!(learn_hyperplane(&mut o, 0, None).unwrap().halfspace, LearnedHalfspace::AcceptAll);
        assert_eq!(o.ledger().total(), 3);
        let mut o = single(&["0", "0", "0"], "0.1", 10);
        assert_eq!(learn_hyperplane(&mut o, 0, None).unwrap().halfspace, LearnedHalfspace::RejectAll);
        assert_eq!(o.ledger().total(), 3);
    }

    #[test]
    fn learn_face_case() {
        // accepted vertices exactly on the threshold
        let mut o = single(&["0.5", "0.5", "0.2"], "0.5", 10);
        let e = learn_hyperplane(&mut o, 0, None).unwrap();
        assert_eq!(e.halfspace, LearnedHalfspace::Coeffs(vec![r("1"), r("1"), r("0")]));
        let inside = Lottery::parse_list("1/3,2/3,0").unwrap();
        let outside = Lottery::parse_list("1/3,1/3,1/3").unwrap();
        assert!(e.halfspace.accepts(&inside));
        assert!(!e.halfspace.accepts(&outside));
    }

    #[test]
    fn learn_with_warm_start_reports_error() {
        let mut o = Oracle::simulated(Arc::new(example_2_3()));
        let warm = Lottery::parse_list("0.25,0.60,0.15").unwrap();
        let e = learn_hyperplane(&mut o, 0, Some(&warm)).unwrap();
        assert_eq!(e.halfspace, LearnedHalfspace::Coeffs(vec![r("2"), r("1"), r("0")]));
        let err = e.projection_error.unwrap();
        assert_eq!(err.per_edge.len(), 2);
        // edge (e_3, e_1): projection 0.25/0.40 = 5/8 vs turning point 1/2
        assert_eq!(err.per_edge[&(2, 0)], r("1/8"));
        assert_eq!(err.max, err.per_edge.values().max().unwrap().clone());
    }
}
