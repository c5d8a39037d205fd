//! Instance construction: worked examples, random generators, the hard
//! families behind the lower bounds, and quantization of real-valued inputs.

pub mod examples;
pub mod io;

use num_traits::One;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{expected_utility, AgentSpec, Instance, Lottery};
use crate::rational::Rational;
use crate::solvers::Advice;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GeneratorSpec {
    Example2_1,
    Example2_3,
    /// Random agents that all accept a planted positive grid lottery.
    RandomFeasible { n: usize, m: usize, inv_epsilon: u64, seed: u64 },
    /// Random agents plus a planted pair with incompatible demands.
    RandomInfeasible { n: usize, m: usize, inv_epsilon: u64, seed: u64 },
    /// One agent per alternative; the feasible set is exactly `{x}`.
    GridSingleton { x: Lottery, inv_epsilon: u64 },
    /// [`GeneratorSpec::GridSingleton`] followed by agents that accept
    /// everything, `n` agents in total.
    DummyPadded { x: Lottery, inv_epsilon: u64, n: usize },
    /// A single agent accepting only `e_j`.
    PointMass { m: usize, j: usize, inv_epsilon: u64 },
    /// Two agents on two alternatives whose only common lottery has
    /// coordinate `1 / (q - t)` on the second alternative.
    NearThreshold { q: u64, delta: Rational, t: u64 },
}

/// What a generator knows about its own output. Used by tests only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundTruth {
    /// Some (not necessarily lex-maximal) unanimously acceptable lottery.
    Feasible { lottery: Lottery },
    Infeasible,
}

impl GroundTruth {
    pub fn is_feasible(&self) -> bool {
        matches!(self, GroundTruth::Feasible { .. })
    }
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub instance: Instance,
    pub truth: GroundTruth,
    pub advice: Option<Advice>,
    pub warnings: Vec<String>,
}

impl Generated {
    fn plain(instance: Instance, truth: GroundTruth) -> Self {
        Generated {
            instance,
            truth,
            advice: None,
            warnings: Vec::new(),
        }
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    match spec {
        GeneratorSpec::Example2_1 => Ok(Generated::plain(
            examples::example_2_1(),
            GroundTruth::Infeasible,
        )),
        GeneratorSpec::Example2_3 => Ok(Generated::plain(
            examples::example_2_3(),
            GroundTruth::Feasible {
                lottery: Lottery::new(vec![
                    Rational::ratio(1, 4),
                    Rational::ratio(3, 5),
                    Rational::ratio(3, 20),
                ])?,
            },
        )),
        &GeneratorSpec::RandomFeasible { n, m, inv_epsilon, seed } => {
            random_feasible(n, m, inv_epsilon, seed)
        }
        &GeneratorSpec::RandomInfeasible { n, m, inv_epsilon, seed } => {
            random_infeasible(n, m, inv_epsilon, seed)
        }
        GeneratorSpec::GridSingleton { x, inv_epsilon } => grid_singleton(x, *inv_epsilon, x.m()),
        GeneratorSpec::DummyPadded { x, inv_epsilon, n } => grid_singleton(x, *inv_epsilon, *n),
        &GeneratorSpec::PointMass { m, j, inv_epsilon } => {
            if j >= m {
                return Err(Error::InvalidParams(format!("alternative {j} out of range for m = {m}")));
            }
            let u = (0..m).map(|k| Rational::from_integer((k == j) as i64)).collect();
            let inst = Instance::new(m, inv_epsilon, vec![AgentSpec::new(u, Rational::one())])?;
            Ok(Generated::plain(
                inst,
                GroundTruth::Feasible {
                    lottery: Lottery::vertex(j, m)?,
                },
            ))
        }
        GeneratorSpec::NearThreshold { q, delta, t } => near_threshold(*q, delta, *t),
    }
}

fn check_dims(n: usize, m: usize, inv_epsilon: u64) -> Result<()> {
    if m == 0 || inv_epsilon < 2 {
        return Err(Error::InvalidParams(
            "need m >= 1 and 1/epsilon >= 2".into(),
        ));
    }
    if (m as u64) > inv_epsilon {
        return Err(Error::InvalidParams(format!(
            "a positive grid lottery needs m <= 1/epsilon, got m = {m}, 1/epsilon = {inv_epsilon}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParams("need at least one agent".into()));
    }
    Ok(())
}

/// Uniform composition of `inv_epsilon` into `m` positive parts.
fn random_grid_point(rng: &mut ChaCha8Rng, m: usize, inv_epsilon: u64) -> Result<Lottery> {
    let mut cuts: Vec<u64> = rand::seq::index::sample(rng, inv_epsilon as usize - 1, m - 1)
        .into_iter()
        .map(|c| c as u64 + 1)
        .collect();
    cuts.sort_unstable();
    let mut prev = 0;
    let mut parts = Vec::with_capacity(m);
    for c in cuts.into_iter().chain(std::iter::once(inv_epsilon)) {
        parts.push(Rational::ratio((c - prev) as i64, inv_epsilon as i64));
        prev = c;
    }
    Lottery::new(parts)
}

fn random_utilities(rng: &mut ChaCha8Rng, m: usize, inv_epsilon: u64) -> Vec<Rational> {
    let q = inv_epsilon as i64;
    (0..m).map(|_| Rational::ratio(rng.gen_range(0..=q), q)).collect()
}

/// A random agent accepting `x`: threshold is the planted utility rounded
/// down to the grid, minus a small random slack.
fn agent_accepting(rng: &mut ChaCha8Rng, x: &Lottery, inv_epsilon: u64) -> Result<AgentSpec> {
    let q = inv_epsilon as i64;
    loop {
        let u = random_utilities(rng, x.m(), inv_epsilon);
        let probe = AgentSpec::new(u.clone(), Rational::one());
        let value = expected_utility(&probe, x)?;
        let top = (&value * &Rational::from_integer(q)).floor();
        let top: i64 = top.try_into().map_err(|_| Error::InternalLogic("utility overflow".into()))?;
        if top < 1 {
            continue;
        }
        let slack = rng.gen_range(0..=2.min(top - 1));
        return Ok(AgentSpec::new(u, Rational::ratio(top - slack, q)));
    }
}

fn random_feasible(n: usize, m: usize, inv_epsilon: u64, seed: u64) -> Result<Generated> {
    check_dims(n, m, inv_epsilon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_grid_point(&mut rng, m, inv_epsilon)?;
    let agents = (0..n)
        .map(|_| agent_accepting(&mut rng, &x, inv_epsilon))
        .collect::<Result<Vec<_>>>()?;
    let instance = Instance::new(m, inv_epsilon, agents)?;
    Ok(Generated {
        instance,
        truth: GroundTruth::Feasible { lottery: x.clone() },
        advice: Some(Advice::lottery(x)),
        warnings: Vec::new(),
    })
}

fn random_infeasible(n: usize, m: usize, inv_epsilon: u64, seed: u64) -> Result<Generated> {
    if n < 2 || m < 2 {
        return Err(Error::InvalidParams(
            "an opposing pair needs n >= 2 and m >= 2".into(),
        ));
    }
    check_dims(n, m, inv_epsilon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = inv_epsilon as i64;
    let mut agents = Vec::with_capacity(n);
    for _ in 0..n - 2 {
        let u = random_utilities(&mut rng, m, inv_epsilon);
        let tau = Rational::ratio(rng.gen_range(1..=q), q);
        agents.push(AgentSpec::new(u, tau));
    }
    // x_a >= s eps and x_b >= (q - s + 1) eps cannot both hold
    let mut alts: Vec<usize> = (0..m).collect();
    alts.shuffle(&mut rng);
    let (a, b) = (alts[0], alts[1]);
    let s = rng.gen_range(1..=q);
    let unit = |j: usize| (0..m).map(|k| Rational::from_integer((k == j) as i64)).collect();
    let mut pair = vec![
        AgentSpec::new(unit(a), Rational::ratio(s, q)),
        AgentSpec::new(unit(b), Rational::ratio(q - s + 1, q)),
    ];
    for spec in pair.drain(..) {
        let at = rng.gen_range(0..=agents.len());
        agents.insert(at, spec);
    }
    Ok(Generated::plain(
        Instance::new(m, inv_epsilon, agents)?,
        GroundTruth::Infeasible,
    ))
}

fn grid_singleton(x: &Lottery, inv_epsilon: u64, n: usize) -> Result<Generated> {
    let m = x.m();
    check_dims(n, m, inv_epsilon)?;
    if n < m {
        return Err(Error::InvalidParams(format!(
            "padded instance needs n >= m, got n = {n}, m = {m}"
        )));
    }
    for (j, p) in x.probs().iter().enumerate() {
        if !p.is_positive() || !p.is_multiple_of_inv(inv_epsilon) {
            return Err(Error::InvalidParams(format!(
                "coordinate {j} = {p} is not a positive multiple of 1/{inv_epsilon}"
            )));
        }
    }
    let mut warnings = Vec::new();
    // the lower-bound counting argument assumes m <= (1/eps)^(1/2)
    if (m as u128) * (m as u128) > inv_epsilon as u128 {
        warnings.push(format!(
            "m = {m} exceeds sqrt(1/epsilon) = sqrt({inv_epsilon}); outside the lower-bound regime"
        ));
    }
    let mut agents: Vec<AgentSpec> = (0..m)
        .map(|i| {
            let u = (0..m).map(|k| Rational::from_integer((k == i) as i64)).collect();
            AgentSpec::new(u, x.get(i).clone())
        })
        .collect();
    agents.extend((m..n).map(|_| AgentSpec::new(vec![Rational::one(); m], Rational::one())));
    Ok(Generated {
        instance: Instance::new(m, inv_epsilon, agents)?,
        truth: GroundTruth::Feasible { lottery: x.clone() },
        advice: None,
        warnings,
    })
}

/// Number of admissible shifts `t` in the near-threshold family:
/// `min(floor(q/2), floor(delta q^2) + 1)`.
pub fn near_threshold_count(q: u64, delta: &Rational) -> Result<u64> {
    if q < 2 {
        return Err(Error::InvalidParams("near-threshold family needs q >= 2".into()));
    }
    if delta.is_negative() {
        return Err(Error::InvalidParams("delta must be non-negative".into()));
    }
    let q2 = Rational::from_integer((q * q) as i64);
    let spread: u64 = (delta * &q2)
        .floor()
        .try_into()
        .map_err(|_| Error::InvalidParams("delta too large".into()))?;
    Ok((q / 2).min(spread + 1))
}

fn near_threshold(q: u64, delta: &Rational, t: u64) -> Result<Generated> {
    let count = near_threshold_count(q, delta)?;
    if t >= count {
        return Err(Error::InvalidParams(format!(
            "t = {t} out of range; this family has t in 0..{count}"
        )));
    }
    let qi = q as i64;
    let q_t = qi - t as i64;
    let alpha = |s: i64| Rational::ratio(1, qi - s);
    let agents = vec![
        AgentSpec::new(
            vec![Rational::ratio(q_t, qi), Rational::zero()],
            Rational::ratio(q_t - 1, qi),
        ),
        AgentSpec::new(
            vec![Rational::zero(), Rational::ratio(q_t, qi)],
            Rational::ratio(1, qi),
        ),
    ];
    let alpha_t = alpha(t as i64);
    let truth = Lottery::new(vec![Rational::one() - &alpha_t, alpha_t])?;
    let alpha_hat = (alpha(0) + alpha(count as i64 - 1)) / Rational::from_integer(2);
    let hint = Lottery::new(vec![Rational::one() - &alpha_hat, alpha_hat])?;
    Ok(Generated {
        instance: Instance::new(2, q, agents)?,
        truth: GroundTruth::Feasible { lottery: truth },
        advice: Some(Advice::lottery(hint)),
        warnings: Vec::new(),
    })
}

/// Nearest multiple of `1/inv_epsilon`, ties rounded up.
fn round_to_grid(v: &Rational, inv_epsilon: u64) -> Rational {
    let q = Rational::from_integer(inv_epsilon as i64);
    let k = (v * &q + Rational::ratio(1, 2)).floor();
    Rational::from(k) / q
}

/// Rounds every utility and threshold to the `epsilon` grid. Thresholds that
/// would round to zero become `epsilon`.
pub fn quantize(raw: &[AgentSpec], epsilon: &Rational) -> Result<Instance> {
    if !epsilon.is_positive() || !epsilon.numer().is_one() {
        return Err(Error::InvalidParams(format!(
            "epsilon must be 1/k for an integer k >= 2, got {epsilon}"
        )));
    }
    let inv_epsilon: u64 = epsilon
        .denom()
        .try_into()
        .map_err(|_| Error::InvalidParams("1/epsilon too large".into()))?;
    let m = raw.first().map_or(0, AgentSpec::m);
    let mut agents = Vec::with_capacity(raw.len());
    for (i, a) in raw.iter().enumerate() {
        let bad = |reason: String| Error::InvalidAgent { agent: i, reason };
        if a.m() != m {
            return Err(bad(format!("expected {m} utilities, got {}", a.m())));
        }
        if let Some(u) = a.utilities.iter().find(|u| !u.in_unit_interval()) {
            return Err(bad(format!("utility {u} outside [0, 1]")));
        }
        if !a.threshold.is_positive() || a.threshold > Rational::one() {
            return Err(bad(format!("threshold {} outside (0, 1]", a.threshold)));
        }
        let u = a.utilities.iter().map(|u| round_to_grid(u, inv_epsilon)).collect();
        let mut tau = round_to_grid(&a.threshold, inv_epsilon);
        if tau.is_zero() {
            tau = epsilon.clone();
        }
        agents.push(AgentSpec::new(u, tau));
    }
    Instance::new(m.max(1), inv_epsilon, agents)
}
