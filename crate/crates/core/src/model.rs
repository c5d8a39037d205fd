//! Lotteries, agents and instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// A probability vector over the `m` alternatives.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Lottery {
    probs: Vec<Rational>,
}

impl Lottery {
    pub fn new(probs: Vec<Rational>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidLottery("no alternatives".into()));
        }
        if let Some((j, p)) = probs.iter().enumerate().find(|(_, p)| p.is_negative()) {
            return Err(Error::InvalidLottery(format!(
                "coordinate {j} is negative ({p})"
            )));
        }
        let total: Rational = probs.iter().sum();
        if total != Rational::one() {
            return Err(Error::InvalidLottery(format!(
                "coordinates sum to {total}, not 1"
            )));
        }
        Ok(Lottery { probs })
    }

    /// The pure lottery `e_j`.
    pub fn vertex(j: usize, m: usize) -> Result<Self> {
        if j >= m {
            return Err(Error::InvalidLottery(format!(
                "vertex {j} out of range for m = {m}"
            )));
        }
        let mut probs = vec![Rational::zero(); m];
        probs[j] = Rational::one();
        Ok(Lottery { probs })
    }

    pub fn m(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn get(&self, j: usize) -> &Rational {
        &self.probs[j]
    }

    pub fn into_probs(self) -> Vec<Rational> {
        self.probs
    }

    /// Parses a comma- or semicolon-separated list of rationals.
    pub fn parse_list(s: &str) -> Result<Self> {
        let probs = s
            .split([',', ';'])
            .map(|t| t.trim().parse())
            .collect::<Result<Vec<Rational>>>()?;
        Lottery::new(probs)
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.probs.iter().map(ToString::to_string).collect()
    }
}

impl<'de> Deserialize<'de> for Lottery {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let probs = Vec::<Rational>::deserialize(d)?;
        Lottery::new(probs).map_err(serde::de::Error::custom)
    }
}

/// One agent's utility vector and acceptance threshold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    #[serde(rename = "u")]
    pub utilities: Vec<Rational>,
    #[serde(rename = "tau")]
    pub threshold: Rational,
}

impl AgentSpec {
    pub fn new(utilities: Vec<Rational>, threshold: Rational) -> Self {
        AgentSpec {
            utilities,
            threshold,
        }
    }

    pub fn m(&self) -> usize {
        self.utilities.len()
    }

    pub fn accepts(&self, x: &Lottery) -> Result<bool> {
        Ok(expected_utility(self, x)? >= self.threshold)
    }

    fn validate(&self, m: usize, inv_epsilon: u64) -> std::result::Result<(), String> {
        if self.utilities.len() != m {
            return Err(format!(
                "has {} utilities, expected {m}",
                self.utilities.len()
            ));
        }
        for (j, u) in self.utilities.iter().enumerate() {
            if !u.in_unit_interval() {
                return Err(format!("utility {j} = {u} is outside [0, 1]"));
            }
            if !u.is_multiple_of_inv(inv_epsilon) {
                return Err(format!(
                    "utility {j} = {u} is not a multiple of 1/{inv_epsilon}"
                ));
            }
        }
        if !self.threshold.is_positive() || self.threshold > Rational::one() {
            return Err(format!("threshold {} is outside (0, 1]", self.threshold));
        }
        if !self.threshold.is_multiple_of_inv(inv_epsilon) {
            return Err(format!(
                "threshold {} is not a multiple of 1/{inv_epsilon}",
                self.threshold
            ));
        }
        Ok(())
    }
}

/// A validated problem instance: `m` alternatives, precision `1/inv_epsilon`,
/// and the (hidden) agents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Instance {
    m: usize,
    inv_epsilon: u64,
    agents: Vec<AgentSpec>,
}

impl Instance {
    pub fn new(m: usize, inv_epsilon: u64, agents: Vec<AgentSpec>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInstance("m must be positive".into()));
        }
        if inv_epsilon < 2 {
            return Err(Error::InvalidInstance(format!(
                "1/epsilon must be an integer >= 2, got {inv_epsilon}"
            )));
        }
        for (i, a) in agents.iter().enumerate() {
            a.validate(m, inv_epsilon)
                .map_err(|reason| Error::InvalidAgent { agent: i, reason })?;
        }
        Ok(Instance {
            m,
            inv_epsilon,
            agents,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn inv_epsilon(&self) -> u64 {
        self.inv_epsilon
    }

    pub fn epsilon(&self) -> Rational {
        Rational::ratio(1, self.inv_epsilon as i64)
    }

    pub fn agents(&self) -> &[AgentSpec] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> Result<&AgentSpec> {
        self.agents.get(i).ok_or(Error::AgentOutOfRange {
            agent: i,
            n: self.agents.len(),
        })
    }

    /// Whether every agent accepts `x`, evaluated directly from the hidden
    /// parameters (no oracle involved).
    pub fn unanimous(&self, x: &Lottery) -> Result<bool> {
        for a in &self.agents {
            if !a.accepts(x)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// First agent rejecting `x`, if any.
    pub fn first_rejecting(&self, x: &Lottery) -> Result<Option<usize>> {
        for (i, a) in self.agents.iter().enumerate() {
            if !a.accepts(x)? {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            m: usize,
            inv_epsilon: u64,
            agents: Vec<AgentSpec>,
        }
        let raw = Raw::deserialize(d)?;
        Instance::new(raw.m, raw.inv_epsilon, raw.agents).map_err(serde::de::Error::custom)
    }
}

/// The edge lottery `alpha * e_kprime + (1 - alpha) * e_k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgePoint {
    pub k: usize,
    pub kprime: usize,
    pub alpha: Rational,
}

impl EdgePoint {
    pub fn new(k: usize, kprime: usize, alpha: Rational) -> Self {
        EdgePoint { k, kprime, alpha }
    }
}

pub fn expected_utility(agent: &AgentSpec, x: &Lottery) -> Result<Rational> {
    if agent.m() != x.m() {
        return Err(Error::DimensionMismatch {
            expected: agent.m(),
            actual: x.m(),
        });
    }
    Ok(agent
        .utilities
        .iter()
        .zip(x.probs())
        .filter(|(_, p)| !p.is_zero())
        .map(|(u, p)| u * p)
        .sum())
}

pub fn edge_lottery(p: &EdgePoint, m: usize) -> Result<Lottery> {
    if p.k == p.kprime {
        return Err(Error::InvalidEdge(format!("k = k' = {}", p.k)));
    }
    if p.k >= m || p.kprime >= m {
        return Err(Error::InvalidEdge(format!(
            "endpoint ({}, {}) out of range for m = {m}",
            p.k, p.kprime
        )));
    }
    if !p.alpha.in_unit_interval() {
        return Err(Error::InvalidEdge(format!(
            "alpha = {} is outside [0, 1]",
            p.alpha
        )));
    }
    let mut probs = vec![Rational::zero(); m];
    probs[p.kprime] = p.alpha.clone();
    probs[p.k] = Rational::one() - &p.alpha;
    Ok(Lottery { probs })
}

/// `x_k' / (x_k + x_k')`, or `1/2` when both coordinates are zero.
pub fn pairwise_projection(x: &Lottery, k: usize, kprime: usize) -> Rational {
    let pair = x.get(k) + x.get(kprime);
    if pair.is_zero() {
        Rational::ratio(1, 2)
    } else {
        x.get(kprime) / &pair
    }
}
