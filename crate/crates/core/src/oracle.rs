//! Membership-query oracle with query accounting.
//!
//! Solvers only learn about agents through [`Oracle::query`]. Every call is
//! counted, per agent and per [`QueryCategory`]; repeated questions are not
//! cached. The oracle either answers from a hidden [`Instance`] or asks a
//! human on a terminal.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Lottery, Instance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryCategory {
    PureVertex,
    ThresholdSearch,
    Verification,
    AdviceCheck,
}

impl QueryCategory {
    pub const ALL: [QueryCategory; 4] = [
        QueryCategory::PureVertex,
        QueryCategory::ThresholdSearch,
        QueryCategory::Verification,
        QueryCategory::AdviceCheck,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QueryCategory::PureVertex => "pure_vertex",
            QueryCategory::ThresholdSearch => "threshold_search",
            QueryCategory::Verification => "verification",
            QueryCategory::AdviceCheck => "advice_check",
        }
    }
}

impl fmt::Display for QueryCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub seq: u64,
    pub agent: usize,
    pub category: QueryCategory,
    pub lottery: Lottery,
    pub answer: bool,
}

/// Query counters. `total == sum(per_agent) == sum(per_category)` holds after
/// every recorded query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryLedger {
    total: u64,
    per_agent: Vec<u64>,
    per_category: [u64; 4],
    trace: Option<Vec<TraceEntry>>,
    trace_cap: usize,
    trace_dropped: u64,
}

impl QueryLedger {
    pub fn new(n: usize) -> Self {
        QueryLedger {
            total: 0,
            per_agent: vec![0; n],
            per_category: [0; 4],
            trace: None,
            trace_cap: 0,
            trace_dropped: 0,
        }
    }

    /// Rebuilds a ledger from serialized counters (no trace).
    pub fn from_counts(per_agent: Vec<u64>, per_category: [u64; 4]) -> Result<Self> {
        let total: u64 = per_agent.iter().sum();
        if total != per_category.iter().sum::<u64>() {
            return Err(Error::InvalidParams(
                "per-agent and per-category query counts disagree".into(),
            ));
        }
        Ok(QueryLedger {
            total,
            per_agent,
            per_category,
            trace: None,
            trace_cap: 0,
            trace_dropped: 0,
        })
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn agent(&self, i: usize) -> u64 {
        self.per_agent.get(i).copied().unwrap_or(0)
    }

    pub fn per_agent(&self) -> &[u64] {
        &self.per_agent
    }

    pub fn category(&self, cat: QueryCategory) -> u64 {
        self.per_category[cat.index()]
    }

    pub fn per_category(&self) -> [u64; 4] {
        self.per_category
    }

    pub fn trace(&self) -> Option<&[TraceEntry]> {
        self.trace.as_deref()
    }

    /// Number of queries that were not traced because the cap was reached.
    pub fn trace_dropped(&self) -> u64 {
        self.trace_dropped
    }

    pub fn is_consistent(&self) -> bool {
        self.total == self.per_agent.iter().sum::<u64>()
            && self.total == self.per_category.iter().sum::<u64>()
    }

    fn enable_trace(&mut self, cap: usize) {
        self.trace = Some(Vec::new());
        self.trace_cap = cap;
    }

    fn record(&mut self, agent: usize, x: &Lottery, cat: QueryCategory, answer: bool) {
        self.total += 1;
        self.per_agent[agent] += 1;
        self.per_category[cat.index()] += 1;
        if let Some(trace) = self.trace.as_mut() {
            if trace.len() < self.trace_cap {
                trace.push(TraceEntry {
                    seq: self.total,
                    agent,
                    category: cat,
                    lottery: x.clone(),
                    answer,
                });
            } else {
                self.trace_dropped += 1;
            }
        }
    }

    /// Writes the trace as CSV: `seq,agent,category,lottery,answer`, with the
    /// lottery as semicolon-joined `p/q` coordinates.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["seq", "agent", "category", "lottery", "answer"])?;
        for e in self.trace.iter().flatten() {
            w.write_record([
                e.seq.to_string(),
                e.agent.to_string(),
                e.category.to_string(),
                e.lottery.to_strings().join(";"),
                e.answer.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Counters only; the trace is written separately.
#[derive(Serialize, Deserialize)]
struct LedgerCounts {
    total: u64,
    per_agent: Vec<u64>,
    per_category: std::collections::BTreeMap<QueryCategory, u64>,
}

impl Serialize for QueryLedger {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LedgerCounts {
            total: self.total,
            per_agent: self.per_agent.clone(),
            per_category: QueryCategory::ALL
                .iter()
                .map(|&c| (c, self.category(c)))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QueryLedger {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = LedgerCounts::deserialize(d)?;
        let mut per_category = [0; 4];
        for (c, v) in raw.per_category {
            per_category[c.index()] = v;
        }
        let ledger = QueryLedger::from_counts(raw.per_agent, per_category)
            .map_err(serde::de::Error::custom)?;
        if ledger.total != raw.total {
            return Err(serde::de::Error::custom("total disagrees with per-agent counts"));
        }
        Ok(ledger)
    }
}

enum Mode {
    Simulated(Arc<Instance>),
    Interactive {
        input: Box<dyn BufRead>,
        output: Box<dyn Write>,
    },
}

/// The only channel through which solvers observe agent preferences.
pub struct Oracle {
    mode: Mode,
    n: usize,
    m: usize,
    inv_epsilon: u64,
    ledger: QueryLedger,
}

impl Oracle {
    pub fn simulated(instance: Arc<Instance>) -> Self {
        let (n, m, inv_epsilon) = (instance.n(), instance.m(), instance.inv_epsilon());
        Oracle {
            mode: Mode::Simulated(instance),
            n,
            m,
            inv_epsilon,
            ledger: QueryLedger::new(n),
        }
    }

    /// An oracle answered by a person: each query is printed to `output` and
    /// a `y`/`n` answer is read from `input`.
    pub fn interactive(
        n: usize,
        m: usize,
        inv_epsilon: u64,
        input: Box<dyn BufRead>,
        output: Box<dyn Write>,
    ) -> Result<Self> {
        if m == 0 || inv_epsilon < 2 {
            return Err(Error::InvalidParams(
                "interactive oracle needs m >= 1 and 1/epsilon >= 2".into(),
            ));
        }
        Ok(Oracle {
            mode: Mode::Interactive { input, output },
            n,
            m,
            inv_epsilon,
            ledger: QueryLedger::new(n),
        })
    }

    pub fn with_trace(mut self, cap: usize) -> Self {
        self.ledger.enable_trace(cap);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn inv_epsilon(&self) -> u64 {
        self.inv_epsilon
    }

    pub fn is_interactive(&self) -> bool {
        matches!(self.mode, Mode::Interactive { .. })
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn snapshot_ledger(&self) -> QueryLedger {
        self.ledger.clone()
    }

    /// Asks whether agent `i` accepts `x`.
    pub fn query(&mut self, i: usize, x: &Lottery, cat: QueryCategory) -> Result<bool> {
        if i >= self.n {
            return Err(Error::AgentOutOfRange { agent: i, n: self.n });
        }
        if x.m() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                actual: x.m(),
            });
        }
        let answer = match &mut self.mode {
            Mode::Simulated(inst) => inst.agents()[i].accepts(x)?,
            Mode::Interactive { input, output } => ask_human(input, output, i, x)?,
        };
        self.ledger.record(i, x, cat, answer);
        Ok(answer)
    }
}

fn ask_human(input: &mut dyn BufRead, output: &mut dyn Write, i: usize, x: &Lottery) -> Result<bool> {
    writeln!(output, "Agent {i}: is this lottery acceptable?")?;
    for (j, p) in x.probs().iter().enumerate() {
        writeln!(output, "  alternative {j}: {p} ({})", p.percent_string(2))?;
    }
    loop {
        write!(output, "[y/n] ")?;
        output.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "input closed before an answer was given",
            )));
        }
        match line.trim().to_ascii_lowercase().as_str() {
            "y" | "yes" => return Ok(true),
            "n" | "no" => return Ok(false),
            _ => writeln!(output, "please answer y or n")?,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::examples::{example_2_1, example_2_3};
    use crate::model::{edge_lottery, expected_utility, EdgePoint};
    use crate::rational::Rational;
    use crate::model::AgentSpec;
    use proptest::prelude::*;

    fn lot(v: &[&str]) -> Lottery {
        Lottery::new(v.iter().map(|s| s.parse().unwrap()).collect()).unwrap()
    }

    #[test]
    fn worked_example_answers() {
        let mut o = Oracle::simulated(Arc::new(example_2_3()));
        let e1 = Lottery::vertex(0, 3).unwrap();
        assert!(!o.query(1, &e1, QueryCategory::Verification).unwrap());
        let x = lot(&["0.25", "0.60", "0.15"]);
        assert!(o.query(2, &x, QueryCategory::Verification).unwrap());
        assert_eq!(o.ledger().total(), 2);
        assert!(o.ledger().is_consistent());
    }

    #[test]
    fn saturated_agent_accepts_everything() {
        let one = Rational::one();
        let a = AgentSpec::new(vec![one.clone(); 3], Rational::ratio(1, 10));
        let inst = Instance::new(3, 10, vec![a]).unwrap();
        let mut o = Oracle::simulated(Arc::new(inst));
        for x in [lot(&["1/3", "1/3", "1/3"]), Lottery::vertex(2, 3).unwrap()] {
            assert!(o.query(0, &x, QueryCategory::Verification).unwrap());
        }
    }

    #[test]
    fn counters_start_at_zero_and_count() {
        let mut o = Oracle::simulated(Arc::new(example_2_1()));
        let fresh = o.snapshot_ledger();
        assert_eq!(fresh.total(), 0);
        assert_eq!(fresh.per_agent(), &[0, 0]);
        assert_eq!(fresh.per_category(), [0; 4]);
        o.query(0, &Lottery::vertex(0, 2).unwrap(), QueryCategory::PureVertex)
            .unwrap();
        let snap = o.snapshot_ledger();
        assert_eq!(snap.total(), 1);
        assert_eq!(snap.agent(0), 1);
        assert_eq!(snap.category(QueryCategory::PureVertex), 1);
        // snapshot does not mutate
        assert_eq!(o.snapshot_ledger(), snap);
    }

    #[test]
    fn repeated_queries_are_all_counted() {
        let mut o = Oracle::simulated(Arc::new(example_2_1()));
        let x = lot(&["1/2", "1/2"]);
        for _ in 0..5 {
            o.query(1, &x, QueryCategory::Verification).unwrap();
        }
        assert_eq!(o.ledger().agent(1), 5);
    }

    #[test]
    fn out_of_range_agent_is_an_error() {
        let mut o = Oracle::simulated(Arc::new(example_2_1()));
        let x = lot(&["1/2", "1/2"]);
        assert!(matches!(
            o.query(2, &x, QueryCategory::Verification),
            Err(Error::AgentOutOfRange { agent: 2, n: 2 })
        ));
        assert_eq!(o.ledger().total(), 0);
        assert!(o.query(0, &Lottery::vertex(0, 3).unwrap(), QueryCategory::Verification).is_err());
    }

    #[test]
    fn trace_is_capped_and_exported() {
        let mut o = Oracle::simulated(Arc::new(example_2_1())).with_trace(2);
        let x = lot(&["3/5", "2/5"]);
        for i in [0, 1, 0] {
            o.query(i, &x, QueryCategory::Verification).unwrap();
        }
        let trace = o.ledger().trace().unwrap();
        assert_eq!(trace.len(), 2);
        assert_eq!(o.ledger().trace_dropped(), 1);
        let mut buf = Vec::new();
        o.ledger().write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "seq,agent,category,lottery,answer");
        assert_eq!(lines[1], "1,0,verification,3/5;2/5,true");
        assert_eq!(lines[2], "2,1,verification,3/5;2/5,false");
    }

    #[test]
    fn interactive_mode_reads_answers() {
        let input = std::io::Cursor::new(b"maybe\ny\nno\n".to_vec());
        let mut o = Oracle::interactive(2, 2, 10, Box::new(input), Box::new(std::io::sink())).unwrap();
        let x = lot(&["1/4", "3/4"]);
        assert!(o.query(0, &x, QueryCategory::Verification).unwrap());
        assert!(!o.query(1, &x, QueryCategory::Verification).unwrap());
        assert!(o.query(1, &x, QueryCategory::Verification).is_err());
        assert_eq!(o.ledger().total(), 2);
    }

    proptest! {
        #[test]
        fn simulated_answers_match_direct_evaluation(
            w in prop::collection::vec(0i64..10, 3),
            i in 0usize..3,
        ) {
            let total: i64 = w.iter().sum();
            prop_assume!(total > 0);
            let x = Lottery::new(w.iter().map(|&v| Rational::ratio(v, total)).collect()).unwrap();
            let inst = Arc::new(example_2_3());
            let mut o = Oracle::simulated(inst.clone());
            let a = o.query(i, &x, QueryCategory::Verification).unwrap();
            let b = o.query(i, &x, QueryCategory::Verification).unwrap();
            let agent = &inst.agents()[i];
            prop_assert_eq!(a, b);
            prop_assert_eq!(a, expected_utility(agent, &x).unwrap() >= agent.threshold);
            prop_assert!(o.ledger().is_consistent());
        }

        #[test]
        fn answers_are_monotone_along_edges(i in 0usize..3, k in 0usize..3, kp in 0usize..3) {
            prop_assume!(k != kp);
            let inst = Arc::new(example_2_3());
            let mut o = Oracle::simulated(inst);
            let rej = !o.query(i, &Lottery::vertex(k, 3).unwrap(), QueryCategory::PureVertex).unwrap();
            let acc = o.query(i, &Lottery::vertex(kp, 3).unwrap(), QueryCategory::PureVertex).unwrap();
            prop_assume!(rej && acc);
            let mut seen_true = false;
            for s in 0..=40 {
                let x = edge_lottery(&EdgePoint::new(k, kp, Rational::ratio(s, 40)), 3).unwrap();
                let ans = o.query(i, &x, QueryCategory::ThresholdSearch).unwrap();
                prop_assert!(!(seen_true && !ans));
                seen_true |= ans;
            }
        }
    }
}
