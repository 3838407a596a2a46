//! Query accounting. Every oracle invocation an attack makes is recorded
//! here, attributed to the phase that issued it. The ledger is the single
//! mutation point for counts and is safe to update from parallel batches.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

/// What an oracle query was spent on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    /// Classifying the original input (and the target anchor, if any).
    Setup,
    /// Escalating-noise search for the first adversarial point.
    InitialSearch,
    /// Sign probes used for gradient estimation.
    Estimation,
    /// Bisections and line scans that pin candidates onto the boundary.
    Search,
    /// Off-boundary step checks in the targeted walk.
    Step,
    /// Queries made outside an attack loop (counting wrappers, utilities).
    Other,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Setup => "setup",
            Phase::InitialSearch => "initial_search",
            Phase::Estimation => "estimation",
            Phase::Search => "search",
            Phase::Step => "step",
            Phase::Other => "other",
        }
    }
}

/// Thread-safe counter of oracle queries with a budget and per-phase totals.
#[derive(Debug)]
pub struct QueryLedger {
    budget: u64,
    used: AtomicU64,
    per_phase: Mutex<BTreeMap<&'static str, u64>>,
}

impl QueryLedger {
    pub fn new(budget: u64) -> Self {
        QueryLedger {
            budget,
            used: AtomicU64::new(0),
            per_phase: Mutex::new(BTreeMap::new()),
        }
    }

    /// Records `count` queries against `phase`.
    pub fn record(&self, phase: Phase, count: u64) {
        if count == 0 {
            return;
        }
        self.used.fetch_add(count, Ordering::Relaxed);
        let mut phases = self.per_phase.lock().expect("ledger lock poisoned");
        *phases.entry(phase.name()).or_insert(0) += count;
    }

    pub fn used(&self) -> u64 {
        self.used.load(Ordering::Relaxed)
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// Queries left before the budget is reached; zero once exceeded.
    pub fn remaining(&self) -> u64 {
        self.budget.saturating_sub(self.used())
    }

    /// Whether `count` more queries would still fit inside the budget.
    pub fn can_afford(&self, count: u64) -> bool {
        self.used().saturating_add(count) <= self.budget
    }

    /// Per-phase totals keyed by phase name, in deterministic order.
    pub fn phase_totals(&self) -> BTreeMap<String, u64> {
        self.per_phase
            .lock()
            .expect("ledger lock poisoned")
            .iter()
            .map(|(&k, &v)| (k.to_string(), v))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn records_accumulate_per_phase() {
        let ledger = QueryLedger::new(100);
        ledger.record(Phase::Setup, 1);
        ledger.record(Phase::Estimation, 10);
        ledger.record(Phase::Estimation, 5);
        assert_eq!(ledger.used(), 16);
        assert_eq!(ledger.remaining(), 84);
        let phases = ledger.phase_totals();
        assert_eq!(phases["estimation"], 15);
        assert_eq!(phases["setup"], 1);
    }

    #[test]
    fn affordability_tracks_budget_edge() {
        let ledger = QueryLedger::new(10);
        assert!(ledger.can_afford(10));
        ledger.record(Phase::Other, 10);
        assert!(!ledger.can_afford(1));
        assert!(ledger.can_afford(0));
        ledger.record(Phase::Other, 5); // overshoot is representable
        assert_eq!(ledger.used(), 15);
        assert_eq!(ledger.remaining(), 0);
    }

    #[test]
    fn concurrent_increments_are_exact() {
        let ledger = Arc::new(QueryLedger::new(0));
        let threads: Vec<_> = (0..8)
            .map(|_| {
                let l = Arc::clone(&ledger);
                std::thread::spawn(move || {
                    for _ in 0..1000 {
                        l.record(Phase::Estimation, 1);
                    }
                })
            })
            .collect();
        for t in threads {
            t.join().unwrap();
        }
        assert_eq!(ledger.used(), 8000);
        assert_eq!(ledger.phase_totals()["estimation"], 8000);
    }
}
