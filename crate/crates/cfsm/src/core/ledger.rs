use std::cell::Cell;

/// Counter of first-order oracle (FO) calls.
///
/// One FO is one evaluation of a single component gradient `∇f_j(x)`. Every
/// gradient evaluation routed through [`ComponentStream::gradient`] bills
/// exactly one FO; function-value evaluations are free. The count never
/// decreases.
///
/// The ledger uses interior mutability so solvers can share one ledger across
/// immutable borrows of the stream. It is intentionally not thread-safe: a
/// ledger belongs to exactly one run, and parallel runs each own their own.
///
/// [`ComponentStream::gradient`]: super::ComponentStream::gradient
#[derive(Debug, Default)]
pub struct FoLedger {
    count: Cell<u64>,
}

impl FoLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bill one gradient evaluation.
    pub fn tick(&self) {
        self.count.set(self.count.get() + 1);
    }

    /// Total FOs billed so far.
    pub fn count(&self) -> u64 {
        self.count.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_every_tick_exactly_once() {
        let ledger = FoLedger::new();
        assert_eq!(ledger.count(), 0);
        for expected in 1..=257u64 {
            ledger.tick();
            assert_eq!(ledger.count(), expected);
        }
    }
}
