use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::GatewayError;

/// Cumulative token accounting for one pipeline run.
///
/// Requests reserve their worst case up front and settle to actual usage
/// afterwards, so concurrent callers cannot jointly overrun the cap.
#[derive(Debug)]
pub struct TokenLedger {
    budget: Option<u64>,
    state: Mutex<LedgerState>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerTotals {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub requests: u64,
}

impl LedgerTotals {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Debug, Default)]
struct LedgerState {
    totals: LedgerTotals,
    reserved: u64,
}

#[derive(Debug)]
#[must_use]
pub struct Reservation {
    amount: u64,
}

impl TokenLedger {
    pub fn new(budget: Option<u64>) -> Self {
        Self {
            budget,
            state: Mutex::new(LedgerState::default()),
        }
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn totals(&self) -> LedgerTotals {
        self.state.lock().unwrap().totals
    }

    pub fn used(&self) -> u64 {
        self.totals().total()
    }

    pub fn remaining(&self) -> Option<u64> {
        let s = self.state.lock().unwrap();
        self.budget
            .map(|b| b.saturating_sub(s.totals.total() + s.reserved))
    }

    pub fn reserve(&self, amount: u64) -> Result<Reservation, GatewayError> {
        let mut s = self.state.lock().unwrap();
        if let Some(budget) = self.budget {
            let committed = s.totals.total() + s.reserved;
            if committed + amount > budget {
                return Err(GatewayError::BudgetExceeded {
                    requested: amount,
                    remaining: budget.saturating_sub(committed),
                });
            }
        }
        s.reserved += amount;
        Ok(Reservation { amount })
    }

    /// Releases a reservation without debiting (failed request).
    pub fn release(&self, r: Reservation) {
        let mut s = self.state.lock().unwrap();
        s.reserved -= r.amount;
    }

    pub fn settle(&self, r: Reservation, prompt_tokens: u64, completion_tokens: u64) {
        let mut s = self.state.lock().unwrap();
        s.reserved -= r.amount;
        s.totals.prompt_tokens += prompt_tokens;
        s.totals.completion_tokens += completion_tokens;
        s.totals.requests += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reservations_count_against_budget() {
        let l = TokenLedger::new(Some(100));
        let a = l.reserve(60).unwrap();
        assert!(matches!(
            l.reserve(50),
            Err(GatewayError::BudgetExceeded { requested: 50, remaining: 40 })
        ));
        l.settle(a, 10, 20);
        assert_eq!(l.used(), 30);
        assert_eq!(l.remaining(), Some(70));
        let b = l.reserve(70).unwrap();
        l.release(b);
        assert_eq!(l.totals().requests, 1);
    }

    #[test]
    fn unlimited() {
        let l = TokenLedger::new(None);
        let r = l.reserve(u64::MAX / 2).unwrap();
        l.settle(r, 1, 1);
        assert_eq!(l.remaining(), None);
    }
}
