//! Geometric latency ranges `L_j` and their top delays.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RangeScheme {
    pub epsilon: f64,
    pub mu_bar: f64,
    pub lambda_min: f64,
    pub max_index: u32,
}

/// Where a budget falls relative to a scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Placement {
    Below,
    In(u32),
    Above,
}

/// Largest `j` with `lambda_min (1+eps)^(j+1) < mu_bar`, or `None` when no
/// range fits.
pub fn scheme_size(mu_bar: f64, lambda_min: f64, epsilon: f64) -> Option<u32> {
    if !(epsilon > 0.0) || !(lambda_min > 0.0) || lambda_min * (1.0 + epsilon) >= mu_bar {
        return None;
    }
    let mut j = 0u32;
    while lambda_min * (1.0 + epsilon).powi(j as i32 + 2) < mu_bar {
        j += 1;
    }
    Some(j)
}

/// Number of ranges in the scheme (`J + 1`, or 0 when degenerate).
pub fn range_count(mu_bar: f64, lambda_min: f64, epsilon: f64) -> u32 {
    scheme_size(mu_bar, lambda_min, epsilon).map_or(0, |j| j + 1)
}

impl RangeScheme {
    pub fn new(epsilon: f64, mu_bar: f64, lambda_min: f64) -> Result<Self> {
        let max_index = scheme_size(mu_bar, lambda_min, epsilon).ok_or(Error::NoValidRange {
            capacity: lambda_min * (1.0 + epsilon),
            mu_bar,
        })?;
        Ok(Self { epsilon, mu_bar, lambda_min, max_index })
    }

    /// Load threshold `lambda_min (1+eps)^k`.
    pub fn capacity(&self, k: u32) -> f64 {
        self.lambda_min * (1.0 + self.epsilon).powi(k as i32)
    }

    fn endpoint(&self, k: u32) -> f64 {
        1.0 / (self.mu_bar - self.capacity(k))
    }

    fn check(&self, j: u32) -> Result<()> {
        if j > self.max_index {
            return Err(Error::IndexOutOfScheme { index: j, max_index: self.max_index });
        }
        Ok(())
    }

    /// `(lower, upper]` endpoints of `L_j`; `L_0` is closed on the left.
    pub fn range_bounds(&self, j: u32) -> Result<(f64, f64)> {
        self.check(j)?;
        Ok((self.endpoint(j), self.endpoint(j + 1)))
    }

    /// Relaxed delay of every top job in `L_j`.
    pub fn top_delay(&self, j: u32) -> Result<f64> {
        self.check(j)?;
        Ok(self.endpoint(j + 1))
    }

    pub fn min_budget(&self) -> f64 {
        self.endpoint(0)
    }

    pub fn max_budget(&self) -> f64 {
        self.endpoint(self.max_index + 1)
    }

    fn contains(&self, j: u32, delay: f64) -> bool {
        let (lo, hi) = (self.endpoint(j), self.endpoint(j + 1));
        delay <= hi && (delay > lo || (j == 0 && delay == lo))
    }

    pub fn classify(&self, delay: f64) -> Placement {
        if delay < self.min_budget() {
            return Placement::Below;
        }
        if delay > self.max_budget() {
            return Placement::Above;
        }
        let x = (self.mu_bar - 1.0 / delay) / self.lambda_min;
        let guess = if x > 1.0 { (x.ln() / self.epsilon.ln_1p()).floor() } else { 0.0 };
        let mut j = (guess.max(0.0) as u32).min(self.max_index);
        while j > 0 && delay <= self.endpoint(j) {
            j -= 1;
        }
        while j < self.max_index && delay > self.endpoint(j + 1) {
            j += 1;
        }
        debug_assert!(self.contains(j, delay));
        Placement::In(j)
    }

    /// The unique `j` with `delay` in `L_j`.
    pub fn range_index(&self, delay: f64) -> Result<u32> {
        match self.classify(delay) {
            Placement::In(j) => Ok(j),
            Placement::Below => Err(Error::BudgetBelowMinimum { budget: delay, minimum: self.min_budget() }),
            Placement::Above => Err(Error::BudgetAboveScheme { budget: delay, maximum: self.max_budget() }),
        }
    }

    /// Like [`range_index`](Self::range_index) but loose budgets map to the
    /// last range and (never expected) tight ones to the first.
    pub fn clamped_index(&self, delay: f64) -> u32 {
        match self.classify(delay) {
            Placement::In(j) => j,
            Placement::Below => 0,
            Placement::Above => self.max_index,
        }
    }

    /// Reference lookup by scanning every range.
    pub fn range_index_linear(&self, delay: f64) -> Option<u32> {
        (0..=self.max_index).find(|&j| self.contains(j, delay))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(eps: f64) -> RangeScheme {
        RangeScheme::new(eps, 100.0, 1.0).unwrap()
    }

    #[test]
    fn bounds_and_top_delay() {
        let (lo, hi) = s(1.0).range_bounds(3).unwrap();
        assert_eq!((lo, hi), (1.0 / 92.0, 1.0 / 84.0));
        assert!((lo - 0.010870).abs() < 1e-6 && (hi - 0.011905).abs() < 1e-6);
        assert_eq!(s(1.0).range_bounds(0).unwrap(), (1.0 / 99.0, 1.0 / 98.0));
        assert_eq!(s(1.0).top_delay(3).unwrap(), 1.0 / 84.0);
        assert_eq!(s(1.0).top_delay(0).unwrap(), 1.0 / 98.0);
        assert!(matches!(s(1.0).range_bounds(6), Err(Error::IndexOutOfScheme { index: 6, max_index: 5 })));
        assert!(s(1.0).top_delay(9).is_err());
        for j in 0..=5 {
            let (lo, _) = s(1.0).range_bounds(j).unwrap();
            assert!(s(1.0).top_delay(j).unwrap() > lo);
        }
    }

    #[test]
    fn index_examples() {
        let sc = s(1.0);
        assert_eq!(sc.range_index(0.011).unwrap(), 3);
        assert_eq!(sc.range_index(1.0 / 99.0).unwrap(), 0);
        let (_, hi2) = sc.range_bounds(2).unwrap();
        assert_eq!(sc.range_index(hi2).unwrap(), 2);
        assert!(matches!(sc.range_index(0.0101), Err(Error::BudgetBelowMinimum { .. })));
        assert!(matches!(sc.range_index(1.0), Err(Error::BudgetAboveScheme { .. })));
        assert_eq!(sc.clamped_index(1.0), 5);
        assert_eq!(sc.clamped_index(0.001), 0);
    }

    #[test]
    fn scheme_sizes() {
        assert_eq!(scheme_size(100.0, 1.0, 1.0), Some(5));
        // 1.5^11 ~ 86.5 < 100 <= 1.5^12, so J = 10; this also respects J < log_1.5(100) - 1.
        assert_eq!(scheme_size(100.0, 1.0, 0.5), Some(10));
        assert_eq!(scheme_size(2.0, 1.0, 1.0), None);
        assert_eq!(range_count(2.0, 1.0, 1.0), 0);
        assert!(matches!(RangeScheme::new(1.0, 2.0, 1.0), Err(Error::NoValidRange { .. })));
        assert_eq!(scheme_size(3.0, 1.0, 1.0), Some(0));
        let j = s(1.0).max_index;
        assert!(s(1.0).capacity(j + 1) < 100.0 && s(1.0).capacity(j + 2) >= 100.0);
        assert!((j as f64) < 100f64.log2() - 1.0);
    }

    proptest! {
        #[test]
        fn lookup_matches_scan(
            eps in 0.01f64..3.0,
            ratio in 2.5f64..1e4,
            lambda_min in 0.1f64..50.0,
            u in 0.0f64..1.0,
        ) {
            let mu_bar = lambda_min * ratio;
            prop_assume!(lambda_min * (1.0 + eps) < mu_bar);
            let sc = RangeScheme::new(eps, mu_bar, lambda_min).unwrap();
            let d = sc.min_budget() + u * (sc.max_budget() - sc.min_budget());
            prop_assert_eq!(sc.range_index(d).ok(), sc.range_index_linear(d));
            let j = (u * sc.max_index as f64) as u32;
            let (lo, hi) = sc.range_bounds(j).unwrap();
            prop_assert_eq!(sc.range_index(hi).unwrap(), j);
            prop_assert_eq!(sc.range_index(lo).unwrap(), j.saturating_sub(1));
        }

        #[test]
        fn index_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let sc = s(0.5);
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            let span = sc.max_budget() - sc.min_budget();
            let ia = sc.range_index(sc.min_budget() + a * span).unwrap();
            let ib = sc.range_index(sc.min_budget() + b * span).unwrap();
            prop_assert!(ia <= ib);
        }
    }
}
