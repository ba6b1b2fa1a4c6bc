//! Truncation policy shared by every infinite series in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesControl {
    pub tol: f64,
    pub max_terms: usize,
    pub consecutive_small: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl { tol: 1e-12, max_terms: 400, consecutive_small: 3 }
    }
}

impl SeriesControl {
    pub fn new(tol: f64, max_terms: usize) -> Result<Self> {
        let ctl = SeriesControl { tol, max_terms, ..Default::default() };
        ctl.validate()?;
        Ok(ctl)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_terms < 1 || self.consecutive_small < 1 {
            return Err(Error::Config(format!("invalid series control {self:?}")));
        }
        Ok(())
    }

    pub(crate) fn with_max_terms(&self, max_terms: usize) -> Self {
        SeriesControl { max_terms, ..*self }
    }
}

/// Running sum with the stopping rule: `consecutive_small` consecutive terms
/// below `tol * max(|sum|, max |term|)`.
#[derive(Debug, Clone)]
pub(crate) struct Accumulator {
    ctl: SeriesControl,
    sum: f64,
    max_abs: f64,
    small_run: usize,
    terms: usize,
    last: f64,
}

impl Accumulator {
    pub(crate) fn new(ctl: &SeriesControl) -> Self {
        Accumulator { ctl: *ctl, sum: 0.0, max_abs: 0.0, small_run: 0, terms: 0, last: 0.0 }
    }

    /// Adds a term; returns `true` once the series is declared converged.
    pub(crate) fn push(&mut self, term: f64) -> bool {
        self.sum += term;
        self.terms += 1;
        self.last = term;
        self.max_abs = self.max_abs.max(term.abs());
        let scale = self.sum.abs().max(self.max_abs);
        if term.abs() <= self.ctl.tol * scale || scale == 0.0 {
            self.small_run += 1;
        } else {
            self.small_run = 0;
        }
        self.small_run >= self.ctl.consecutive_small
    }

    pub(crate) fn exhausted(&self) -> bool {
        self.terms >= self.ctl.max_terms
    }

    pub(crate) fn terms(&self) -> usize {
        self.terms
    }

    pub(crate) fn last(&self) -> f64 {
        self.last
    }

    pub(crate) fn sum(&self) -> f64 {
        self.sum
    }

    /// Runs `term(j)` for j = 0, 1, ... until convergence or the term cap.
    pub(crate) fn run(ctl: &SeriesControl, mut term: impl FnMut(usize) -> f64) -> Result<Accumulator> {
        let mut acc = Accumulator::new(ctl);
        loop {
            if acc.exhausted() {
                return Err(Error::NonConvergence { terms: acc.terms, last: acc.last });
            }
            let j = acc.terms;
            if acc.push(term(j)) {
                return Ok(acc);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_series_stops() {
        let ctl = SeriesControl::default();
        let acc = Accumulator::run(&ctl, |j| 0.5f64.powi(j as i32)).unwrap();
        assert!((acc.sum() - 2.0).abs() < 1e-11);
        assert!(acc.terms() < 60);
    }

    #[test]
    fn harmonic_series_hits_cap() {
        let ctl = SeriesControl { max_terms: 50, ..Default::default() };
        let err = Accumulator::run(&ctl, |j| 1.0 / (j + 1) as f64).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { terms: 50, .. }));
    }

    #[test]
    fn all_zero_series_is_zero() {
        let acc = Accumulator::run(&SeriesControl::default(), |_| 0.0).unwrap();
        assert_eq!(acc.sum(), 0.0);
        assert_eq!(acc.terms(), 3);
    }

    #[test]
    fn invalid_control_rejected() {
        assert!(SeriesControl::new(0.0, 10).is_err());
        assert!(SeriesControl::new(1e-9, 0).is_err());
    }
}
