use std::sync::atomic::{AtomicUsize, Ordering};

use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::models::Classifier;
use crate::Result;

/// Classifier wrapper that counts scored rows against a budget.
pub struct CountingClassifier<'a> {
    inner: &'a dyn Classifier,
    calls: AtomicUsize,
    budget: usize,
}

impl<'a> CountingClassifier<'a> {
    pub fn new(inner: &'a dyn Classifier, budget: usize) -> Self {
        CountingClassifier {
            inner,
            calls: AtomicUsize::new(0),
            budget,
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn remaining(&self) -> usize {
        self.budget.saturating_sub(self.calls())
    }

    /// Whether `rows` more evaluations fit in the budget.
    pub fn affords(&self, rows: usize) -> bool {
        self.remaining() >= rows
    }
}

impl Classifier for CountingClassifier<'_> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn target_score(&self) -> f64 {
        self.inner.target_score()
    }

    fn logits(&self, tape: &mut Tape, x: Var) -> Result<Var, AutodiffError> {
        self.calls.fetch_add(tape.shape(x).0, Ordering::Relaxed);
        self.inner.logits(tape, x)
    }

    fn scores(&self, x: &Tensor) -> Result<Vec<f64>> {
        self.calls.fetch_add(x.rows(), Ordering::Relaxed);
        self.inner.scores(x)
    }
}
