
use super::ModeBelief;
use crate::error::{Error, Result};
use crate::observers::ContactMode;

/// Threshold-and-dwell decision rule turning mode probabilities into a discrete mode.
///
/// The argmax mode replaces the held mode only once its probability has reached
/// `threshold` on `dwell` consecutive ticks.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeClassifier {
    pub threshold: f64,
    pub dwell: usize,
    current: ContactMode,
    candidate: Option<(ContactMode, usize)>,
}

impl Default for ModeClassifier {
    fn default() -> Self {
        Self::new(0.6, 2).expect("default classifier is valid")
    }
}

impl ModeClassifier {
    pub fn new(threshold: f64, dwell: usize) -> Result<Self> {
        if !(threshold > 1.0 / 3.0 && threshold < 1.0) {
            return Err(Error::config("classifier.threshold", "must lie in (1/3, 1)"));
        }
        if dwell == 0 {
            return Err(Error::config("classifier.dwell", "must be at least 1 tick"));
        }
        Ok(Self {
            threshold,
            dwell,
            current: ContactMode::Swing,
            candidate: None,
        })
    }

    pub fn with_initial(mut self, mode: ContactMode) -> Self {
        self.current = mode;
        self.candidate = None;
        self
    }

    pub fn mode(&self) -> ContactMode {
        self.current
    }

    pub fn classify(&mut self, belief: &ModeBelief) -> ContactMode {
        let (k, p) = belief.argmax();
        let top = ContactMode::from_index(k).expect("three modes");
        if top == self.current || p < self.threshold {
            self.candidate = None;
            return self.current;
        }
        let count = match self.candidate {
            Some((mode, n)) if mode == top => n + 1,
            _ => 1,
        };
        if count >= self.dwell {
            self.current = top;
            self.candidate = None;
        } else {
            self.candidate = Some((top, count));
        }
        self.current
    }
}
