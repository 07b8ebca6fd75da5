use std::collections::VecDeque;

use crate::linalg::vector::{axpy, dot};
use crate::Real;

/// Stored search directions. Each direction carries one vector per slot (for
/// example `p`, `q` and `W q`) plus its `δ`.
#[derive(Debug)]
pub(crate) struct DirectionSet<T> {
    slots: Vec<VecDeque<Vec<T>>>,
    delta: VecDeque<T>,
    window: Option<usize>,
}

impl<T: Real> DirectionSet<T> {
    /// `window = None` keeps every direction; `Some(k)` orthogonalizes against
    /// the last `k` only.
    pub fn new(n_slots: usize, window: Option<usize>) -> Self {
        Self {
            slots: (0..n_slots).map(|_| VecDeque::new()).collect(),
            delta: VecDeque::new(),
            window,
        }
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn clear(&mut self) {
        for s in &mut self.slots {
            s.clear();
        }
        self.delta.clear();
    }

    /// Indices taking part in the next orthogonalization.
    pub fn active(&self) -> std::ops::Range<usize> {
        let len = self.len();
        match self.window {
            None => 0..len,
            Some(k) => len.saturating_sub(k)..len,
        }
    }

    pub fn push(&mut self, vectors: Vec<Vec<T>>) {
        debug_assert_eq!(vectors.len(), self.slots.len());
        for (slot, v) in self.slots.iter_mut().zip(vectors) {
            slot.push_back(v);
        }
        self.delta.push_back(T::zero());
        // the newest direction is always needed for the next step
        let keep = self.window.map(|k| k.max(1));
        if let Some(keep) = keep {
            while self.len() > keep {
                for s in &mut self.slots {
                    s.pop_front();
                }
                self.delta.pop_front();
            }
        }
    }

    pub fn set_last_delta(&mut self, delta: T) {
        *self.delta.back_mut().expect("a direction was pushed") = delta;
    }

    pub fn delta(&self, j: usize) -> T {
        self.delta[j]
    }

    pub fn get(&self, slot: usize, j: usize) -> &[T] {
        &self.slots[slot][j]
    }

    pub fn last(&self, slot: usize) -> &[T] {
        self.slots[slot].back().expect("a direction was pushed")
    }

    /// Second classical Gram-Schmidt pass on a freshly orthogonalized
    /// direction. `new` holds one vector per slot; `primal`/`dual` name the
    /// slots whose pairing gives the inner product (`q` and `W q`). The
    /// correction coefficients are added to `beta`. Returns whether a pass
    /// was made.
    pub fn reorthogonalize(&self, primal: usize, dual: usize, new: &mut [Vec<T>], beta: &mut [T]) -> bool {
        let range = self.active();
        if range.is_empty() {
            return false;
        }
        let norm_new = dot(&new[primal], &new[dual]).max(T::zero()).sqrt();
        if norm_new == T::zero() {
            return false;
        }
        let coeffs: Vec<T> = range.clone().map(|j| dot(&self.slots[dual][j], &new[primal])).collect();
        let loss = coeffs
            .iter()
            .zip(range.clone())
            .map(|(&c, j)| c.abs() / (self.delta[j].sqrt() * norm_new))
            .fold(T::zero(), T::max);
        if !(loss > T::lit(super::REORTH_THRESHOLD)) {
            return false;
        }
        let scaled: Vec<T> = coeffs.iter().zip(range).map(|(&c, j)| c / self.delta[j]).collect();
        for (slot, v) in new.iter_mut().enumerate() {
            self.subtract(slot, &scaled, v);
        }
        for (b, s) in beta.iter_mut().zip(&scaled) {
            *b += *s;
        }
        true
    }

    /// `target -= Σ_j coeffs[k] · slot[j]` over the active range.
    pub fn subtract(&self, slot: usize, coeffs: &[T], target: &mut [T]) {
        for (c, j) in coeffs.iter().zip(self.active()) {
            axpy(-*c, &self.slots[slot][j], target);
        }
    }
}
