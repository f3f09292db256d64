use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::MdpLayout;

/// Tabular action values over (state, action).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    layout: Arc<MdpLayout>,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(layout: Arc<MdpLayout>) -> Self {
        let n = layout.num_pairs();
        QTable {
            layout,
            values: vec![0.0; n],
        }
    }

    /// Values drawn i.i.d. uniform on [0, 1).
    pub fn random<R: Rng + ?Sized>(layout: Arc<MdpLayout>, rng: &mut R) -> Self {
        let values = (0..layout.num_pairs())
            .map(|_| rng.random::<f64>())
            .collect();
        QTable { layout, values }
    }

    pub fn layout(&self) -> &Arc<MdpLayout> {
        &self.layout
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[self.layout.sa(state, action)]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        let sa = self.layout.sa(state, action);
        self.values[sa] = value;
    }

    /// Overwrites this table with `other`'s values.
    #[inline]
    pub fn copy_from(&mut self, other: &QTable) {
        self.values.copy_from_slice(&other.values);
    }

    /// max over available actions.
    #[inline]
    pub fn max_value(&self, state: usize) -> f64 {
        self.layout
            .actions(state)
            .iter()
            .map(|&a| self.get(state, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action, ties broken uniformly at random.
    pub fn greedy<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        let mut best = f64::NEG_INFINITY;
        let mut chosen = 0;
        let mut ties = 0u32;
        for &a in self.layout.actions(state) {
            let q = self.get(state, a);
            if q > best {
                best = q;
                chosen = a;
                ties = 1;
            } else if q == best {
                ties += 1;
                if rng.random_range(0..ties) == 0 {
                    chosen = a;
                }
            }
        }
        chosen
    }

    /// Standard Q-learning update. `next` is `None` when the step ended the
    /// episode, in which case nothing is bootstrapped.
    #[inline]
    pub fn learn(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next: Option<usize>,
        rate: f64,
        discount: f64,
    ) {
        let bootstrap = next.map_or(0.0, |s| discount * self.max_value(s));
        let sa = self.layout.sa(state, action);
        self.values[sa] += rate * (reward + bootstrap - self.values[sa]);
    }

    /// Samples an action from the Boltzmann distribution over the available
    /// actions' values at `temperature`.
    #[inline]
    pub fn softmax_sample<R: Rng + ?Sized>(
        &self,
        state: usize,
        temperature: f64,
        rng: &mut R,
    ) -> usize {
        let actions = self.layout.actions(state);
        if actions.len() == 1 {
            return actions[0];
        }
        let max = self.max_value(state);
        let mut weights = [0.0f64; 16];
        let mut heap;
        let w: &mut [f64] = if actions.len() <= weights.len() {
            &mut weights[..actions.len()]
        } else {
            heap = vec![0.0; actions.len()];
            &mut heap
        };
        let mut total = 0.0;
        for (wi, &a) in w.iter_mut().zip(actions) {
            *wi = ((self.get(state, a) - max) / temperature).exp();
            total += *wi;
        }
        let mut u = rng.random::<f64>() * total;
        for (wi, &a) in w.iter().zip(actions) {
            if u < *wi {
                return a;
            }
            u -= *wi;
        }
        actions[actions.len() - 1]
    }
}
