//! Value iteration over a fixed set of observed transitions.
//!
//! Each iteration fits the critic to the Bellman targets of every sample at
//! once (the minimizer of the summed squared critic error) and then sets the
//! actor to the critic's greedy gain. This removes the sampling noise of the
//! online learner, so the value sequence itself can be inspected.

use nalgebra::{DMatrix, DVector, Matrix4};
use serde::{Deserialize, Serialize};

use super::{
    actor_target, critic_target, value, ActorWeights, CostParams, CriticWeights, ErrorWindow,
};
use crate::error::{Error, Result};

/// One observed step: window `e`, applied control `u`, resulting window `e_next`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub e: ErrorWindow,
    pub u: f64,
    pub e_next: ErrorWindow,
}

const UPPER: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

fn features(e: &ErrorWindow, u: f64) -> [f64; 10] {
    let z = e.augmented(u);
    UPPER.map(|(i, j)| {
        if i == j {
            0.5 * z[i] * z[i]
        } else {
            z[i] * z[j]
        }
    })
}

#[derive(Debug, Clone)]
pub struct BatchValueIteration {
    samples: Vec<Transition>,
    cost: CostParams,
    critic: CriticWeights,
    actor: ActorWeights,
}

impl BatchValueIteration {
    pub fn new(samples: Vec<Transition>, cost: CostParams, critic: CriticWeights) -> Result<Self> {
        if samples.len() < UPPER.len() {
            return Err(Error::validation("samples", "need at least 10 transitions"));
        }
        let actor = greedy_gain(&critic)?;
        Ok(Self {
            samples,
            cost,
            critic,
            actor,
        })
    }

    pub fn critic(&self) -> &CriticWeights {
        &self.critic
    }

    pub fn actor(&self) -> &ActorWeights {
        &self.actor
    }

    /// `V(E0, K E0)` under the current weights.
    pub fn probe_value(&self, e0: &ErrorWindow) -> f64 {
        value(e0, self.actor.control(e0), &self.critic)
    }

    pub fn iterate(&mut self) -> Result<()> {
        let n = self.samples.len();
        let mut design = DMatrix::zeros(n, UPPER.len());
        let mut targets = DVector::zeros(n);
        for (row, s) in self.samples.iter().enumerate() {
            for (col, f) in features(&s.e, s.u).iter().enumerate() {
                design[(row, col)] = *f;
            }
            let u_next = self.actor.control(&s.e_next);
            targets[row] = critic_target(&s.e_next, u_next, &s.e, s.u, &self.critic, &self.cost);
        }
        let theta = design
            .svd(true, true)
            .solve(&targets, 1e-14)
            .map_err(|e| Error::validation("samples", e))?;
        let mut w = Matrix4::zeros();
        for (k, (i, j)) in UPPER.iter().enumerate() {
            w[(*i, *j)] = theta[k];
            w[(*j, *i)] = theta[k];
        }
        self.critic = CriticWeights(w);
        self.actor = greedy_gain(&self.critic)?;
        Ok(())
    }
}

fn greedy_gain(w: &CriticWeights) -> Result<ActorWeights> {
    let basis = [
        ErrorWindow::new(1.0, 0.0, 0.0),
        ErrorWindow::new(0.0, 1.0, 0.0),
        ErrorWindow::new(0.0, 0.0, 1.0),
    ];
    let mut k = [0.0; 3];
    for (slot, e) in k.iter_mut().zip(basis.iter()) {
        *slot = actor_target(e, w)?;
    }
    Ok(ActorWeights::new(k[0], k[1], k[2]))
}
