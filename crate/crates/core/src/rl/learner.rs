use nalgebra::{Matrix4, RowVector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    actor_target, actor_update_with, converged, critic_target, critic_update_with, value,
    ActorWeights, CostParams, CriticWeights, ErrorWindow, Transition, W_UU_FLOOR,
};
use crate::error::{Error, Result};

/// How the approximation error scales the weight updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// Descent along the gradient of the squared error (signed error times regressor).
    #[default]
    Gradient,
    /// Regressor scaled by the squared error itself; sign-blind, kept for comparison only.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub alpha_a: f64,
    pub alpha_c: f64,
    /// Convergence threshold on the max-abs weight change.
    pub conv_threshold: f64,
    /// Number of successive changes that must stay under the threshold.
    pub window_l: usize,
    /// Iterations allowed before the weights are re-randomized.
    pub max_iters: usize,
    /// Half-range of the uniform weight initialization.
    pub init_scale: f64,
    pub rng_seed: u64,
    #[serde(default)]
    pub update_rule: UpdateRule,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            alpha_a: 0.01,
            alpha_c: 1e-6,
            conv_threshold: 1e-8,
            window_l: 20,
            max_iters: 6000,
            init_scale: 0.1,
            rng_seed: 0,
            update_rule: UpdateRule::Gradient,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.alpha_a) {
            return Err(Error::validation("learning.alpha_a", "must lie in (0, 1)"));
        }
        if !unit(self.alpha_c) {
            return Err(Error::validation("learning.alpha_c", "must lie in (0, 1)"));
        }
        if !(self.conv_threshold > 0.0 && self.conv_threshold.is_finite()) {
            return Err(Error::validation("learning.conv_threshold", "must be > 0"));
        }
        if self.window_l < 1 {
            return Err(Error::validation("learning.window_l", "must be >= 1"));
        }
        if self.max_iters < 1 {
            return Err(Error::validation("learning.max_iters", "must be >= 1"));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::validation("learning.init_scale", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LearnerStatus {
    pub iteration: usize,
    pub critic_converged: bool,
    pub actor_converged: bool,
    pub stopped: bool,
    pub reinitializations: usize,
}

/// Online actor-critic learner for one control axis.
///
/// Each [`step`](AxisLearner::step) is one pass of the value-iteration loop
/// on one observed transition. After both weight sequences settle the
/// learner stops and keeps acting with the frozen weights.
#[derive(Debug, Clone)]
pub struct AxisLearner {
    config: LearnerConfig,
    cost: CostParams,
    critic: CriticWeights,
    actor: ActorWeights,
    critic_history: Vec<Matrix4<f64>>,
    actor_history: Vec<RowVector3<f64>>,
    status: LearnerStatus,
    rng: ChaCha8Rng,
}

impl AxisLearner {
    /// `stream` separates learners sharing one seed (e.g. vessel and axis).
    pub fn new(config: LearnerConfig, cost: CostParams, stream: u64) -> Result<Self> {
        config.validate()?;
        cost.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        rng.set_stream(stream);
        let mut learner = Self {
            config,
            cost,
            critic: CriticWeights::identity(),
            actor: ActorWeights::zero(),
            critic_history: Vec::new(),
            actor_history: Vec::new(),
            status: LearnerStatus::default(),
            rng,
        };
        learner.randomize();
        Ok(learner)
    }

    /// Starts from explicit weights instead of random ones.
    pub fn with_weights(mut self, critic: CriticWeights, actor: ActorWeights) -> Self {
        self.critic = critic;
        self.actor = actor;
        self.reset_histories();
        self
    }

    pub fn critic(&self) -> &CriticWeights {
        &self.critic
    }

    pub fn actor(&self) -> &ActorWeights {
        &self.actor
    }

    pub fn status(&self) -> LearnerStatus {
        self.status
    }

    pub fn cost(&self) -> CostParams {
        self.cost
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn is_stopped(&self) -> bool {
        self.status.stopped
    }

    /// Control for a window under the current actor.
    pub fn control(&self, e: &ErrorWindow) -> f64 {
        self.actor.control(e)
    }

    /// Stops learning with the current weights.
    pub fn freeze(&mut self) {
        self.status.stopped = true;
    }

    /// One learning iteration on the observed transition `(E, u, E_next)`.
    /// Returns the control for `E_next` under the updated actor.
    pub fn step(&mut self, sample: &Transition) -> f64 {
        if self.status.stopped {
            return self.actor.control(&sample.e_next);
        }
        self.status.iteration += 1;
        let rule = self.config.update_rule;

        let u_next = self.actor.control(&sample.e_next);
        let target = critic_target(
            &sample.e_next,
            u_next,
            &sample.e,
            sample.u,
            &self.critic,
            &self.cost,
        );
        let u_hat = self.actor.control(&sample.e);
        let u_tilde = match actor_target(&sample.e, &self.critic) {
            Ok(u) => u,
            Err(_) => {
                self.reinitialize();
                return self.actor.control(&sample.e_next);
            }
        };

        let critic = critic_update_with(
            &self.critic,
            &sample.e,
            sample.u,
            target,
            self.config.alpha_c,
            rule,
        );
        let actor = actor_update_with(
            &self.actor,
            &sample.e,
            u_hat,
            u_tilde,
            self.config.alpha_a,
            rule,
        );
        let finite = critic.0.iter().chain(actor.0.iter()).all(|v| v.is_finite());
        if !finite || critic.w_uu().is_nan() || critic.w_uu() <= W_UU_FLOOR {
            self.reinitialize();
            return self.actor.control(&sample.e_next);
        }
        self.critic = critic;
        self.actor = actor;
        self.push_history();

        let window = self.config.window_l;
        if self.status.iteration > window {
            let threshold = self.config.conv_threshold;
            if converged(&self.critic_history, threshold, window) {
                self.status.critic_converged = true;
            }
            if converged(&self.actor_history, threshold, window) {
                self.status.actor_converged = true;
            }
            if self.status.critic_converged && self.status.actor_converged {
                self.status.stopped = true;
            }
        }

        if !self.status.stopped && self.status.iteration >= self.config.max_iters {
            self.reinitialize();
        }
        self.actor.control(&sample.e_next)
    }

    /// Squared-error diagnostics for a transition, without learning.
    pub fn errors(&self, sample: &Transition) -> (f64, Option<f64>) {
        let u_next = self.actor.control(&sample.e_next);
        let target = critic_target(
            &sample.e_next,
            u_next,
            &sample.e,
            sample.u,
            &self.critic,
            &self.cost,
        );
        let critic_err = value(&sample.e, sample.u, &self.critic) - target;
        let actor_err = actor_target(&sample.e, &self.critic)
            .ok()
            .map(|u_tilde| self.actor.control(&sample.e) - u_tilde);
        (critic_err, actor_err)
    }

    fn reinitialize(&mut self) {
        self.status.reinitializations += 1;
        self.randomize();
    }

    fn randomize(&mut self) {
        let s = self.config.init_scale;
        let mut w = Matrix4::zeros();
        for i in 0..4 {
            for j in i..4 {
                let v = self.rng.gen_range(-s..=s);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        w[(3, 3)] = 1.0;
        let k = RowVector3::from_fn(|_, _| self.rng.gen_range(-s..=s));
        self.critic = CriticWeights(w);
        self.actor = ActorWeights(k);
        self.reset_histories();
    }

    fn reset_histories(&mut self) {
        self.status.iteration = 0;
        self.status.critic_converged = false;
        self.status.actor_converged = false;
        self.status.stopped = false;
        self.critic_history.clear();
        self.actor_history.clear();
        self.push_history();
    }

    fn push_history(&mut self) {
        let cap = self.config.window_l + 2;
        self.critic_history.push(self.critic.0);
        self.actor_history.push(self.actor.0);
        if self.critic_history.len() > cap {
            self.critic_history.remove(0);
            self.actor_history.remove(0);
        }
    }
}
