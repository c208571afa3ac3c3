//! Model-free actor-critic value iteration for one scalar control axis.
//!
//! The critic approximates a quadratic value `V(E, u) = 1/2 z' W z` over
//! `z = (e_k, e_{k-1}, e_{k-2}, u)`; the actor is a linear gain `u = K E`.
//! Both are trained by gradient descent on their squared approximation errors.

mod batch;
mod learner;
mod riccati;

pub use batch::{BatchValueIteration, Transition};
pub use learner::{AxisLearner, LearnerConfig, LearnerStatus, UpdateRule};
pub use riccati::{model_weights, riccati_oracle, RiccatiSolution};

use nalgebra::{Matrix3, Matrix4, RowVector3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this the critic's control block is treated as singular.
pub const W_UU_FLOOR: f64 = 1e-9;

/// The three most recent tracking errors on one axis, newest first.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorWindow {
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
}

impl ErrorWindow {
    pub const ZERO: Self = Self {
        e0: 0.0,
        e1: 0.0,
        e2: 0.0,
    };

    pub fn new(e0: f64, e1: f64, e2: f64) -> Self {
        Self { e0, e1, e2 }
    }

    /// A window holding the same error three times.
    pub fn filled(e: f64) -> Self {
        Self::new(e, e, e)
    }

    /// Shifts in a new error, dropping the oldest.
    pub fn pushed(&self, e: f64) -> Self {
        Self::new(e, self.e0, self.e1)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.e0 * factor, self.e1 * factor, self.e2 * factor)
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.e0, self.e1, self.e2)
    }

    pub fn augmented(&self, u: f64) -> Vector4<f64> {
        Vector4::new(self.e0, self.e1, self.e2, u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub q: Matrix3<f64>,
    pub r: f64,
}

impl CostParams {
    pub fn new(q: Matrix3<f64>, r: f64) -> Result<Self> {
        let cp = Self { q, r };
        cp.validate()?;
        Ok(cp)
    }

    /// `Q = q_scale * I`.
    pub fn isotropic(q_scale: f64, r: f64) -> Result<Self> {
        Self::new(Matrix3::identity() * q_scale, r)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.q - self.q.transpose()).abs().max() > 1e-12 {
            return Err(Error::validation("learning.q", "must be symmetric"));
        }
        if self.q.cholesky().is_none() {
            return Err(Error::validation("learning.q", "must be positive definite"));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::validation("learning.r", "must be > 0"));
        }
        Ok(())
    }
}

/// Symmetric 4x4 critic matrix with blocks `W_EE` (3x3), `W_Eu`, `W_uE`, `W_uu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticWeights(pub Matrix4<f64>);

impl CriticWeights {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn w_ee(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn w_ue(&self) -> RowVector3<f64> {
        self.0.fixed_view::<1, 3>(3, 0).into_owned()
    }

    pub fn w_eu(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn w_uu(&self) -> f64 {
        self.0[(3, 3)]
    }

    pub fn asymmetry(&self) -> f64 {
        (self.0 - self.0.transpose()).abs().max()
    }

    /// Row-major entries, for logs.
    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for (i, v) in out.iter_mut().enumerate() {
            *v = self.0[(i / 4, i % 4)];
        }
        out
    }
}

/// Actor gain row `K`, so that `u = K E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorWeights(pub RowVector3<f64>);

impl ActorWeights {
    pub fn zero() -> Self {
        Self(RowVector3::zeros())
    }

    pub fn new(k0: f64, k1: f64, k2: f64) -> Self {
        Self(RowVector3::new(k0, k1, k2))
    }

    pub fn control(&self, e: &ErrorWindow) -> f64 {
        (self.0 * e.as_vector())[0]
    }
}

/// `1/2 (E' Q E + R u^2)`.
pub fn stage_cost(e: &ErrorWindow, u: f64, cp: &CostParams) -> f64 {
    let ev = e.as_vector();
    0.5 * (ev.dot(&(cp.q * ev)) + cp.r * u * u)
}

/// `1/2 z' W z` with `z = (E, u)`.
pub fn value(e: &ErrorWindow, u: f64, w: &CriticWeights) -> f64 {
    let z = e.augmented(u);
    0.5 * z.dot(&(w.0 * z))
}

/// Greedy control of the critic: `-(W_uE E) / W_uu`.
pub fn actor_target(e: &ErrorWindow, w: &CriticWeights) -> Result<f64> {
    let w_uu = w.w_uu();
    if w_uu.is_nan() || w_uu <= W_UU_FLOOR {
        return Err(Error::NonInvertible { w_uu });
    }
    Ok(-(w.w_ue() * e.as_vector())[0] / w_uu)
}

/// One-step Bellman target `U(E, u) + V(E_next, u_next)`.
pub fn critic_target(
    e_next: &ErrorWindow,
    u_next: f64,
    e: &ErrorWindow,
    u: f64,
    w: &CriticWeights,
    cp: &CostParams,
) -> f64 {
    stage_cost(e, u, cp) + value(e_next, u_next, w)
}

/// Gradient step on `1/2 (V(E, u) - target)^2` followed by symmetrization.
pub fn critic_update(
    w: &CriticWeights,
    e: &ErrorWindow,
    u: f64,
    target: f64,
    alpha_c: f64,
) -> CriticWeights {
    critic_update_with(w, e, u, target, alpha_c, UpdateRule::Gradient)
}

pub(crate) fn critic_update_with(
    w: &CriticWeights,
    e: &ErrorWindow,
    u: f64,
    target: f64,
    alpha_c: f64,
    rule: UpdateRule,
) -> CriticWeights {
    let err = value(e, u, w) - target;
    let z = e.augmented(u);
    let stepped = match rule {
        UpdateRule::Gradient => w.0 - (z * z.transpose()) * (alpha_c * err * 0.5),
        UpdateRule::Literal => w.0 - (z * z.transpose()) * (alpha_c * 0.5 * err * err),
    };
    CriticWeights((stepped + stepped.transpose()) * 0.5)
}

/// Gradient step on `1/2 (u_hat - u_tilde)^2` with `u_hat = K E`.
pub fn actor_update(
    k: &ActorWeights,
    e: &ErrorWindow,
    u_hat: f64,
    u_tilde: f64,
    alpha_a: f64,
) -> ActorWeights {
    actor_update_with(k, e, u_hat, u_tilde, alpha_a, UpdateRule::Gradient)
}

pub(crate) fn actor_update_with(
    k: &ActorWeights,
    e: &ErrorWindow,
    u_hat: f64,
    u_tilde: f64,
    alpha_a: f64,
    rule: UpdateRule,
) -> ActorWeights {
    let err = u_hat - u_tilde;
    let scale = match rule {
        UpdateRule::Gradient => alpha_a * err,
        UpdateRule::Literal => alpha_a * 0.5 * err * err,
    };
    ActorWeights(k.0 - e.as_vector().transpose() * scale)
}

/// Largest absolute element.
pub fn max_abs<const R: usize, const C: usize>(m: &nalgebra::SMatrix<f64, R, C>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// True iff the last `window + 1` successive differences in `history` all
/// have max-abs element `<= threshold`. Needs at least `window + 2` entries.
pub fn converged<const R: usize, const C: usize>(
    history: &[nalgebra::SMatrix<f64, R, C>],
    threshold: f64,
    window: usize,
) -> bool {
    let needed = window + 2;
    if history.len() < needed {
        return false;
    }
    history[history.len() - needed..]
        .windows(2)
        .all(|pair| max_abs(&(pair[1] - pair[0])) <= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn table_cost() -> CostParams {
        CostParams::isotropic(1e-4, 0.01).unwrap()
    }

    #[test]
    fn stage_cost_examples() {
        let cp = table_cost();
        assert_abs_diff_eq!(
            stage_cost(&ErrorWindow::new(100.0, 0.0, 0.0), 0.0, &cp),
            0.5,
            epsilon = 1e-12
        );
        assert_eq!(stage_cost(&ErrorWindow::ZERO, 0.0, &cp), 0.0);
        assert_abs_diff_eq!(
            stage_cost(&ErrorWindow::ZERO, 10.0, &cp),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn cost_params_validation() {
        assert!(CostParams::isotropic(-1.0, 1.0).is_err());
        assert!(CostParams::isotropic(1.0, 0.0).is_err());
        let mut q = Matrix3::identity();
        q[(0, 1)] = 0.5;
        assert!(CostParams::new(q, 1.0).is_err());
    }

    #[test]
    fn value_examples() {
        let w = CriticWeights::identity();
        assert_eq!(value(&ErrorWindow::new(1.0, 0.0, 0.0), 0.0, &w), 0.5);
        assert_eq!(value(&ErrorWindow::filled(1.0), 1.0, &w), 2.0);
        assert_eq!(value(&ErrorWindow::ZERO, 0.0, &w), 0.0);
    }

    fn critic_with_gain_row(w_ue: [f64; 3], w_uu: f64) -> CriticWeights {
        let mut m = Matrix4::identity();
        for (i, v) in w_ue.iter().enumerate() {
            m[(3, i)] = *v;
            m[(i, 3)] = *v;
        }
        m[(3, 3)] = w_uu;
        CriticWeights(m)
    }

    #[test]
    fn actor_target_examples() {
        let w = critic_with_gain_row([1.0, 0.0, 0.0], 1.0);
        assert_eq!(
            actor_target(&ErrorWindow::new(2.0, 1.0, 0.0), &w).unwrap(),
            -2.0
        );
        let w0 = critic_with_gain_row([0.0; 3], 1.0);
        assert_eq!(
            actor_target(&ErrorWindow::new(5.0, -3.0, 2.0), &w0).unwrap(),
            0.0
        );
        let singular = critic_with_gain_row([1.0, 0.0, 0.0], 0.0);
        assert!(matches!(
            actor_target(&ErrorWindow::filled(1.0), &singular),
            Err(Error::NonInvertible { .. })
        ));
    }

    #[test]
    fn actor_target_minimizes_value() {
        // positive semidefinite: the (e0, u) block is [[1, 1], [1, 1]]
        let w = critic_with_gain_row([1.0, 0.0, 0.0], 1.0);
        let e = ErrorWindow::new(2.0, -1.0, 0.5);
        let u = actor_target(&e, &w).unwrap();
        let best = value(&e, u, &w);
        assert!(best <= value(&e, u + 0.1, &w));
        assert!(best <= value(&e, u - 0.1, &w));
    }

    #[test]
    fn critic_target_examples() {
        let cp = table_cost();
        let w = CriticWeights::identity();
        let e = ErrorWindow::new(100.0, 0.0, 0.0);
        assert_abs_diff_eq!(
            critic_target(&ErrorWindow::ZERO, 0.0, &e, 3.0, &w, &cp),
            stage_cost(&e, 3.0, &cp),
            epsilon = 1e-15
        );
        let z = ErrorWindow::ZERO;
        assert_eq!(critic_target(&z, 0.0, &z, 0.0, &w, &cp), 0.0);
        assert_abs_diff_eq!(
            critic_target(&e, 0.0, &e, 0.0, &w, &cp),
            5000.5,
            epsilon = 1e-9
        );
    }

    #[test]
    fn critic_update_examples() {
        let w = CriticWeights::identity();
        let e = ErrorWindow::new(1.0, 0.0, 0.0);
        // target equal to the current value: fixed point
        assert_eq!(critic_update(&w, &e, 0.0, 0.5, 0.1), w);
        assert_eq!(critic_update(&w, &ErrorWindow::ZERO, 0.0, 3.0, 0.1), w);

        let updated = critic_update(&w, &e, 0.0, 0.0, 0.1);
        let mut expected = Matrix4::identity();
        expected[(0, 0)] = 0.975;
        assert_abs_diff_eq!(updated.0, expected, epsilon = 1e-15);
    }

    #[test]
    fn actor_update_examples() {
        let k = ActorWeights::new(0.3, -0.2, 0.1);
        let e = ErrorWindow::new(1.0, 2.0, 3.0);
        assert_eq!(actor_update(&k, &e, 0.7, 0.7, 0.5), k);
        assert_eq!(actor_update(&k, &ErrorWindow::ZERO, 1.0, 0.0, 0.5), k);
        let k = actor_update(
            &ActorWeights::zero(),
            &ErrorWindow::new(1.0, 0.0, 0.0),
            1.0,
            0.0,
            0.5,
        );
        assert_eq!(k, ActorWeights::new(-0.5, 0.0, 0.0));
    }

    #[test]
    fn literal_rule_is_sign_blind() {
        let w = CriticWeights::identity();
        let e = ErrorWindow::new(1.0, 0.0, 0.0);
        // Undershoot and overshoot by the same amount move W the same way.
        let low = critic_update_with(&w, &e, 0.0, 0.5 + 0.2, 0.1, UpdateRule::Literal);
        let high = critic_update_with(&w, &e, 0.0, 0.5 - 0.2, 0.1, UpdateRule::Literal);
        assert_eq!(low, high);
        let grad_low = critic_update(&w, &e, 0.0, 0.7, 0.1);
        assert!(grad_low.0[(0, 0)] > 1.0);
    }

    #[test]
    fn converged_examples() {
        let m = nalgebra::Matrix2::new(1.0, 2.0, 3.0, 4.0);
        assert!(converged(&[m; 5], 1e-8, 3));
        assert!(!converged(&[m; 4], 1e-8, 3));

        let delta = 0.25;
        let step = nalgebra::Matrix2::repeat(delta);
        let history: Vec<_> = (0..6).map(|i| m + step * i as f64).collect();
        assert!(converged(&history, delta, 3));

        let mut broken = history.clone();
        broken[5] = broken[4] + nalgebra::Matrix2::new(0.0, 2.0 * delta, 0.0, 0.0);
        assert!(!converged(&broken, delta, 3));
        // a jump older than the window is ignored
        let mut old = vec![m; 6];
        old[0] = m * 10.0;
        assert!(converged(&old, 1e-12, 3));
    }

    fn window() -> impl Strategy<Value = ErrorWindow> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b, c)| ErrorWindow::new(a, b, c))
    }

    fn symmetric() -> impl Strategy<Value = CriticWeights> {
        proptest::array::uniform10(-2.0..2.0f64).prop_map(|v| {
            let mut m = Matrix4::zeros();
            let mut idx = 0;
            for i in 0..4 {
                for j in i..4 {
                    m[(i, j)] = v[idx];
                    m[(j, i)] = v[idx];
                    idx += 1;
                }
            }
            CriticWeights(m)
        })
    }

    proptest! {
        #[test]
        fn critic_updates_stay_symmetric(
            w in symmetric(),
            steps in proptest::collection::vec((window(), -5.0..5.0f64, -10.0..10.0f64), 1..50),
        ) {
            let mut w = w;
            for (e, u, target) in steps {
                w = critic_update(&w, &e, u, target, 1e-3);
            }
            prop_assert!(w.asymmetry() <= 1e-10);
        }

        #[test]
        fn greedy_control_minimizes_positive_definite_critic(
            w in symmetric(),
            e in window(),
        ) {
            // Make it positive definite.
            let pd = CriticWeights(w.0 * w.0.transpose() + Matrix4::identity() * 0.1);
            let u = actor_target(&e, &pd).unwrap();
            let best = value(&e, u, &pd);
            for d in [1e-3, -1e-3, 1.0, -1.0] {
                prop_assert!(best <= value(&e, u + d, &pd) + 1e-12 * best.abs().max(1.0));
            }
        }

        #[test]
        fn stage_cost_nonnegative(e in window(), u in -10.0..10.0f64) {
            prop_assert!(stage_cost(&e, u, &table_cost()) >= 0.0);
        }
    }
}
