//! Discrete algebraic Riccati equation by fixed-point iteration.
//!
//! Independent reference for the learned gains: for `x' = A x + B u` with
//! stage cost `x'Qx + R u^2` the optimal policy is `u = -K x`.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, RowDVector, RowVector3, Vector3};

use super::{ActorWeights, CostParams, CriticWeights};
use crate::error::{Error, Result};

const TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub p: DMatrix<f64>,
    /// Optimal feedback gain; the control is `-k * x`.
    pub k: RowDVector<f64>,
    pub iterations: usize,
}

pub fn riccati_oracle(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    q: &DMatrix<f64>,
    r: f64,
) -> Result<RiccatiSolution> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n || q.shape() != (n, n) {
        return Err(Error::validation("riccati", "dimension mismatch"));
    }
    if r.is_nan() || r <= 0.0 {
        return Err(Error::validation("riccati.r", "must be > 0"));
    }
    let bt = b.transpose();
    let gain = |p: &DMatrix<f64>| -> RowDVector<f64> {
        let denom = r + (&bt * p * b)[(0, 0)];
        (&bt * p * a) / denom
    };

    let mut p = q.clone();
    for iteration in 1..=MAX_ITERATIONS {
        let k = gain(&p);
        let pa = p.clone() * a;
        let next = q + a.transpose() * &pa - (a.transpose() * &p * b) * &k;
        let next = (&next + next.transpose()) * 0.5;
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        let change = (&next - &p).abs().max();
        let scale = next.abs().max().max(1.0);
        p = next;
        if change <= TOLERANCE * scale {
            let k = gain(&p);
            return Ok(RiccatiSolution {
                p,
                k,
                iterations: iteration,
            });
        }
    }
    Err(Error::RiccatiDivergence {
        iterations: MAX_ITERATIONS,
    })
}

/// Exact quadratic value weights and policy for a known three-state model.
///
/// The critic is `[[Q + A'PA, A'PB], [B'PA, R + B'PB]]`, whose greedy policy is
/// the returned actor `-K`.
pub fn model_weights(
    a: &Matrix3<f64>,
    b: &Vector3<f64>,
    cost: &CostParams,
) -> Result<(CriticWeights, ActorWeights)> {
    let ad = DMatrix::from_column_slice(3, 3, a.as_slice());
    let bd = DVector::from_column_slice(b.as_slice());
    let qd = DMatrix::from_column_slice(3, 3, cost.q.as_slice());
    let sol = riccati_oracle(&ad, &bd, &qd, cost.r)?;
    let p = Matrix3::from_column_slice(sol.p.as_slice());
    let ee = cost.q + a.transpose() * p * a;
    let ue = b.transpose() * p * a;
    let uu = cost.r + (b.transpose() * p * b)[(0, 0)];
    let mut w = Matrix4::zeros();
    w.fixed_view_mut::<3, 3>(0, 0).copy_from(&ee);
    w.fixed_view_mut::<1, 3>(3, 0).copy_from(&ue);
    w.fixed_view_mut::<3, 1>(0, 3).copy_from(&ue.transpose());
    w[(3, 3)] = uu;
    let k = RowVector3::new(-sol.k[0], -sol.k[1], -sol.k[2]);
    Ok((CriticWeights(w), ActorWeights(k)))
}
