//! Closed-form resolution of Riemannian motion policies.
//!
//! A policy is an acceleration paired with a symmetric PSD metric; policies
//! acting in 2D task spaces are pulled back through Jacobians into a shared
//! configuration space and combined by metric-weighted least squares,
//! `q̈* = (Σ JᵢᵀAᵢJᵢ)⁺ (Σ JᵢᵀAᵢfᵢ)`.

use nalgebra::{Matrix2, SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RmpError {
    #[error("no policies")]
    NoPolicies,
    #[error("numerical failure")]
    NumericalFailure,
}

/// Symmetric 2x2 metric stored as its three distinct entries, so symmetry
/// holds by construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Metric2 {
    pub const IDENTITY: Metric2 = Metric2 { a11: 1.0, a12: 0.0, a22: 1.0 };
    pub const ZERO: Metric2 = Metric2 { a11: 0.0, a12: 0.0, a22: 0.0 };

    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Metric2 { a11, a12, a22 }
    }

    /// `w · f fᵀ`, the rank-1 metric used by obstacle policies.
    pub fn scaled_outer(f: &Vector2<f64>, w: f64) -> Self {
        Metric2 { a11: w * (f.x * f.x), a12: w * (f.x * f.y), a22: w * (f.y * f.y) }
    }

    pub fn from_matrix(m: &Matrix2<f64>) -> Self {
        Metric2 { a11: m[(0, 0)], a12: 0.5 * (m[(0, 1)] + m[(1, 0)]), a22: m[(1, 1)] }
    }

    pub fn to_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.a11, self.a12, self.a12, self.a22)
    }

    pub fn scale(&self, c: f64) -> Self {
        Metric2 { a11: c * self.a11, a12: c * self.a12, a22: c * self.a22 }
    }

    pub fn add(&self, other: &Metric2) -> Self {
        Metric2 {
            a11: self.a11 + other.a11,
            a12: self.a12 + other.a12,
            a22: self.a22 + other.a22,
        }
    }

    /// Eigenvalues in ascending order (closed form).
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let half_diff = 0.5 * (self.a11 - self.a22);
        let r = (half_diff * half_diff + self.a12 * self.a12).sqrt();
        (mean - r, mean + r)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().0
    }
}

/// An acceleration policy and its metric, in a 2D task space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rmp2 {
    pub accel: Vector2<f64>,
    pub metric: Metric2,
}

impl Rmp2 {
    pub fn new(accel: Vector2<f64>, metric: Metric2) -> Self {
        Rmp2 { accel, metric }
    }

    pub fn zero() -> Self {
        Rmp2 { accel: Vector2::zeros(), metric: Metric2::ZERO }
    }
}

/// A policy pulled back into a k-dimensional configuration space:
/// `weight = JᵀAJ`, `bias = JᵀAf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulledBack<const K: usize> {
    pub weight: SMatrix<f64, K, K>,
    pub bias: SVector<f64, K>,
}

fn assert_symmetric<const K: usize>(a: &SMatrix<f64, K, K>) {
    for i in 0..K {
        for j in (i + 1)..K {
            assert!(
                (a[(i, j)] - a[(j, i)]).abs() <= 1e-12,
                "matrix not symmetric at ({i},{j}): {} vs {}",
                a[(i, j)],
                a[(j, i)]
            );
        }
    }
}

/// `vᵀAv`, the squared magnitude of `v` under the metric `A`.
///
/// Panics on a non-symmetric `A`; that is a programming error upstream.
pub fn metric_norm_sq<const K: usize>(v: &SVector<f64, K>, a: &SMatrix<f64, K, K>) -> f64 {
    assert_symmetric(a);
    (v.transpose() * a * v)[0]
}

/// Pulls a task-space policy back through a 2×k Jacobian.
pub fn pullback<const K: usize>(rmp: &Rmp2, jacobian: &SMatrix<f64, 2, K>) -> PulledBack<K> {
    let a = rmp.metric.to_matrix();
    let w = jacobian.transpose() * a * jacobian;
    // symmetrize away matmul rounding so downstream symmetry asserts are structural
    let weight = 0.5 * (w + w.transpose());
    let bias = jacobian.transpose() * (a * rmp.accel);
    PulledBack { weight, bias }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(q, lambda)` with `m = q · diag(lambda) · qᵀ`. Deterministic and
/// odd-symmetric in the off-diagonal entries, which keeps mirror-image
/// control problems numerically mirror-symmetric.
pub fn sym_eigen<const K: usize>(m: &SMatrix<f64, K, K>) -> (SMatrix<f64, K, K>, SVector<f64, K>) {
    let mut a = *m;
    let mut q = SMatrix::<f64, K, K>::identity();
    let scale = (0..K).map(|i| a[(i, i)].abs()).fold(f64::MIN_POSITIVE, f64::max);
    for _sweep in 0..50 {
        let mut off = 0.0f64;
        for p in 0..K {
            for r in (p + 1)..K {
                off = off.max(a[(p, r)].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..K {
            for r in (p + 1)..K {
                let apr = a[(p, r)];
                if apr.abs() <= 1e-300 {
                    continue;
                }
                let tau = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..K {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = c * akp - s * akr;
                    a[(k, r)] = s * akp + c * akr;
                }
                for k in 0..K {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = c * apk - s * ark;
                    a[(r, k)] = s * apk + c * ark;
                }
                for k in 0..K {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = c * qkp - s * qkr;
                    q[(k, r)] = s * qkp + c * qkr;
                }
            }
        }
    }
    let mut lambda = SVector::<f64, K>::zeros();
    for i in 0..K {
        lambda[i] = a[(i, i)];
    }
    (q, lambda)
}

/// Moore–Penrose pseudoinverse of a symmetric matrix.
///
/// Eigenvalues with `|λ| < tol·|λ|_max` are inverted to zero, so exactly
/// rank-deficient sums (routine with rank-1 obstacle metrics) stay finite.
pub fn pseudoinverse<const K: usize>(m: &SMatrix<f64, K, K>, tol: f64) -> SMatrix<f64, K, K> {
    assert_symmetric(m);
    let (q, lambda) = sym_eigen(m);
    let max_abs = lambda.iter().fold(0.0f64, |acc, &l| acc.max(l.abs()));
    let cutoff = tol * max_abs;
    let mut inv = SMatrix::<f64, K, K>::zeros();
    for i in 0..K {
        if lambda[i].abs() > cutoff && lambda[i] != 0.0 {
            inv[(i, i)] = 1.0 / lambda[i];
        }
    }
    q * inv * q.transpose()
}

/// Combines pulled-back policies into the minimum-norm least-squares optimum
/// `(Σ weightᵢ)⁺ (Σ biasᵢ)`.
pub fn resolve<const K: usize>(
    policies: &[PulledBack<K>],
    tol: f64,
) -> Result<SVector<f64, K>, RmpError> {
    if policies.is_empty() {
        return Err(RmpError::NoPolicies);
    }
    let mut weight = SMatrix::<f64, K, K>::zeros();
    let mut bias = SVector::<f64, K>::zeros();
    for p in policies {
        weight += p.weight;
        bias += p.bias;
    }
    let solution = pseudoinverse(&weight, tol) * bias;
    if !solution.iter().all(|x| x.is_finite()) {
        return Err(RmpError::NumericalFailure);
    }
    Ok(solution)
}

/// Default relative cutoff for the pseudoinverse; rank-deficient policy sums
/// are routine, not exceptional.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix2, Vector2};

    #[test]
    fn metric_norm_identity() {
        let v = Vector2::new(1.0, 0.0);
        assert_eq!(metric_norm_sq(&v, &Matrix2::identity()), 1.0);
    }

    #[test]
    fn metric_norm_rank_one_null_space() {
        let f = Vector2::new(1.0, 0.0);
        let a = Metric2::scaled_outer(&f, 1.0).to_matrix();
        assert_eq!(metric_norm_sq(&Vector2::new(0.0, 1.0), &a), 0.0);
    }

    #[test]
    fn metric_norm_hand_expanded() {
        // vᵀAv = 1·2·1 + 2·(1·1·2) + 3·2·2 = 18
        let v = Vector2::new(1.0, 2.0);
        let a = Matrix2::new(2.0, 1.0, 1.0, 3.0);
        assert_eq!(metric_norm_sq(&v, &a), 18.0);
    }

    #[test]
    #[should_panic(expected = "not symmetric")]
    fn metric_norm_rejects_asymmetric() {
        let v = Vector2::new(1.0, 0.0);
        let a = Matrix2::new(1.0, 0.5, 0.0, 1.0);
        metric_norm_sq(&v, &a);
    }

    #[test]
    fn pullback_identity() {
        let rmp = Rmp2::new(Vector2::new(1.0, 2.0), Metric2::IDENTITY);
        let j = SMatrix::<f64, 2, 2>::identity();
        let p = pullback(&rmp, &j);
        assert_eq!(p.weight, SMatrix::<f64, 2, 2>::identity());
        assert_eq!(p.bias, Vector2::new(1.0, 2.0));
    }

    #[test]
    fn pullback_annihilating_map() {
        let rmp = Rmp2::new(Vector2::new(3.0, -4.0), Metric2::new(2.0, 0.5, 1.0));
        let j = SMatrix::<f64, 2, 3>::zeros();
        let p = pullback(&rmp, &j);
        assert_eq!(p.weight, SMatrix::<f64, 3, 3>::zeros());
        assert_eq!(p.bias, SVector::<f64, 3>::zeros());
    }

    #[test]
    fn pullback_matches_dense_product_oracle() {
        // explicit index-level triple product, independent of nalgebra matmul
        let j = SMatrix::<f64, 2, 3>::new(0.3, -1.2, 0.7, 2.0, 0.4, -0.5);
        let metric = Metric2::new(2.0, 0.3, 1.5);
        let f = Vector2::new(0.8, -1.1);
        let p = pullback(&Rmp2::new(f, metric), &j);

        let a = [[metric.a11, metric.a12], [metric.a12, metric.a22]];
        for r in 0..3 {
            for c in 0..3 {
                let mut expect = 0.0;
                for i in 0..2 {
                    for k in 0..2 {
                        expect += j[(i, r)] * a[i][k] * j[(k, c)];
                    }
                }
                assert_relative_eq!(p.weight[(r, c)], expect, max_relative = 1e-12);
            }
        }
        for r in 0..3 {
            let mut expect = 0.0;
            for i in 0..2 {
                for k in 0..2 {
                    expect += j[(i, r)] * a[i][k] * f[k];
                }
            }
            assert_relative_eq!(p.bias[r], expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn resolve_single_unconstrained_policy() {
        let rmp = Rmp2::new(Vector2::new(3.0, -1.0), Metric2::IDENTITY);
        let p = pullback(&rmp, &SMatrix::<f64, 2, 2>::identity());
        let q = resolve(&[p], DEFAULT_SOLVER_TOL).unwrap();
        assert_relative_eq!(q.x, 3.0, epsilon = 1e-12);
        assert_relative_eq!(q.y, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn resolve_equal_weight_average() {
        let j = SMatrix::<f64, 2, 2>::identity();
        let p1 = pullback(&Rmp2::new(Vector2::new(1.0, 0.0), Metric2::IDENTITY), &j);
        let p2 = pullback(&Rmp2::new(Vector2::new(3.0, 0.0), Metric2::IDENTITY), &j);
        let q = resolve(&[p1, p2], DEFAULT_SOLVER_TOL).unwrap();
        assert_relative_eq!(q.x, 2.0, epsilon = 1e-12);
        assert_relative_eq!(q.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn resolve_rejects_empty() {
        let r: Result<SVector<f64, 2>, _> = resolve(&[], DEFAULT_SOLVER_TOL);
        assert_eq!(r.unwrap_err(), RmpError::NoPolicies);
    }

    #[test]
    fn pseudoinverse_identity() {
        let i = SMatrix::<f64, 3, 3>::identity();
        assert_relative_eq!(pseudoinverse(&i, 1e-10), i, epsilon = 1e-14);
    }

    #[test]
    fn pseudoinverse_rank_deficient_diagonal() {
        let m = Matrix2::new(2.0, 0.0, 0.0, 0.0);
        let p = pseudoinverse(&m, 1e-10);
        assert_relative_eq!(p, Matrix2::new(0.5, 0.0, 0.0, 0.0), epsilon = 1e-14);
    }

    #[test]
    fn pseudoinverse_defining_property_on_spd() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let b = SMatrix::<f64, 3, 3>::from_fn(|_, _| rng.random_range(-1.0..1.0));
            // bᵀb + 0.1·I is SPD
            let m = b.transpose() * b + SMatrix::<f64, 3, 3>::identity() * 0.1;
            let p = pseudoinverse(&m, 1e-10);
            assert_relative_eq!(m * p, SMatrix::<f64, 3, 3>::identity(), epsilon = 1e-10);
        }
    }

    #[test]
    fn metric_eigenvalues_closed_form() {
        let m = Metric2::new(2.0, 1.0, 3.0);
        let (lo, hi) = m.eigenvalues();
        // characteristic roots of [[2,1],[1,3]]: (5 ± √5)/2
        assert_relative_eq!(lo, (5.0 - 5.0f64.sqrt()) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(hi, (5.0 + 5.0f64.sqrt()) / 2.0, epsilon = 1e-12);
    }
}
