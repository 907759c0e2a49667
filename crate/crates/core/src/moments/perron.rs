use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::{SecondMoment, POSITIVITY_FLOOR};
use crate::error::{Error, Result};
use crate::linalg;

const STOCHASTIC_TOL: f64 = 1e-9;

/// Positive, sum-one fixed point of a left-stochastic matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PerronVector {
    pub vector: DVector<f64>,
    /// `‖M x − x‖∞` at the returned `x`.
    pub residual: f64,
    pub iterations: usize,
}

/// Perron vector of `S = E(A ⊗ A)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPerron {
    /// `p`, length `N²`.
    pub p: DVector<f64>,
    /// `P_p = unvec(p)`, symmetrized.
    pub p_p: DMatrix<f64>,
    pub residual: f64,
    /// `‖P_p − P_pᵀ‖∞` before symmetrization.
    pub symmetry_deviation: f64,
    pub iterations: usize,
}

/// Primitivity of a nonnegative matrix from its sparsity pattern:
/// the directed graph `k → ℓ` for `m[ℓ, k] > 0` must be strongly connected
/// with period one.
pub fn is_primitive(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return false;
    }
    let out: Vec<Vec<usize>> = (0..n).map(|k| (0..n).filter(|&l| m[(l, k)] > 0.0).collect()).collect();
    let inc: Vec<Vec<usize>> = (0..n).map(|l| (0..n).filter(|&k| m[(l, k)] > 0.0).collect()).collect();
    let forward = bfs_levels(&out);
    if forward.iter().any(Option::is_none) || bfs_levels(&inc).iter().any(Option::is_none) {
        return false;
    }
    // period = gcd over edges u → v of level(u) + 1 − level(v)
    let mut period = 0i64;
    for (u, targets) in out.iter().enumerate() {
        let lu = forward[u].unwrap() as i64;
        for &v in targets {
            let lv = forward[v].unwrap() as i64;
            period = gcd(period, (lu + 1 - lv).abs());
        }
    }
    period == 1
}

fn bfs_levels(adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    level[0] = Some(0);
    let mut queue = VecDeque::from([0]);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].unwrap();
        for &v in &adj[u] {
            if level[v].is_none() {
                level[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    level
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn check_left_stochastic(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotPrimitive(format!("matrix is {:?}", m.shape())));
    }
    if let Some(v) = m.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::NotPrimitive(format!("negative or NaN entry {v}")));
    }
    let defect = linalg::column_sum_defect(m);
    if defect > STOCHASTIC_TOL {
        return Err(Error::NotPrimitive(format!(
            "columns do not sum to one (defect {defect:e})"
        )));
    }
    Ok(())
}

/// Power iteration `x ← M x / 𝟙ᵀM x` from `x0` until `‖M x − x‖∞ ≤ tol`.
fn power_iterate(
    mut apply: impl FnMut(&DVector<f64>) -> DVector<f64>,
    mut x: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, f64, usize)> {
    x /= x.sum();
    for it in 0..max_iter {
        let y = apply(&x);
        let residual = linalg::max_abs_vec(&(&y - &x));
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return Ok((x, residual, it));
        }
        x = &y / y.sum();
    }
    Err(Error::NotPrimitive(format!(
        "power iteration did not reach residual {tol:e} within {max_iter} iterations"
    )))
}

fn check_positive(x: &DVector<f64>) -> Result<()> {
    let min = x.min();
    if min < POSITIVITY_FLOOR {
        return Err(Error::NotPrimitive(format!(
            "fixed point has entry {min:e} below the positivity floor"
        )));
    }
    Ok(())
}

/// Perron vector of a primitive left-stochastic matrix.
pub fn perron(matrix: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<PerronVector> {
    check_left_stochastic(matrix)?;
    if !is_primitive(matrix) {
        return Err(Error::NotPrimitive("sparsity pattern is reducible or periodic".into()));
    }
    let n = matrix.nrows();
    let (vector, residual, iterations) = power_iterate(|x| matrix * x, DVector::repeat(n, 1.0), tol, max_iter)?;
    check_positive(&vector)?;
    Ok(PerronVector {
        vector,
        residual,
        iterations,
    })
}

/// Perron vector of `S`, using the factored form; starts from `p̄ ⊗ p̄`.
pub fn joint_perron(second: &SecondMoment, tol: f64, max_iter: usize) -> Result<JointPerron> {
    let n = second.n_agents();
    // pattern(S) = pattern(Ā ⊗ Ā), primitive iff Ā is
    let mean = perron(&second.mean, tol, max_iter)?;
    let start = linalg::vec_of(&(&mean.vector * mean.vector.transpose()));
    let apply = |x: &DVector<f64>| linalg::vec_of(&second.apply(&linalg::unvec(x, n)));
    let (p, _, iterations) = power_iterate(apply, start, tol, max_iter)?;

    let raw = linalg::unvec(&p, n);
    let symmetry_deviation = linalg::max_abs(&(&raw - raw.transpose()));
    let mut p_p = (&raw + raw.transpose()) * 0.5;
    p_p /= p_p.sum();
    let p = linalg::vec_of(&p_p);
    check_positive(&p)?;
    let residual = linalg::max_abs_vec(&(linalg::vec_of(&second.apply(&p_p)) - &p));
    Ok(JointPerron {
        p,
        p_p,
        residual,
        symmetry_deviation,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{mean_matrix, second_moment, SecondMomentMode, PERRON_MAX_ITER, PERRON_TOL};
    use crate::network::{BernoulliAsyncModel, Topology};

    /// Eigenvector at eigenvalue one from a dense general eigensolver:
    /// null space of `M − I` via SVD.
    fn dense_oracle(m: &DMatrix<f64>) -> DVector<f64> {
        let n = m.nrows();
        let shifted = m - DMatrix::identity(n, n);
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.unwrap();
        let (idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let v: DVector<f64> = v_t.row(idx).transpose();
        &v / v.sum()
    }

    fn line3(eta: f64) -> BernoulliAsyncModel {
        let t = Topology::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        BernoulliAsyncModel::uniform(t, 1.0, 0.01, eta).unwrap()
    }

    #[test]
    fn uniform_averaging() {
        let m = DMatrix::repeat(4, 4, 0.25);
        let p = perron(&m, PERRON_TOL, 100).unwrap();
        assert!((p.vector - DVector::repeat(4, 0.25)).amax() < 1e-15);
    }

    #[test]
    fn identity_is_not_primitive() {
        let m = DMatrix::<f64>::identity(3, 3);
        assert!(matches!(perron(&m, PERRON_TOL, 100), Err(Error::NotPrimitive(_))));
        let one = DMatrix::from_element(1, 1, 1.0);
        assert_eq!(perron(&one, PERRON_TOL, 10).unwrap().vector[0], 1.0);
    }

    #[test]
    fn periodic_and_non_stochastic_inputs_rejected() {
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(!is_primitive(&swap));
        assert!(perron(&swap, PERRON_TOL, 100).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.6, 0.5]);
        assert!(perron(&bad, PERRON_TOL, 100).is_err());
    }

    #[test]
    fn line3_mean_matches_dense_oracle() {
        let a = mean_matrix(&line3(0.5));
        let p = perron(&a, PERRON_TOL, PERRON_MAX_ITER).unwrap();
        assert!(p.residual <= 1e-12);
        let oracle = dense_oracle(&a);
        assert!((&p.vector - oracle).amax() < 1e-10);
        assert!(p.vector.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn deterministic_joint_vector_is_outer_product() {
        let t = Topology::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let model = BernoulliAsyncModel::uniform(t, 1.0, 0.01, 1.0).unwrap();
        let s = second_moment(&model, SecondMomentMode::default()).unwrap();
        let j = joint_perron(&s, PERRON_TOL, PERRON_MAX_ITER).unwrap();
        let p_bar = perron(&s.mean, PERRON_TOL, PERRON_MAX_ITER).unwrap().vector;
        assert!((&j.p_p - &p_bar * p_bar.transpose()).amax() < 1e-12);
    }

    #[test]
    fn full_two_joint_vector() {
        let model = BernoulliAsyncModel::uniform(Topology::full(2).unwrap(), 1.0, 0.01, 1.0).unwrap();
        let s = second_moment(&model, SecondMomentMode::default()).unwrap();
        let j = joint_perron(&s, PERRON_TOL, PERRON_MAX_ITER).unwrap();
        assert!((j.p_p - DMatrix::repeat(2, 2, 0.25)).amax() < 1e-15);
    }

    #[test]
    fn line3_joint_matches_dense_oracle() {
        let s = second_moment(&line3(0.5), SecondMomentMode::default()).unwrap();
        let j = joint_perron(&s, PERRON_TOL, PERRON_MAX_ITER).unwrap();
        assert!(j.residual <= 1e-12);
        assert!(j.symmetry_deviation <= 1e-10);
        let oracle = dense_oracle(&s.to_dense());
        assert!((&j.p - oracle).amax() < 1e-10);
    }
}
