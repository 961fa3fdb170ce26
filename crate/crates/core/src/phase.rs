//! Phase-space states, Euclidean metrics, and kinetic energies.
//!
//! The sampler works on the joint space of positions `q` and momenta `p`.
//! Momenta are drawn from a zero-mean Gaussian with covariance `M` (the mass
//! matrix), giving the kinetic energy `K(p) = 1/2 p' M^-1 p`. The constant
//! `1/2 log|M|` is dropped everywhere: all diagnostics depend only on energy
//! differences and variances, which are shift-invariant.

use crate::error::{Error, Result};
use crate::model::Potential;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone)]
enum MetricKind {
    Unit { dim: usize },
    Diagonal { diag: Vec<f64> },
    Dense { dim: usize, chol: Vec<f64> },
}

/// A constant mass matrix defining the momentum distribution N(0, M).
#[derive(Debug, Clone)]
pub struct EuclideanMetric {
    kind: MetricKind,
}

impl EuclideanMetric {
    /// Identity mass matrix.
    pub fn unit(dim: usize) -> Self {
        Self {
            kind: MetricKind::Unit { dim },
        }
    }

    /// Diagonal mass matrix; entries must be strictly positive and finite.
    pub fn diagonal(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidMetric("diagonal must be non-empty".into()));
        }
        if let Some(i) = diag.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidMetric(format!(
                "diagonal entry {} = {} must be positive and finite",
                i, diag[i]
            )));
        }
        Ok(Self {
            kind: MetricKind::Diagonal { diag },
        })
    }

    /// Dense symmetric positive-definite mass matrix, row-major `dim * dim`.
    ///
    /// Symmetry is checked to 1e-12 (relative to the largest entry) and
    /// positive definiteness by attempting a Cholesky factorization.
    pub fn dense(matrix: Vec<f64>, dim: usize) -> Result<Self> {
        if matrix.len() != dim * dim || dim == 0 {
            return Err(Error::InvalidMetric(format!(
                "matrix has {} entries, expected {}",
                matrix.len(),
                dim * dim
            )));
        }
        let scale = matrix.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (matrix[i * dim + j] - matrix[j * dim + i]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidMetric(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let chol = cholesky(&matrix, dim)?;
        Ok(Self {
            kind: MetricKind::Dense { dim, chol },
        })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            MetricKind::Unit { dim } => *dim,
            MetricKind::Diagonal { diag } => diag.len(),
            MetricKind::Dense { dim, .. } => *dim,
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self.kind, MetricKind::Unit { .. })
    }

    /// The mass-matrix diagonal, used when serializing a metric into a run
    /// configuration. `None` for dense metrics, whose off-diagonal structure
    /// a diagonal list cannot represent.
    pub fn diagonal_values(&self) -> Option<Vec<f64>> {
        match &self.kind {
            MetricKind::Unit { dim } => Some(vec![1.0; *dim]),
            MetricKind::Diagonal { diag } => Some(diag.clone()),
            MetricKind::Dense { .. } => None,
        }
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: p.len(),
            });
        }
        Ok(())
    }

    /// K(p) = 1/2 p' M^-1 p.
    pub fn kinetic_energy(&self, p: &[f64]) -> Result<f64> {
        self.check_dim(p)?;
        Ok(match &self.kind {
            MetricKind::Unit { .. } => 0.5 * p.iter().map(|&x| x * x).sum::<f64>(),
            MetricKind::Diagonal { diag } => {
                0.5 * p.iter().zip(diag.iter()).map(|(&x, &d)| x * x / d).sum::<f64>()
            }
            MetricKind::Dense { dim, chol } => {
                let v = chol_solve(chol, *dim, p);
                0.5 * p.iter().zip(v.iter()).map(|(&a, &b)| a * b).sum::<f64>()
            }
        })
    }

    /// Draws p ~ N(0, M).
    pub fn sample_momentum<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let dim = self.dim();
        let z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        match &self.kind {
            MetricKind::Unit { .. } => z,
            MetricKind::Diagonal { diag } => {
                z.iter().zip(diag.iter()).map(|(&zi, &d)| zi * d.sqrt()).collect()
            }
            MetricKind::Dense { dim, chol } => {
                // M = L L', so L z has covariance M.
                let mut p = vec![0.0; *dim];
                for i in 0..*dim {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += chol[i * dim + j] * z[j];
                    }
                    p[i] = acc;
                }
                p
            }
        }
    }

    /// Writes the velocity M^-1 p into `out`.
    pub fn velocity_into(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(p)?;
        self.check_dim(out)?;
        match &self.kind {
            MetricKind::Unit { .. } => out.copy_from_slice(p),
            MetricKind::Diagonal { diag } => {
                for ((o, &x), &d) in out.iter_mut().zip(p.iter()).zip(diag.iter()) {
                    *o = x / d;
                }
            }
            MetricKind::Dense { dim, chol } => {
                out.copy_from_slice(&chol_solve(chol, *dim, p));
            }
        }
        Ok(())
    }
}

/// M^-1 p, the gradient of the kinetic energy.
pub fn grad_kinetic(metric: &EuclideanMetric, p: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; metric.dim()];
    metric.velocity_into(p, &mut out)?;
    Ok(out)
}

/// Lower-triangular Cholesky factor of a row-major SPD matrix.
fn cholesky(m: &[f64], dim: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut acc = m[i * dim + j];
            for k in 0..j {
                acc -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if acc <= 0.0 || !acc.is_finite() {
                    return Err(Error::InvalidMetric(format!(
                        "matrix is not positive definite (pivot {i})"
                    )));
                }
                l[i * dim + i] = acc.sqrt();
            } else {
                l[i * dim + j] = acc / l[j * dim + j];
            }
        }
    }
    Ok(l)
}

/// Solves (L L') x = b given the Cholesky factor L.
fn chol_solve(l: &[f64], dim: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..dim {
        let mut acc = x[i];
        for k in 0..i {
            acc -= l[i * dim + k] * x[k];
        }
        x[i] = acc / l[i * dim + i];
    }
    for i in (0..dim).rev() {
        let mut acc = x[i];
        for k in (i + 1)..dim {
            acc -= l[k * dim + i] * x[k];
        }
        x[i] = acc / l[i * dim + i];
    }
    x
}

/// A point of phase space with cached potential energy and gradient.
///
/// The cache is an invariant: `potential` and `grad_potential` always hold
/// the model's values at `q`.
#[derive(Debug, Clone)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub potential: f64,
    pub grad_potential: Vec<f64>,
}

impl PhaseState {
    /// Builds a coherent state by evaluating the model at `q`.
    pub fn new<P: Potential + ?Sized>(q: Vec<f64>, p: Vec<f64>, model: &P) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                actual: p.len(),
            });
        }
        let potential = model.potential_energy(&q)?;
        let mut grad_potential = vec![0.0; q.len()];
        model.gradient_into(&q, &mut grad_potential)?;
        Ok(Self {
            q,
            p,
            potential,
            grad_potential,
        })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// H(q, p) = K(p) + V(q), the negative log joint density up to a constant.
pub fn hamiltonian(metric: &EuclideanMetric, state: &PhaseState) -> Result<f64> {
    Ok(metric.kinetic_energy(&state.p)? + state.potential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TargetModel;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kinetic_energy_values() {
        let unit = EuclideanMetric::unit(2);
        assert_eq!(unit.kinetic_energy(&[3.0, 4.0]).unwrap(), 12.5);
        assert_eq!(unit.kinetic_energy(&[0.0, 0.0]).unwrap(), 0.0);
        let diag = EuclideanMetric::diagonal(vec![4.0]).unwrap();
        assert_eq!(diag.kinetic_energy(&[2.0]).unwrap(), 0.5);
    }

    #[test]
    fn grad_kinetic_values() {
        let unit = EuclideanMetric::unit(2);
        assert_eq!(grad_kinetic(&unit, &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        let diag = EuclideanMetric::diagonal(vec![4.0]).unwrap();
        assert_eq!(grad_kinetic(&diag, &[2.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn dense_velocity_solves_the_system() {
        // M r = p must hold to 1e-12 for the dense solve.
        let m = vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let metric = EuclideanMetric::dense(m.clone(), 3).unwrap();
        let p = [1.0, -2.0, 0.7];
        let r = grad_kinetic(&metric, &p).unwrap();
        for i in 0..3 {
            let mut acc = 0.0;
            for j in 0..3 {
                acc += m[i * 3 + j] * r[j];
            }
            assert!((acc - p[i]).abs() < 1e-12, "row {i}: {acc} vs {}", p[i]);
        }
        // Dense kinetic agrees with the quadratic form through the solve.
        let k = metric.kinetic_energy(&p).unwrap();
        let direct = 0.5 * (p[0] * r[0] + p[1] * r[1] + p[2] * r[2]);
        assert!((k - direct).abs() < 1e-14);
    }

    #[test]
    fn invalid_metrics_are_rejected() {
        assert!(EuclideanMetric::diagonal(vec![1.0, 0.0]).is_err());
        assert!(EuclideanMetric::diagonal(vec![-1.0]).is_err());
        // Asymmetric.
        assert!(EuclideanMetric::dense(vec![1.0, 0.5, 0.2, 1.0], 2).is_err());
        // Symmetric but indefinite.
        assert!(EuclideanMetric::dense(vec![1.0, 2.0, 2.0, 1.0], 2).is_err());
    }

    #[test]
    fn momentum_sampling_is_reproducible() {
        let metric = EuclideanMetric::diagonal(vec![1.0, 2.0, 3.0]).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(99);
        let mut b = ChaCha8Rng::seed_from_u64(99);
        assert_eq!(metric.sample_momentum(&mut a), metric.sample_momentum(&mut b));
    }

    #[test]
    fn kinetic_energy_of_resampled_momentum_has_chi_square_moments() {
        // K = 1/2 p' M^-1 p over p ~ N(0, M) has mean D/2 and variance D/2.
        let d = 100;
        let n = 100_000;
        let metric = EuclideanMetric::unit(d);
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let ks: Vec<f64> = (0..n)
            .map(|_| metric.kinetic_energy(&metric.sample_momentum(&mut rng)).unwrap())
            .collect();
        let mean = ks.iter().sum::<f64>() / n as f64;
        let var = ks.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (50.0f64 / n as f64).sqrt();
        assert!((mean - 50.0).abs() < 3.0 * se, "mean {mean}");
        assert!((var - 50.0).abs() < 0.05 * 50.0, "var {var}");
    }

    #[test]
    fn diagonal_metric_sets_per_coordinate_variance() {
        let sigmas = vec![1.0, 4.0, 9.0];
        let metric = EuclideanMetric::diagonal(sigmas.clone()).unwrap();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sums = vec![0.0; 3];
        let mut sq = vec![0.0; 3];
        for _ in 0..n {
            let p = metric.sample_momentum(&mut rng);
            for i in 0..3 {
                sums[i] += p[i];
                sq[i] += p[i] * p[i];
            }
        }
        for i in 0..3 {
            let mean = sums[i] / n as f64;
            let var = sq[i] / n as f64 - mean * mean;
            assert!(
                (var - sigmas[i]).abs() < 0.05 * sigmas[i],
                "coord {i}: var {var} vs {}",
                sigmas[i]
            );
        }
    }

    #[test]
    fn resampled_kinetic_energy_is_position_independent() {
        // Two-sample Kolmogorov-Smirnov at alpha = 0.001 between K samples
        // drawn while the chain sits at two different positions.
        let d = 10;
        let n = 100_000usize;
        let metric = EuclideanMetric::diagonal(vec![0.5; d]).unwrap();
        let draw = |seed: u64| -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ks: Vec<f64> = (0..n)
                .map(|_| metric.kinetic_energy(&metric.sample_momentum(&mut rng)).unwrap())
                .collect();
            ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ks
        };
        // The resampling law has no position argument at all, so samples taken
        // "at" two positions are just two independent streams.
        let a = draw(21);
        let b = draw(22);
        let mut d_stat = 0.0f64;
        let (mut i, mut j) = (0usize, 0usize);
        while i < n && j < n {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            let diff = (i as f64 / n as f64 - j as f64 / n as f64).abs();
            d_stat = d_stat.max(diff);
        }
        let c_alpha = (-(0.001f64 / 2.0).ln() / 2.0).sqrt();
        let crit = c_alpha * ((2 * n) as f64 / (n * n) as f64).sqrt();
        assert!(d_stat < crit, "KS statistic {d_stat} exceeds {crit}");
    }

    #[test]
    fn hamiltonian_values() {
        let model = TargetModel::gaussian_iid(2).unwrap();
        let metric = EuclideanMetric::unit(2);
        let s = PhaseState::new(vec![3.0, 4.0], vec![3.0, 4.0], &model).unwrap();
        assert_eq!(hamiltonian(&metric, &s).unwrap(), 25.0);

        let s0 = PhaseState::new(vec![3.0, 4.0], vec![0.0, 0.0], &model).unwrap();
        assert_eq!(hamiltonian(&metric, &s0).unwrap(), s0.potential);

        let cauchy = TargetModel::cauchy_iid(1).unwrap();
        let m1 = EuclideanMetric::unit(1);
        let s1 = PhaseState::new(vec![1.0], vec![2.0], &cauchy).unwrap();
        let h = hamiltonian(&m1, &s1).unwrap();
        assert!((h - (2.0f64.ln() + 2.0)).abs() < 1e-15, "H = {h}");
    }

    #[test]
    fn hamiltonian_is_additive_in_the_potential() {
        let model = TargetModel::cauchy_iid(3).unwrap();
        let metric = EuclideanMetric::diagonal(vec![2.0, 1.0, 0.5]).unwrap();
        let p = vec![0.3, -1.0, 2.2];
        let a = PhaseState::new(vec![0.0, 1.0, -1.0], p.clone(), &model).unwrap();
        let b = PhaseState::new(vec![2.0, -0.5, 0.7], p, &model).unwrap();
        let ha = hamiltonian(&metric, &a).unwrap();
        let hb = hamiltonian(&metric, &b).unwrap();
        assert_eq!(hb - ha, b.potential - a.potential);
    }

    proptest! {
        #[test]
        fn kinetic_energy_is_momentum_flip_symmetric(
            p in proptest::collection::vec(-50.0f64..50.0, 1..8),
            diag in proptest::collection::vec(0.1f64..10.0, 8),
        ) {
            let metric = EuclideanMetric::diagonal(diag[..p.len()].to_vec()).unwrap();
            let flipped: Vec<f64> = p.iter().map(|x| -x).collect();
            prop_assert_eq!(
                metric.kinetic_energy(&p).unwrap(),
                metric.kinetic_energy(&flipped).unwrap()
            );
        }

        #[test]
        fn kinetic_energy_is_positive_away_from_zero(
            p in proptest::collection::vec(-50.0f64..50.0, 1..8),
        ) {
            let metric = EuclideanMetric::unit(p.len());
            let k = metric.kinetic_energy(&p).unwrap();
            prop_assert!(k >= 0.0);
            prop_assert_eq!(k == 0.0, p.iter().all(|&x| x == 0.0));
        }
    }
}
