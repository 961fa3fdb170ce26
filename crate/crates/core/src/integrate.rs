//! Leapfrog approximation of the Hamiltonian flow, with divergence detection.
//!
//! The leapfrog scheme is symplectic and time-reversible: it preserves
//! phase-space volume exactly and conserves the Hamiltonian up to O(eps^2)
//! along a trajectory. When the local curvature is too strong for the step
//! size the energy error explodes instead; such steps are flagged as
//! divergent rather than treated as failures, so heavy-tailed targets never
//! crash a run.

use crate::error::Result;
use crate::model::Potential;
use crate::phase::{EuclideanMetric, PhaseState};

/// Step size and divergence threshold for the integrator.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub step_size: f64,
    /// Energy error above which a trajectory is declared divergent.
    pub divergence_threshold: f64,
}

pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1000.0;

impl IntegratorConfig {
    pub fn new(step_size: f64) -> Self {
        Self {
            step_size,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
        }
    }
}

/// One leapfrog step: half momentum kick, full position drift, half kick.
///
/// Costs exactly one fresh gradient evaluation; the gradient at the starting
/// point is reused from the state's cache. A non-finite potential or gradient
/// at the new position is returned as-is and surfaces as a divergence when
/// the caller evaluates the energy.
pub fn leapfrog_step<P: Potential + ?Sized>(
    state: &PhaseState,
    step_size: f64,
    model: &P,
    metric: &EuclideanMetric,
) -> Result<PhaseState> {
    let dim = state.dim();
    let half = 0.5 * step_size;

    let mut p = state.p.clone();
    for (pi, gi) in p.iter_mut().zip(state.grad_potential.iter()) {
        *pi -= half * gi;
    }

    let mut velocity = vec![0.0; dim];
    metric.velocity_into(&p, &mut velocity)?;
    let mut q = state.q.clone();
    for (qi, vi) in q.iter_mut().zip(velocity.iter()) {
        *qi += step_size * vi;
    }

    let potential = model.potential_energy(&q)?;
    let mut grad_potential = vec![0.0; dim];
    model.gradient_into(&q, &mut grad_potential)?;

    for (pi, gi) in p.iter_mut().zip(grad_potential.iter()) {
        *pi -= half * gi;
    }

    Ok(PhaseState {
        q,
        p,
        potential,
        grad_potential,
    })
}

/// True when the energy error `h - h0` exceeds the threshold or `h` is not
/// finite.
pub fn is_divergent(h0: f64, h: f64, cfg: &IntegratorConfig) -> bool {
    !h.is_finite() || h - h0 > cfg.divergence_threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Result;
    use crate::model::TargetModel;
    use crate::phase::hamiltonian;
    use proptest::prelude::*;

    /// Constant potential; the flow reduces to a pure drift.
    struct FlatPotential {
        dim: usize,
    }

    impl Potential for FlatPotential {
        fn dim(&self) -> usize {
            self.dim
        }
        fn potential_energy(&self, _q: &[f64]) -> Result<f64> {
            Ok(0.0)
        }
        fn gradient_into(&self, _q: &[f64], grad: &mut [f64]) -> Result<()> {
            grad.fill(0.0);
            Ok(())
        }
    }

    #[test]
    fn flat_potential_gives_pure_drift() {
        let model = FlatPotential { dim: 2 };
        let metric = EuclideanMetric::unit(2);
        let s = PhaseState::new(vec![1.0, -2.0], vec![0.5, 0.25], &model).unwrap();
        let eps = 0.3;
        let next = leapfrog_step(&s, eps, &model, &metric).unwrap();
        assert_eq!(next.q, vec![1.0 + eps * 0.5, -2.0 + eps * 0.25]);
        assert_eq!(next.p, vec![0.5, 0.25]);
    }

    #[test]
    fn harmonic_step_matches_hand_evaluation() {
        // V = q^2/2, q = 1, p = 0, eps = 0.1:
        // p_half = -0.05, q' = 0.995, p' = -0.09975.
        let model = TargetModel::gaussian_iid(1).unwrap();
        let metric = EuclideanMetric::unit(1);
        let s = PhaseState::new(vec![1.0], vec![0.0], &model).unwrap();
        let next = leapfrog_step(&s, 0.1, &model, &metric).unwrap();
        assert!((next.q[0] - 0.995).abs() < 1e-15, "q' = {}", next.q[0]);
        assert!((next.p[0] + 0.09975).abs() < 1e-15, "p' = {}", next.p[0]);
    }

    #[test]
    fn divergence_detection_cases() {
        let cfg = IntegratorConfig::new(0.1);
        assert!(!is_divergent(3.0, 3.0, &cfg));
        assert!(is_divergent(0.0, f64::NAN, &cfg));
        assert!(is_divergent(0.0, f64::INFINITY, &cfg));
        assert!(is_divergent(0.0, 1000.5, &cfg));
        assert!(!is_divergent(0.0, 1000.0, &cfg));
        // Energy dropping is never divergent.
        assert!(!is_divergent(2000.0, 0.0, &cfg));
    }

    #[test]
    fn energy_error_scales_as_second_order() {
        // On an iid Gaussian with trajectory length 2*pi, halving the step
        // size must cut the max energy error by roughly 4 (factor in [3, 5]).
        let model = TargetModel::gaussian_iid(10).unwrap();
        let metric = EuclideanMetric::unit(10);
        let q0: Vec<f64> = (0..10).map(|i| 0.3 * (i as f64) - 1.4).collect();
        let p0: Vec<f64> = (0..10).map(|i| 0.7 - 0.2 * (i as f64)).collect();

        let max_err = |eps: f64| -> f64 {
            let steps = (std::f64::consts::TAU / eps).round() as usize;
            let mut s = PhaseState::new(q0.clone(), p0.clone(), &model).unwrap();
            let h0 = hamiltonian(&metric, &s).unwrap();
            let mut worst = 0.0f64;
            for _ in 0..steps {
                s = leapfrog_step(&s, eps, &model, &metric).unwrap();
                let h = hamiltonian(&metric, &s).unwrap();
                worst = worst.max((h - h0).abs());
            }
            worst
        };

        let coarse = max_err(0.2);
        let fine = max_err(0.1);
        let factor = coarse / fine;
        assert!(
            (3.0..=5.0).contains(&factor),
            "error ratio {factor} (coarse {coarse}, fine {fine})"
        );
    }

    /// Determinant of a small matrix by Gaussian elimination with partial
    /// pivoting; independent of any library code.
    fn det(mut m: Vec<f64>, n: usize) -> f64 {
        let mut sign = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| {
                    m[a * n + col].abs().partial_cmp(&m[b * n + col].abs()).unwrap()
                })
                .unwrap();
            if pivot != col {
                for k in 0..n {
                    m.swap(col * n + k, pivot * n + k);
                }
                sign = -sign;
            }
            let d = m[col * n + col];
            if d == 0.0 {
                return 0.0;
            }
            for row in (col + 1)..n {
                let f = m[row * n + col] / d;
                for k in col..n {
                    m[row * n + k] -= f * m[col * n + k];
                }
            }
        }
        sign * (0..n).map(|i| m[i * n + i]).product::<f64>()
    }

    #[test]
    fn leapfrog_preserves_phase_space_volume() {
        // The one-step map on (q, p) must have Jacobian determinant 1;
        // estimated by central finite differences at 100 nearby states.
        for model in [TargetModel::gaussian_iid(3).unwrap(), TargetModel::cauchy_iid(2).unwrap()] {
            let d = model.dim();
            let n = 2 * d;
            let metric = EuclideanMetric::unit(d);
            let eps = 0.15;
            let h = 1e-5;

            let advance = |z: &[f64]| -> Vec<f64> {
                let s = PhaseState::new(z[..d].to_vec(), z[d..].to_vec(), &model).unwrap();
                let next = leapfrog_step(&s, eps, &model, &metric).unwrap();
                let mut out = next.q;
                out.extend(next.p);
                out
            };

            for trial in 0..100 {
                let base: Vec<f64> = (0..n)
                    .map(|i| 0.4 * ((trial * n + i) as f64 * 0.618).sin())
                    .collect();
                let mut jac = vec![0.0; n * n];
                for j in 0..n {
                    let mut plus = base.clone();
                    plus[j] += h;
                    let mut minus = base.clone();
                    minus[j] -= h;
                    let fp = advance(&plus);
                    let fm = advance(&minus);
                    for i in 0..n {
                        jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
                    }
                }
                let det_j = det(jac, n);
                assert!(
                    (det_j - 1.0).abs() < 1e-6,
                    "{}: |J| = {det_j} at trial {trial}",
                    model.name()
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn momentum_flip_reverses_the_step(
            q in proptest::collection::vec(-3.0f64..3.0, 2),
            p in proptest::collection::vec(-3.0f64..3.0, 2),
            eps in 0.01f64..0.5,
            cauchy in proptest::bool::ANY,
        ) {
            let model = if cauchy {
                TargetModel::cauchy_iid(2).unwrap()
            } else {
                TargetModel::gaussian_iid(2).unwrap()
            };
            let metric = EuclideanMetric::diagonal(vec![1.5, 0.5]).unwrap();
            let start = PhaseState::new(q.clone(), p, &model).unwrap();
            let mut fwd = leapfrog_step(&start, eps, &model, &metric).unwrap();
            for v in fwd.p.iter_mut() { *v = -*v; }
            let mut back = leapfrog_step(&fwd, eps, &model, &metric).unwrap();
            for v in back.p.iter_mut() { *v = -*v; }
            for i in 0..2 {
                prop_assert!((back.q[i] - start.q[i]).abs() < 1e-10);
                prop_assert!((back.p[i] - start.p[i]).abs() < 1e-10);
            }
        }
    }
}
