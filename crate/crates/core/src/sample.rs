//! The full Hamiltonian Markov transition and multi-chain execution.
//!
//! Each transition is a lift, a flow, and a projection: resample the momentum
//! from the metric's Gaussian, grow a trajectory by repeated doubling until
//! the no-u-turn criterion fires (or the depth cap or a divergence), select
//! the next state among the trajectory states with probability proportional
//! to `exp(-H)`, and discard the momentum. Warmup adapts the step size by
//! dual averaging toward a target acceptance statistic and, optionally, a
//! diagonal metric from windowed draw variances.

use crate::error::{Error, Result};
use crate::integrate::{self, IntegratorConfig, DEFAULT_DIVERGENCE_THRESHOLD};
use crate::model::{Potential, TargetModel};
use crate::phase::{hamiltonian, EuclideanMetric, PhaseState};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// How the mass matrix is chosen during warmup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricMode {
    /// Keep the identity metric.
    Unit,
    /// Adapt a diagonal metric to the draw variances in doubling windows.
    DiagonalAdapt,
}

/// Sampler configuration shared by every chain of a run.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub num_warmup: usize,
    pub num_samples: usize,
    pub max_tree_depth: usize,
    /// Target acceptance statistic for step-size adaptation, in (0, 1).
    pub target_accept: f64,
    pub seed: u64,
    pub chains: usize,
    pub metric_mode: MetricMode,
    /// Retain warmup draws in the trace (constrained space).
    pub keep_warmup: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            num_warmup: 1000,
            num_samples: 1000,
            max_tree_depth: 10,
            target_accept: 0.8,
            seed: 0,
            chains: 4,
            metric_mode: MetricMode::DiagonalAdapt,
            keep_warmup: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "target_accept = {} must lie in (0, 1)",
                self.target_accept
            )));
        }
        if self.num_samples == 0 {
            return Err(Error::InvalidConfig("num_samples must be at least 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::InvalidConfig("chains must be at least 1".into()));
        }
        if self.max_tree_depth == 0 {
            return Err(Error::InvalidConfig("max_tree_depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-transition record of energies and trajectory statistics.
#[derive(Debug, Clone, Copy)]
pub struct TransitionInfo {
    /// H at the accepted state, after resampling and flow.
    pub energy: f64,
    /// Energy change across the full transition, E_n - E_{n-1}.
    pub delta_energy: f64,
    /// Kinetic-energy change induced by the momentum resampling alone.
    pub resample_delta_k: f64,
    pub divergent: bool,
    pub tree_depth: usize,
    pub step_size: f64,
    /// Mean Metropolis acceptance statistic over the trajectory, in [0, 1].
    pub accept_stat: f64,
    pub n_leapfrog: usize,
}

/// One chain's draws (constrained space) and transition records.
#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub chain_id: usize,
    pub parameter_names: Vec<String>,
    pub draws: Vec<Vec<f64>>,
    pub infos: Vec<TransitionInfo>,
    pub warmup_draws: Option<Vec<Vec<f64>>>,
    /// Diagonal of the metric the chain sampled with.
    pub metric_diagonal: Vec<f64>,
    /// Step size used during the sampling phase.
    pub step_size: f64,
}

// Subtree bookkeeping for the doubling trajectory.
struct Subtree {
    left: PhaseState,
    right: PhaseState,
    proposal: PhaseState,
    proposal_energy: f64,
    log_sum_weight: f64,
    n_leapfrog: usize,
    sum_accept: f64,
    divergent: bool,
    turning: bool,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// No-u-turn check across a trajectory segment: the segment is turning when
/// the position difference stops making progress against the metric-weighted
/// momentum at either boundary.
fn is_turning(left: &PhaseState, right: &PhaseState, metric: &EuclideanMetric) -> bool {
    let dim = left.dim();
    let mut dq = vec![0.0; dim];
    for i in 0..dim {
        dq[i] = right.q[i] - left.q[i];
    }
    let mut v = vec![0.0; dim];
    if metric.velocity_into(&left.p, &mut v).is_err() {
        return true;
    }
    let forward: f64 = dq.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    if metric.velocity_into(&right.p, &mut v).is_err() {
        return true;
    }
    let backward: f64 = dq.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    if !forward.is_finite() || !backward.is_finite() {
        return true;
    }
    forward < 0.0 || backward < 0.0
}

fn build_leaf<P: Potential + ?Sized>(
    from: &PhaseState,
    direction: f64,
    h0: f64,
    model: &P,
    metric: &EuclideanMetric,
    cfg: &IntegratorConfig,
) -> Result<Subtree> {
    let state = integrate::leapfrog_step(from, direction * cfg.step_size, model, metric)?;
    let h = hamiltonian(metric, &state)?;
    let divergent = integrate::is_divergent(h0, h, cfg);
    let energy_error = h - h0;
    let log_weight = if divergent || !energy_error.is_finite() {
        f64::NEG_INFINITY
    } else {
        -energy_error
    };
    let accept = if energy_error.is_finite() {
        (-energy_error).exp().min(1.0)
    } else {
        0.0
    };
    Ok(Subtree {
        left: state.clone(),
        right: state.clone(),
        proposal: state,
        proposal_energy: h,
        log_sum_weight: log_weight,
        n_leapfrog: 1,
        sum_accept: accept,
        divergent,
        turning: false,
    })
}

fn build_tree<P: Potential + ?Sized, R: Rng>(
    depth: usize,
    from: &PhaseState,
    direction: f64,
    h0: f64,
    model: &P,
    metric: &EuclideanMetric,
    cfg: &IntegratorConfig,
    rng: &mut R,
) -> Result<Subtree> {
    if depth == 0 {
        return build_leaf(from, direction, h0, model, metric, cfg);
    }

    let mut inner = build_tree(depth - 1, from, direction, h0, model, metric, cfg, rng)?;
    if inner.divergent || inner.turning {
        return Ok(inner);
    }

    let edge = if direction > 0.0 { &inner.right } else { &inner.left };
    let outer = build_tree(depth - 1, &edge.clone(), direction, h0, model, metric, cfg, rng)?;

    // Multinomial selection between the halves, proportional to total weight.
    let total = log_sum_exp(inner.log_sum_weight, outer.log_sum_weight);
    if total > f64::NEG_INFINITY {
        let p_outer = (outer.log_sum_weight - total).exp();
        if rng.random::<f64>() < p_outer {
            inner.proposal = outer.proposal;
            inner.proposal_energy = outer.proposal_energy;
        }
    }
    inner.log_sum_weight = total;
    inner.n_leapfrog += outer.n_leapfrog;
    inner.sum_accept += outer.sum_accept;
    inner.divergent |= outer.divergent;
    inner.turning |= outer.turning;
    if direction > 0.0 {
        inner.right = outer.right;
    } else {
        inner.left = outer.left;
    }
    if !inner.divergent && !inner.turning {
        inner.turning = is_turning(&inner.left, &inner.right, metric);
    }
    Ok(inner)
}

/// One Hamiltonian Markov transition from `state` (whose momentum is the one
/// selected by the previous transition).
///
/// Returns the accepted phase point and its [`TransitionInfo`]; callers
/// project to the position by reading `q`. Pathologies are recorded in the
/// info, never surfaced as errors.
pub fn transition<P: Potential + ?Sized, R: Rng>(
    state: &PhaseState,
    cfg: &SamplerConfig,
    step_size: f64,
    model: &P,
    metric: &EuclideanMetric,
    rng: &mut R,
) -> Result<(PhaseState, TransitionInfo)> {
    let int_cfg = IntegratorConfig {
        step_size,
        divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
    };
    let energy_prev = hamiltonian(metric, state)?;

    // Lift: fresh momentum from the cotangent Gaussian.
    let p = metric.sample_momentum(rng);
    let kinetic_old = metric.kinetic_energy(&state.p)?;
    let kinetic_new = metric.kinetic_energy(&p)?;
    let start = PhaseState {
        q: state.q.clone(),
        p,
        potential: state.potential,
        grad_potential: state.grad_potential.clone(),
    };
    let h0 = start.potential + kinetic_new;

    let mut tree = Subtree {
        left: start.clone(),
        right: start.clone(),
        proposal: start,
        proposal_energy: h0,
        log_sum_weight: 0.0,
        n_leapfrog: 0,
        sum_accept: 0.0,
        divergent: false,
        turning: false,
    };

    let mut depth = 0;
    while depth < cfg.max_tree_depth {
        let direction = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let edge = if direction > 0.0 { tree.right.clone() } else { tree.left.clone() };
        let sub = build_tree(depth, &edge, direction, h0, model, metric, &int_cfg, rng)?;
        depth += 1;

        tree.n_leapfrog += sub.n_leapfrog;
        tree.sum_accept += sub.sum_accept;
        tree.divergent |= sub.divergent;

        if sub.divergent || sub.turning {
            // The new half is invalid; selection keeps the valid sub-trajectory.
            break;
        }

        let total = log_sum_exp(tree.log_sum_weight, sub.log_sum_weight);
        if total > f64::NEG_INFINITY {
            let p_sub = (sub.log_sum_weight - total).exp();
            if rng.random::<f64>() < p_sub {
                tree.proposal = sub.proposal;
                tree.proposal_energy = sub.proposal_energy;
            }
        }
        tree.log_sum_weight = total;
        if direction > 0.0 {
            tree.right = sub.right;
        } else {
            tree.left = sub.left;
        }

        if is_turning(&tree.left, &tree.right, metric) {
            break;
        }
    }

    let accept_stat = if tree.n_leapfrog == 0 {
        0.0
    } else {
        (tree.sum_accept / tree.n_leapfrog as f64).clamp(0.0, 1.0)
    };
    let energy = tree.proposal_energy;
    let info = TransitionInfo {
        energy,
        delta_energy: energy - energy_prev,
        resample_delta_k: kinetic_new - kinetic_old,
        divergent: tree.divergent,
        tree_depth: depth,
        step_size,
        accept_stat,
        n_leapfrog: tree.n_leapfrog,
    };
    Ok((tree.proposal, info))
}

/// Nesterov-style dual averaging of `log(step size)` toward a target
/// acceptance statistic.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    mu: f64,
    log_step: f64,
    log_step_avg: f64,
    h_bar: f64,
    count: u64,
    target_accept: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
}

const MIN_STEP_SIZE: f64 = 1e-10;

impl DualAveraging {
    pub fn new(initial_step: f64, target_accept: f64) -> Self {
        Self {
            mu: (10.0 * initial_step).ln(),
            log_step: initial_step.ln(),
            log_step_avg: initial_step.ln(),
            h_bar: 0.0,
            count: 0,
            target_accept,
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
        }
    }

    /// Feeds one acceptance statistic; returns `false` when the step size
    /// collapses below the floor.
    pub fn advance(&mut self, accept_stat: f64) -> bool {
        self.count += 1;
        let t = self.count as f64;
        let eta = 1.0 / (t + self.t0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target_accept - accept_stat);
        self.log_step = self.mu - self.h_bar * t.sqrt() / self.gamma;
        let w = t.powf(-self.kappa);
        self.log_step_avg = w * self.log_step + (1.0 - w) * self.log_step_avg;
        self.log_step > MIN_STEP_SIZE.ln()
    }

    /// Step size to use for the next warmup transition.
    pub fn current(&self) -> f64 {
        self.log_step.exp()
    }

    /// Averaged step size, used once adaptation ends.
    pub fn adapted(&self) -> f64 {
        self.log_step_avg.exp()
    }
}

/// Adapts a step size from a history of acceptance statistics, as used in
/// warmup. Returns the averaged step size.
pub fn adapt_step_size(
    initial_step: f64,
    accept_history: &[f64],
    target_accept: f64,
) -> Result<f64> {
    let mut da = DualAveraging::new(initial_step, target_accept);
    for &a in accept_history {
        if !da.advance(a) {
            return Err(Error::InvalidConfig(format!(
                "step size collapsed below {MIN_STEP_SIZE:e} during adaptation"
            )));
        }
    }
    Ok(da.adapted())
}

/// Diagonal metric from regularized per-coordinate variances of warmup draws.
///
/// Variances are shrunk toward a small identity floor,
/// `(n/(n+5))*var + (5/(n+5))*1e-3`, so short or degenerate windows still
/// give a positive-definite metric. Fewer than 10 draws falls back to the
/// unit metric.
pub fn adapt_metric(dim: usize, draws: &[Vec<f64>]) -> EuclideanMetric {
    let n = draws.len();
    if n < 10 {
        return EuclideanMetric::unit(dim);
    }
    let nf = n as f64;
    let mut mean = vec![0.0; dim];
    for d in draws {
        for (m, &x) in mean.iter_mut().zip(d.iter()) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= nf;
    }
    let mut var = vec![0.0; dim];
    for d in draws {
        for ((v, &x), &m) in var.iter_mut().zip(d.iter()).zip(mean.iter()) {
            let dev = x - m;
            *v += dev * dev;
        }
    }
    let shrink = nf / (nf + 5.0);
    let floor = (5.0 / (nf + 5.0)) * 1e-3;
    let diag: Vec<f64> = var
        .iter()
        .map(|&s| {
            let v = s / (nf - 1.0);
            let reg = shrink * v + floor;
            if reg.is_finite() {
                reg.max(floor)
            } else {
                1.0
            }
        })
        .collect();
    EuclideanMetric::diagonal(diag).unwrap_or_else(|_| EuclideanMetric::unit(dim))
}

/// Doubling heuristic for a starting step size: scale by powers of two until
/// the one-step acceptance ratio crosses 1/2.
fn find_reasonable_step_size<P: Potential + ?Sized, R: Rng>(
    state: &PhaseState,
    model: &P,
    metric: &EuclideanMetric,
    rng: &mut R,
) -> Result<f64> {
    let p = metric.sample_momentum(rng);
    let probe = PhaseState {
        q: state.q.clone(),
        p,
        potential: state.potential,
        grad_potential: state.grad_potential.clone(),
    };
    let h0 = hamiltonian(metric, &probe)?;

    let ratio_at = |eps: f64| -> Result<f64> {
        let next = integrate::leapfrog_step(&probe, eps, model, metric)?;
        let h = hamiltonian(metric, &next)?;
        let r = (h0 - h).exp();
        Ok(if r.is_nan() { 0.0 } else { r })
    };

    let mut eps = 1.0;
    let mut ratio = ratio_at(eps)?;
    let increase = ratio > 0.5;
    for _ in 0..200 {
        if increase {
            if ratio <= 0.5 || eps > 1e7 {
                break;
            }
            eps *= 2.0;
        } else {
            if ratio >= 0.5 {
                break;
            }
            if eps < MIN_STEP_SIZE {
                return Err(Error::InvalidConfig(
                    "no stable step size above 1e-10".into(),
                ));
            }
            eps *= 0.5;
        }
        ratio = ratio_at(eps)?;
    }
    Ok(eps.clamp(MIN_STEP_SIZE, 1e7))
}

// Stan-style staged warmup: a step-size-only opening buffer, doubling
// metric-estimation windows, and a step-size-only closing buffer.
struct WarmupSchedule {
    init_buffer: usize,
    window_ends: Vec<usize>,
}

impl WarmupSchedule {
    fn new(num_warmup: usize, adapt_metric: bool) -> Self {
        if !adapt_metric || num_warmup < 20 {
            return Self {
                init_buffer: num_warmup,
                window_ends: Vec::new(),
            };
        }
        let (init, term, base) = if num_warmup >= 150 {
            (75usize, 50usize, 25usize)
        } else {
            let init = (0.15 * num_warmup as f64).round() as usize;
            let term = (0.10 * num_warmup as f64).round() as usize;
            (init, term, num_warmup.saturating_sub(init + term))
        };
        let slow_end = num_warmup - term;
        let mut ends = Vec::new();
        let mut start = init;
        let mut size = base.max(1);
        while start < slow_end {
            let mut end = start + size;
            if end + 2 * size > slow_end {
                end = slow_end;
            }
            ends.push(end.min(slow_end));
            start = end;
            size *= 2;
        }
        Self {
            init_buffer: init,
            window_ends: ends,
        }
    }

    fn in_slow_phase(&self, iter: usize) -> bool {
        !self.window_ends.is_empty()
            && iter >= self.init_buffer
            && iter < *self.window_ends.last().unwrap()
    }

    fn is_window_end(&self, iter: usize) -> bool {
        self.window_ends.contains(&(iter + 1))
    }
}

fn run_single_chain(
    model: &TargetModel,
    cfg: &SamplerConfig,
    chain_id: usize,
    fixed_metric: Option<&EuclideanMetric>,
) -> Result<ChainTrace> {
    let dim = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain_id as u64);

    // Diffuse initialization on the unconstrained space, retried until the
    // potential is finite.
    let mut state = None;
    for _ in 0..100 {
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let candidate = PhaseState::new(q, vec![0.0; dim], model)?;
        if candidate.potential.is_finite() {
            state = Some(candidate);
            break;
        }
    }
    let mut state = state.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "could not find a finite starting point for model `{}`",
            model.name()
        ))
    })?;

    let mut metric = match fixed_metric {
        Some(m) => m.clone(),
        None => EuclideanMetric::unit(dim),
    };
    let collapse = || Error::StepSizeCollapsed {
        model: model.name().to_string(),
        chain: chain_id,
    };

    let mut step_size =
        find_reasonable_step_size(&state, model, &metric, &mut rng).map_err(|_| collapse())?;
    let mut da = DualAveraging::new(step_size, cfg.target_accept);

    let adapt_windows = fixed_metric.is_none() && cfg.metric_mode == MetricMode::DiagonalAdapt;
    let schedule = WarmupSchedule::new(cfg.num_warmup, adapt_windows);
    let mut window_draws: Vec<Vec<f64>> = Vec::new();
    let mut warmup_draws = cfg.keep_warmup.then(Vec::new);

    for iter in 0..cfg.num_warmup {
        let (next, info) = transition(&state, cfg, da.current(), model, &metric, &mut rng)?;
        state = next;
        if !da.advance(info.accept_stat) {
            return Err(collapse());
        }
        if let Some(tr) = warmup_draws.as_mut() {
            tr.push(model.constrain_draw(&state.q));
        }
        if schedule.in_slow_phase(iter) {
            window_draws.push(state.q.clone());
            if schedule.is_window_end(iter) {
                metric = adapt_metric(dim, &window_draws);
                window_draws.clear();
                step_size = find_reasonable_step_size(&state, model, &metric, &mut rng)
                    .map_err(|_| collapse())?;
                da = DualAveraging::new(step_size, cfg.target_accept);
            }
        }
    }

    step_size = if cfg.num_warmup > 0 { da.adapted() } else { da.current() };
    if step_size < MIN_STEP_SIZE {
        return Err(collapse());
    }

    let mut draws = Vec::with_capacity(cfg.num_samples);
    let mut infos = Vec::with_capacity(cfg.num_samples);
    for _ in 0..cfg.num_samples {
        let (next, info) = transition(&state, cfg, step_size, model, &metric, &mut rng)?;
        state = next;
        draws.push(model.constrain_draw(&state.q));
        infos.push(info);
    }

    Ok(ChainTrace {
        chain_id,
        parameter_names: model.parameter_names().to_vec(),
        draws,
        infos,
        warmup_draws,
        metric_diagonal: metric.diagonal_values().unwrap_or_default(),
        step_size,
    })
}

/// Runs `cfg.chains` independent chains, each with its own RNG substream
/// derived from the seed. Chains execute in parallel on the ambient rayon
/// pool; results are ordered by chain index and independent of scheduling.
pub fn run_chains(model: &TargetModel, cfg: &SamplerConfig) -> Result<Vec<ChainTrace>> {
    cfg.validate()?;
    (0..cfg.chains)
        .into_par_iter()
        .map(|chain_id| run_single_chain(model, cfg, chain_id, None))
        .collect()
}

/// [`run_chains`] with a fixed diagonal metric: metric adaptation is skipped,
/// step-size adaptation still runs.
pub fn run_chains_with_metric(
    model: &TargetModel,
    cfg: &SamplerConfig,
    diagonal: &[f64],
) -> Result<Vec<ChainTrace>> {
    cfg.validate()?;
    if diagonal.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: diagonal.len(),
        });
    }
    let metric = EuclideanMetric::diagonal(diagonal.to_vec())?;
    (0..cfg.chains)
        .into_par_iter()
        .map(|chain_id| run_single_chain(model, cfg, chain_id, Some(&metric)))
        .collect()
}
