//! Energy-based sampler diagnostics.
//!
//! The energy history of a chain carries a clean signal about how well the
//! momentum distribution suits the target. Each transition resamples the
//! momentum (a random jump between energy level sets) and then flows along a
//! level set, so the spread of per-transition energy changes relative to the
//! spread of the energies themselves measures how quickly the chain explores
//! the marginal energy distribution.
//!
//! Three estimators are computed from the recorded energies:
//!
//! - `bfmi`, the Bayesian fraction of missing information: the ratio of
//!   squared transition-to-transition energy changes to the total energy
//!   variance. Values near 0 mean the resampling barely moves the chain
//!   across energies; values near 1 mean it effectively draws fresh energies.
//! - `ess_per_transition` of the energy series, the rate at which the energy
//!   random walk decorrelates.
//! - Aligned histograms of the centered energies and the energy changes, for
//!   the same comparison by eye, with analytic overlays for the
//!   Gaussian-momentum case.
//!
//! Divergence counts and split R-hat are carried alongside: when the chain
//! fails to explore (many divergences), every energy diagnostic is suspect
//! and the report is flagged accordingly.

use crate::error::{Error, Result};
use crate::model::TargetModel;
use crate::sample::{ChainTrace, SamplerConfig};

/// Divergence rate above which a report is marked unreliable.
pub const UNRELIABLE_DIVERGENCE_RATE: f64 = 0.001;

/// Energy history of one chain: energies E_0..E_N, the N transition deltas,
/// and the N resampling-only kinetic changes.
#[derive(Debug, Clone)]
pub struct EnergyTrace {
    energies: Vec<f64>,
    deltas: Vec<f64>,
    resample_deltas: Vec<f64>,
}

impl EnergyTrace {
    /// Builds a trace from raw energies; deltas are the consecutive
    /// differences, so the alignment invariant holds by construction.
    pub fn new(energies: Vec<f64>, resample_deltas: Vec<f64>) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::DiagnosticPrecondition(
                "energy trace needs at least two energies".into(),
            ));
        }
        if resample_deltas.len() != energies.len() - 1 {
            return Err(Error::DiagnosticPrecondition(format!(
                "expected {} resampling deltas, got {}",
                energies.len() - 1,
                resample_deltas.len()
            )));
        }
        let deltas = energies.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self {
            energies,
            deltas,
            resample_deltas,
        })
    }

    pub fn from_chain(trace: &ChainTrace) -> Result<Self> {
        let energies: Vec<f64> = trace.infos.iter().map(|i| i.energy).collect();
        let resample_deltas: Vec<f64> =
            trace.infos.iter().skip(1).map(|i| i.resample_delta_k).collect();
        Self::new(energies, resample_deltas)
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn resample_deltas(&self) -> &[f64] {
        &self.resample_deltas
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Bayesian fraction of missing information from an energy history:
/// `sum_n (E_n - E_{n-1})^2 / sum_n (E_n - mean(E))^2`.
///
/// Returns `None` when the energies are constant (zero denominator); the
/// value is then undefined rather than zero or infinite.
pub fn bfmi(energies: &[f64]) -> Result<Option<f64>> {
    if energies.len() < 2 {
        return Err(Error::DiagnosticPrecondition(
            "bfmi needs at least two energies".into(),
        ));
    }
    let numerator: f64 = energies.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let e_bar = mean(energies);
    let denominator: f64 = energies.iter().map(|&e| (e - e_bar).powi(2)).sum();
    if denominator == 0.0 {
        return Ok(None);
    }
    Ok(Some(numerator / denominator))
}

/// Pooled BFMI across chains: the ratio of pooled sums, with each chain's
/// energies centered at its own mean. Not the mean of per-chain values.
pub fn pooled_bfmi(traces: &[EnergyTrace]) -> Result<Option<f64>> {
    if traces.is_empty() {
        return Err(Error::DiagnosticPrecondition("no energy traces".into()));
    }
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for t in traces {
        numerator += t.deltas.iter().map(|d| d * d).sum::<f64>();
        let e_bar = mean(&t.energies);
        denominator += t.energies.iter().map(|&e| (e - e_bar).powi(2)).sum::<f64>();
    }
    if denominator == 0.0 {
        return Ok(None);
    }
    Ok(Some(numerator / denominator))
}

/// Effective sample size per transition of a scalar series, via
/// autocovariances truncated by the initial-monotone-positive-pairs rule.
///
/// Clamped to (0, 1]; `None` when the series has zero variance.
pub fn ess_per_transition(series: &[f64]) -> Result<Option<f64>> {
    let n = series.len();
    if n < 10 {
        return Err(Error::DiagnosticPrecondition(
            "ess_per_transition needs at least 10 values".into(),
        ));
    }
    let m = mean(series);
    let centered: Vec<f64> = series.iter().map(|&x| x - m).collect();
    let nf = n as f64;
    let gamma = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(centered[lag..].iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / nf
    };
    let gamma0 = gamma(0);
    if gamma0 == 0.0 || !gamma0.is_finite() {
        return Ok(None);
    }

    // Sum initial pairs rho_{2m} + rho_{2m+1} while positive, enforcing
    // monotone decrease.
    let mut pair_sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0usize;
    while k + 1 < n - 1 {
        let pair = (gamma(k) + gamma(k + 1)) / gamma0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        prev = pair;
        pair_sum += pair;
        k += 2;
    }
    let tau = 2.0 * pair_sum - 1.0;
    if tau <= 0.0 {
        return Ok(Some(1.0));
    }
    Ok(Some((1.0 / tau).min(1.0)))
}

/// Split potential scale reduction: each chain is halved (dropping the middle
/// draw of odd-length chains) and the reduction factor is computed over the
/// halves. `None` when the within-half variance is zero.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<Option<f64>> {
    if chains.is_empty() {
        return Err(Error::DiagnosticPrecondition("no chains".into()));
    }
    let len = chains[0].len();
    if chains.iter().any(|c| c.len() != len) {
        return Err(Error::DiagnosticPrecondition(
            "chains must have equal lengths".into(),
        ));
    }
    if len < 4 {
        return Err(Error::DiagnosticPrecondition(
            "split_rhat needs chains of length at least 4".into(),
        ));
    }
    let half = len / 2;
    let mut groups: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        groups.push(&c[..half]);
        groups.push(&c[len - half..]);
    }
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let vars: Vec<f64> = groups.iter().map(|g| sample_variance(g)).collect();
    let within = mean(&vars);
    if within <= 0.0 || !within.is_finite() {
        return Ok(None);
    }
    let between_over_n = sample_variance(&means);
    let nf = half as f64;
    let var_plus = (nf - 1.0) / nf * within + between_over_n;
    Ok(Some((var_plus / within).sqrt()))
}

/// A histogram with bin edges, counts, and normalized densities.
#[derive(Debug, Clone)]
pub struct Histogram {
    bin_edges: Vec<f64>,
    counts: Vec<u64>,
    densities: Vec<f64>,
    sample_count: usize,
}

impl Histogram {
    fn from_samples(samples: &[f64], edges: Vec<f64>) -> Self {
        let width = edges[1] - edges[0];
        let bins = edges.len() - 1;
        let mut counts = vec![0u64; bins];
        for &x in samples {
            let idx = (((x - edges[0]) / width).floor() as isize).clamp(0, bins as isize - 1);
            counts[idx as usize] += 1;
        }
        let n = samples.len();
        let densities = counts
            .iter()
            .map(|&c| c as f64 / (n as f64 * width))
            .collect();
        Self {
            bin_edges: edges,
            counts,
            densities,
            sample_count: n,
        }
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// Tab-separated table: bin_left, bin_right, density, reference_density.
    /// The reference density is evaluated at the bin midpoint; `None` fills
    /// the column with NaN.
    pub fn to_tsv(&self, reference: Option<&dyn Fn(f64) -> f64>) -> String {
        let mut out = String::from("bin_left\tbin_right\tdensity\treference_density\n");
        for i in 0..self.counts.len() {
            let left = self.bin_edges[i];
            let right = self.bin_edges[i + 1];
            let mid = 0.5 * (left + right);
            let r = reference.map(|f| f(mid)).unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                fmt_full(left),
                fmt_full(right),
                fmt_full(self.densities[i]),
                fmt_full(r)
            ));
        }
        out
    }
}

fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

/// Centered-energy and energy-change histograms over a shared set of bins.
#[derive(Debug, Clone)]
pub struct EnergyHistograms {
    pub centered_energy: Histogram,
    pub delta_energy: Histogram,
    /// Set when fewer than 100 transitions were available.
    pub low_sample_warning: bool,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n as f64 - 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn shared_edges(pooled: &mut Vec<f64>) -> Vec<f64> {
    pooled.retain(|x| x.is_finite());
    if pooled.is_empty() {
        return vec![-0.5, 0.5];
    }
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = pooled.len();
    let min = pooled[0];
    let max = pooled[n - 1];
    let iqr = quantile(pooled, 0.75) - quantile(pooled, 0.25);
    let mut width = 2.0 * iqr / (n as f64).cbrt();
    if width <= 0.0 {
        width = (max - min) / (n as f64).sqrt();
    }
    if width <= 0.0 {
        width = 1.0;
    }
    let bins = (((max - min) / width).ceil() as usize).max(1);
    (0..=bins).map(|i| min + i as f64 * width).collect()
}

/// Builds the centered-energy and energy-change histograms for one chain.
///
/// Both histograms use one bin width, chosen by the Freedman-Diaconis rule
/// on the pooled data, so their spreads can be compared directly.
pub fn energy_histograms(trace: &EnergyTrace) -> EnergyHistograms {
    energy_histograms_pooled(std::slice::from_ref(trace))
}

/// Same as [`energy_histograms`] but pooling several chains; each chain's
/// energies are centered at that chain's mean.
pub fn energy_histograms_pooled(traces: &[EnergyTrace]) -> EnergyHistograms {
    let mut centered: Vec<f64> = Vec::new();
    let mut deltas: Vec<f64> = Vec::new();
    for t in traces {
        let e_bar = mean(&t.energies);
        centered.extend(t.energies.iter().map(|&e| e - e_bar));
        deltas.extend_from_slice(&t.deltas);
    }
    let low_sample_warning = deltas.len() < 100;
    let mut pooled: Vec<f64> = centered.iter().chain(deltas.iter()).copied().collect();
    let edges = shared_edges(&mut pooled);
    EnergyHistograms {
        centered_energy: Histogram::from_samples(&centered, edges.clone()),
        delta_energy: Histogram::from_samples(&deltas, edges),
        low_sample_warning,
    }
}

// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-13 for x > 0.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return ln_gamma(x + 1.0) - x.ln();
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Density of the scaled chi-square distribution with `k` degrees of freedom
/// and scale `sigma` (mean `k*sigma`, variance `2*k*sigma^2`).
fn scaled_chi_square_density(x: f64, k: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let half_k = 0.5 * k;
    (-half_k * (2.0 * sigma).ln() - ln_gamma(half_k) + (half_k - 1.0) * x.ln()
        - x / (2.0 * sigma))
        .exp()
}

fn normal_density(x: f64, mean: f64, variance: f64) -> f64 {
    let z = x - mean;
    (-0.5 * z * z / variance).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

/// Analytic reference moments for a Gaussian momentum distribution in
/// dimension D, with density evaluators for histogram overlays.
///
/// - resampled kinetic energy: scaled chi-square, mean D/2, variance D/2;
/// - resampling-induced energy change: approximately N(0, D);
/// - marginal energy of an iid Gaussian target: scaled chi-square with 2D
///   degrees of freedom, mean D, variance D.
#[derive(Debug, Clone, Copy)]
pub struct GaussianEuclideanReference {
    pub dim: usize,
    pub kinetic_mean: f64,
    pub kinetic_variance: f64,
    pub delta_energy_mean: f64,
    pub delta_energy_variance: f64,
    pub gaussian_target_energy_mean: f64,
    pub gaussian_target_energy_variance: f64,
}

pub fn gaussian_euclidean_reference(dim: usize) -> GaussianEuclideanReference {
    let d = dim as f64;
    GaussianEuclideanReference {
        dim,
        kinetic_mean: 0.5 * d,
        kinetic_variance: 0.5 * d,
        delta_energy_mean: 0.0,
        delta_energy_variance: d,
        gaussian_target_energy_mean: d,
        gaussian_target_energy_variance: d,
    }
}

impl GaussianEuclideanReference {
    /// N(0, D) density of the resampling-induced energy change.
    pub fn delta_energy_density(&self, x: f64) -> f64 {
        normal_density(x, 0.0, self.dim as f64)
    }

    /// Scaled chi-square density of the resampled kinetic energy.
    pub fn kinetic_density(&self, x: f64) -> f64 {
        scaled_chi_square_density(x, self.dim as f64, 0.5)
    }

    /// Density of the iid-Gaussian-target marginal energy, centered at its
    /// mean so it overlays the centered-energy histogram.
    pub fn centered_gaussian_energy_density(&self, x: f64) -> f64 {
        scaled_chi_square_density(x + self.dim as f64, 2.0 * self.dim as f64, 0.5)
    }
}

/// Aggregated diagnostics over a set of chains.
#[derive(Debug, Clone)]
pub struct DiagnosticReport {
    pub model_name: String,
    pub dim: usize,
    pub chains: usize,
    pub draws_per_chain: usize,
    pub num_warmup: usize,
    pub seed: u64,
    pub step_sizes: Vec<f64>,
    pub per_chain_bfmi: Vec<Option<f64>>,
    pub pooled_bfmi: Option<f64>,
    pub per_chain_ess_t_energy: Vec<Option<f64>>,
    /// Mean of the defined per-chain ESS/T(E) values.
    pub ess_t_energy: Option<f64>,
    pub rhat_energy: Option<f64>,
    pub param_rhat: Vec<(String, Option<f64>)>,
    pub divergence_count: usize,
    pub divergence_rate: f64,
    pub max_depth_rate: f64,
    pub histograms: EnergyHistograms,
    pub reference: GaussianEuclideanReference,
    /// D / Var(E): the analytic numerator over the observed energy variance.
    pub bfmi_reference_proxy: Option<f64>,
    /// True when the centered-energy overlay is the analytic iid-Gaussian law.
    pub gaussian_energy_reference: bool,
    pub unreliable: bool,
}

/// Computes every diagnostic over the given chains. Degenerate estimators
/// are carried as `None`, never as sentinel numbers.
pub fn build_report(
    traces: &[ChainTrace],
    model: &TargetModel,
    cfg: &SamplerConfig,
) -> Result<DiagnosticReport> {
    if traces.is_empty() {
        return Err(Error::DiagnosticPrecondition("no chains to report on".into()));
    }
    let energy_traces: Vec<EnergyTrace> = traces
        .iter()
        .map(EnergyTrace::from_chain)
        .collect::<Result<_>>()?;

    let per_chain_bfmi: Vec<Option<f64>> = energy_traces
        .iter()
        .map(|t| bfmi(t.energies()))
        .collect::<Result<_>>()?;
    let pooled = pooled_bfmi(&energy_traces)?;

    let per_chain_ess: Vec<Option<f64>> = energy_traces
        .iter()
        .map(|t| ess_per_transition(t.energies()))
        .collect::<Result<_>>()?;
    let defined: Vec<f64> = per_chain_ess.iter().flatten().copied().collect();
    let ess_t_energy = if defined.is_empty() {
        None
    } else {
        Some(mean(&defined))
    };

    let energy_chains: Vec<Vec<f64>> = energy_traces
        .iter()
        .map(|t| t.energies().to_vec())
        .collect();
    let rhat_energy = split_rhat(&energy_chains)?;

    let n_params = model.parameter_names().len();
    let mut param_rhat = Vec::with_capacity(n_params);
    for (i, name) in model.parameter_names().iter().enumerate() {
        let series: Vec<Vec<f64>> = traces
            .iter()
            .map(|t| t.draws.iter().map(|d| d[i]).collect())
            .collect();
        param_rhat.push((name.clone(), split_rhat(&series)?));
    }

    let total: usize = traces.iter().map(|t| t.infos.len()).sum();
    let divergence_count = traces
        .iter()
        .flat_map(|t| t.infos.iter())
        .filter(|i| i.divergent)
        .count();
    let divergence_rate = divergence_count as f64 / total as f64;
    let max_depth_hits = traces
        .iter()
        .flat_map(|t| t.infos.iter())
        .filter(|i| i.tree_depth >= cfg.max_tree_depth)
        .count();
    let max_depth_rate = max_depth_hits as f64 / total as f64;

    let histograms = energy_histograms_pooled(&energy_traces);
    let reference = gaussian_euclidean_reference(model.dim());

    // Pooled energy variance with per-chain centering.
    let mut ss = 0.0;
    let mut count = 0usize;
    for t in &energy_traces {
        let e_bar = mean(t.energies());
        ss += t.energies().iter().map(|&e| (e - e_bar).powi(2)).sum::<f64>();
        count += t.energies().len();
    }
    let dof = count.saturating_sub(energy_traces.len());
    let bfmi_reference_proxy = if dof > 0 && ss > 0.0 {
        Some(model.dim() as f64 / (ss / dof as f64))
    } else {
        None
    };

    Ok(DiagnosticReport {
        model_name: model.name().to_string(),
        dim: model.dim(),
        chains: traces.len(),
        draws_per_chain: traces[0].infos.len(),
        num_warmup: cfg.num_warmup,
        seed: cfg.seed,
        step_sizes: traces.iter().map(|t| t.step_size).collect(),
        per_chain_bfmi,
        pooled_bfmi: pooled,
        per_chain_ess_t_energy: per_chain_ess,
        ess_t_energy,
        rhat_energy,
        param_rhat,
        divergence_count,
        divergence_rate,
        max_depth_rate,
        histograms,
        reference,
        bfmi_reference_proxy,
        gaussian_energy_reference: model.name() == "gaussian_iid",
        unreliable: divergence_rate > UNRELIABLE_DIVERGENCE_RATE,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "undefined".to_string(),
    }
}

impl DiagnosticReport {
    /// Plain-text rendering for `report.txt`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("microhmc diagnostic report\n");
        s.push_str("==========================\n");
        s.push_str(&format!("model: {} (dim {})\n", self.model_name, self.dim));
        s.push_str(&format!(
            "chains: {}  draws/chain: {}  warmup: {}  seed: {}\n",
            self.chains, self.draws_per_chain, self.num_warmup, self.seed
        ));
        s.push_str("step sizes:");
        for ss in &self.step_sizes {
            s.push_str(&format!(" {ss:.6}"));
        }
        s.push('\n');
        s.push('\n');
        s.push_str(&format!(
            "divergences: {} / {} (rate {:.6})\n",
            self.divergence_count,
            self.chains * self.draws_per_chain,
            self.divergence_rate
        ));
        s.push_str(&format!("max tree-depth hit rate: {:.6}\n", self.max_depth_rate));
        if self.unreliable {
            s.push_str("status: UNRELIABLE (divergence rate exceeds 0.1%; all diagnostics below are suspect)\n");
        } else {
            s.push_str("status: ok\n");
        }
        s.push('\n');
        s.push_str("energy diagnostics\n");
        s.push_str(&format!("  BFMI (pooled): {}\n", fmt_opt(self.pooled_bfmi)));
        s.push_str("  BFMI by chain:");
        for b in &self.per_chain_bfmi {
            s.push_str(&format!(" {}", fmt_opt(*b)));
        }
        s.push('\n');
        s.push_str(&format!(
            "  BFMI reference proxy D/Var(E): {}\n",
            fmt_opt(self.bfmi_reference_proxy)
        ));
        s.push_str(&format!("  ESS/T(E): {}\n", fmt_opt(self.ess_t_energy)));
        s.push_str("  ESS/T(E) by chain:");
        for e in &self.per_chain_ess_t_energy {
            s.push_str(&format!(" {}", fmt_opt(*e)));
        }
        s.push('\n');
        s.push_str(&format!("  split R-hat of E: {}\n", fmt_opt(self.rhat_energy)));
        s.push('\n');
        s.push_str("split R-hat by parameter\n");
        for (name, r) in &self.param_rhat {
            s.push_str(&format!("  {name}: {}\n", fmt_opt(*r)));
        }
        s.push('\n');
        s.push_str(&format!(
            "reference moments (Gaussian momenta, D = {})\n",
            self.reference.dim
        ));
        s.push_str(&format!(
            "  resampled kinetic energy: mean {:.1}, variance {:.1}\n",
            self.reference.kinetic_mean, self.reference.kinetic_variance
        ));
        s.push_str(&format!(
            "  resampling Delta E: mean {:.1}, variance {:.1}\n",
            self.reference.delta_energy_mean, self.reference.delta_energy_variance
        ));
        if self.gaussian_energy_reference {
            s.push_str(&format!(
                "  marginal energy (iid Gaussian target): mean {:.1}, variance {:.1}\n",
                self.reference.gaussian_target_energy_mean,
                self.reference.gaussian_target_energy_variance
            ));
        }
        if self.histograms.low_sample_warning {
            s.push_str("\nwarning: fewer than 100 transitions; histograms are coarse\n");
        }
        s.push_str("\nhistograms: energy_hist.tsv (centered E), delta_energy_hist.tsv (Delta E)\n");
        s
    }

    /// TSV table of the centered-energy histogram with its overlay.
    pub fn energy_hist_tsv(&self) -> String {
        if self.gaussian_energy_reference {
            let r = self.reference;
            self.histograms
                .centered_energy
                .to_tsv(Some(&move |x| r.centered_gaussian_energy_density(x)))
        } else {
            self.histograms.centered_energy.to_tsv(None)
        }
    }

    /// TSV table of the energy-change histogram with the N(0, D) overlay.
    pub fn delta_energy_hist_tsv(&self) -> String {
        let r = self.reference;
        self.histograms
            .delta_energy
            .to_tsv(Some(&move |x| r.delta_energy_density(x)))
    }
}
