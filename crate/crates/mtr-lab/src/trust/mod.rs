//! The trust estimator: standardized descriptors are clustered by a
//! two-component mixture, trust is the posterior of the stable cluster, and
//! per-key weights are smoothed on a slow timescale.

mod gmm;

pub use gmm::{
    fit_gmm, fit_gmm_with, responsibilities, single_gaussian_ll, stable_component, GmmFitOptions,
    GmmModel, DIM, N_COMPONENTS,
};

use crate::core::SeededRng;
use crate::error::{Error, Result};
use crate::monitor::DescriptorVector;
use std::collections::{BTreeMap, VecDeque};

/// Per-coordinate z-scoring with absolute floors on the standard deviation.
/// The floors set the scale below which descriptor differences count as
/// "the same regime"; without them a tightly converged run would have its
/// measurement noise amplified to unit scale.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub means: [f64; DIM],
    pub stds: [f64; DIM],
}

/// Floors in transformed units: drift and entropy variance are compared on a
/// log10 scale (they move by decades between regimes), consensus linearly.
pub const STD_FLOORS: [f64; DIM] = [0.25, 0.02, 0.25];

/// Additive offsets under the log transform; values below these count as
/// "equally quiet".
const LOG_EPS_DRIFT: f64 = 1e-7;
const LOG_EPS_ENTVAR: f64 = 1e-8;

/// Descriptor coordinates as the mixture sees them: log10 drift, raw
/// consensus, log10 entropy variance.
pub fn transform_descriptor(d: &[f64; DIM]) -> [f64; DIM] {
    [
        (d[0].max(0.0) + LOG_EPS_DRIFT).log10(),
        d[1],
        (d[2].max(0.0) + LOG_EPS_ENTVAR).log10(),
    ]
}

fn untransform_drift(log_drift: f64) -> f64 {
    (10f64.powf(log_drift) - LOG_EPS_DRIFT).max(0.0)
}

impl Standardizer {
    pub fn fit(points: &[[f64; DIM]], floors: [f64; DIM]) -> Standardizer {
        let n = points.len().max(1) as f64;
        let mut means = [0.0; DIM];
        for p in points {
            for d in 0..DIM {
                means[d] += p[d];
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = [0.0; DIM];
        for p in points {
            for d in 0..DIM {
                let x = p[d] - means[d];
                stds[d] += x * x;
            }
        }
        for (d, s) in stds.iter_mut().enumerate() {
            *s = (*s / n).sqrt().max(floors[d]);
        }
        Standardizer { means, stds }
    }

    pub fn apply(&self, x: &[f64; DIM]) -> [f64; DIM] {
        let mut out = [0.0; DIM];
        for d in 0..DIM {
            out[d] = (x[d] - self.means[d]) / self.stds[d];
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrustFitOptions {
    pub floors: [f64; DIM],
    /// Variance floor for the mixture fitted in standardized space. Also the
    /// resolution below which two components cannot claim separate structure.
    pub z_var_floor: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Extra evidence (in BIC units) the two-component model must provide
    /// before the fit is treated as two regimes.
    pub bic_margin: f64,
}

impl Default for TrustFitOptions {
    fn default() -> Self {
        TrustFitOptions {
            floors: STD_FLOORS,
            z_var_floor: 2.5e-3,
            max_iter: 200,
            tol: 1e-6,
            bic_margin: 0.0,
        }
    }
}

/// A fitted trust estimator: the standardizer, the mixture, the stable
/// component, and whether the two-component view is actually supported.
#[derive(Debug, Clone)]
pub struct TrustModel {
    pub scaler: Standardizer,
    pub gmm: GmmModel,
    pub stable: usize,
    /// False when a single Gaussian explains the fit window at least as well
    /// (BIC): a single coherent regime, so every key scores full trust.
    pub bimodal: bool,
}

impl TrustModel {
    pub fn fit(points: &[[f64; DIM]], rng: &mut SeededRng, opts: &TrustFitOptions) -> Result<TrustModel> {
        let finite: Vec<[f64; DIM]> = points
            .iter()
            .filter(|p| p.iter().all(|v| v.is_finite()))
            .cloned()
            .collect();
        if finite.len() < 2 * N_COMPONENTS {
            return Err(Error::insufficient(format!(
                "trust fit needs >= {} points, got {}",
                2 * N_COMPONENTS,
                finite.len()
            )));
        }
        let transformed: Vec<[f64; DIM]> = finite.iter().map(transform_descriptor).collect();
        let scaler = Standardizer::fit(&transformed, opts.floors);
        let z: Vec<[f64; DIM]> = transformed.iter().map(|p| scaler.apply(p)).collect();
        let gmm = fit_gmm_with(
            &z,
            rng,
            &GmmFitOptions {
                max_iter: opts.max_iter,
                tol: opts.tol,
                var_floor: opts.z_var_floor,
            },
        )?;
        let stable = stable_component(&gmm);

        // One regime or two? Compare BIC of the mixture against a single
        // diagonal Gaussian on the same standardized points.
        let n = z.len() as f64;
        let ll2 = *gmm.ll_trace.last().unwrap_or(&f64::NEG_INFINITY);
        let ll1 = single_gaussian_ll(&z, opts.z_var_floor);
        let p2 = (2 * DIM * 2 + 1) as f64; // two means, two diag covs, one mixing weight
        let p1 = (2 * DIM) as f64;
        let bic2 = -2.0 * ll2 + p2 * n.ln();
        let bic1 = -2.0 * ll1 + p1 * n.ln();
        let bimodal = bic2 + opts.bic_margin < bic1;

        Ok(TrustModel {
            scaler,
            gmm,
            stable,
            bimodal,
        })
    }

    /// Trust weight for one descriptor vector.
    pub fn weight(&self, d: &DescriptorVector) -> f64 {
        if !self.bimodal {
            return 1.0;
        }
        let t = transform_descriptor(&d.as_array());
        trust_weight_gmm(&self.gmm, &self.scaler.apply(&t))
    }

    /// Stable-component drift mean in raw descriptor units.
    pub fn stable_mean_drift(&self) -> f64 {
        let log_drift = self.gmm.means[self.stable][0] * self.scaler.stds[0] + self.scaler.means[0];
        untransform_drift(log_drift)
    }
}

/// Posterior probability of the stable cluster at a standardized descriptor.
pub fn trust_weight_gmm(model: &GmmModel, standardized: &[f64; DIM]) -> f64 {
    responsibilities(model, standardized)[stable_component(model)]
}

/// Per-key smoothed trust weights. Keys absent from the map carry weight 1.
#[derive(Debug, Clone)]
pub struct TrustState {
    weights: BTreeMap<usize, f64>,
    pub ema_alpha: f64,
    pub last_refit_step: u64,
    /// Environment-step interval between refits; `None` disables refitting.
    pub refit_interval: Option<u64>,
}

impl TrustState {
    pub fn new(ema_alpha: f64, refit_interval: Option<u64>) -> Self {
        TrustState {
            weights: BTreeMap::new(),
            ema_alpha,
            last_refit_step: 0,
            refit_interval,
        }
    }

    pub fn get(&self, key: usize) -> f64 {
        self.weights.get(&key).copied().unwrap_or(1.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&usize, &f64)> {
        self.weights.iter()
    }

    /// Mean weight over keys seen so far; 1.0 before any evidence.
    pub fn mean_weight(&self) -> f64 {
        if self.weights.is_empty() {
            1.0
        } else {
            self.weights.values().sum::<f64>() / self.weights.len() as f64
        }
    }
}

/// EMA update toward the raw weights: `w' = (1-alpha) w + alpha w_raw`.
/// Keys without new evidence keep their old weight; outputs are clamped to
/// [0, 1].
pub fn update_trust(state: &mut TrustState, raw: &BTreeMap<usize, f64>, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::config(format!("alpha must be in (0,1], got {alpha}")));
    }
    for (&key, &w_raw) in raw {
        let old = state.get(key);
        let new = ((1.0 - alpha) * old + alpha * w_raw).clamp(0.0, 1.0);
        state.weights.insert(key, new);
    }
    Ok(())
}

/// True on exact multiples of the refit interval.
pub fn should_refit(step: u64, k: u64) -> Result<bool> {
    if k == 0 {
        return Err(Error::config("refit interval must be >= 1"));
    }
    Ok(step % k == 0)
}

/// Rollout-granularity version of the refit gate: true when the interval
/// boundary was crossed between two consecutive step counts.
pub fn crossed_refit_boundary(prev_step: u64, step: u64, k: u64) -> bool {
    k > 0 && step / k > prev_step / k
}

/// Bounded memory of per-refit descriptor sets. The mixture needs a
/// cross-regime view to anchor "stable": each refit's per-key descriptors are
/// remembered, entries older than the span are dropped, and fit time sees at
/// most `max_sets` evenly spaced sets.
#[derive(Debug, Clone)]
pub struct DescriptorMemory {
    span_steps: u64,
    max_sets: usize,
    sets: VecDeque<(u64, Vec<(usize, [f64; DIM])>)>,
}

impl DescriptorMemory {
    pub fn new(span_steps: u64, max_sets: usize) -> Self {
        DescriptorMemory {
            span_steps,
            max_sets: max_sets.max(1),
            sets: VecDeque::new(),
        }
    }

    pub fn record(&mut self, step: u64, set: Vec<(usize, [f64; DIM])>) {
        self.sets.push_back((step, set));
        let cutoff = step.saturating_sub(self.span_steps);
        while self.sets.front().is_some_and(|(s, _)| *s < cutoff) {
            self.sets.pop_front();
        }
    }

    /// All remembered descriptors, downsampled to at most `max_sets` refit
    /// sets (evenly spaced, always including the newest).
    pub fn points(&self) -> Vec<[f64; DIM]> {
        let n = self.sets.len();
        if n == 0 {
            return Vec::new();
        }
        let take = self.max_sets.min(n);
        let mut out = Vec::new();
        for i in 0..take {
            // Even spacing over [0, n-1] that ends at the newest set.
            let idx = if take == 1 { n - 1 } else { i * (n - 1) / (take - 1) };
            for (_, d) in &self.sets[idx].1 {
                out.push(*d);
            }
        }
        out
    }

    pub fn n_sets(&self) -> usize {
        self.sets.len()
    }
}
