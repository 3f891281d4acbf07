//! Two-component diagonal-covariance Gaussian mixture fitted by EM.

use crate::core::SeededRng;
use crate::error::{Error, Result};

pub const N_COMPONENTS: usize = 2;
pub const DIM: usize = 3;

#[derive(Debug, Clone)]
pub struct GmmModel {
    pub weights: [f64; N_COMPONENTS],
    pub means: [[f64; DIM]; N_COMPONENTS],
    pub vars: [[f64; DIM]; N_COMPONENTS],
    /// Total log-likelihood after each accepted EM iteration (non-decreasing).
    pub ll_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct GmmFitOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub var_floor: f64,
}

impl Default for GmmFitOptions {
    fn default() -> Self {
        GmmFitOptions {
            max_iter: 200,
            tol: 1e-6,
            var_floor: 1e-6,
        }
    }
}

/// EM from a k-means++ seeding. Non-finite rows are dropped; fewer than
/// 2k remaining points is an error (callers keep their previous trust).
pub fn fit_gmm(points: &[[f64; DIM]], rng: &mut SeededRng) -> Result<GmmModel> {
    fit_gmm_with(points, rng, &GmmFitOptions::default())
}

pub fn fit_gmm_with(
    points: &[[f64; DIM]],
    rng: &mut SeededRng,
    opts: &GmmFitOptions,
) -> Result<GmmModel> {
    let pts: Vec<[f64; DIM]> = points
        .iter()
        .filter(|p| p.iter().all(|v| v.is_finite()))
        .cloned()
        .collect();
    let n = pts.len();
    if n < 2 * N_COMPONENTS {
        return Err(Error::insufficient(format!(
            "GMM fit needs >= {} finite points, got {n}",
            2 * N_COMPONENTS
        )));
    }

    let mut model = init_kmeans_pp(&pts, rng, opts);
    let mut prev_ll = f64::NEG_INFINITY;
    let mut ll_trace = Vec::new();
    let mut resp = vec![[0.0; N_COMPONENTS]; n];
    let mut backup = model.clone();

    for _ in 0..opts.max_iter {
        let ll = e_step(&model, &pts, &mut resp);
        // Variance flooring can perturb the exact M-step; if the likelihood
        // ever drops, keep the previous parameters and stop.
        if ll + 1e-12 < prev_ll {
            model = backup;
            break;
        }
        ll_trace.push(ll);
        let improved = ll - prev_ll;
        prev_ll = ll;
        backup = model.clone();
        m_step(&mut model, &pts, &resp, opts.var_floor);
        if improved.abs() < opts.tol && ll_trace.len() > 1 {
            model = backup;
            break;
        }
    }

    debug_assert!(ll_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    model.ll_trace = ll_trace;
    Ok(model)
}

fn dist2(a: &[f64; DIM], b: &[f64; DIM]) -> f64 {
    let mut d = 0.0;
    for i in 0..DIM {
        let x = a[i] - b[i];
        d += x * x;
    }
    d
}

fn init_kmeans_pp(pts: &[[f64; DIM]], rng: &mut SeededRng, opts: &GmmFitOptions) -> GmmModel {
    let n = pts.len();
    let c0 = pts[rng.gen_range(0..n)];
    let d2: Vec<f64> = pts.iter().map(|p| dist2(p, &c0)).collect();
    let total: f64 = d2.iter().sum();
    let c1 = if total > 0.0 {
        let mut target = rng.uniform() * total;
        let mut pick = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            if target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        pts[pick]
    } else {
        c0
    };

    // One hard-assignment pass to seed means/vars/weights.
    let centers = [c0, c1];
    let mut counts = [0usize; N_COMPONENTS];
    let mut sums = [[0.0; DIM]; N_COMPONENTS];
    let mut assign = vec![0usize; n];
    for (i, p) in pts.iter().enumerate() {
        let a = if dist2(p, &centers[1]) < dist2(p, &centers[0]) { 1 } else { 0 };
        assign[i] = a;
        counts[a] += 1;
        for d in 0..DIM {
            sums[a][d] += p[d];
        }
    }

    // Global stats as the fallback for empty clusters.
    let mut gmean = [0.0; DIM];
    for p in pts {
        for d in 0..DIM {
            gmean[d] += p[d];
        }
    }
    for v in &mut gmean {
        *v /= n as f64;
    }
    let mut gvar = [0.0; DIM];
    for p in pts {
        for d in 0..DIM {
            let x = p[d] - gmean[d];
            gvar[d] += x * x;
        }
    }
    for v in &mut gvar {
        *v = (*v / n as f64).max(opts.var_floor);
    }

    let mut weights = [0.5; N_COMPONENTS];
    let mut means = [gmean; N_COMPONENTS];
    let mut vars = [gvar; N_COMPONENTS];
    for j in 0..N_COMPONENTS {
        if counts[j] == 0 {
            continue;
        }
        for d in 0..DIM {
            means[j][d] = sums[j][d] / counts[j] as f64;
        }
        let mut var = [0.0; DIM];
        for (i, p) in pts.iter().enumerate() {
            if assign[i] == j {
                for d in 0..DIM {
                    let x = p[d] - means[j][d];
                    var[d] += x * x;
                }
            }
        }
        for d in 0..DIM {
            vars[j][d] = (var[d] / counts[j] as f64).max(opts.var_floor);
        }
    }
    let w0 = (counts[0].max(1)) as f64;
    let w1 = (counts[1].max(1)) as f64;
    weights[0] = w0 / (w0 + w1);
    weights[1] = w1 / (w0 + w1);

    GmmModel {
        weights,
        means,
        vars,
        ll_trace: Vec::new(),
    }
}

fn log_gauss(x: &[f64; DIM], mean: &[f64; DIM], var: &[f64; DIM]) -> f64 {
    const LOG_2PI: f64 = 1.8378770664093453;
    let mut acc = 0.0;
    for d in 0..DIM {
        let diff = x[d] - mean[d];
        acc += -0.5 * (LOG_2PI + var[d].ln()) - diff * diff / (2.0 * var[d]);
    }
    acc
}

/// Fills responsibilities and returns the total log-likelihood.
fn e_step(model: &GmmModel, pts: &[[f64; DIM]], resp: &mut [[f64; N_COMPONENTS]]) -> f64 {
    let mut ll = 0.0;
    for (i, p) in pts.iter().enumerate() {
        let mut logs = [0.0; N_COMPONENTS];
        for j in 0..N_COMPONENTS {
            logs[j] = model.weights[j].max(1e-300).ln() + log_gauss(p, &model.means[j], &model.vars[j]);
        }
        let max = logs[0].max(logs[1]);
        let lse = max + ((logs[0] - max).exp() + (logs[1] - max).exp()).ln();
        ll += lse;
        for j in 0..N_COMPONENTS {
            resp[i][j] = (logs[j] - lse).exp();
        }
    }
    ll
}

fn m_step(model: &mut GmmModel, pts: &[[f64; DIM]], resp: &[[f64; N_COMPONENTS]], var_floor: f64) {
    let n = pts.len() as f64;
    for j in 0..N_COMPONENTS {
        let nj: f64 = resp.iter().map(|r| r[j]).sum::<f64>().max(1e-10);
        model.weights[j] = nj / n;
        let mut mean = [0.0; DIM];
        for (i, p) in pts.iter().enumerate() {
            for d in 0..DIM {
                mean[d] += resp[i][j] * p[d];
            }
        }
        for v in &mut mean {
            *v /= nj;
        }
        let mut var = [0.0; DIM];
        for (i, p) in pts.iter().enumerate() {
            for d in 0..DIM {
                let x = p[d] - mean[d];
                var[d] += resp[i][j] * x * x;
            }
        }
        for v in &mut var {
            *v = (*v / nj).max(var_floor);
        }
        model.means[j] = mean;
        model.vars[j] = var;
    }
    let wsum = model.weights[0] + model.weights[1];
    model.weights[0] /= wsum;
    model.weights[1] /= wsum;
}

/// Bayes posterior over components, computed in log space; sums to 1.
pub fn responsibilities(model: &GmmModel, x: &[f64; DIM]) -> [f64; N_COMPONENTS] {
    let mut logs = [0.0; N_COMPONENTS];
    for j in 0..N_COMPONENTS {
        logs[j] = model.weights[j].max(1e-300).ln() + log_gauss(x, &model.means[j], &model.vars[j]);
    }
    let max = logs[0].max(logs[1]);
    let e0 = (logs[0] - max).exp();
    let e1 = (logs[1] - max).exp();
    [e0 / (e0 + e1), e1 / (e0 + e1)]
}

/// The component interpreted as "coherent learning": lower mean policy drift,
/// ties broken by lower entropy-variance mean, then by lower index.
pub fn stable_component(model: &GmmModel) -> usize {
    let (d0, d1) = (model.means[0][0], model.means[1][0]);
    if d0 < d1 {
        0
    } else if d1 < d0 {
        1
    } else {
        let (e0, e1) = (model.means[0][2], model.means[1][2]);
        if e1 < e0 {
            1
        } else {
            0
        }
    }
}

/// Total log-likelihood of the points under a single diagonal Gaussian with
/// the same variance floor; used for the one-vs-two component comparison.
pub fn single_gaussian_ll(points: &[[f64; DIM]], var_floor: f64) -> f64 {
    let n = points.len() as f64;
    let mut mean = [0.0; DIM];
    for p in points {
        for d in 0..DIM {
            mean[d] += p[d];
        }
    }
    for v in &mut mean {
        *v /= n;
    }
    let mut var = [0.0; DIM];
    for p in points {
        for d in 0..DIM {
            let x = p[d] - mean[d];
            var[d] += x * x;
        }
    }
    for v in &mut var {
        *v = (*v / n).max(var_floor);
    }
    points.iter().map(|p| log_gauss(p, &mean, &var)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn gen_two_clusters(
        rng: &mut SeededRng,
        n_each: usize,
        m0: [f64; 3],
        m1: [f64; 3],
        std: f64,
    ) -> Vec<[f64; 3]> {
        let mut pts = Vec::with_capacity(2 * n_each);
        for i in 0..2 * n_each {
            let m = if i < n_each { m0 } else { m1 };
            pts.push([
                rng.normal(m[0], std),
                rng.normal(m[1], std),
                rng.normal(m[2], std),
            ]);
        }
        pts
    }

    #[test]
    fn recovers_generating_means_on_synthetic_clusters() {
        let mut rng = SeededRng::new(13, "gmm");
        let m0 = [0.05, 0.95, 0.01];
        let m1 = [1.5, 0.4, 0.5];
        let pts = gen_two_clusters(&mut rng, 200, m0, m1, 0.02);
        let model = fit_gmm(&pts, &mut rng).unwrap();

        // Match fitted components to generators by nearest mean.
        let d00 = dist2(&model.means[0], &m0);
        let d01 = dist2(&model.means[0], &m1);
        let (f0, f1) = if d00 <= d01 {
            (model.means[0], model.means[1])
        } else {
            (model.means[1], model.means[0])
        };
        for d in 0..3 {
            assert!((f0[d] - m0[d]).abs() < 0.05, "coord {d}: {} vs {}", f0[d], m0[d]);
            assert!((f1[d] - m1[d]).abs() < 0.05, "coord {d}: {} vs {}", f1[d], m1[d]);
        }
    }

    #[test]
    fn single_gaussian_combined_mean_matches_sample_mean() {
        let mut rng = SeededRng::new(14, "gmm1");
        let pts: Vec<[f64; 3]> = (0..500)
            .map(|_| [rng.normal(0.3, 0.1), rng.normal(0.7, 0.1), rng.normal(0.0, 0.1)])
            .collect();
        let model = fit_gmm(&pts, &mut rng).unwrap();
        let mut sample_mean = [0.0; 3];
        for p in &pts {
            for d in 0..3 {
                sample_mean[d] += p[d] / pts.len() as f64;
            }
        }
        for d in 0..3 {
            let combined = model.weights[0] * model.means[0][d] + model.weights[1] * model.means[1][d];
            assert!((combined - sample_mean[d]).abs() < 0.05);
        }
    }

    #[test]
    fn identical_points_give_degenerate_model_without_nan() {
        let mut rng = SeededRng::new(15, "gmm-deg");
        let pts = vec![[0.5, 0.5, 0.5]; 50];
        let model = fit_gmm(&pts, &mut rng).unwrap();
        assert_eq!(model.means[0], model.means[1]);
        assert_eq!(model.means[0], [0.5, 0.5, 0.5]);
        for j in 0..2 {
            assert!(model.weights[j].is_finite());
            assert!(model.means[j].iter().all(|v| v.is_finite()));
            assert!(model.vars[j].iter().all(|&v| v >= 1e-6));
        }
        let r = responsibilities(&model, &[0.5, 0.5, 0.5]);
        assert!(r.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn too_few_points_is_an_error() {
        let mut rng = SeededRng::new(16, "gmm-few");
        assert!(fit_gmm(&[[0.0; 3]; 3], &mut rng).is_err());
        // Non-finite rows are dropped before the count check.
        let pts = vec![[f64::NAN, 0.0, 0.0], [0.1; 3], [0.2; 3], [0.3; 3]];
        assert!(fit_gmm(&pts, &mut rng).is_err());
    }

    #[test]
    fn log_likelihood_is_non_decreasing() {
        let mut rng = SeededRng::new(17, "gmm-ll");
        for case in 0..20 {
            let pts: Vec<[f64; 3]> = (0..60)
                .map(|_| {
                    [
                        rng.uniform_range(-1.0, 1.0 + case as f64 * 0.1),
                        rng.uniform_range(0.0, 1.0),
                        rng.uniform_range(0.0, 0.5),
                    ]
                })
                .collect();
            let model = fit_gmm(&pts, &mut rng).unwrap();
            for w in model.ll_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "LL decreased: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn responsibilities_examples() {
        // Far-separated components: at a component mean the posterior is ~1.
        let model = GmmModel {
            weights: [0.5, 0.5],
            means: [[0.0, 0.0, 0.0], [10.0, 10.0, 10.0]],
            vars: [[1.0; 3]; 2],
            ll_trace: vec![],
        };
        let r = responsibilities(&model, &[0.0, 0.0, 0.0]);
        assert!(r[0] > 0.999);

        // Identical components: posterior equals the mixing weights.
        let eq = GmmModel {
            weights: [0.5, 0.5],
            means: [[1.0; 3]; 2],
            vars: [[1.0; 3]; 2],
            ll_trace: vec![],
        };
        let r = responsibilities(&eq, &[3.0, -1.0, 0.0]);
        assert!((r[0] - 0.5).abs() < 1e-12 && (r[1] - 0.5).abs() < 1e-12);

        let skew = GmmModel {
            weights: [0.9, 0.1],
            means: [[1.0; 3]; 2],
            vars: [[1.0; 3]; 2],
            ll_trace: vec![],
        };
        let r = responsibilities(&skew, &[0.0, 0.0, 0.0]);
        assert!((r[0] - 0.9).abs() < 1e-12 && (r[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let mut rng = SeededRng::new(18, "resp");
        let pts = gen_two_clusters(&mut rng, 50, [0.0, 0.5, 0.0], [2.0, 0.5, 1.0], 0.1);
        let model = fit_gmm(&pts, &mut rng).unwrap();
        for p in &pts {
            let r = responsibilities(&model, p);
            assert!((r[0] + r[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stable_component_rules() {
        let mk = |m0: [f64; 3], m1: [f64; 3]| GmmModel {
            weights: [0.5, 0.5],
            means: [m0, m1],
            vars: [[1.0; 3]; 2],
            ll_trace: vec![],
        };
        // Lower drift wins.
        assert_eq!(stable_component(&mk([0.01, 0.9, 0.1], [1.2, 0.5, 0.2])), 0);
        assert_eq!(stable_component(&mk([1.2, 0.5, 0.2], [0.01, 0.9, 0.1])), 1);
        // Equal drift: lower entropy variance wins.
        assert_eq!(stable_component(&mk([0.5, 0.9, 0.5], [0.5, 0.5, 0.1])), 1);
        // Fully identical: lowest index.
        assert_eq!(stable_component(&mk([0.5; 3], [0.5; 3])), 0);
    }
}
