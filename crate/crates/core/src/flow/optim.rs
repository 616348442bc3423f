//! Per-cluster flow optimization: the bidirectional Chamfer loss with the
//! local-consistency regularizer, its analytic gradient, and an adaptive
//! first-order optimizer driving both networks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::net::{Cache, Mlp};
use super::FlowConfig;
use crate::geom::{centroid, NNIndex, Point3};

/// Loss improvement below this over a full patience window stops early.
const EARLY_STOP_TOL: f64 = 1e-6;
/// Pairwise-sum crossover: exact O(N^2) below, variance identity above.
const EXACT_PAIRWISE_LIMIT: usize = 512;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterFlag {
    Ok,
    /// Box query returned no target points; flow left at zero.
    Unmatched,
    /// Optimization went non-finite twice; flow left at zero.
    Diverged,
}

#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub flows: Vec<Point3>,
    pub flag: ClusterFlag,
    pub final_loss: f64,
    pub iters: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    step: f64,
}

impl Adam {
    fn new(n: usize, step: f64) -> Adam {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, step }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for ((p, g), (m, v)) in
            params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= self.step * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Exact ordered-pair sum of squared flow differences.
fn pairwise_sum_exact(flows: &[Point3]) -> f64 {
    let mut acc = 0.0;
    for i in 0..flows.len() {
        for j in (i + 1)..flows.len() {
            let d = flows[i] - flows[j];
            acc += d.norm2();
        }
    }
    2.0 * acc
}

/// Same quantity via sum_{i != j} |f_i - f_j|^2 = 2N sum_i |f_i - mean|^2.
fn pairwise_sum_fast(flows: &[Point3]) -> f64 {
    match centroid(flows) {
        None => 0.0,
        Some(mean) => {
            let n = flows.len() as f64;
            2.0 * n * flows.iter().map(|f| (*f - mean).norm2()).sum::<f64>()
        }
    }
}

fn pairwise_sum(flows: &[Point3]) -> f64 {
    if flows.len() <= EXACT_PAIRWISE_LIMIT {
        pairwise_sum_exact(flows)
    } else {
        pairwise_sum_fast(flows)
    }
}

/// Shared state for repeated loss/gradient evaluations on one cluster.
/// Both nearest-neighbor targets are fixed across iterations — only the
/// query points move — so the trees are built once.
struct Problem<'a> {
    src: &'a [Point3],
    center: Point3,
    fwd_tree: NNIndex,
    bwd_tree: NNIndex,
    alpha: f64,
    // reusable buffers
    caches_f: Vec<Cache>,
    caches_b: Vec<Cache>,
    flows: Vec<Point3>,
    preds: Vec<Point3>,
    grad_q: Vec<Point3>,
}

impl<'a> Problem<'a> {
    fn new(src: &'a [Point3], target: &[Point3], alpha: f64, fwd: &Mlp, bwd: &Mlp) -> Problem<'a> {
        let n = src.len();
        Problem {
            src,
            // Network inputs are cluster-centered: raw world coordinates
            // would saturate the first tanh layer and stall optimization.
            center: centroid(src).expect("non-empty cluster"),
            fwd_tree: NNIndex::build(target).expect("non-empty target"),
            bwd_tree: NNIndex::build(src).expect("non-empty cluster"),
            alpha,
            caches_f: vec![fwd.cache(); n],
            caches_b: vec![bwd.cache(); n],
            flows: vec![Point3::ZERO; n],
            preds: vec![Point3::ZERO; n],
            grad_q: vec![Point3::ZERO; n],
        }
    }

    /// Evaluates the total loss and, when gradient buffers are supplied,
    /// accumulates d(loss)/d(params) for both networks.
    ///
    /// Loss = mean squared forward Chamfer + mean squared backward Chamfer
    /// + (alpha / N) * sum_{i != j} |f_i - f_j|^2. Nearest-neighbor indices
    /// are held fixed at their current values during differentiation, the
    /// standard subgradient for min-distance objectives.
    fn eval(
        &mut self,
        fwd: &Mlp,
        bwd: &Mlp,
        mut grads: Option<(&mut [f64], &mut [f64])>,
    ) -> f64 {
        let n = self.src.len();
        let n_f = n as f64;
        if let Some((gf, gb)) = grads.as_mut() {
            gf.fill(0.0);
            gb.fill(0.0);
        }

        let mut loss_fwd = 0.0;
        for i in 0..n {
            let x = self.src[i] - self.center;
            let f = fwd.forward([x.x, x.y, x.z], &mut self.caches_f[i]);
            let flow = Point3::new(f[0], f[1], f[2]);
            let q = self.src[i] + flow;
            if !q.is_finite() {
                return f64::NAN; // diverged; NaN queries would corrupt the NN search
            }
            self.flows[i] = flow;
            self.preds[i] = q;
            let (nn, d2) = self.fwd_tree.nearest(&q);
            loss_fwd += d2;
            self.grad_q[i] = (q - self.fwd_tree.points()[nn]) * (2.0 / n_f);
        }
        loss_fwd /= n_f;

        let mut loss_bwd = 0.0;
        let mut flow_mean = Point3::ZERO;
        for f in &self.flows {
            flow_mean += *f;
        }
        flow_mean = flow_mean * (1.0 / n_f);

        for i in 0..n {
            let q = self.preds[i];
            let xb = q - self.center;
            let g = bwd.forward([xb.x, xb.y, xb.z], &mut self.caches_b[i]);
            let r = q + Point3::new(g[0], g[1], g[2]);
            if !r.is_finite() {
                return f64::NAN;
            }
            let (nn, d2) = self.bwd_tree.nearest(&r);
            loss_bwd += d2;

            if let Some((gf, gb)) = grads.as_mut() {
                let gr = (r - self.bwd_tree.points()[nn]) * (2.0 / n_f);
                // r = q + h_bwd(q - c): gradient w.r.t. q flows both
                // directly and through the backward network's input.
                let dq_net = bwd.backward(&mut self.caches_b[i], [gr.x, gr.y, gr.z], gb);
                let dq = self.grad_q[i] + gr + Point3::new(dq_net[0], dq_net[1], dq_net[2]);
                let df = dq + (self.flows[i] - flow_mean) * (4.0 * self.alpha);
                fwd.backward(&mut self.caches_f[i], [df.x, df.y, df.z], gf);
            }
        }
        loss_bwd /= n_f;

        let loss_reg = self.alpha / n_f * pairwise_sum(&self.flows);
        loss_fwd + loss_bwd + loss_reg
    }
}

/// Evaluates the cluster loss at the given parameters (no gradients).
pub fn cluster_loss(fwd: &Mlp, bwd: &Mlp, src: &[Point3], target: &[Point3], alpha: f64) -> f64 {
    Problem::new(src, target, alpha, fwd, bwd).eval(fwd, bwd, None)
}

/// Evaluates the cluster loss and writes parameter gradients for both
/// networks into the supplied buffers.
pub fn cluster_loss_and_grad(
    fwd: &Mlp,
    bwd: &Mlp,
    src: &[Point3],
    target: &[Point3],
    alpha: f64,
    grad_fwd: &mut [f64],
    grad_bwd: &mut [f64],
) -> f64 {
    Problem::new(src, target, alpha, fwd, bwd).eval(fwd, bwd, Some((grad_fwd, grad_bwd)))
}

/// Optimizes a fresh network pair for one cluster and returns the forward
/// flow at the best parameters seen.
///
/// A non-finite loss triggers one restart with a re-seeded initialization;
/// a second failure returns zero flow flagged `Diverged`. An empty target
/// returns zero flow flagged `Unmatched`.
pub fn optimize_cluster_flow(
    src: &[Point3],
    target: &[Point3],
    cfg: &FlowConfig,
    seed: u64,
) -> ClusterOutcome {
    assert!(!src.is_empty(), "cluster must be non-empty");
    if target.is_empty() {
        return ClusterOutcome {
            flows: vec![Point3::ZERO; src.len()],
            flag: ClusterFlag::Unmatched,
            final_loss: f64::NAN,
            iters: 0,
        };
    }

    let mut total_iters = 0;
    for attempt in 0..2 {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(seed, attempt));
        let mut fwd = Mlp::new(cfg.net.layers, cfg.net.width, &mut rng);
        let mut bwd = Mlp::new(cfg.net.layers, cfg.net.width, &mut rng);
        let mut grad_f = vec![0.0; fwd.n_params()];
        let mut grad_b = vec![0.0; bwd.n_params()];
        let mut adam_f = Adam::new(fwd.n_params(), cfg.opt.step);
        let mut adam_b = Adam::new(bwd.n_params(), cfg.opt.step);
        let mut problem = Problem::new(src, target, cfg.alpha, &fwd, &bwd);

        let mut best_loss = f64::INFINITY;
        let mut best_flows = vec![Point3::ZERO; src.len()];
        let mut stalled = 0;
        let mut finite = true;

        for iter in 0..cfg.opt.max_iters {
            total_iters = iter + 1;
            let loss = problem.eval(&fwd, &bwd, Some((&mut grad_f, &mut grad_b)));
            if !loss.is_finite() {
                finite = false;
                break;
            }
            if loss < best_loss {
                if best_loss - loss >= EARLY_STOP_TOL {
                    stalled = 0;
                } else {
                    stalled += 1;
                }
                best_loss = loss;
                best_flows.copy_from_slice(&problem.flows);
            } else {
                stalled += 1;
            }
            if stalled >= cfg.opt.patience {
                break;
            }
            adam_f.update(fwd.params_mut(), &grad_f);
            adam_b.update(bwd.params_mut(), &grad_b);
        }

        if finite && best_loss.is_finite() {
            return ClusterOutcome {
                flows: best_flows,
                flag: ClusterFlag::Ok,
                final_loss: best_loss,
                iters: total_iters,
            };
        }
        log::warn!(
            "cluster optimization went non-finite (attempt {attempt}, {} points)",
            src.len()
        );
    }

    ClusterOutcome {
        flows: vec![Point3::ZERO; src.len()],
        flag: ClusterFlag::Diverged,
        final_loss: f64::NAN,
        iters: total_iters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blob(n: usize, spread: f64, salt: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(salt);
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-spread..spread),
                    rng.gen_range(-spread..spread),
                    1.0 + rng.gen_range(-0.3..0.3),
                )
            })
            .collect()
    }

    #[test]
    fn pairwise_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let flows: Vec<Point3> = (0..100)
            .map(|_| {
                Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        let exact = pairwise_sum_exact(&flows);
        let fast = pairwise_sum_fast(&flows);
        assert!((exact - fast).abs() / exact < 1e-12, "{exact} vs {fast}");
    }

    #[test]
    fn translated_cluster_recovers_translation() {
        let src = blob(60, 0.8, 1);
        let shift = Point3::new(1.0, 0.0, 0.0);
        let target: Vec<Point3> = src.iter().map(|p| *p + shift).collect();
        let out = optimize_cluster_flow(&src, &target, &FlowConfig::default(), 11);
        assert_eq!(out.flag, ClusterFlag::Ok);
        for f in &out.flows {
            assert!((*f - shift).norm() < 0.05, "flow {f:?}");
        }
    }

    #[test]
    fn identical_target_yields_near_zero_flow() {
        let src = blob(50, 0.8, 2);
        let out = optimize_cluster_flow(&src, &src, &FlowConfig::default(), 12);
        assert_eq!(out.flag, ClusterFlag::Ok);
        for f in &out.flows {
            assert!(f.norm() < 0.05, "flow {f:?}");
        }
    }

    #[test]
    fn empty_target_is_unmatched() {
        let src = blob(10, 0.5, 3);
        let out = optimize_cluster_flow(&src, &[], &FlowConfig::default(), 1);
        assert_eq!(out.flag, ClusterFlag::Unmatched);
        assert!(out.flows.iter().all(|f| *f == Point3::ZERO));
    }

    #[test]
    fn absurd_step_size_diverges_to_zero_flow() {
        let src = blob(20, 0.5, 4);
        let target: Vec<Point3> = src.iter().map(|p| *p + Point3::new(0.5, 0.0, 0.0)).collect();
        let mut cfg = FlowConfig::default();
        // Adam caps each parameter step at roughly `step`, so this must be
        // large enough that a handful of steps overflows the squared loss.
        cfg.opt.step = 1e160;
        let out = optimize_cluster_flow(&src, &target, &cfg, 5);
        assert_eq!(out.flag, ClusterFlag::Diverged);
        assert!(out.flows.iter().all(|f| *f == Point3::ZERO));
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut fwd = Mlp::new(2, 8, &mut rng);
        let mut bwd = Mlp::new(2, 8, &mut rng);
        let src = blob(10, 0.6, 6);
        let target: Vec<Point3> =
            src.iter().map(|p| *p + Point3::new(0.4, -0.2, 0.1)).collect();

        let mut gf = vec![0.0; fwd.n_params()];
        let mut gb = vec![0.0; bwd.n_params()];
        cluster_loss_and_grad(&fwd, &bwd, &src, &target, 0.1, &mut gf, &mut gb);

        let h = 1e-6;
        for k in 0..fwd.n_params() {
            let orig = fwd.params()[k];
            fwd.params_mut()[k] = orig + h;
            let up = cluster_loss(&fwd, &bwd, &src, &target, 0.1);
            fwd.params_mut()[k] = orig - h;
            let down = cluster_loss(&fwd, &bwd, &src, &target, 0.1);
            fwd.params_mut()[k] = orig;
            let fd = (up - down) / (2.0 * h);
            let scale = gf[k].abs().max(fd.abs()).max(1e-8);
            assert!((gf[k] - fd).abs() / scale < 1e-4, "fwd param {k}: {} vs {fd}", gf[k]);
        }
        for k in 0..bwd.n_params() {
            let orig = bwd.params()[k];
            bwd.params_mut()[k] = orig + h;
            let up = cluster_loss(&fwd, &bwd, &src, &target, 0.1);
            bwd.params_mut()[k] = orig - h;
            let down = cluster_loss(&fwd, &bwd, &src, &target, 0.1);
            bwd.params_mut()[k] = orig;
            let fd = (up - down) / (2.0 * h);
            let scale = gb[k].abs().max(fd.abs()).max(1e-8);
            assert!((gb[k] - fd).abs() / scale < 1e-4, "bwd param {k}: {} vs {fd}", gb[k]);
        }
    }

    #[test]
    fn stronger_consistency_weight_reduces_flow_variance() {
        // A rotating target makes the unregularized optimum spatially
        // varying, so the regularizer has something to shrink.
        let src = blob(50, 1.2, 7);
        let c = centroid(&src).unwrap();
        let (s, co) = 0.25f64.sin_cos();
        let target: Vec<Point3> = src
            .iter()
            .map(|p| {
                let d = *p - c;
                Point3::new(c.x + co * d.x - s * d.y + 0.4, c.y + s * d.x + co * d.y, p.z)
            })
            .collect();
        let variance = |alpha: f64| {
            let mut cfg = FlowConfig::default();
            cfg.alpha = alpha;
            let out = optimize_cluster_flow(&src, &target, &cfg, 31);
            assert_eq!(out.flag, ClusterFlag::Ok);
            let mean = centroid(&out.flows).unwrap();
            out.flows.iter().map(|f| (*f - mean).norm2()).sum::<f64>() / out.flows.len() as f64
        };
        let lo = variance(0.01);
        let hi = variance(1.0);
        assert!(hi <= lo, "variance did not shrink: alpha 0.01 -> {lo}, alpha 1.0 -> {hi}");
    }
}
