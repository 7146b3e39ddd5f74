//! Reference answers: exhaustive enumeration of the marginal hidden-layer
//! model and a block Gibbs sampler over the joint distribution.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math::{self, LogSumExp};
use crate::model::{marginalize, GrbmParams, MarginalBm};

/// Largest hidden state space the enumerators accept by default (2²⁴).
pub const DEFAULT_STATE_CAP: u64 = 1 << 24;

/// Exact expectations and free energy of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoments {
    /// ⟨h_j⟩
    pub m: Vec<f64>,
    /// ⟨h_j²⟩
    pub s: Vec<f64>,
    /// ⟨v_i⟩ = b_i + Σ_j w_ij ⟨h_j⟩
    pub nu: Vec<f64>,
    /// F = −ln Z
    pub free_energy: f64,
    /// ln Σ_h exp(Σ B_j h_j + Σ D_j h_j² + Σ_{j<k} J_jk h_j h_k)
    pub log_z_marginal: f64,
}

fn state_count(params: &GrbmParams, cap: u64) -> Result<u64> {
    let k = params.space().len() as u64;
    let states = (0..params.n_hidden()).fold(1u64, |acc, _| acc.saturating_mul(k));
    if states > cap {
        return Err(Error::Capacity { states, cap });
    }
    Ok(states)
}

// Exponent and local fields are rebuilt from scratch this often to stop
// round-off from piling up along long enumerations.
const RESYNC_INTERVAL: u64 = 1024;

/// Walks every hidden configuration in reflected mixed-radix Gray order, so
/// consecutive states differ in exactly one unit by one alphabet step. The
/// log weight is updated in O(|H|) per state through cached local fields
/// `Σ_{k≠j} J_jk h_k`.
struct GrayWalk<'a> {
    marginal: &'a MarginalBm,
    values: &'a [f64],
    digits: Vec<usize>,
    ascending: Vec<bool>,
    h: Vec<f64>,
    local: Vec<f64>,
    log_weight: f64,
    steps: u64,
}

impl<'a> GrayWalk<'a> {
    fn new(marginal: &'a MarginalBm, values: &'a [f64]) -> Self {
        let n = marginal.n_hidden();
        let mut walk = Self {
            marginal,
            values,
            digits: vec![0; n],
            ascending: vec![true; n],
            h: vec![values[0]; n],
            local: vec![0.0; n],
            log_weight: 0.0,
            steps: 0,
        };
        walk.resync();
        walk
    }

    fn resync(&mut self) {
        for j in 0..self.h.len() {
            self.local[j] = self.marginal.neighbor_field(j, &self.h);
        }
        self.log_weight = self.marginal.log_weight(&self.h);
    }

    /// Moves to the next configuration; `false` once all have been visited.
    fn advance(&mut self) -> bool {
        let k = self.values.len();
        let Some(j) = (0..self.h.len()).find(|&j| {
            let movable = if self.ascending[j] {
                self.digits[j] + 1 < k
            } else {
                self.digits[j] > 0
            };
            if !movable {
                self.ascending[j] = !self.ascending[j];
            }
            movable
        }) else {
            return false;
        };
        if self.ascending[j] {
            self.digits[j] += 1;
        } else {
            self.digits[j] -= 1;
        }
        let old = self.h[j];
        let new = self.values[self.digits[j]];
        let delta = new - old;
        let m = self.marginal;
        self.log_weight += delta * (m.linear[j] + self.local[j]) + m.quadratic[j] * (new * new - old * old);
        self.h[j] = new;
        self.steps += 1;
        if self.steps.is_multiple_of(RESYNC_INTERVAL) {
            self.resync();
        } else {
            let row = &m.coupling[j * self.h.len()..(j + 1) * self.h.len()];
            for (l, jk) in self.local.iter_mut().zip(row) {
                *l += jk * delta;
            }
        }
        true
    }
}

fn log_partition(params: &GrbmParams, marginal: &MarginalBm) -> f64 {
    let mut walk = GrayWalk::new(marginal, params.space().values());
    let mut acc = LogSumExp::new();
    loop {
        acc.push(walk.log_weight);
        if !walk.advance() {
            break;
        }
    }
    acc.value()
}

/// F(θ) = −ln Z(θ) by enumeration over all hidden configurations, with the
/// default state cap.
pub fn exact_free_energy(params: &GrbmParams) -> Result<f64> {
    exact_free_energy_capped(params, DEFAULT_STATE_CAP)
}

pub fn exact_free_energy_capped(params: &GrbmParams, cap: u64) -> Result<f64> {
    state_count(params, cap)?;
    let marginal = marginalize(params);
    Ok(-marginal.log_zh - log_partition(params, &marginal))
}

/// Exact first and second hidden moments, visible means and free energy, with
/// the default state cap.
pub fn exact_moments(params: &GrbmParams) -> Result<ExactMoments> {
    exact_moments_capped(params, DEFAULT_STATE_CAP)
}

pub fn exact_moments_capped(params: &GrbmParams, cap: u64) -> Result<ExactMoments> {
    state_count(params, cap)?;
    let marginal = marginalize(params);
    let n = params.n_hidden();
    let mut walk = GrayWalk::new(&marginal, params.space().values());
    let mut acc = LogSumExp::new();
    let mut sum_h = vec![0.0; n];
    let mut sum_h2 = vec![0.0; n];
    loop {
        let (rescale, weight) = acc.push(walk.log_weight);
        if rescale != 1.0 {
            sum_h.iter_mut().chain(sum_h2.iter_mut()).for_each(|x| *x *= rescale);
        }
        for ((a, a2), &h) in sum_h.iter_mut().zip(sum_h2.iter_mut()).zip(&walk.h) {
            *a += weight * h;
            *a2 += weight * h * h;
        }
        if !walk.advance() {
            break;
        }
    }
    let total = acc.sum();
    let m: Vec<f64> = sum_h.iter().map(|x| x / total).collect();
    let s = sum_h2.iter().map(|x| x / total).collect();
    let nu = params.visible_mean_of(&m);
    let log_z_marginal = acc.value();
    Ok(ExactMoments {
        m,
        s,
        nu,
        free_energy: -marginal.log_zh - log_z_marginal,
        log_z_marginal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsOptions {
    /// Recorded sweeps after burn-in.
    pub n_sweeps: usize,
    pub n_burnin: usize,
    pub seed: u64,
}

/// Monte Carlo means with batch-means standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsEstimate {
    pub m_hat: Vec<f64>,
    pub nu_hat: Vec<f64>,
    pub std_err_m: Vec<f64>,
    pub std_err_nu: Vec<f64>,
    pub n_sweeps: usize,
}

const GIBBS_BATCHES: usize = 32;

/// Batch-means accumulator over a fixed number of samples.
struct BatchMeans {
    batch_len: usize,
    n_batches: usize,
    total: Vec<f64>,
    current: Vec<f64>,
    in_batch: usize,
    batch_means: Vec<Vec<f64>>,
}

impl BatchMeans {
    fn new(dim: usize, n_samples: usize) -> Self {
        let n_batches = GIBBS_BATCHES.min(n_samples);
        Self {
            batch_len: n_samples / n_batches,
            n_batches,
            total: vec![0.0; dim],
            current: vec![0.0; dim],
            in_batch: 0,
            batch_means: Vec::with_capacity(n_batches),
        }
    }

    fn push(&mut self, x: &[f64]) {
        for ((t, c), v) in self.total.iter_mut().zip(self.current.iter_mut()).zip(x) {
            *t += v;
            *c += v;
        }
        self.in_batch += 1;
        // leftover samples are folded into the final batch
        let last = self.batch_means.len() + 1 == self.n_batches;
        if !last && self.in_batch == self.batch_len {
            self.close_batch();
        }
    }

    fn close_batch(&mut self) {
        let n = self.in_batch as f64;
        self.batch_means.push(self.current.iter().map(|c| c / n).collect());
        self.current.iter_mut().for_each(|c| *c = 0.0);
        self.in_batch = 0;
    }

    fn finish(mut self, n_samples: usize) -> (Vec<f64>, Vec<f64>) {
        if self.in_batch > 0 {
            self.close_batch();
        }
        let mean: Vec<f64> = self.total.iter().map(|t| t / n_samples as f64).collect();
        let nb = self.batch_means.len();
        let std_err = (0..mean.len())
            .map(|d| {
                if nb < 2 {
                    return f64::INFINITY;
                }
                let bm = self.batch_means.iter().map(|b| b[d]);
                let center = bm.clone().sum::<f64>() / nb as f64;
                let ss: f64 = bm.map(|x| (x - center) * (x - center)).sum();
                math::sqrt(ss / (nb * (nb - 1)) as f64)
            })
            .collect();
        (mean, std_err)
    }
}

/// Alternating block Gibbs sampler: all visible units are drawn jointly from
/// their Gaussian conditional, then all hidden units jointly from their
/// softmax conditional. Hidden units start uniformly at random.
pub fn gibbs_estimate(params: &GrbmParams, opts: &GibbsOptions) -> Result<GibbsEstimate> {
    if opts.n_sweeps == 0 {
        return Err(Error::invalid("n_sweeps must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let values = params.space().values();
    let sigma: Vec<f64> = params.sigma2().iter().map(|&s| math::sqrt(s)).collect();
    let mut h: Vec<f64> = (0..params.n_hidden())
        .map(|_| values[rng.random_range(0..values.len())])
        .collect();
    let mut v = vec![0.0; params.n_visible()];
    let mut probs = vec![0.0; values.len()];
    let mut h_stats = BatchMeans::new(h.len(), opts.n_sweeps);
    let mut v_stats = BatchMeans::new(v.len(), opts.n_sweeps);

    for sweep in 0..opts.n_burnin + opts.n_sweeps {
        let mu = params.visible_mean_of(&h);
        for ((vi, mi), si) in v.iter_mut().zip(&mu).zip(&sigma) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *vi = mi + si * z;
        }
        let lambda = params.hidden_field_of(&v);
        for (hj, &field) in h.iter_mut().zip(&lambda) {
            *hj = values[sample_softmax(field, values, &mut probs, &mut rng)];
        }
        if sweep >= opts.n_burnin {
            h_stats.push(&h);
            v_stats.push(&v);
        }
    }
    let (m_hat, std_err_m) = h_stats.finish(opts.n_sweeps);
    let (nu_hat, std_err_nu) = v_stats.finish(opts.n_sweeps);
    Ok(GibbsEstimate {
        m_hat,
        nu_hat,
        std_err_m,
        std_err_nu,
        n_sweeps: opts.n_sweeps,
    })
}

/// Index drawn from p(x) ∝ exp(field · x) over `values`.
fn sample_softmax(field: f64, values: &[f64], probs: &mut [f64], rng: &mut impl Rng) -> usize {
    let top = values.iter().map(|x| field * x).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (p, x) in probs.iter_mut().zip(values) {
        *p = math::exp(field * x - top);
        total += *p;
    }
    let mut u = rng.random::<f64>() * total;
    for (idx, p) in probs.iter().enumerate() {
        if u < *p {
            return idx;
        }
        u -= p;
    }
    probs.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_params, InstanceSpec, SampleSpace};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn scalar(space: SampleSpace) -> GrbmParams {
        GrbmParams::new(vec![0.0], vec![0.0], vec![1.0], vec![1.0], space).unwrap()
    }

    fn instance(nv: usize, nh: usize, sd_w: f64, space: SampleSpace, seed: u64) -> GrbmParams {
        let spec = InstanceSpec {
            n_visible: nv,
            n_hidden: nh,
            sd_b: 0.5,
            sd_c: 0.5,
            sd_w,
            sigma2: 1.0,
            space,
        };
        sample_params(&spec, seed).unwrap()
    }

    /// Plain nested enumeration with the log weight recomputed per state and
    /// a two-pass max shift; shares nothing with the Gray walk.
    fn brute_force(p: &GrbmParams) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = marginalize(p);
        let vals = p.space().values();
        let k = vals.len();
        let nh = p.n_hidden();
        let total_states = k.pow(nh as u32);
        let states: Vec<Vec<f64>> = (0..total_states)
            .map(|mut idx| {
                (0..nh)
                    .map(|_| {
                        let d = idx % k;
                        idx /= k;
                        vals[d]
                    })
                    .collect()
            })
            .collect();
        let logw: Vec<f64> = states.iter().map(|h| m.log_weight(h)).collect();
        let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = weights.iter().sum();
        let mut mh = vec![0.0; nh];
        let mut sh = vec![0.0; nh];
        let mut nu = vec![0.0; p.n_visible()];
        for (h, w) in states.iter().zip(&weights) {
            let pr = w / z;
            for j in 0..nh {
                mh[j] += pr * h[j];
                sh[j] += pr * h[j] * h[j];
            }
            // ∫ v_i P(v|h) dv = μ_i(h), averaged over P(h)
            let mu = crate::model::visible_mean_given_hidden(p, h).unwrap();
            for i in 0..nu.len() {
                nu[i] += pr * mu[i];
            }
        }
        (-m.log_zh - top - z.ln(), mh, sh, nu)
    }

    #[test]
    fn scalar_binary_free_energy() {
        let f = exact_free_energy(&scalar(SampleSpace::binary())).unwrap();
        assert_abs_diff_eq!(f, -0.5 * (2.0 * PI).ln() - 2f64.ln() - 0.5, epsilon = 1e-14);
        let mo = exact_moments(&scalar(SampleSpace::binary())).unwrap();
        assert_abs_diff_eq!(mo.m[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mo.s[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mo.nu[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mo.free_energy, f, epsilon = 1e-14);
    }

    #[test]
    fn scalar_ternary_free_energy() {
        let p = scalar(SampleSpace::ternary());
        let e = 0.5f64.exp();
        let f = exact_free_energy(&p).unwrap();
        assert_abs_diff_eq!(f, -0.5 * (2.0 * PI).ln() - (1.0 + 2.0 * e).ln(), epsilon = 1e-14);
        let mo = exact_moments(&p).unwrap();
        assert_abs_diff_eq!(mo.m[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mo.s[0], 2.0 * e / (1.0 + 2.0 * e), epsilon = 1e-15);
        assert!((mo.s[0] - 0.767).abs() < 1e-3);
        assert_abs_diff_eq!(mo.nu[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn factorized_model() {
        let p = instance(7, 6, 0.0, SampleSpace::binary(), 11);
        let f = exact_free_energy(&p).unwrap();
        let expected = -p.sigma2().iter().map(|s| 0.5 * (2.0 * PI * s).ln()).sum::<f64>()
            - p.hidden_bias().iter().map(|c| (2.0 * c.cosh()).ln()).sum::<f64>();
        assert_abs_diff_eq!(f, expected, epsilon = 1e-12);
        let mo = exact_moments(&p).unwrap();
        for (m, c) in mo.m.iter().zip(p.hidden_bias()) {
            assert_abs_diff_eq!(*m, c.tanh(), epsilon = 1e-14);
        }
        for (nu, b) in mo.nu.iter().zip(p.visible_bias()) {
            assert_abs_diff_eq!(*nu, *b, epsilon = 1e-14);
        }
    }

    #[test]
    fn capacity_guard() {
        let p = instance(2, 25, 0.1, SampleSpace::binary(), 0);
        assert_eq!(
            exact_free_energy(&p),
            Err(Error::Capacity {
                states: 1 << 25,
                cap: DEFAULT_STATE_CAP
            })
        );
        let p = instance(2, 5, 0.1, SampleSpace::ternary(), 0);
        assert!(matches!(exact_moments_capped(&p, 100), Err(Error::Capacity { states: 243, .. })));
        assert!(exact_moments_capped(&p, 243).is_ok());
        let huge = instance(1, 80, 0.1, SampleSpace::ternary(), 0);
        assert!(matches!(exact_free_energy(&huge), Err(Error::Capacity { states: u64::MAX, .. })));
    }

    #[test]
    fn gray_walk_visits_every_state_once() {
        let p = instance(3, 4, 0.3, SampleSpace::ternary(), 2);
        let m = marginalize(&p);
        let mut walk = GrayWalk::new(&m, p.space().values());
        let mut seen = std::collections::BTreeSet::new();
        loop {
            let key: Vec<usize> = walk.digits.clone();
            assert!(seen.insert(key));
            assert_abs_diff_eq!(walk.log_weight, m.log_weight(&walk.h), epsilon = 1e-12);
            if !walk.advance() {
                break;
            }
        }
        assert_eq!(seen.len(), 81);
    }

    #[test]
    fn strong_coupling_does_not_overflow() {
        let p = instance(24, 10, 5.0, SampleSpace::binary(), 4);
        let f = exact_free_energy(&p).unwrap();
        assert!(f.is_finite());
        assert_abs_diff_eq!(f, brute_force(&p).0, epsilon = 1e-9 * f.abs());
    }

    #[test]
    fn symmetric_model_has_zero_means() {
        let mut p = instance(6, 5, 0.8, SampleSpace::ternary(), 8);
        p = GrbmParams::new(
            vec![0.0; 6],
            vec![0.0; 5],
            p.couplings().to_vec(),
            p.sigma2().to_vec(),
            p.space().clone(),
        )
        .unwrap();
        let mo = exact_moments(&p).unwrap();
        for x in mo.m.iter().chain(&mo.nu) {
            assert!(x.abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn gibbs_rejects_zero_sweeps() {
        let opts = GibbsOptions {
            n_sweeps: 0,
            n_burnin: 0,
            seed: 0,
        };
        assert!(gibbs_estimate(&scalar(SampleSpace::binary()), &opts).is_err());
    }

    #[test]
    fn gibbs_decoupled_instance() {
        let p = instance(4, 3, 0.0, SampleSpace::binary(), 5);
        let p = GrbmParams::new(
            p.visible_bias().to_vec(),
            vec![0.0; 3],
            p.couplings().to_vec(),
            p.sigma2().to_vec(),
            p.space().clone(),
        )
        .unwrap();
        let n = 100_000;
        let est = gibbs_estimate(&p, &GibbsOptions { n_sweeps: n, n_burnin: 100, seed: 3 }).unwrap();
        for (m, se) in est.m_hat.iter().zip(&est.std_err_m) {
            assert!(m.abs() <= 3.0 * se, "{m} vs {se}");
        }
        for (i, nu) in est.nu_hat.iter().enumerate() {
            let bound = 3.0 * p.sigma2()[i].sqrt() / (n as f64).sqrt();
            assert!((nu - p.visible_bias()[i]).abs() <= bound);
        }
        assert_eq!(est.n_sweeps, n);
    }

    #[test]
    fn gibbs_matches_enumeration() {
        let p = instance(5, 4, 0.6, SampleSpace::ternary(), 21);
        let exact = exact_moments(&p).unwrap();
        let est = gibbs_estimate(&p, &GibbsOptions { n_sweeps: 60_000, n_burnin: 500, seed: 4 }).unwrap();
        let pairs = exact.m.iter().zip(&est.m_hat).zip(&est.std_err_m)
            .chain(exact.nu.iter().zip(&est.nu_hat).zip(&est.std_err_nu));
        let within = pairs.clone().filter(|((e, g), se)| (*e - *g).abs() <= 4.0 * *se).count();
        assert!(within >= 8, "{within}/9 components within 4 standard errors");
    }

    #[test]
    fn gibbs_standard_error_shrinks() {
        let p = instance(5, 4, 0.3, SampleSpace::binary(), 2);
        let se = |n| {
            let est = gibbs_estimate(&p, &GibbsOptions { n_sweeps: n, n_burnin: 200, seed: 17 }).unwrap();
            est.std_err_m.iter().chain(&est.std_err_nu).sum::<f64>()
        };
        // four-fold more sweeps should halve the error; allow for batch noise
        let ratio = se(16_000) / se(64_000);
        assert!((1.5..2.7).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gibbs_is_deterministic() {
        let p = instance(3, 3, 0.5, SampleSpace::ternary(), 2);
        let opts = GibbsOptions { n_sweeps: 1000, n_burnin: 10, seed: 99 };
        assert_eq!(gibbs_estimate(&p, &opts).unwrap(), gibbs_estimate(&p, &opts).unwrap());
        let one = gibbs_estimate(&p, &GibbsOptions { n_sweeps: 1, ..opts }).unwrap();
        assert!(one.std_err_m.iter().all(|s| s.is_infinite()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn enumeration_agrees_with_brute_force(
            seed in 0u64..10_000,
            nh in 1usize..=5,
            sd_w in 0.0f64..1.5,
            ternary in any::<bool>(),
        ) {
            let space = if ternary { SampleSpace::ternary() } else { SampleSpace::binary() };
            let p = instance(4, nh, sd_w, space, seed);
            let (f, mh, sh, nu) = brute_force(&p);
            let mo = exact_moments(&p).unwrap();
            prop_assert!((mo.free_energy - f).abs() < 1e-12);
            prop_assert!((exact_free_energy(&p).unwrap() - f).abs() < 1e-12);
            for j in 0..nh {
                prop_assert!((mo.m[j] - mh[j]).abs() < 1e-12);
                prop_assert!((mo.s[j] - sh[j]).abs() < 1e-12);
                prop_assert!(mo.m[j] >= p.space().min() - 1e-15 && mo.m[j] <= p.space().max() + 1e-15);
                prop_assert!(mo.s[j] >= mo.m[j] * mo.m[j] - 1e-15);
                prop_assert!(mo.s[j] <= p.space().max_square() + 1e-15);
            }
            // ⟨v⟩ from the linear identity vs direct averaging of μ(h)
            for i in 0..p.n_visible() {
                prop_assert!((mo.nu[i] - nu[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn free_energy_is_permutation_invariant(seed in 0u64..10_000, rot in 1usize..6) {
            let p = instance(5, 6, 0.7, SampleSpace::ternary(), seed);
            let perm: Vec<usize> = (0..6).map(|k| (k * 5 + rot) % 6).collect();
            let q = p.with_hidden_permutation(&perm).unwrap();
            let (a, b) = (exact_free_energy(&p).unwrap(), exact_free_energy(&q).unwrap());
            prop_assert!((a - b).abs() < 1e-11, "{} vs {}", a, b);
        }
    }
}
