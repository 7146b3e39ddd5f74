//! Model parameterization, layer conditionals and the marginal hidden-layer
//! Boltzmann machine.
//!
//! The energy of a configuration is
//!
//! ```text
//! E(v, h) = ½ Σ_i (v_i − b_i)² / σ_i²  −  Σ_ij (w_ij / σ_i²) v_i h_j  −  Σ_j c_j h_j
//! ```
//!
//! with real visible units `v_i` and hidden units `h_j` drawn from a finite
//! [`SampleSpace`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math;

/// The finite alphabet a hidden unit takes values in.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpace {
    values: Vec<f64>,
}

impl SampleSpace {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("sample space must be nonempty"));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("sample space value {x} is not finite")));
        }
        for (i, a) in values.iter().enumerate() {
            if values[..i].contains(a) {
                return Err(Error::invalid(format!("sample space value {a} is repeated")));
            }
        }
        Ok(Self { values })
    }

    /// {−1, +1}
    pub fn binary() -> Self {
        Self {
            values: vec![-1.0, 1.0],
        }
    }

    /// {−1, 0, +1}
    pub fn ternary() -> Self {
        Self {
            values: vec![-1.0, 0.0, 1.0],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn max_square(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, x| acc.max(x * x))
    }

    pub fn contains(&self, x: f64) -> bool {
        self.values.contains(&x)
    }
}

/// Full parameter set of a Gaussian restricted Boltzmann machine.
///
/// Couplings are stored densely in row-major order, `w[i * n_hidden + j]`
/// being the coupling between visible unit `i` and hidden unit `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrbmParams {
    n_visible: usize,
    n_hidden: usize,
    b: Vec<f64>,
    c: Vec<f64>,
    w: Vec<f64>,
    sigma2: Vec<f64>,
    space: SampleSpace,
}

impl GrbmParams {
    pub fn new(
        b: Vec<f64>,
        c: Vec<f64>,
        w: Vec<f64>,
        sigma2: Vec<f64>,
        space: SampleSpace,
    ) -> Result<Self> {
        let n_visible = b.len();
        let n_hidden = c.len();
        if n_visible == 0 || n_hidden == 0 {
            return Err(Error::invalid("both layers need at least one unit"));
        }
        if sigma2.len() != n_visible {
            return Err(Error::invalid(format!(
                "sigma2 has length {}, expected {n_visible}",
                sigma2.len()
            )));
        }
        if w.len() != n_visible * n_hidden {
            return Err(Error::invalid(format!(
                "coupling matrix has {} entries, expected {n_visible}x{n_hidden}",
                w.len()
            )));
        }
        let all = b.iter().chain(&c).chain(&w).chain(&sigma2);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::invalid("parameters must be finite"));
        }
        if sigma2.iter().any(|&s| s <= 0.0) {
            return Err(Error::invalid("every variance must be positive"));
        }
        Ok(Self {
            n_visible,
            n_hidden,
            b,
            c,
            w,
            sigma2,
            space,
        })
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.b
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.c
    }

    /// Row-major `n_visible × n_hidden` couplings.
    pub fn couplings(&self) -> &[f64] {
        &self.w
    }

    #[inline]
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n_hidden + j]
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn space(&self) -> &SampleSpace {
        &self.space
    }

    /// Same parameters with every coupling multiplied by `t`.
    pub fn with_scaled_couplings(&self, t: f64) -> Result<Self> {
        let w = self.w.iter().map(|x| x * t).collect();
        Self::new(
            self.b.clone(),
            self.c.clone(),
            w,
            self.sigma2.clone(),
            self.space.clone(),
        )
    }

    /// Same parameters with the hidden units reordered: new unit `k` is old
    /// unit `perm[k]`.
    pub fn with_hidden_permutation(&self, perm: &[usize]) -> Result<Self> {
        let nh = self.n_hidden;
        let mut seen = vec![false; nh];
        if perm.len() != nh || perm.iter().any(|&p| p >= nh || core::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("not a permutation of the hidden units"));
        }
        let c = perm.iter().map(|&p| self.c[p]).collect();
        let mut w = Vec::with_capacity(self.w.len());
        for i in 0..self.n_visible {
            w.extend(perm.iter().map(|&p| self.coupling(i, p)));
        }
        Self::new(
            self.b.clone(),
            c,
            w,
            self.sigma2.clone(),
            self.space.clone(),
        )
    }

    pub(crate) fn check_visible(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_visible {
            return Err(Error::invalid(format!(
                "visible vector has length {}, expected {}",
                v.len(),
                self.n_visible
            )));
        }
        Ok(())
    }

    pub(crate) fn check_hidden(&self, h: &[f64]) -> Result<()> {
        if h.len() != self.n_hidden {
            return Err(Error::invalid(format!(
                "hidden vector has length {}, expected {}",
                h.len(),
                self.n_hidden
            )));
        }
        if let Some(x) = h.iter().find(|&&x| !self.space.contains(x)) {
            return Err(Error::invalid(format!("hidden value {x} is outside the sample space")));
        }
        Ok(())
    }

    /// μ(m) = b + W m for any real vector `m` (no sample-space check).
    pub(crate) fn visible_mean_of(&self, m: &[f64]) -> Vec<f64> {
        (0..self.n_visible)
            .map(|i| {
                let row = &self.w[i * self.n_hidden..(i + 1) * self.n_hidden];
                self.b[i] + row.iter().zip(m).map(|(w, h)| w * h).sum::<f64>()
            })
            .collect()
    }

    /// λ(v) = c + Wᵀ diag(1/σ²) v.
    pub(crate) fn hidden_field_of(&self, v: &[f64]) -> Vec<f64> {
        let mut lambda = self.c.clone();
        for i in 0..self.n_visible {
            let scaled = v[i] / self.sigma2[i];
            let row = &self.w[i * self.n_hidden..(i + 1) * self.n_hidden];
            for (l, w) in lambda.iter_mut().zip(row) {
                *l += w * scaled;
            }
        }
        lambda
    }
}

/// Boltzmann machine over the hidden layer left after integrating the visible
/// units out:
///
/// ```text
/// P(h) ∝ exp( Σ_j B_j h_j + Σ_j D_j h_j² + Σ_{j<k} J_jk h_j h_k )
/// ```
///
/// `log_zh` is the log of the Gaussian normalizer ½ Σ_i ln(2π σ_i²) that the
/// integration leaves behind.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalBm {
    /// B_j
    pub linear: Vec<f64>,
    /// D_j
    pub quadratic: Vec<f64>,
    /// J_jk, symmetric row-major `n_hidden × n_hidden`, zero diagonal.
    pub coupling: Vec<f64>,
    pub log_zh: f64,
}

impl MarginalBm {
    pub fn n_hidden(&self) -> usize {
        self.linear.len()
    }

    #[inline]
    pub fn j(&self, j: usize, k: usize) -> f64 {
        self.coupling[j * self.linear.len() + k]
    }

    /// Exponent of the unnormalized marginal weight of `h`.
    pub fn log_weight(&self, h: &[f64]) -> f64 {
        let n = self.n_hidden();
        let mut total = 0.0;
        for j in 0..n {
            total += self.linear[j] * h[j] + self.quadratic[j] * h[j] * h[j];
            for k in (j + 1)..n {
                total += self.j(j, k) * h[j] * h[k];
            }
        }
        total
    }

    /// Σ_{k≠j} J_jk m_k
    pub(crate) fn neighbor_field(&self, j: usize, m: &[f64]) -> f64 {
        let row = &self.coupling[j * m.len()..(j + 1) * m.len()];
        // diagonal is zero, so including k = j is harmless
        row.iter().zip(m).map(|(a, b)| a * b).sum()
    }
}

/// E(v, h; θ)
pub fn energy(v: &[f64], h: &[f64], params: &GrbmParams) -> Result<f64> {
    params.check_visible(v)?;
    params.check_hidden(h)?;
    let mut e = 0.0;
    for i in 0..params.n_visible {
        let d = v[i] - params.b[i];
        e += 0.5 * d * d / params.sigma2[i];
        let row = &params.w[i * params.n_hidden..(i + 1) * params.n_hidden];
        let wh: f64 = row.iter().zip(h).map(|(w, h)| w * h).sum();
        e -= wh * v[i] / params.sigma2[i];
    }
    e -= params.c.iter().zip(h).map(|(c, h)| c * h).sum::<f64>();
    Ok(e)
}

/// μ_i(h) = b_i + Σ_j w_ij h_j, the mean of the Gaussian P(v_i | h).
pub fn visible_mean_given_hidden(params: &GrbmParams, h: &[f64]) -> Result<Vec<f64>> {
    params.check_hidden(h)?;
    Ok(params.visible_mean_of(h))
}

/// λ_j(v) = c_j + Σ_i (w_ij / σ_i²) v_i, the field of the softmax P(h_j | v).
pub fn hidden_field_given_visible(params: &GrbmParams, v: &[f64]) -> Result<Vec<f64>> {
    params.check_visible(v)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("visible vector must be finite"));
    }
    Ok(params.hidden_field_of(v))
}

pub fn marginalize(params: &GrbmParams) -> MarginalBm {
    let (nv, nh) = (params.n_visible, params.n_hidden);
    let mut linear = params.c.clone();
    let mut quadratic = vec![0.0; nh];
    let mut coupling = vec![0.0; nh * nh];
    let mut log_zh = 0.0;
    for i in 0..nv {
        let s2 = params.sigma2[i];
        let row = &params.w[i * nh..(i + 1) * nh];
        for j in 0..nh {
            linear[j] += params.b[i] / s2 * row[j];
            quadratic[j] += 0.5 * row[j] * row[j] / s2;
            for k in (j + 1)..nh {
                coupling[j * nh + k] += row[j] * row[k] / s2;
            }
        }
        log_zh += 0.5 * (math::LN_2PI + math::ln(s2));
    }
    for j in 0..nh {
        for k in (j + 1)..nh {
            coupling[k * nh + j] = coupling[j * nh + k];
        }
    }
    MarginalBm {
        linear,
        quadratic,
        coupling,
        log_zh,
    }
}

/// Recipe for a random instance: independent zero-mean Gaussian biases and
/// couplings with the given standard deviations and one shared variance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub sd_b: f64,
    pub sd_c: f64,
    pub sd_w: f64,
    pub sigma2: f64,
    pub space: SampleSpace,
}

/// Draws an instance from `spec`.
///
/// One ChaCha8 stream is seeded from `seed`; standard normals are consumed for
/// `b` first, then `c`, then `w` in row-major order, and scaled by the
/// respective standard deviation. The result is fully determined by
/// `(spec, seed)`.
pub fn sample_params(spec: &InstanceSpec, seed: u64) -> Result<GrbmParams> {
    for (name, sd) in [("sd_b", spec.sd_b), ("sd_c", spec.sd_c), ("sd_w", spec.sd_w)] {
        if !(sd >= 0.0 && sd.is_finite()) {
            return Err(Error::invalid(format!("{name} must be finite and nonnegative, got {sd}")));
        }
    }
    if !(spec.sigma2 > 0.0 && spec.sigma2.is_finite()) {
        return Err(Error::invalid(format!("sigma2 must be positive, got {}", spec.sigma2)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize, sd: f64| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect()
    };
    let b = draw(spec.n_visible, spec.sd_b);
    let c = draw(spec.n_hidden, spec.sd_c);
    let w = draw(spec.n_visible * spec.n_hidden, spec.sd_w);
    GrbmParams::new(
        b,
        c,
        w,
        vec![spec.sigma2; spec.n_visible],
        spec.space.clone(),
    )
}
