//! Naive mean-field inference in two flavors.
//!
//! **Type I** approximates the joint `P(v, h)` by a fully factorized
//! `Π_i q_i(v_i) Π_j u_j(h_j)`. The optimal `q_i` is Gaussian with mean
//! `ν_i = μ_i(m)` and variance `σ_i²`, and the optimal `u_j` is a softmax with
//! field `λ_j(ν)`.
//!
//! **Type II** keeps the exact conditional `P(v | h)` and factorizes only the
//! marginal hidden-layer Boltzmann machine. Each `u_j` is a softmax over
//! `B_j h + D_j h² + Σ_{k≠j} J_jk m_k h`, and visible means follow as
//! `ν_i = μ_i(m)`.
//!
//! Both are solved by damped synchronous successive substitution on the
//! hidden means `m`, with a handful of restarts; the restart with the lowest
//! variational free energy wins.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{self, LN_2PI};
use crate::model::{marginalize, GrbmParams, MarginalBm, SampleSpace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Fraction of the previous iterate kept at each update, in `[0, 1)`.
    pub damping: f64,
    /// Convergence threshold on the max-abs change of `m` between iterates.
    pub tol: f64,
    pub max_iter: usize,
    pub n_restarts: usize,
    /// Random starts are uniform on `±init_scale · max|x|`, clipped to the
    /// range of the sample space. Restart 0 always starts from `m = 0`.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 10_000,
            n_restarts: 5,
            init_scale: 1.0,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::invalid(format!("damping must lie in [0, 1), got {}", self.damping)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        if self.n_restarts == 0 {
            return Err(Error::invalid("n_restarts must be positive"));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::invalid(format!("init_scale must be nonnegative, got {}", self.init_scale)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    TypeI,
    TypeII,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfSolution {
    pub variant: Variant,
    /// Approximate ⟨h_j⟩.
    pub m: Vec<f64>,
    /// Approximate ⟨h_j²⟩ under the same factors.
    pub s: Vec<f64>,
    /// Approximate ⟨v_i⟩, always `b + W m`.
    pub nu: Vec<f64>,
    pub free_energy: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Max-abs change of `m` in the last damped update.
    pub residual: f64,
}

/// Moments and negative entropy of one hidden factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitStats {
    pub mean: f64,
    pub second_moment: f64,
    /// Σ_x u(x) ln u(x)
    pub neg_entropy: f64,
}

/// Statistics of `u(x) ∝ exp(linear·x + quad·x²)` over the sample space.
pub fn hidden_unit_stats(linear: f64, quad: f64, space: &SampleSpace) -> UnitStats {
    let logit = |x: f64| linear * x + quad * x * x;
    let top = space.values().iter().map(|&x| logit(x)).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut mean, mut second, mut energy) = (0.0, 0.0, 0.0, 0.0);
    for &x in space.values() {
        let shifted = logit(x) - top;
        let w = math::exp(shifted);
        z += w;
        mean += w * x;
        second += w * x * x;
        energy += w * shifted;
    }
    UnitStats {
        mean: mean / z,
        second_moment: second / z,
        neg_entropy: energy / z - math::ln(z),
    }
}

/// Type I variational free energy for `q_i = N(nu_i, σ_i²)` and
/// `u_j(x) ∝ exp(hidden_fields_j · x)`.
pub fn variational_free_energy_type1(params: &GrbmParams, nu: &[f64], hidden_fields: &[f64]) -> f64 {
    let space = params.space();
    let stats: Vec<UnitStats> = hidden_fields.iter().map(|&f| hidden_unit_stats(f, 0.0, space)).collect();
    let nh = params.n_hidden();
    let mut total = 0.0;
    for i in 0..params.n_visible() {
        let s2 = params.sigma2()[i];
        let d = nu[i] - params.visible_bias()[i];
        // ∫ (v − b)² / 2σ² q(v) dv  and  ∫ q ln q dv
        total += 0.5 + d * d / (2.0 * s2);
        total -= 0.5 * (LN_2PI + math::ln(s2) + 1.0);
        let row = &params.couplings()[i * nh..(i + 1) * nh];
        let wm: f64 = row.iter().zip(&stats).map(|(w, st)| w * st.mean).sum();
        total -= wm * nu[i] / s2;
    }
    for (c, st) in params.hidden_bias().iter().zip(&stats) {
        total += st.neg_entropy - c * st.mean;
    }
    total
}

/// Type II variational free energy for
/// `u_j(x) ∝ exp(linear_fields_j · x + D_j x²)`.
pub fn variational_free_energy_type2(marginal: &MarginalBm, space: &SampleSpace, linear_fields: &[f64]) -> f64 {
    let n = marginal.n_hidden();
    let stats: Vec<UnitStats> = linear_fields
        .iter()
        .zip(&marginal.quadratic)
        .map(|(&f, &d)| hidden_unit_stats(f, d, space))
        .collect();
    let mut total = -marginal.log_zh;
    for j in 0..n {
        let st = &stats[j];
        total += st.neg_entropy - marginal.linear[j] * st.mean - marginal.quadratic[j] * st.second_moment;
        for k in (j + 1)..n {
            total -= marginal.j(j, k) * st.mean * stats[k].mean;
        }
    }
    total
}

/// Per-variant machinery shared by the solvers.
enum Scheme<'a> {
    TypeI(&'a GrbmParams),
    TypeII(&'a GrbmParams, MarginalBm),
}

impl Scheme<'_> {
    fn space(&self) -> &SampleSpace {
        match self {
            Scheme::TypeI(p) | Scheme::TypeII(p, _) => p.space(),
        }
    }

    /// Softmax statistics of every hidden factor induced by the means `m`.
    fn unit_stats(&self, m: &[f64]) -> Vec<UnitStats> {
        let space = self.space();
        match self {
            Scheme::TypeI(p) => {
                let nu = p.visible_mean_of(m);
                p.hidden_field_of(&nu)
                    .into_iter()
                    .map(|f| hidden_unit_stats(f, 0.0, space))
                    .collect()
            }
            Scheme::TypeII(_, bm) => (0..m.len())
                .map(|j| hidden_unit_stats(bm.linear[j] + bm.neighbor_field(j, m), bm.quadratic[j], space))
                .collect(),
        }
    }

    fn free_energy(&self, sol: &MfSolution) -> f64 {
        match self {
            Scheme::TypeI(p) => variational_free_energy_type1(p, &sol.nu, &p.hidden_field_of(&sol.nu)),
            Scheme::TypeII(p, bm) => variational_free_energy_type2(bm, p.space(), &type2_fields(bm, &sol.m)),
        }
    }
}

fn type2_fields(bm: &MarginalBm, m: &[f64]) -> Vec<f64> {
    (0..m.len()).map(|j| bm.linear[j] + bm.neighbor_field(j, m)).collect()
}

/// One undamped substitution step `m ↦ E_u[h]` of the chosen scheme.
pub fn undamped_update(params: &GrbmParams, variant: Variant, m: &[f64]) -> Result<Vec<f64>> {
    if m.len() != params.n_hidden() {
        return Err(Error::invalid("mean vector has the wrong length"));
    }
    let scheme = match variant {
        Variant::TypeI => Scheme::TypeI(params),
        Variant::TypeII => Scheme::TypeII(params, marginalize(params)),
    };
    Ok(scheme.unit_stats(m).iter().map(|s| s.mean).collect())
}

struct Run {
    m: Vec<f64>,
    converged: bool,
    iterations: usize,
    residual: f64,
}

fn iterate(scheme: &Scheme<'_>, mut m: Vec<f64>, opts: &SolverOptions) -> Run {
    let keep = opts.damping;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let stats = scheme.unit_stats(&m);
        residual = 0.0;
        for (mj, st) in m.iter_mut().zip(&stats) {
            let next = keep * *mj + (1.0 - keep) * st.mean;
            residual = f64::max(residual, (next - *mj).abs());
            *mj = next;
        }
        if residual <= opts.tol {
            return Run {
                m,
                converged: true,
                iterations: it,
                residual,
            };
        }
    }
    Run {
        m,
        converged: false,
        iterations: opts.max_iter,
        residual,
    }
}

fn solve(
    scheme: Scheme<'_>,
    params: &GrbmParams,
    opts: &SolverOptions,
    variant: Variant,
    extra_starts: &[&[f64]],
) -> Result<MfSolution> {
    opts.validate()?;
    if extra_starts.iter().any(|m| m.len() != params.n_hidden()) {
        return Err(Error::invalid("start vector has the wrong length"));
    }
    let space = params.space();
    let (lo, hi) = (space.min(), space.max());
    let radius = opts.init_scale * space.max_abs();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<MfSolution> = None;

    for restart in 0..opts.n_restarts + extra_starts.len() {
        let init: Vec<f64> = if restart >= opts.n_restarts {
            let start = extra_starts[restart - opts.n_restarts];
            start.iter().map(|x| x.clamp(lo, hi)).collect()
        } else if restart == 0 {
            vec![0.0f64.clamp(lo, hi); params.n_hidden()]
        } else {
            (0..params.n_hidden())
                .map(|_| (radius * rng.random_range(-1.0..=1.0)).clamp(lo, hi))
                .collect()
        };
        let run = iterate(&scheme, init, opts);
        // report the factors' own moments: one last undamped map of the iterate
        let stats = scheme.unit_stats(&run.m);
        let m: Vec<f64> = stats.iter().map(|s| s.mean).collect();
        let mut sol = MfSolution {
            variant,
            nu: params.visible_mean_of(&m),
            s: stats.iter().map(|s| s.second_moment).collect(),
            m,
            free_energy: f64::NAN,
            converged: run.converged,
            iterations: run.iterations,
            residual: run.residual,
        };
        sol.free_energy = scheme.free_energy(&sol);
        let better = match &best {
            None => true,
            Some(b) => match (sol.converged, b.converged) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => sol.free_energy < b.free_energy,
                (false, false) => sol.residual < b.residual,
            },
        };
        if better {
            best = Some(sol);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Type I solution: fixed point of `ν = μ(m)`, `m_j = E[h | λ_j(ν)]`.
pub fn solve_type1(params: &GrbmParams, opts: &SolverOptions) -> Result<MfSolution> {
    solve(Scheme::TypeI(params), params, opts, Variant::TypeI, &[])
}

/// Type II solution on the marginal hidden-layer machine.
pub fn solve_type2(params: &GrbmParams, opts: &SolverOptions) -> Result<MfSolution> {
    solve_type2_from(params, opts, &[])
}

/// [`solve_type2`] with additional starting points tried after the regular
/// restarts.
///
/// Starting from the hidden means of a type I solution is the useful case:
/// for any hidden factors the type II free energy is at most the type I free
/// energy, so that start already sits at or below `F₁`.
pub fn solve_type2_from(params: &GrbmParams, opts: &SolverOptions, starts: &[&[f64]]) -> Result<MfSolution> {
    solve(Scheme::TypeII(params, marginalize(params)), params, opts, Variant::TypeII, starts)
}

fn expect_variant(sol: &MfSolution, variant: Variant) -> Result<()> {
    if sol.variant != variant {
        return Err(Error::invalid(format!("expected a {variant:?} solution, got {:?}", sol.variant)));
    }
    Ok(())
}

fn check_lengths(params: &GrbmParams, sol: &MfSolution) -> Result<()> {
    if sol.m.len() != params.n_hidden() || sol.nu.len() != params.n_visible() {
        return Err(Error::invalid("solution dimensions do not match the parameters"));
    }
    Ok(())
}

/// Type I free energy at the factors a solution represents: Gaussian `q_i`
/// centered on `nu`, softmax `u_j` with field `λ_j(nu)`.
pub fn free_energy_type1(params: &GrbmParams, solution: &MfSolution) -> Result<f64> {
    expect_variant(solution, Variant::TypeI)?;
    check_lengths(params, solution)?;
    Ok(Scheme::TypeI(params).free_energy(solution))
}

/// Type II free energy at the factors with fields `B_j + Σ_k J_jk m_k`.
pub fn free_energy_type2(params: &GrbmParams, solution: &MfSolution) -> Result<f64> {
    expect_variant(solution, Variant::TypeII)?;
    check_lengths(params, solution)?;
    Ok(Scheme::TypeII(params, marginalize(params)).free_energy(solution))
}

/// Minimized KL divergence of an approximation: its free energy minus the
/// true one.
pub fn kld_gap(mf_free_energy: f64, true_free_energy: f64) -> f64 {
    mf_free_energy - true_free_energy
}
