//! Invariant suite over random instances and the Gibbs-versus-enumeration
//! cross-check.

use rayon::prelude::*;

use grbm_core::experiments::trial_seeds;
use grbm_core::{
    exact_moments, gibbs_estimate, kld_gap, run_trial, sample_params, solve_type2, GibbsOptions,
    InstanceSpec, SolverOptions,
};

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub instance: InstanceSpec,
    pub instances: usize,
    pub solver: SolverOptions,
    pub seed: u64,
    /// Slack allowed on the free-energy and KL orderings.
    pub tolerance: f64,
    /// Allowed error in the cases where mean-field inference is exact.
    pub exact_tolerance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckSummary {
    pub instances: usize,
    pub unconverged: usize,
    pub bound_chain_ok: usize,
    pub kld_order_ok: usize,
    pub decoupled_ok: usize,
    pub single_hidden_ok: usize,
    /// One line per failure on a converged instance.
    pub violations: Vec<String>,
}

impl CheckSummary {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn lines(&self) -> Vec<String> {
        let n = self.instances;
        let mut lines = vec![
            format!("{}/{n} instances: F1 >= F2 >= F", self.bound_chain_ok),
            format!("{}/{n} instances: KL(type I) >= KL(type II)", self.kld_order_ok),
            format!("{}/{n} decoupled (w = 0) instances: F1 = F2 = F", self.decoupled_ok),
            format!("{}/{n} single-hidden-unit instances: type II exact", self.single_hidden_ok),
        ];
        if self.unconverged > 0 {
            lines.push(format!("{} instances with an unconverged solver (orderings not enforced)", self.unconverged));
        }
        lines
    }
}

#[derive(Debug, Default)]
struct InstanceOutcome {
    converged: bool,
    bound_chain: bool,
    kld_order: bool,
    decoupled: bool,
    single_hidden: bool,
    violations: Vec<String>,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check_instance(cfg: &CheckConfig, index: usize) -> Result<InstanceOutcome, CliError> {
    let (instance_seed, solver_seed) = trial_seeds(cfg.seed, 0, index);
    let solver = SolverOptions { seed: solver_seed, ..cfg.solver };
    let params = sample_params(&cfg.instance, instance_seed)?;
    let trial = run_trial(&params, &solver)?;
    let (f, f1, f2) = (trial.exact.free_energy, trial.type1.free_energy, trial.type2.free_energy);
    let tol = cfg.tolerance;
    let mut out = InstanceOutcome {
        converged: trial.type1.converged && trial.type2.converged,
        bound_chain: f1 >= f2 - tol && f2 >= f - tol,
        kld_order: kld_gap(f1, f) >= kld_gap(f2, f) - tol,
        ..Default::default()
    };
    if out.converged && !out.bound_chain {
        out.violations.push(format!("instance {index}: F1 = {f1:e}, F2 = {f2:e}, F = {f:e}"));
    }
    if out.converged && !out.kld_order {
        out.violations.push(format!("instance {index}: KL gaps {:e} < {:e}", kld_gap(f1, f), kld_gap(f2, f)));
    }

    let exact_tol = cfg.exact_tolerance;
    let decoupled = run_trial(&params.with_scaled_couplings(0.0)?, &solver)?;
    let fe = decoupled.exact.free_energy;
    let err = [
        (decoupled.type1.free_energy - fe).abs(),
        (decoupled.type2.free_energy - fe).abs(),
        max_abs_diff(&decoupled.type1.m, &decoupled.exact.m),
        max_abs_diff(&decoupled.type2.m, &decoupled.exact.m),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    out.decoupled = err <= exact_tol;
    if !out.decoupled {
        out.violations.push(format!("instance {index}: decoupled model off by {err:e}"));
    }

    let single_spec = InstanceSpec { n_hidden: 1, ..cfg.instance.clone() };
    let single = sample_params(&single_spec, instance_seed)?;
    let exact = exact_moments(&single)?;
    let two = solve_type2(&single, &solver)?;
    let err = [
        (two.free_energy - exact.free_energy).abs(),
        max_abs_diff(&two.m, &exact.m),
        max_abs_diff(&two.s, &exact.s),
        max_abs_diff(&two.nu, &exact.nu),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    out.single_hidden = err <= exact_tol;
    if !out.single_hidden {
        out.violations.push(format!("instance {index}: single-hidden-unit type II off by {err:e}"));
    }
    Ok(out)
}

pub fn run_check(cfg: &CheckConfig) -> Result<CheckSummary, CliError> {
    if cfg.instances == 0 {
        return Err(CliError::Usage("--instances must be at least 1".into()));
    }
    cfg.solver.validate()?;
    let outcomes = (0..cfg.instances)
        .into_par_iter()
        .map(|i| check_instance(cfg, i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut summary = CheckSummary {
        instances: cfg.instances,
        ..Default::default()
    };
    for o in outcomes {
        summary.unconverged += usize::from(!o.converged);
        summary.bound_chain_ok += usize::from(o.bound_chain);
        summary.kld_order_ok += usize::from(o.kld_order);
        summary.decoupled_ok += usize::from(o.decoupled);
        summary.single_hidden_ok += usize::from(o.single_hidden);
        summary.violations.extend(o.violations);
    }
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct GibbsCheckConfig {
    pub instance: InstanceSpec,
    pub repetitions: usize,
    pub sweeps: usize,
    pub burnin: usize,
    pub seed: u64,
    /// A component agrees when it is within this many standard errors.
    pub sigmas: f64,
    pub min_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsCheckSummary {
    pub within: usize,
    pub components: usize,
    /// Largest |estimate − exact| / standard error seen.
    pub worst_z: f64,
    pub min_fraction: f64,
    pub sigmas: f64,
}

impl GibbsCheckSummary {
    pub fn fraction(&self) -> f64 {
        self.within as f64 / self.components as f64
    }

    pub fn passed(&self) -> bool {
        self.fraction() >= self.min_fraction
    }

    pub fn line(&self) -> String {
        format!(
            "{}/{} components within {} standard errors of the exact moments ({:.1}%, need {:.1}%); worst z = {:.2}",
            self.within,
            self.components,
            self.sigmas,
            100.0 * self.fraction(),
            100.0 * self.min_fraction,
            self.worst_z
        )
    }
}

pub fn run_gibbs_check(cfg: &GibbsCheckConfig) -> Result<GibbsCheckSummary, CliError> {
    if cfg.repetitions == 0 {
        return Err(CliError::Usage("--repetitions must be at least 1".into()));
    }
    let per_rep = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| {
            let (instance_seed, chain_seed) = trial_seeds(cfg.seed, 0, r);
            let params = sample_params(&cfg.instance, instance_seed)?;
            let exact = exact_moments(&params)?;
            let opts = GibbsOptions { n_sweeps: cfg.sweeps, n_burnin: cfg.burnin, seed: chain_seed };
            let est = gibbs_estimate(&params, &opts)?;
            let z: Vec<f64> = exact.m.iter().zip(&est.m_hat).zip(&est.std_err_m)
                .chain(exact.nu.iter().zip(&est.nu_hat).zip(&est.std_err_nu))
                .map(|((e, g), se)| (e - g).abs() / se)
                .collect();
            Ok::<_, CliError>(z)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let z: Vec<f64> = per_rep.into_iter().flatten().collect();
    Ok(GibbsCheckSummary {
        within: z.iter().filter(|&&z| z <= cfg.sigmas).count(),
        components: z.len(),
        worst_z: z.iter().copied().fold(0.0, f64::max),
        min_fraction: cfg.min_fraction,
        sigmas: cfg.sigmas,
    })
}
