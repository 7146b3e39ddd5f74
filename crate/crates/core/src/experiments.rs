//! Trials and standard-deviation sweeps comparing the two mean-field schemes
//! with exact enumeration.
//!
//! A sweep draws fresh instances at every grid point. Trial `t` of grid point
//! `p` uses
//!
//! ```text
//! instance_seed = splitmix64(splitmix64(seed) ^ (p << 32 | t))
//! solver_seed   = splitmix64(instance_seed)
//! ```
//!
//! so any single trial can be reproduced in isolation and the sweep result
//! does not depend on evaluation order.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exact::{exact_moments_capped, ExactMoments, DEFAULT_STATE_CAP};
use crate::meanfield::{solve_type1, solve_type2_from, MfSolution, SolverOptions};
use crate::model::{sample_params, GrbmParams, InstanceSpec, SampleSpace};

pub const DEFAULT_SD_GRID: [f64; 7] = [0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepMode {
    FreeEnergy,
    Mse,
}

/// Which parameter family the swept standard deviation applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VaryFamily {
    W,
    B,
    C,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub mode: SweepMode,
    pub vary: VaryFamily,
    pub sd_grid: Vec<f64>,
    /// Standard deviation of the two families not being swept.
    pub fixed_sd: f64,
    pub n_visible: usize,
    pub n_hidden: usize,
    pub space: SampleSpace,
    pub trials: usize,
    pub sigma2: f64,
    pub solver: SolverOptions,
    pub seed: u64,
    /// Drop trials where either solver failed to converge from the averages.
    pub strict: bool,
    pub state_cap: u64,
}

impl SweepSpec {
    /// 24 visible and 12 hidden units, unit variances, other families at
    /// SD 0.1, the default grid and 1000 trials per point.
    pub fn new(mode: SweepMode, vary: VaryFamily, space: SampleSpace) -> Self {
        Self {
            mode,
            vary,
            sd_grid: DEFAULT_SD_GRID.to_vec(),
            fixed_sd: 0.1,
            n_visible: 24,
            n_hidden: 12,
            space,
            trials: 1000,
            sigma2: 1.0,
            solver: SolverOptions::default(),
            seed: 0,
            strict: false,
            state_cap: DEFAULT_STATE_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sd_grid.is_empty() {
            return Err(Error::invalid("sd grid is empty"));
        }
        if self.sd_grid.iter().any(|&sd| !(sd > 0.0 && sd.is_finite())) {
            return Err(Error::invalid("sd grid values must be positive and finite"));
        }
        if self.sd_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sd grid must be strictly increasing"));
        }
        if !(self.fixed_sd >= 0.0 && self.fixed_sd.is_finite()) {
            return Err(Error::invalid(format!("fixed sd must be nonnegative, got {}", self.fixed_sd)));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.n_visible == 0 || self.n_hidden == 0 {
            return Err(Error::invalid("both layers need at least one unit"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        self.solver.validate()
    }

    /// Instance recipe at one grid value.
    pub fn instance_spec(&self, sd: f64) -> InstanceSpec {
        let pick = |family| if self.vary == family { sd } else { self.fixed_sd };
        InstanceSpec {
            n_visible: self.n_visible,
            n_hidden: self.n_hidden,
            sd_b: pick(VaryFamily::B),
            sd_c: pick(VaryFamily::C),
            sd_w: pick(VaryFamily::W),
            sigma2: self.sigma2,
            space: self.space.clone(),
        }
    }

    /// Parameters and solver options of trial `trial` at grid point `point`.
    pub fn trial_setup(&self, point: usize, trial: usize) -> Result<(GrbmParams, SolverOptions)> {
        let (instance_seed, solver_seed) = trial_seeds(self.seed, point, trial);
        let params = sample_params(&self.instance_spec(self.sd_grid[point]), instance_seed)?;
        Ok((params, SolverOptions { seed: solver_seed, ..self.solver }))
    }

    /// Runs one trial of the sweep and reduces it to its scalar summaries.
    pub fn run_point_trial(&self, point: usize, trial: usize) -> Result<TrialRecord> {
        let (params, solver) = self.trial_setup(point, trial)?;
        Ok(TrialRecord::from(&run_trial_capped(&params, &solver, self.state_cap)?))
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `(instance_seed, solver_seed)` for a trial; see the module docs.
pub fn trial_seeds(seed: u64, point: usize, trial: usize) -> (u64, u64) {
    let counter = ((point as u64) << 32) | (trial as u64 & 0xffff_ffff);
    let instance = splitmix64(splitmix64(seed) ^ counter);
    (instance, splitmix64(instance))
}

/// Mean squared componentwise difference.
pub fn mse(exact: &[f64], approx: &[f64]) -> Result<f64> {
    if exact.len() != approx.len() || exact.is_empty() {
        return Err(Error::invalid(format!(
            "mse needs two nonempty vectors of equal length, got {} and {}",
            exact.len(),
            approx.len()
        )));
    }
    let ss: f64 = exact.iter().zip(approx).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(ss / exact.len() as f64)
}

/// All three inference results for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub exact: ExactMoments,
    pub type1: MfSolution,
    pub type2: MfSolution,
}

pub fn run_trial(params: &GrbmParams, solver: &SolverOptions) -> Result<Trial> {
    run_trial_capped(params, solver, DEFAULT_STATE_CAP)
}

pub fn run_trial_capped(params: &GrbmParams, solver: &SolverOptions, cap: u64) -> Result<Trial> {
    let exact = exact_moments_capped(params, cap)?;
    let type1 = solve_type1(params, solver)?;
    let type2 = solve_type2_from(params, solver, &[&type1.m])?;
    Ok(Trial { exact, type1, type2 })
}

/// Scalar summaries of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub f_exact: f64,
    pub f1: f64,
    pub f2: f64,
    pub mse1_h: f64,
    pub mse1_v: f64,
    pub mse2_h: f64,
    pub mse2_v: f64,
    /// Both solvers converged.
    pub converged: bool,
}

impl From<&Trial> for TrialRecord {
    fn from(t: &Trial) -> Self {
        // lengths agree by construction
        let err = |a: &[f64], b: &[f64]| mse(a, b).expect("matching lengths");
        Self {
            f_exact: t.exact.free_energy,
            f1: t.type1.free_energy,
            f2: t.type2.free_energy,
            mse1_h: err(&t.exact.m, &t.type1.m),
            mse1_v: err(&t.exact.nu, &t.type1.nu),
            mse2_h: err(&t.exact.m, &t.type2.m),
            mse2_v: err(&t.exact.nu, &t.type2.nu),
            converged: t.type1.converged && t.type2.converged,
        }
    }
}

/// One grid point of a sweep. Only the fields of the sweep's mode are set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub sd: f64,
    pub f_exact_mean: Option<f64>,
    pub f1_mean: Option<f64>,
    pub f2_mean: Option<f64>,
    pub mse1_h: Option<f64>,
    pub mse1_v: Option<f64>,
    pub mse2_h: Option<f64>,
    pub mse2_v: Option<f64>,
    pub n_unconverged: usize,
    /// Trials that entered the averages.
    pub n_trials: usize,
}

/// Averages `records` in index order. In strict mode unconverged trials are
/// left out; if nothing remains the means are NaN.
pub fn aggregate(mode: SweepMode, sd: f64, records: &[TrialRecord], strict: bool) -> SweepRow {
    let n_unconverged = records.iter().filter(|r| !r.converged).count();
    let kept: Vec<&TrialRecord> = records.iter().filter(|r| !strict || r.converged).collect();
    let mean = |f: fn(&TrialRecord) -> f64| {
        let mut total = 0.0;
        for r in &kept {
            total += f(r);
        }
        Some(total / kept.len() as f64)
    };
    let fe = mode == SweepMode::FreeEnergy;
    let pick = |on: bool, f: fn(&TrialRecord) -> f64| if on { mean(f) } else { None };
    SweepRow {
        sd,
        f_exact_mean: pick(fe, |r| r.f_exact),
        f1_mean: pick(fe, |r| r.f1),
        f2_mean: pick(fe, |r| r.f2),
        mse1_h: pick(!fe, |r| r.mse1_h),
        mse1_v: pick(!fe, |r| r.mse1_v),
        mse2_h: pick(!fe, |r| r.mse2_h),
        mse2_v: pick(!fe, |r| r.mse2_v),
        n_unconverged,
        n_trials: kept.len(),
    }
}

/// Sequential sweep. `grbm-cli` runs the same trials in parallel and
/// produces identical rows.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.sd_grid
        .iter()
        .enumerate()
        .map(|(point, &sd)| {
            let records = (0..spec.trials)
                .map(|t| spec.run_point_trial(point, t))
                .collect::<Result<Vec<_>>>()?;
            Ok(aggregate(spec.mode, sd, &records, spec.strict))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(mse(&[2.0], &[-1.0]).unwrap(), 9.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn instance_spec_routes_the_swept_sd() {
        let mut spec = SweepSpec::new(SweepMode::FreeEnergy, VaryFamily::W, SampleSpace::binary());
        let i = spec.instance_spec(0.7);
        assert_eq!((i.sd_w, i.sd_b, i.sd_c), (0.7, 0.1, 0.1));
        spec.vary = VaryFamily::B;
        let i = spec.instance_spec(0.7);
        assert_eq!((i.sd_w, i.sd_b, i.sd_c), (0.1, 0.7, 0.1));
        spec.vary = VaryFamily::C;
        let i = spec.instance_spec(0.7);
        assert_eq!((i.sd_w, i.sd_b, i.sd_c), (0.1, 0.1, 0.7));
    }

    #[test]
    fn spec_validation() {
        let base = SweepSpec::new(SweepMode::Mse, VaryFamily::C, SampleSpace::ternary());
        assert!(base.validate().is_ok());
        let bad = [
            SweepSpec { sd_grid: vec![], ..base.clone() },
            SweepSpec { sd_grid: vec![0.2, 0.1], ..base.clone() },
            SweepSpec { sd_grid: vec![0.0, 0.1], ..base.clone() },
            SweepSpec { sd_grid: vec![0.1, 0.1], ..base.clone() },
            SweepSpec { trials: 0, ..base.clone() },
            SweepSpec { sigma2: 0.0, ..base.clone() },
        ];
        for spec in bad {
            assert!(run_sweep(&spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn seeds_are_distinct_across_points_and_trials() {
        let mut seen = std::collections::BTreeSet::new();
        for p in 0..10 {
            for t in 0..100 {
                assert!(seen.insert(trial_seeds(5, p, t).0));
            }
        }
        assert_ne!(trial_seeds(5, 0, 0), trial_seeds(6, 0, 0));
    }

    #[test]
    fn single_trial_sweep_reproduces_the_trial() {
        let spec = SweepSpec {
            sd_grid: vec![0.3],
            trials: 1,
            n_visible: 6,
            n_hidden: 4,
            seed: 77,
            ..SweepSpec::new(SweepMode::FreeEnergy, VaryFamily::W, SampleSpace::binary())
        };
        let rows = run_sweep(&spec).unwrap();
        let (params, solver) = spec.trial_setup(0, 0).unwrap();
        let trial = run_trial(&params, &solver).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].f_exact_mean, Some(trial.exact.free_energy));
        assert_eq!(rows[0].f1_mean, Some(trial.type1.free_energy));
        assert_eq!(rows[0].f2_mean, Some(trial.type2.free_energy));
        assert_eq!(rows[0].mse1_h, None);
        assert_eq!(rows[0].n_trials, 1);
    }

    #[test]
    fn decoupled_trial_has_equal_free_energies() {
        let params = GrbmParams::new(
            vec![0.3, -0.2, 0.1],
            vec![0.5, -0.7],
            vec![0.0; 6],
            vec![1.0, 2.0, 0.5],
            SampleSpace::ternary(),
        )
        .unwrap();
        let t = run_trial(&params, &SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(t.type1.free_energy, t.exact.free_energy, epsilon = 1e-12);
        assert_abs_diff_eq!(t.type2.free_energy, t.exact.free_energy, epsilon = 1e-12);
    }

    #[test]
    fn capacity_error_propagates() {
        let spec = SweepSpec {
            sd_grid: vec![0.1],
            trials: 1,
            state_cap: 100,
            ..SweepSpec::new(SweepMode::FreeEnergy, VaryFamily::W, SampleSpace::binary())
        };
        assert!(matches!(run_sweep(&spec), Err(Error::Capacity { states: 4096, cap: 100 })));
    }

    #[test]
    fn aggregate_modes_and_strictness() {
        let rec = |x: f64, converged| TrialRecord {
            f_exact: x,
            f1: x + 2.0,
            f2: x + 1.0,
            mse1_h: x,
            mse1_v: x,
            mse2_h: x,
            mse2_v: x,
            converged,
        };
        let records = [rec(1.0, true), rec(3.0, false)];
        let row = aggregate(SweepMode::FreeEnergy, 0.5, &records, false);
        assert_eq!((row.f_exact_mean, row.f1_mean, row.f2_mean), (Some(2.0), Some(4.0), Some(3.0)));
        assert_eq!((row.n_unconverged, row.n_trials), (1, 2));
        assert!(row.mse2_v.is_none());
        let row = aggregate(SweepMode::Mse, 0.5, &records, true);
        assert_eq!((row.mse1_h, row.n_trials, row.n_unconverged), (Some(1.0), 1, 1));
        assert!(row.f1_mean.is_none());
        let row = aggregate(SweepMode::Mse, 0.5, &records[1..], true);
        assert!(row.mse1_h.unwrap().is_nan());
    }

    #[test]
    fn weak_coupling_gaps_shrink() {
        let spec = SweepSpec {
            sd_grid: vec![0.02, 0.1, 0.4],
            trials: 20,
            n_visible: 8,
            n_hidden: 5,
            fixed_sd: 0.02,
            seed: 3,
            ..SweepSpec::new(SweepMode::FreeEnergy, VaryFamily::W, SampleSpace::binary())
        };
        let rows = run_sweep(&spec).unwrap();
        let gaps: Vec<f64> = rows.iter().map(|r| r.f1_mean.unwrap() - r.f_exact_mean.unwrap()).collect();
        assert!(gaps[0] < gaps[1] && gaps[1] < gaps[2], "{gaps:?}");
        // the gap scales with the squared coupling sd
        assert!(gaps[0] < 0.01 * gaps[2], "{gaps:?}");
        let mse_rows = run_sweep(&SweepSpec { mode: SweepMode::Mse, ..spec }).unwrap();
        let errs: Vec<f64> = mse_rows.iter().map(|r| r.mse1_h.unwrap() + r.mse2_h.unwrap()).collect();
        assert!(errs[0] < errs[1] && errs[1] < errs[2], "{errs:?}");
    }

    proptest! {
        #[test]
        fn mse_is_nonnegative_and_zero_on_self(x in proptest::collection::vec(-1e3f64..1e3, 1..20)) {
            prop_assert_eq!(mse(&x, &x).unwrap(), 0.0);
            let y: Vec<f64> = x.iter().map(|v| v * 0.5 + 1.0).collect();
            prop_assert!(mse(&x, &y).unwrap() >= 0.0);
        }
    }
}
