//! Human-readable dump of one instance and its three inference results.

use std::io::Write;

use grbm_core::{marginalize, run_trial, GrbmParams, SolverOptions};

use crate::error::CliError;

fn row(values: &[f64]) -> String {
    values.iter().map(|x| format!("{x:>11.6}")).collect::<Vec<_>>().join(" ")
}

pub fn write_inspection<W: Write>(mut out: W, params: &GrbmParams, solver: &SolverOptions) -> Result<(), CliError> {
    let (nv, nh) = (params.n_visible(), params.n_hidden());
    let trial = run_trial(params, solver)?;
    let bm = marginalize(params);

    writeln!(out, "# parameters ({nv} visible, {nh} hidden, space {:?})", params.space().values())?;
    writeln!(out, "b      {}", row(params.visible_bias()))?;
    writeln!(out, "sigma2 {}", row(params.sigma2()))?;
    writeln!(out, "c      {}", row(params.hidden_bias()))?;
    for i in 0..nv {
        writeln!(out, "w[{i:>3}] {}", row(&params.couplings()[i * nh..(i + 1) * nh]))?;
    }

    writeln!(out, "\n# marginal hidden-layer machine (ln z_H = {:.12})", bm.log_zh)?;
    writeln!(out, "B      {}", row(&bm.linear))?;
    writeln!(out, "D      {}", row(&bm.quadratic))?;
    for j in 0..nh {
        writeln!(out, "J[{j:>3}] {}", row(&bm.coupling[j * nh..(j + 1) * nh]))?;
    }

    let (ex, one, two) = (&trial.exact, &trial.type1, &trial.type2);
    writeln!(out, "\n# hidden means")?;
    writeln!(out, "{:>5} {:>14} {:>14} {:>14}", "j", "exact", "type I", "type II")?;
    for j in 0..nh {
        writeln!(out, "{j:>5} {:>14.9} {:>14.9} {:>14.9}", ex.m[j], one.m[j], two.m[j])?;
    }
    writeln!(out, "\n# visible means")?;
    writeln!(out, "{:>5} {:>14} {:>14} {:>14}", "i", "exact", "type I", "type II")?;
    for i in 0..nv {
        writeln!(out, "{i:>5} {:>14.9} {:>14.9} {:>14.9}", ex.nu[i], one.nu[i], two.nu[i])?;
    }
    writeln!(out, "\n# free energies")?;
    writeln!(out, "F  (exact)   {:.12}", ex.free_energy)?;
    for (name, sol) in [("F1 (type I) ", one), ("F2 (type II)", two)] {
        writeln!(
            out,
            "{name} {:.12}  gap {:.3e}  converged={} iterations={} residual={:.2e}",
            sol.free_energy,
            sol.free_energy - ex.free_energy,
            sol.converged,
            sol.iterations,
            sol.residual
        )?;
    }
    Ok(())
}
