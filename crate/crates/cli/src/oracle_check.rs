use rand::Rng;

use tgbs::gaussian::{
    apply_interferometer, apply_uniform_loss, haar_unitary, squeezed_vacuum, squeezing_from_db,
    transmission_from_db, vacuum_state,
};
use tgbs::oracle::{compare_routes, OracleReport, ABS_TOL, DEFAULT_ENUMERATION_LIMIT, REL_TOL};
use tgbs::rng::stream;
use tgbs::GaussianState;

use crate::config::{OracleArgs, RunConfig};
use crate::output::{write_csv, Failure};
use crate::sample::note;

/// Trial `t`: per-mode squeezing uniform in `[0, max]`, Haar interferometer,
/// uniform loss.
fn trial_state(a: &OracleArgs, trial: u64) -> Result<GaussianState, Failure> {
    if a.vacuum {
        return Ok(vacuum_state(a.modes)?);
    }
    let mut rng = stream(a.seed, "oracle-check", trial);
    let r_max = squeezing_from_db(a.squeezing_db);
    let r: Vec<f64> = (0..a.modes).map(|_| rng.random::<f64>() * r_max).collect();
    let u = haar_unitary(a.modes, &mut rng)?;
    let state = apply_interferometer(&squeezed_vacuum(&r)?, &u)?;
    Ok(apply_uniform_loss(&state, transmission_from_db(a.loss_db))?)
}

pub fn run(config: &RunConfig, a: &OracleArgs) -> Result<(), Failure> {
    let cfg = config.step_config();
    let mut reports: Vec<OracleReport> = Vec::with_capacity(a.trials);
    for t in 0..a.trials {
        let state = trial_state(a, t as u64)?;
        reports.push(compare_routes(&state, DEFAULT_ENUMERATION_LIMIT, &cfg)?);
    }

    write_csv(a.out.as_deref(), config, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["trial", "pattern", "chain_prob", "ie_prob", "rel_err", "pass"])?;
        for (t, rep) in reports.iter().enumerate() {
            for row in &rep.rows {
                w.write_record([
                    t.to_string(),
                    row.pattern.to_string(),
                    format!("{:e}", row.chain_prob),
                    format!("{:e}", row.ie_prob),
                    format!("{:e}", row.rel_err),
                    row.pass.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;

    let failures: usize = reports.iter().map(OracleReport::failures).sum();
    let patterns: usize = reports.iter().map(|r| r.rows.len()).sum();
    let max_rel = reports
        .iter()
        .flat_map(|r| r.rows.iter().map(|row| row.rel_err))
        .fold(0.0, f64::max);
    let max_total_err = reports.iter().map(|r| (r.total - 1.0).abs()).fold(0.0, f64::max);
    let mut line = format!(
        "{}: {} trials, {patterns} patterns, {failures} disagreements, max rel_err {max_rel:.2e}, max |total - 1| {max_total_err:.2e}",
        if failures == 0 { "PASS" } else { "FAIL" },
        a.trials,
    );
    if a.vacuum {
        let nonzero = reports.first().map_or(0, |r| r.rows.iter().filter(|row| row.chain_prob != 0.0).count());
        line.push_str(&format!(", vacuum nonzero entries {nonzero}"));
    }
    note(a.out.as_deref(), &line);
    if failures > 0 {
        return Err(Failure::Precision(format!(
            "{failures} pattern(s) disagree beyond relative {REL_TOL:e} / absolute {ABS_TOL:e}"
        )));
    }
    Ok(())
}
