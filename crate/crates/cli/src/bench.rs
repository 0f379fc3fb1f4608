use rand::seq::SliceRandom;

use tgbs::rng::stream;
use tgbs::sampler::DrawOutcome;
use tgbs::{ClickPattern, Error, Sampler};

use crate::config::{BenchArgs, Placement, RunConfig};
use crate::output::{write_csv, Failure};
use crate::sample::{haar_instance, note};

/// `"0-4,6,8"` to `[0, 1, 2, 3, 4, 6, 8]`.
pub fn parse_clicks(spec: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::Validation(format!("bad --clicks '{spec}': expected values or a-b ranges"));
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: usize = lo.trim().parse().map_err(|_| bad())?;
                let hi: usize = hi.trim().parse().map_err(|_| bad())?;
                if lo > hi {
                    return Err(bad());
                }
                out.extend(lo..=hi);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

struct Row {
    clicks: usize,
    rep: usize,
    pattern: ClickPattern,
    wall_ms: f64,
    peak_branch_count: usize,
    joint_prob: f64,
    status: String,
}

pub fn run(config: &RunConfig, a: &BenchArgs) -> Result<(), Failure> {
    let sweep = parse_clicks(&a.clicks)?;
    if let Some(&m) = sweep.iter().find(|&&m| m > a.modes) {
        return Err(Failure::Validation(format!("{m} clicks exceed {} modes", a.modes)));
    }
    let state = haar_instance(a.modes, a.squeezing_db, 0.0, a.seed)?;
    let sampler = Sampler::new(state, None, a.seed, config.step_config())?;
    let order = sampler.order().to_vec();

    // reps run one after another so each timing has the whole pool
    let mut rows = Vec::with_capacity(sweep.len() * a.reps);
    for &m in &sweep {
        for rep in 0..a.reps {
            let mut modes = order.clone();
            if a.placement == Placement::Random {
                modes.shuffle(&mut stream(a.seed, "bench-pattern", ((m as u64) << 32) | rep as u64));
            }
            let mut bits = vec![false; a.modes];
            for &mode in &modes[..m] {
                bits[mode] = true;
            }
            let pattern = ClickPattern::new(bits);
            let row = match sampler.run(rep as u64, Some(&pattern), None, &mut ()) {
                Ok(DrawOutcome::Complete(d)) => Row {
                    clicks: m,
                    rep,
                    pattern,
                    wall_ms: if config.timing { d.wall_ms } else { 0.0 },
                    peak_branch_count: d.peak_branch_count,
                    joint_prob: d.joint_prob,
                    status: "ok".into(),
                },
                Ok(DrawOutcome::Aborted { .. }) => unreachable!("no click window"),
                Err(e @ Error::ImpossibleOutcome { .. }) => Row {
                    clicks: m,
                    rep,
                    pattern,
                    wall_ms: 0.0,
                    peak_branch_count: 0,
                    joint_prob: 0.0,
                    status: e.to_string(),
                },
                Err(e) => return Err(e.into()),
            };
            rows.push(row);
        }
    }

    write_csv(a.out.as_deref(), config, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["clicks", "rep", "pattern", "wall_ms", "peak_branch_count", "joint_prob", "status"])?;
        for r in &rows {
            w.write_record([
                r.clicks.to_string(),
                r.rep.to_string(),
                r.pattern.to_string(),
                format!("{:.3}", r.wall_ms),
                r.peak_branch_count.to_string(),
                format!("{:e}", r.joint_prob),
                r.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;

    if config.timing {
        for &m in &sweep {
            let ms: Vec<f64> = rows.iter().filter(|r| r.clicks == m).map(|r| r.wall_ms).collect();
            let mean = ms.iter().sum::<f64>() / ms.len() as f64;
            note(a.out.as_deref(), &format!("{m:>3} clicks: mean {mean:.3} ms over {} reps", ms.len()));
        }
    }
    Ok(())
}
