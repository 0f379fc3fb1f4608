use std::path::Path;

use serde_json::json;

use tgbs::gaussian::{
    apply_interferometer, apply_uniform_loss, haar_unitary, squeezed_vacuum, squeezing_from_db,
    transmission_from_db,
};
use tgbs::rng::stream;
use tgbs::sampler::{write_draws_csv, DrawOutcome};
use tgbs::{ClickPattern, Draw, GaussianState, Sampler};

use crate::config::{RunConfig, SampleArgs};
use crate::output::{emit, write_csv, Failure};

/// Equal squeezing on every mode, a Haar-random interferometer from
/// `seed`, then uniform loss.
pub fn haar_instance(modes: usize, squeezing_db: f64, loss_db: f64, seed: u64) -> Result<GaussianState, Failure> {
    let r = vec![squeezing_from_db(squeezing_db); modes];
    let u = haar_unitary(modes, &mut stream(seed, "interferometer", 0))?;
    let mut state = apply_interferometer(&squeezed_vacuum(&r)?, &u)?;
    if loss_db > 0.0 {
        state = apply_uniform_loss(&state, transmission_from_db(loss_db))?;
    }
    Ok(state)
}

/// Messages go to stdout unless stdout carries the data.
pub fn note(data_path: Option<&Path>, msg: &str) {
    if data_path.is_some() {
        println!("{msg}");
    } else {
        eprintln!("{msg}");
    }
}

#[derive(Default)]
struct Tally {
    attempted: u64,
    failures: usize,
    first_failure: Option<Failure>,
}

impl Tally {
    fn fail(&mut self, index: Option<u64>, e: tgbs::Error) {
        match index {
            Some(i) => eprintln!("draw {i}: {e}"),
            None => eprintln!("draw failed: {e}"),
        }
        self.failures += 1;
        self.first_failure.get_or_insert(Failure::from(e));
    }
}

pub fn run(config: &RunConfig, a: &SampleArgs) -> Result<(), Failure> {
    let state = haar_instance(a.modes, a.squeezing_db, a.loss_db, a.seed)?;
    let sampler = Sampler::new(state, a.order.clone(), a.seed, config.step_config())?;
    let mut tally = Tally::default();
    let draws = if let Some(bits) = &a.forced {
        forced(&sampler, &ClickPattern::parse(bits)?, a.out.as_deref(), &mut tally)?
    } else if let Some(clicks) = a.clicks {
        postselected(&sampler, clicks, a, &mut tally)?
    } else {
        unconstrained(&sampler, a.draws, &mut tally)
    };

    write_csv(a.out.as_deref(), config, |buf| Ok(write_draws_csv(buf, &draws, config.timing)?))?;

    let summary = summary(config, a, &draws, &tally);
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    match &a.summary {
        Some(p) => emit(Some(p), text.as_bytes())?,
        None => eprint!("{text}"),
    }
    match tally.first_failure {
        Some(f) => Err(match f {
            Failure::Precision(m) => Failure::Precision(format!("{} draw(s) failed, first: {m}", tally.failures)),
            other => other,
        }),
        None => Ok(()),
    }
}

fn forced(sampler: &Sampler, pattern: &ClickPattern, out: Option<&Path>, tally: &mut Tally) -> Result<Vec<Draw>, Failure> {
    tally.attempted = 1;
    match sampler.run(0, Some(pattern), None, &mut ()) {
        Ok(DrawOutcome::Complete(d)) => {
            note(out, &format!("joint probability of {pattern}: {:e}", d.joint_prob));
            Ok(vec![d])
        }
        Ok(DrawOutcome::Aborted { .. }) => unreachable!("no click window"),
        Err(tgbs::Error::ImpossibleOutcome { mode, prob }) => {
            note(out, &format!("joint probability of {pattern}: 0 (mode {mode} outcome has probability {prob:e})"));
            Ok(Vec::new())
        }
        Err(e) => Err(e.into()),
    }
}

fn unconstrained(sampler: &Sampler, count: usize, tally: &mut Tally) -> Vec<Draw> {
    tally.attempted = count as u64;
    let mut draws = Vec::with_capacity(count);
    for (i, r) in sampler.draw_batch(0, count, None).into_iter().enumerate() {
        match r {
            Ok(DrawOutcome::Complete(d)) => draws.push(d),
            Ok(DrawOutcome::Aborted { .. }) => unreachable!("no click window"),
            Err(e) => tally.fail(Some(i as u64), e),
        }
    }
    draws
}

fn postselected(sampler: &Sampler, clicks: usize, a: &SampleArgs, tally: &mut Tally) -> Result<Vec<Draw>, Failure> {
    let mut stream = sampler.postselect(clicks, a.max_draws)?;
    let mut draws = Vec::with_capacity(a.draws);
    while draws.len() < a.draws {
        match stream.next() {
            Some(Ok(d)) => draws.push(d),
            Some(Err(e)) => tally.fail(None, e),
            None => break,
        }
    }
    tally.attempted = stream.draws_attempted();
    if draws.len() < a.draws {
        eprintln!(
            "only {} of {} draws accepted within {} raw draws",
            draws.len(),
            a.draws,
            a.max_draws
        );
    }
    Ok(draws)
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn summary(config: &RunConfig, a: &SampleArgs, draws: &[Draw], tally: &Tally) -> serde_json::Value {
    let timing = (config.timing && !draws.is_empty()).then(|| {
        let mut ms: Vec<f64> = draws.iter().map(|d| d.wall_ms).collect();
        ms.sort_by(f64::total_cmp);
        json!({
            "p50": percentile(&ms, 0.5),
            "p90": percentile(&ms, 0.9),
            "p99": percentile(&ms, 0.99),
            "max": ms[ms.len() - 1],
            "mean": ms.iter().sum::<f64>() / ms.len() as f64,
        })
    });
    let acceptance = a.clicks.map(|_| {
        if tally.attempted == 0 {
            0.0
        } else {
            draws.len() as f64 / tally.attempted as f64
        }
    });
    let mean_clicks = if draws.is_empty() {
        None
    } else {
        Some(draws.iter().map(|d| d.pattern.clicks() as f64).sum::<f64>() / draws.len() as f64)
    };
    json!({
        "config": serde_json::to_value(config).expect("run configuration serializes"),
        "draws_written": draws.len(),
        "draws_attempted": tally.attempted,
        "acceptance_rate": acceptance,
        "failed_draws": tally.failures,
        "mean_clicks": mean_clicks,
        "peak_branch_count": draws.iter().map(|d| d.peak_branch_count).max(),
        "max_drift": draws.iter().map(|d| d.max_drift).fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x)))),
        "wall_ms": timing,
    })
}
