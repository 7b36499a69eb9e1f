//! Trains the multi-task model and both single-task baselines at desk scale
//! with the same seed, then compares accuracy, prediction time and noise
//! robustness on the held-out cells.
//!
//! cargo run --release --example mtl_vs_stl

use mtl_prognostics::cli::{
    noise_seed, split_fleet, time_models, train_model, Preset, RunConfig, TrainMode, Trained,
};
use mtl_prognostics::dataprep::{synth_fleet, CellSeries};
use mtl_prognostics::evaluation::{
    compare_mtl_stl, noise_sweep, progression_eval, EvalContext, NOISE_GRID,
};
use mtl_prognostics::seqmodel::StlPair;
use mtl_prognostics::training::sample_positions;

fn main() -> mtl_prognostics::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.model.preset = Preset::Desk;
    cfg.training.preset = Preset::Desk;
    let cells: Vec<CellSeries> = synth_fleet(48, cfg.seed, &cfg.synth.params)?
        .into_iter()
        .map(|c| c.series)
        .collect();
    let split = split_fleet(&cells, cfg.seed)?;

    let mut quiet = |_: &_| {};
    let (Trained::Mtl(mtl), meta, _) = train_model(&cfg, &split, TrainMode::Mtl, &mut quiet)?
    else {
        unreachable!()
    };
    let (Trained::Stl(cap), _, _) = train_model(&cfg, &split, TrainMode::StlCap, &mut quiet)?
    else {
        unreachable!()
    };
    let (Trained::Stl(res), _, _) = train_model(&cfg, &split, TrainMode::StlRes, &mut quiet)?
    else {
        unreachable!()
    };
    let stl = StlPair { cap, res };

    let ctx = EvalContext::new(mtl.config, meta.normalizer, meta.knee_references);
    let mtl_report = progression_eval(&mtl, &split.test, &ctx)?;
    let stl_report = progression_eval(&stl, &split.test, &ctx)?;
    let mut inputs = Vec::new();
    for c in &split.test {
        for p in sample_positions(c.last_cycle(), &ctx.config, ctx.stride) {
            inputs.push((c.capacity[..=p].to_vec(), c.resistance[..=p].to_vec()));
        }
    }
    let timing = time_models(&mtl, &stl, &inputs, &cfg)?;
    let table = compare_mtl_stl(&mtl_report, &stl_report, &stl_report, Some(timing.clone()))?;
    println!("{:<45} {:>12} {:>12}", "metric", "STL", "MTL");
    for r in &table.rows {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        println!("{:<45} {:>12} {:>12}", r.metric, f(r.stl), f(r.mtl));
    }
    println!("MTL / (STL cap + STL res) time: {:.3}", timing.ratio());

    let sweep = noise_sweep(&mtl, &split.test, &ctx, &NOISE_GRID, noise_seed(cfg.seed))?;
    for c in &sweep {
        println!(
            "sigma {:.3}: capacity {:.3}%  resistance {:.3}%",
            c.sigma_fraction, c.report.capacity.mean_mape, c.report.resistance.mean_mape
        );
    }
    Ok(())
}
