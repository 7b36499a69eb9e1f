//! Trains the desk-scale multi-task model on a 48-cell synthetic fleet and
//! scores the held-out cells.
//!
//! cargo run --release --example desk_training

use std::time::Instant;

use mtl_prognostics::dataprep::{synth_fleet, CellSeries, SynthParams};
use mtl_prognostics::evaluation::{knee_references, progression_eval, EvalContext};
use mtl_prognostics::numeric::RegularizationSpec;
use mtl_prognostics::seqmodel::{Channel, ModelConfig, MtlModel};
use mtl_prognostics::training::{
    build_fleet_samples, split_dataset, train_multistage, Schedule, SplitSpec, SAMPLE_STRIDE_CYCLES,
};

fn main() -> mtl_prognostics::Result<()> {
    let seed = 7;
    let params = SynthParams::default();
    let cells: Vec<CellSeries> = synth_fleet(48, seed, &params)?
        .into_iter()
        .map(|c| c.series)
        .collect();
    let (train, val, test) = split_dataset(&cells, SplitSpec { seed })?;
    let normalizer = params.normalizer();
    let config = ModelConfig::desk();

    let train_s = build_fleet_samples(&train, &normalizer, &config, SAMPLE_STRIDE_CYCLES)?;
    let val_s = build_fleet_samples(&val, &normalizer, &config, SAMPLE_STRIDE_CYCLES)?;
    println!("{} train / {} val samples", train_s.len(), val_s.len());

    let mut model = MtlModel::new(config, normalizer, RegularizationSpec::default(), seed)?;
    let t0 = Instant::now();
    let report = train_multistage(
        &mut model,
        &train_s,
        &val_s,
        &Schedule::mtl_desk(),
        seed,
        &mut |row| {
            if row.epoch % 10 == 0 {
                println!(
                    "stage {} epoch {:3} train {:.5} val {:.5} ({:.0}s)",
                    row.stage,
                    row.epoch,
                    row.train_loss,
                    row.val_loss,
                    t0.elapsed().as_secs_f64()
                );
            }
        },
    )?;
    for s in &report.stages {
        println!(
            "stage {}: best epoch {} val {:.5}",
            s.config.stage, s.outcome.best_epoch, s.outcome.best_val
        );
    }

    let ctx = EvalContext::new(config, normalizer, knee_references(&train, &normalizer)?);
    let metrics = progression_eval(&model, &test, &ctx)?;
    for ch in Channel::BOTH {
        let s = metrics.summary(ch);
        println!(
            "{ch}: mean MAPE {:.2}%  median knee error {:?}  median first EOL error {:?}",
            s.mean_mape, s.median_knee_error, s.median_eol_first_error
        );
    }
    println!("total {:.0}s", t0.elapsed().as_secs_f64());
    Ok(())
}
