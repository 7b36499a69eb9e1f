//! Wall time of one multi-task prediction against the two single-task
//! predictions it replaces, for the desk and reference network sizes.
//! Timing does not depend on the weights, so the models are untrained.
//!
//! cargo run --release --example prediction_timing

use mtl_prognostics::dataprep::{synth_fleet, SynthParams};
use mtl_prognostics::evaluation::{time_calls, ComparisonTiming};
use mtl_prognostics::numeric::RegularizationSpec;
use mtl_prognostics::seqmodel::{Channel, ModelConfig, MtlModel, StlModel};

fn main() -> mtl_prognostics::Result<()> {
    let params = SynthParams::default();
    let cell = synth_fleet(1, 1, &params)?.remove(0).series;
    let norm = params.normalizer();
    for (name, config) in [
        ("desk", ModelConfig::desk()),
        ("reference", ModelConfig::default()),
    ] {
        let mtl = MtlModel::new(config, norm, RegularizationSpec::default(), 1)?;
        let cap = StlModel::new(
            config,
            Channel::Capacity,
            norm,
            RegularizationSpec::default(),
            1,
        )?;
        let res = StlModel::new(
            config,
            Channel::Resistance,
            norm,
            RegularizationSpec::default(),
            1,
        )?;
        let max = config.max_history_cycles().min(cell.last_cycle());
        for present in [100, max / 2, max] {
            let input = [(
                cell.capacity[..=present].to_vec(),
                cell.resistance[..=present].to_vec(),
            )];
            let reps = if name == "desk" { 200 } else { 20 };
            let t = ComparisonTiming {
                mtl: time_calls(&input, 3, reps, |(c, r)| mtl.predict(c, r).map(drop))?,
                stl_cap: time_calls(&input, 3, reps, |(c, _)| cap.predict(c).map(drop))?,
                stl_res: time_calls(&input, 3, reps, |(_, r)| res.predict(r).map(drop))?,
            };
            println!(
                "{name:>9} history {present:>4}: MTL {:.2e}s  STL sum {:.2e}s  ratio {:.3}",
                t.mtl.mean_seconds,
                t.stl_total_seconds(),
                t.ratio()
            );
        }
    }
    Ok(())
}
