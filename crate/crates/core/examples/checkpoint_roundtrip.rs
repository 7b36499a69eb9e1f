//! Saves a model to the binary checkpoint format, reloads it and checks that
//! the forecast is bit-identical.
//!
//! cargo run --release --example checkpoint_roundtrip

use mtl_prognostics::dataprep::{synth_fleet, SynthParams};
use mtl_prognostics::numeric::RegularizationSpec;
use mtl_prognostics::seqmodel::{ModelConfig, MtlModel};

fn main() -> mtl_prognostics::Result<()> {
    let params = SynthParams::default();
    let cell = synth_fleet(1, 9, &params)?.remove(0).series;
    let model = MtlModel::new(
        ModelConfig::desk(),
        params.normalizer(),
        RegularizationSpec::default(),
        9,
    )?;
    let bytes = model.to_bytes();
    let back = MtlModel::from_bytes(&bytes)?;
    let (c, r) = (&cell.capacity[..=300], &cell.resistance[..=300]);
    let (a, b) = (model.predict(c, r)?, back.predict(c, r)?);
    println!(
        "{} parameters, {} checkpoint bytes",
        model.num_params(),
        bytes.len()
    );
    println!(
        "forecast from cycle 300: {} steps starting at cycle {}",
        a.len(),
        a.start_cycle
    );
    println!("bit-identical after reload: {}", a == b);
    Ok(())
}
