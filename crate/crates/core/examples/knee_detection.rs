//! Offline knee of a full degradation curve and online detection on a coarse
//! forecast grid using a fleet reference gradient.
//!
//! cargo run --release --example knee_detection

use mtl_prognostics::dataprep::{synth_fleet, SynthParams};
use mtl_prognostics::kneepoint::{
    knee_offline, knee_online, reference_gradient, Curve, SmoothingSpec,
};
use mtl_prognostics::seqmodel::Channel;

fn main() -> mtl_prognostics::Result<()> {
    let params = SynthParams::default();
    let norm = params.normalizer();
    let fleet = synth_fleet(20, 3, &params)?;
    let spec = SmoothingSpec::for_step(1.0);

    let knees = fleet
        .iter()
        .map(|c| {
            knee_offline(
                Curve::per_cycle(&norm.normalize(Channel::Capacity, &c.series.capacity)),
                spec,
            )
        })
        .collect::<mtl_prognostics::Result<Vec<_>>>()?;
    let reference = reference_gradient(&knees)?;
    println!("reference |dSOH/dcycle| at the knee: {reference:.3e}");

    for (c, k) in fleet.iter().zip(&knees).take(8) {
        let soh = norm.normalize(Channel::Capacity, &c.series.capacity);
        let step = 40;
        let grid: Vec<f64> = soh.iter().step_by(step).copied().collect();
        let online = knee_online(
            Curve::new(&grid, 0.0, step as f64),
            reference,
            SmoothingSpec::for_step(step as f64),
        );
        println!(
            "{}: curvature {:7.1}  offline {:7.1}  online {}",
            c.truth.cell_id,
            c.truth.cap_knee.unwrap_or(f64::NAN),
            k.knee_cycle,
            online
                .map(|v| format!("{v:7.1}"))
                .unwrap_or_else(|e| e.to_string())
        );
    }
    Ok(())
}
