//! Per-cell knee and end-of-life metrics and their correlation matrix.
//!
//! cargo run --release --example degradation_correlations

use mtl_prognostics::dataprep::{synth_fleet, CellSeries, SynthParams};
use mtl_prognostics::evaluation::{degradation_metrics, EolThresholds, METRIC_NAMES};

fn main() -> mtl_prognostics::Result<()> {
    let params = SynthParams::default();
    let cells: Vec<CellSeries> = synth_fleet(48, 5, &params)?
        .into_iter()
        .map(|c| c.series)
        .collect();
    let table = degradation_metrics(&cells, &params.normalizer(), &EolThresholds::default())?;
    print!("{:>9}", "");
    for n in METRIC_NAMES {
        print!("{n:>9}");
    }
    println!();
    for (name, row) in METRIC_NAMES
        .iter()
        .zip(table.rho.as_ref().expect("48 cells"))
    {
        print!("{name:>9}");
        for v in row {
            print!(
                "{:>9}",
                v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into())
            );
        }
        println!();
    }
    Ok(())
}
