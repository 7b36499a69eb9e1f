//! Parses sparse checkup measurements and interpolates them to one value per
//! cycle with a shape-preserving cubic.
//!
//! cargo run --release --example checkup_interpolation

use mtl_prognostics::dataprep::{group_by_cell, interpolate_pchip, parse_checkups, Normalizer};
use mtl_prognostics::seqmodel::Channel;

const CHECKUPS: &str = "\
cell_id,cycle,capacity_ah,resistance_mohm
A,0,1.851,49.8
A,250,1.822,50.9
A,500,1.795,52.0
A,750,1.760,53.6
A,1000,1.690,57.1
A,1150,1.560,63.0
B,0,1.846,50.6
B,300,1.815,51.8
B,600,1.781,53.3
B,900,1.702,57.9
";

fn main() -> mtl_prognostics::Result<()> {
    let records = parse_checkups(CHECKUPS.as_bytes(), "inline")?;
    let cells = group_by_cell(&records)
        .into_iter()
        .map(|(_, recs)| interpolate_pchip(&recs))
        .collect::<mtl_prognostics::Result<Vec<_>>>()?;
    let initial: Vec<f64> = cells.iter().map(|c| c.resistance[0]).collect();
    let norm = Normalizer::from_initial_resistances(&initial)?;
    for c in &cells {
        let soh_c = norm.normalize(Channel::Capacity, &c.capacity);
        let soh_r = norm.normalize(Channel::Resistance, &c.resistance);
        println!("cell {}: {} cycles", c.cell_id, c.len());
        for cycle in (0..=c.last_cycle()).step_by(150) {
            println!(
                "  {cycle:5}  {:.4} Ah ({:.3})  {:.2} mΩ ({:.3})",
                c.capacity[cycle], soh_c[cycle], c.resistance[cycle], soh_r[cycle]
            );
        }
    }
    Ok(())
}
