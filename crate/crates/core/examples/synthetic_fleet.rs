//! Generates a seeded synthetic fleet and prints each cell's ground-truth
//! knees and end-of-life cycles.
//!
//! cargo run --release --example synthetic_fleet

use mtl_prognostics::dataprep::{synth_fleet, SynthParams};

fn main() -> mtl_prognostics::Result<()> {
    let fleet = synth_fleet(12, 42, &SynthParams::default())?;
    println!("cell      last  cap_knee res_knee   EOL80   EOL65  EOL120  EOL130");
    let f = |v: Option<f64>| {
        v.map(|x| format!("{x:8.1}"))
            .unwrap_or_else(|| "       -".into())
    };
    for c in &fleet {
        let t = &c.truth;
        println!(
            "{} {:5} {} {} {} {} {} {}",
            t.cell_id,
            t.last_cycle,
            f(t.cap_knee),
            f(t.res_knee),
            f(t.eol80),
            f(t.eol65),
            f(t.eol120),
            f(t.eol130)
        );
    }
    Ok(())
}
