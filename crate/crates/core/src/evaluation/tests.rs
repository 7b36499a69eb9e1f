use super::*;
use crate::dataprep::{synth_fleet, CellSeries, NoiseSpec, Normalizer, SynthCell, SynthParams};
use crate::error::{Error, Result};
use crate::seqmodel::{Channel, Forecaster, ModelConfig, TrajectoryPrediction};

/// Reads the future straight off the true series. Cells are told apart by
/// their cycle-0 capacity; steps past the end repeat the last value.
struct Oracle {
    cells: Vec<CellSeries>,
    config: ModelConfig,
    normalizer: Normalizer,
}

impl Forecaster for Oracle {
    fn forecast(&self, cap_ah: &[f64], _res: &[f64]) -> Result<TrajectoryPrediction> {
        let cell = self
            .cells
            .iter()
            .find(|c| c.capacity[0] == cap_ah[0])
            .ok_or_else(|| Error::invalid("unknown cell"))?;
        let present = cap_ah.len() - 1;
        let step = self.config.out_step_cycles;
        let grid = |ch: Channel| -> Vec<f64> {
            let s = cell.channel(ch);
            (1..=self.config.output_len)
                .map(|k| {
                    self.normalizer
                        .to_soh(ch, s[(present + k * step).min(s.len() - 1)])
                })
                .collect()
        };
        Ok(TrajectoryPrediction {
            capacity: grid(Channel::Capacity),
            resistance: grid(Channel::Resistance),
            start_cycle: present + step,
            step_cycles: step,
        })
    }
}

/// Predicts the present value forever.
struct Persistence {
    config: ModelConfig,
    normalizer: Normalizer,
}

impl Forecaster for Persistence {
    fn forecast(&self, cap_ah: &[f64], res: &[f64]) -> Result<TrajectoryPrediction> {
        let present = cap_ah.len() - 1;
        let n = self.config.output_len;
        Ok(TrajectoryPrediction {
            capacity: vec![self.normalizer.to_soh(Channel::Capacity, cap_ah[present]); n],
            resistance: vec![self.normalizer.to_soh(Channel::Resistance, res[present]); n],
            start_cycle: present + self.config.out_step_cycles,
            step_cycles: self.config.out_step_cycles,
        })
    }
}

fn fleet(n: usize) -> (Vec<SynthCell>, Normalizer) {
    let p = SynthParams::default();
    (synth_fleet(n, 11, &p).unwrap(), p.normalizer())
}

fn context(cells: &[CellSeries], normalizer: Normalizer) -> EvalContext {
    let refs = knee_references(cells, &normalizer).unwrap();
    EvalContext::new(ModelConfig::desk(), normalizer, refs)
}

#[test]
fn oracle_scores_zero_curve_and_eol_error() {
    let (synth, norm) = fleet(6);
    let cells: Vec<CellSeries> = synth.iter().map(|c| c.series.clone()).collect();
    let ctx = context(&cells, norm);
    let oracle = Oracle {
        cells: cells.clone(),
        config: ctx.config,
        normalizer: norm,
    };
    let report = progression_eval(&oracle, &cells, &ctx).unwrap();
    assert!(!report.records.is_empty());
    let mut eols = 0;
    for r in &report.records {
        assert_eq!(r.curve_mape, 0.0, "{r:?}");
        assert_eq!(r.curve_mae, 0.0);
        for e in [r.eol_first_error, r.eol_second_error]
            .into_iter()
            .flatten()
        {
            assert_eq!(e, 0.0, "{r:?}");
            eols += 1;
        }
    }
    assert!(eols > 0);
    // Online detection on a 40-cycle grid only approximates the offline knee
    // of the full curve.
    for ch in Channel::BOTH {
        let k = report.summary(ch).median_knee_error.unwrap();
        assert!(k <= 2.0 * ctx.config.out_step_cycles as f64, "{ch}: {k}");
    }
}

#[test]
fn persistence_is_worse_than_oracle() {
    let (synth, norm) = fleet(4);
    let cells: Vec<CellSeries> = synth.iter().map(|c| c.series.clone()).collect();
    let ctx = context(&cells, norm);
    let report = progression_eval(
        &Persistence {
            config: ctx.config,
            normalizer: norm,
        },
        &cells,
        &ctx,
    )
    .unwrap();
    assert!(report.capacity.mean_mape > 1.0);
    assert!(report.capacity.mean_mape <= report.capacity.max_mape);
    assert!(report.capacity.p5_mape <= report.capacity.median_mape);
    assert!(report.capacity.median_mape <= report.capacity.p95_mape);
    // Never reaching the threshold is censored at the horizon end, so events
    // still score.
    assert!(report.capacity.median_eol_first_error.unwrap() > 0.0);
    assert_eq!(report.table_rows(&ctx.thresholds).len(), 18);
    let names: Vec<String> = report
        .table_rows(&ctx.thresholds)
        .into_iter()
        .map(|r| r.metric)
        .collect();
    assert!(names.contains(&"Median EOL65 error [cycle]".to_string()));
    assert!(names.contains(&"Median EOL130 error [cycle]".to_string()));
    assert!(names.contains(&"Mean curve MAE [mΩ]".to_string()));
}

#[test]
fn zero_noise_column_matches_clean_run() {
    let (synth, norm) = fleet(3);
    let cells: Vec<CellSeries> = synth.iter().map(|c| c.series.clone()).collect();
    let ctx = context(&cells, norm);
    let model = Persistence {
        config: ctx.config,
        normalizer: norm,
    };
    let clean = progression_eval(&model, &cells, &ctx).unwrap();
    let sweep = noise_sweep(&model, &cells, &ctx, &NOISE_GRID, 5).unwrap();
    assert_eq!(sweep.len(), 6);
    assert_eq!(sweep[0].report, clean);
    assert_ne!(sweep[5].report, clean);
    // Same seed, same draws.
    let again = noise_sweep(&model, &cells, &ctx, &NOISE_GRID[5..], 5).unwrap();
    assert_eq!(again[0].report, sweep[5].report);
    // Targets are clean: noise only moves the persistence level a little.
    let d = (sweep[5].report.capacity.mean_mape - clean.capacity.mean_mape).abs();
    assert!(d < 2.0, "{d}");
}

#[test]
fn noise_rejects_negative_sigma() {
    let (synth, norm) = fleet(2);
    let cells: Vec<CellSeries> = synth.iter().map(|c| c.series.clone()).collect();
    let mut ctx = context(&cells, norm);
    ctx.noise = Some(NoiseSpec {
        sigma_fraction: -0.1,
        seed: 1,
    });
    let model = Persistence {
        config: ctx.config,
        normalizer: norm,
    };
    assert!(progression_eval(&model, &cells, &ctx).is_err());
}

#[test]
fn comparison_table_shape() {
    let (synth, norm) = fleet(3);
    let cells: Vec<CellSeries> = synth.iter().map(|c| c.series.clone()).collect();
    let ctx = context(&cells, norm);
    let model = Persistence {
        config: ctx.config,
        normalizer: norm,
    };
    let a = progression_eval(&model, &cells, &ctx).unwrap();
    let inputs = vec![1usize, 2, 3];
    let t = time_calls(&inputs, 2, 10, |_| Ok(())).unwrap();
    assert_eq!(t.repetitions, 10);
    let timing = ComparisonTiming {
        mtl: t.clone(),
        stl_cap: t.clone(),
        stl_res: t,
    };
    let table = compare_mtl_stl(&a, &a, &a, Some(timing)).unwrap();
    assert_eq!(table.rows.len(), 13);
    assert_eq!(table.rows[0].stl, table.rows[0].mtl);

    let b = progression_eval(&model, &cells[..2], &ctx).unwrap();
    assert!(compare_mtl_stl(&a, &b, &a, None).is_err());
}

#[test]
fn degradation_correlations_on_synthetic_fleet() {
    let (synth, norm) = fleet(48);
    let cells: Vec<CellSeries> = synth.iter().map(|c| c.series.clone()).collect();
    let table = degradation_metrics(&cells, &norm, &EolThresholds::default()).unwrap();
    let rho = table.rho.as_ref().unwrap();
    for (i, row) in rho.iter().enumerate() {
        assert!((row[i].unwrap() - 1.0).abs() < 1e-12);
        for (j, v) in row.iter().enumerate() {
            assert_eq!(*v, rho[j][i]);
        }
    }
    // CapKneeX against EOL80 and ResKneeX against EOL120.
    assert!(rho[0][4].unwrap() > 0.8, "{:?}", rho[0][4]);
    assert!(rho[2][6].unwrap() > 0.8, "{:?}", rho[2][6]);
    // Every synthetic cell reaches all four thresholds.
    for c in &table.cells {
        assert!(c.values[4..].iter().all(Option::is_some), "{}", c.cell_id);
    }
    let mut csv = Vec::new();
    table.write_rho_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 9);
}

#[test]
fn single_cell_has_no_correlation_matrix() {
    let (synth, norm) = fleet(1);
    let table =
        degradation_metrics(&[synth[0].series.clone()], &norm, &EolThresholds::default()).unwrap();
    assert!(table.rho.is_none());
    let mut csv = Vec::new();
    table.write_rho_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with('#'));
}

#[test]
fn synthetic_eols_match_ground_truth() {
    let (synth, norm) = fleet(8);
    for c in &synth {
        let m = cell_metrics(&c.series, &norm, &EolThresholds::default());
        let truth = [c.truth.eol80, c.truth.eol65, c.truth.eol120, c.truth.eol130];
        for (got, want) in m.values[4..].iter().zip(truth) {
            // Per-cycle sampling with linear interpolation between cycles.
            assert!(
                (got.unwrap() - want.unwrap()).abs() < 0.05,
                "{got:?} {want:?}"
            );
        }
    }
}
