//! Knee detection on degradation curves.
//!
//! Offline: normalize both axes to `[0, 1]`, orient the curve so it rises,
//! and take the earliest argmax of its distance from the diagonal. Online:
//! the first cycle at which a predicted curve's smoothed gradient magnitude
//! reaches a reference knee gradient.

use crate::error::{Error, Result};

/// Smoothing half-width in cycles on per-cycle curves.
pub const DEFAULT_SMOOTHING_CYCLES: f64 = 25.0;
/// Fewest points a curve may have for offline detection.
pub const MIN_KNEE_POINTS: usize = 10;
/// A smoothed curve may move against its trend by at most this fraction of
/// its range.
pub const MONOTONE_TOLERANCE: f64 = 0.1;
/// Peak distances from the diagonal below this are a straight line.
const MIN_KNEE_DISTANCE: f64 = 1e-9;

/// Centered moving-average half-width in grid steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SmoothingSpec {
    pub window: usize,
}

impl SmoothingSpec {
    pub const NONE: Self = Self { window: 0 };

    /// The default 25-cycle half-width expressed on a grid of `step_cycles`.
    pub fn for_step(step_cycles: f64) -> Self {
        Self {
            window: (DEFAULT_SMOOTHING_CYCLES / step_cycles).round() as usize,
        }
    }
}

/// A curve sampled at `start + i * step` cycles.
#[derive(Clone, Copy, Debug)]
pub struct Curve<'a> {
    pub values: &'a [f64],
    pub start_cycle: f64,
    pub step_cycles: f64,
}

impl<'a> Curve<'a> {
    pub fn new(values: &'a [f64], start_cycle: f64, step_cycles: f64) -> Self {
        Self {
            values,
            start_cycle,
            step_cycles,
        }
    }

    /// A per-cycle curve starting at cycle 0.
    pub fn per_cycle(values: &'a [f64]) -> Self {
        Self::new(values, 0.0, 1.0)
    }

    pub fn cycle_at(&self, index: f64) -> f64 {
        self.start_cycle + index * self.step_cycles
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KneeResult {
    pub knee_cycle: f64,
    /// Smoothed curve value at the knee.
    pub knee_value: f64,
    /// Curve units per cycle, signed.
    pub knee_gradient: f64,
    pub index: usize,
}

/// Centered moving average; the window shrinks symmetrically near the ends
/// so every output averages an odd, centered span.
pub fn smooth(curve: &[f64], spec: SmoothingSpec) -> Result<Vec<f64>> {
    let w = spec.window;
    let n = curve.len();
    if n <= 2 * w {
        return Err(Error::CurveTooShort {
            len: n,
            min: 2 * w + 1,
        });
    }
    if w == 0 {
        return Ok(curve.to_vec());
    }
    Ok((0..n)
        .map(|i| {
            let h = w.min(i).min(n - 1 - i);
            let span = &curve[i - h..=i + h];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect())
}

/// Central differences per grid step, one-sided at the ends.
pub fn gradient(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    values[1] - values[0]
                } else if i == n - 1 {
                    values[n - 1] - values[n - 2]
                } else {
                    0.5 * (values[i + 1] - values[i - 1])
                }
            })
            .collect(),
    }
}

/// Distance of the oriented, normalized curve from the diagonal.
fn knee_distance(values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    let first = values[0];
    let last = values[n - 1];
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let range = hi - lo;
    if !(range > 0.0) || first == last {
        return Err(Error::NoKnee("curve is flat".into()));
    }
    let rising = last > first;
    // u rises from 0 to 1 for both orientations; negating the curve leaves it
    // bit-identical.
    let u: Vec<f64> = values
        .iter()
        .map(|&v| {
            if rising {
                (v - lo) / range
            } else {
                (hi - v) / range
            }
        })
        .collect();

    let mut peak = 0.0f64;
    let mut worst = 0.0f64;
    for &v in &u {
        peak = peak.max(v);
        worst = worst.max(peak - v);
    }
    if worst > MONOTONE_TOLERANCE {
        return Err(Error::NoKnee(format!(
            "curve reverses by {:.1}% of its range after smoothing",
            100.0 * worst
        )));
    }

    let x = |i: usize| i as f64 / (n - 1) as f64;
    let above: f64 = u.iter().enumerate().map(|(i, &v)| v - x(i)).sum();
    let sign = if above >= 0.0 { 1.0 } else { -1.0 };
    Ok(u.iter()
        .enumerate()
        .map(|(i, &v)| sign * (v - x(i)))
        .collect())
}

/// Maximum-curvature knee of a monotone degradation curve.
pub fn knee_offline(curve: Curve<'_>, spec: SmoothingSpec) -> Result<KneeResult> {
    if curve.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("knee curve"));
    }
    let smoothed = smooth(curve.values, spec)?;
    if smoothed.len() < MIN_KNEE_POINTS {
        return Err(Error::CurveTooShort {
            len: smoothed.len(),
            min: MIN_KNEE_POINTS,
        });
    }
    let d = knee_distance(&smoothed)?;
    let mut index = 0;
    for (i, &v) in d.iter().enumerate() {
        if v > d[index] {
            index = i;
        }
    }
    if d[index] < MIN_KNEE_DISTANCE {
        return Err(Error::NoKnee("curve is a straight line".into()));
    }
    let grad = gradient(&smoothed);
    Ok(KneeResult {
        knee_cycle: curve.cycle_at(index as f64),
        knee_value: smoothed[index],
        knee_gradient: grad[index] / curve.step_cycles,
        index,
    })
}

/// Cycle at which the smoothed gradient magnitude of `curve` first reaches
/// `reference_gradient` (curve units per cycle), interpolated between grid
/// points.
pub fn knee_online(curve: Curve<'_>, reference_gradient: f64, spec: SmoothingSpec) -> Result<f64> {
    if !(reference_gradient.is_finite() && reference_gradient > 0.0) {
        return Err(Error::invalid(format!(
            "reference gradient must be > 0, got {reference_gradient}"
        )));
    }
    if curve.values.len() < 2 {
        return Err(Error::CurveTooShort {
            len: curve.values.len(),
            min: 2,
        });
    }
    let spec = SmoothingSpec {
        window: spec.window.min((curve.values.len() - 1) / 2),
    };
    let smoothed = smooth(curve.values, spec)?;
    let mag: Vec<f64> = gradient(&smoothed)
        .iter()
        .map(|g| g.abs() / curve.step_cycles)
        .collect();
    let hit = mag
        .iter()
        .position(|&g| g >= reference_gradient)
        .ok_or(Error::NoKneeInHorizon)?;
    if hit == 0 {
        return Ok(curve.start_cycle);
    }
    let (g0, g1) = (mag[hit - 1], mag[hit]);
    let frac = (reference_gradient - g0) / (g1 - g0);
    Ok(curve.cycle_at(hit as f64 - 1.0 + frac))
}

/// Median gradient magnitude at reference knees.
pub fn reference_gradient(knees: &[KneeResult]) -> Result<f64> {
    let mut g: Vec<f64> = knees.iter().map(|k| k.knee_gradient.abs()).collect();
    if g.is_empty() {
        return Err(Error::EmptyInput);
    }
    g.sort_by(f64::total_cmp);
    let m = g.len() / 2;
    Ok(if g.len() % 2 == 1 {
        g[m]
    } else {
        0.5 * (g[m - 1] + g[m])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataprep::{synth_fleet, SynthParams};
    use crate::numeric::SeededRng;
    use crate::seqmodel::Channel;
    use proptest::prelude::*;

    /// Earliest argmax of discrete curvature on a dense sampling of `f` with
    /// both axes scaled to unit range.
    fn dense_curvature_argmax(f: impl Fn(f64) -> f64, samples: usize) -> f64 {
        let h = 1.0 / samples as f64;
        let y: Vec<f64> = (0..=samples).map(|i| f(i as f64 * h)).collect();
        let (lo, hi) = y
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        let yn: Vec<f64> = y.iter().map(|v| (v - lo) / (hi - lo)).collect();
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 1..samples {
            let d1 = (yn[i + 1] - yn[i - 1]) / (2.0 * h);
            let d2 = (yn[i + 1] - 2.0 * yn[i] + yn[i - 1]) / (h * h);
            let k = d2.abs() / (1.0 + d1 * d1).powf(1.5);
            if k > best.1 {
                best = (i as f64 * h, k);
            }
        }
        best.0
    }

    #[test]
    fn smoothing_identity_and_constant() {
        let c = [1.0, 2.0, 5.0, 3.0];
        assert_eq!(smooth(&c, SmoothingSpec::NONE).unwrap(), c.to_vec());
        let flat = vec![0.7; 60];
        for v in smooth(&flat, SmoothingSpec { window: 25 }).unwrap() {
            assert!((v - 0.7).abs() < 1e-14);
        }
        assert!(smooth(&[1.0; 50], SmoothingSpec { window: 25 }).is_err());
    }

    #[test]
    fn smoothing_reduces_white_noise() {
        let mut rng = SeededRng::new(5);
        let line: Vec<f64> = (0..2000).map(|i| 1.0 - 1e-4 * i as f64).collect();
        let noisy: Vec<f64> = line.iter().map(|v| v + 0.01 * rng.normal()).collect();
        let sm = smooth(&noisy, SmoothingSpec { window: 25 }).unwrap();
        let rms = |a: &[f64]| {
            (a.iter()
                .zip(&line)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                / a.len() as f64)
                .sqrt()
        };
        assert!(rms(&noisy) / rms(&sm) >= 3.0);
    }

    #[test]
    fn straight_line_has_no_knee() {
        let line: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        assert!(matches!(
            knee_offline(Curve::per_cycle(&line), SmoothingSpec::NONE),
            Err(Error::NoKnee(_))
        ));
        assert!(knee_offline(Curve::per_cycle(&[1.0; 50]), SmoothingSpec::NONE).is_err());
    }

    #[test]
    fn quartic_knee_and_curvature_oracle() {
        let n = 10_001;
        let y: Vec<f64> = (0..n)
            .map(|i| (i as f64 / (n - 1) as f64).powi(4))
            .collect();
        let k = knee_offline(
            Curve::new(&y, 0.0, 1.0 / (n - 1) as f64),
            SmoothingSpec::NONE,
        )
        .unwrap();
        // Distance from the diagonal x - x^4 peaks at x = 4^(-1/3).
        assert!((k.knee_cycle - 4f64.powf(-1.0 / 3.0)).abs() < 2e-4);
        // Maximum curvature of x^4 sits at x = 56^(-1/6); the two knee
        // definitions differ by about 12% of the domain on this curve.
        let oracle = dense_curvature_argmax(|x| x.powi(4), 100_000);
        assert!((oracle - 56f64.powf(-1.0 / 6.0)).abs() < 1e-4);
        assert!((k.knee_cycle - oracle).abs() > 0.1);
    }

    #[test]
    fn agrees_with_dense_curvature_on_synthetic_fleet() {
        let fleet = synth_fleet(100, 31, &SynthParams::default()).unwrap();
        for ch in Channel::BOTH {
            let mut within = 0;
            for cell in &fleet {
                let values = cell.series.channel(ch);
                let k =
                    knee_offline(Curve::per_cycle(values), SmoothingSpec::for_step(1.0)).unwrap();
                let truth = cell.truth.knee(ch).unwrap();
                if (k.knee_cycle - truth).abs() <= 0.02 * cell.truth.last_cycle as f64 {
                    within += 1;
                }
            }
            assert!(within >= 95, "{ch}: {within}/100 within 2% of domain");
        }
    }

    #[test]
    fn resampled_knee_tracks_ground_truth() {
        // Diagonal distance and curvature peak a few cycles apart on these
        // curves; the median gap stays under one grid step and none exceeds two.
        let step = 20usize;
        let fleet = synth_fleet(48, 3, &SynthParams::default()).unwrap();
        for ch in Channel::BOTH {
            let mut gaps: Vec<f64> = fleet
                .iter()
                .map(|cell| {
                    let grid: Vec<f64> = cell
                        .series
                        .channel(ch)
                        .iter()
                        .step_by(step)
                        .copied()
                        .collect();
                    let k = knee_offline(
                        Curve::new(&grid, 0.0, step as f64),
                        SmoothingSpec::for_step(step as f64),
                    )
                    .unwrap();
                    (k.knee_cycle - cell.truth.knee(ch).unwrap()).abs()
                })
                .collect();
            gaps.sort_by(f64::total_cmp);
            assert!(
                gaps[gaps.len() / 2] <= step as f64,
                "{ch}: median gap {}",
                gaps[gaps.len() / 2]
            );
            assert!(
                gaps[gaps.len() - 1] <= 2.0 * step as f64,
                "{ch}: max gap {}",
                gaps[gaps.len() - 1]
            );
        }
    }

    #[test]
    fn online_recovers_offline_knee() {
        let fleet = synth_fleet(5, 8, &SynthParams::default()).unwrap();
        for cell in &fleet {
            for ch in Channel::BOTH {
                let c = Curve::per_cycle(cell.series.channel(ch));
                let spec = SmoothingSpec::for_step(1.0);
                let off = knee_offline(c, spec).unwrap();
                let on = knee_online(c, off.knee_gradient.abs(), spec).unwrap();
                assert!(
                    (on - off.knee_cycle).abs() <= 1.0,
                    "{on} vs {}",
                    off.knee_cycle
                );
            }
        }
    }

    #[test]
    fn online_linear_curve_never_reaches() {
        let line: Vec<f64> = (0..100).map(|i| 1.0 - 1e-3 * i as f64).collect();
        assert!(matches!(
            knee_online(Curve::per_cycle(&line), 2e-3, SmoothingSpec::NONE),
            Err(Error::NoKneeInHorizon)
        ));
        let crossing = knee_online(
            Curve::new(&[0.0, 0.0, 1.0, 3.0], 10.0, 2.0),
            0.5,
            SmoothingSpec::NONE,
        )
        .unwrap();
        // Per-cycle gradient magnitudes are [0, 0.25, 0.75, 1.0]; 0.5 lies midway
        // between grid points 1 and 2.
        assert!((crossing - 13.0).abs() < 1e-12);
    }

    #[test]
    fn reference_gradient_is_median() {
        let k = |g: f64| KneeResult {
            knee_cycle: 0.0,
            knee_value: 0.0,
            knee_gradient: g,
            index: 0,
        };
        assert_eq!(reference_gradient(&[k(-3.0), k(1.0), k(2.0)]).unwrap(), 2.0);
        assert_eq!(reference_gradient(&[k(1.0), k(2.0)]).unwrap(), 1.5);
        assert!(reference_gradient(&[]).is_err());
    }

    fn knee_curve() -> impl Strategy<Value = Vec<f64>> {
        (0.5f64..3.0, 20usize..300, 0.0f64..1.0).prop_map(|(p, n, lin)| {
            (0..n)
                .map(|i| {
                    let x = i as f64 / (n - 1) as f64;
                    lin * x + x.powf(1.0 + 4.0 * p)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn affine_rescaling_keeps_knee_cycle(
            y in knee_curve(),
            ys in 1e-3f64..1e3, yo in -10.0f64..10.0,
            xs in 0.1f64..50.0, xo in 0.0f64..1000.0,
        ) {
            let base = knee_offline(Curve::new(&y, 0.0, 1.0), SmoothingSpec::NONE).unwrap();
            let scaled: Vec<f64> = y.iter().map(|v| ys * v + yo).collect();
            let k = knee_offline(Curve::new(&scaled, xo, xs), SmoothingSpec::NONE).unwrap();
            prop_assert_eq!(k.index, base.index);
            prop_assert_eq!(k.knee_cycle, xo + base.index as f64 * xs);
        }

        #[test]
        fn vertical_mirror_keeps_knee_cycle(y in knee_curve(), w in 0usize..3) {
            let spec = SmoothingSpec { window: w };
            let a = knee_offline(Curve::per_cycle(&y), spec).unwrap();
            let mirrored: Vec<f64> = y.iter().map(|v| -v).collect();
            let b = knee_offline(Curve::per_cycle(&mirrored), spec).unwrap();
            prop_assert_eq!(a.knee_cycle, b.knee_cycle);
        }
    }
}
