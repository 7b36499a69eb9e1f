//! Mean absolute error over unmasked positions.

use crate::error::{check_len, Error, Result};

fn check(pred: &[f64], target: &[f64], mask: &[bool]) -> Result<usize> {
    check_len("target", pred.len(), target.len())?;
    check_len("mask", pred.len(), mask.len())?;
    match mask.iter().filter(|&&m| m).count() {
        0 => Err(Error::EmptyMask),
        n => Ok(n),
    }
}

pub fn masked_mae(pred: &[f64], target: &[f64], mask: &[bool]) -> Result<f64> {
    let n = check(pred, target, mask)?;
    let sum: f64 = pred
        .iter()
        .zip(target)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((p, t), _)| (p - t).abs())
        .sum();
    Ok(sum / n as f64)
}

/// Loss and its gradient w.r.t. `pred`; masked positions get zero gradient
/// and `|x|` has derivative 0 at 0.
pub fn masked_mae_grad(pred: &[f64], target: &[f64], mask: &[bool]) -> Result<(f64, Vec<f64>)> {
    let n = check(pred, target, mask)? as f64;
    let mut sum = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .zip(mask)
        .map(|((p, t), &m)| {
            if !m {
                return 0.0;
            }
            let d = p - t;
            sum += d.abs();
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((sum / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn padding_skipped() {
        assert_eq!(
            masked_mae(&[1.0, 2.0, 9.0], &[1.0, 2.0, 0.0], &[true, true, false]).unwrap(),
            0.0
        );
    }

    #[test]
    fn arithmetic() {
        let l = masked_mae(&[0.9, 0.8], &[1.0, 1.0], &[true, true]).unwrap();
        assert!((l - 0.15).abs() < 1e-15);
        let (lg, g) =
            masked_mae_grad(&[0.9, 1.2, 5.0], &[1.0, 1.0, 0.0], &[true, true, false]).unwrap();
        assert!((lg - 0.15).abs() < 1e-15);
        assert_eq!(g, vec![-0.5, 0.5, 0.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            masked_mae(&[1.0], &[1.0], &[false]),
            Err(Error::EmptyMask)
        ));
        assert!(masked_mae(&[1.0, 2.0], &[1.0], &[true]).is_err());
    }

    proptest! {
        #[test]
        fn invariant_under_permutation_and_masked_tail(
            rows in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, any::<bool>()), 1..40),
            tail in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 0..50),
            seed in any::<u64>(),
        ) {
            let mut rows = rows;
            rows[0].2 = true;
            let split = |r: &[(f64, f64, bool)]| -> (Vec<f64>, Vec<f64>, Vec<bool>) {
                (r.iter().map(|x| x.0).collect(), r.iter().map(|x| x.1).collect(), r.iter().map(|x| x.2).collect())
            };
            let (p, t, m) = split(&rows);
            let base = masked_mae(&p, &t, &m).unwrap();

            let mut extended = rows.clone();
            extended.extend(tail.iter().map(|&(a, b)| (a, b, false)));
            let (p2, t2, m2) = split(&extended);
            prop_assert_eq!(masked_mae(&p2, &t2, &m2).unwrap(), base);

            let mut shuffled = rows.clone();
            crate::numeric::SeededRng::new(seed).shuffle(&mut shuffled);
            let (p3, t3, m3) = split(&shuffled);
            prop_assert!((masked_mae(&p3, &t3, &m3).unwrap() - base).abs() <= 1e-12 * (1.0 + base));
        }
    }
}
