//! Seeded train/validation/test partition by cell.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::SeededRng;

pub const MIN_SPLIT_CELLS: usize = 5;

/// 6:2:2 partition; validation and test receive `round(0.2 N)` cells each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(n: usize, spec: SplitSpec) -> Result<SplitIndices> {
    if n < MIN_SPLIT_CELLS {
        return Err(Error::invalid(format!(
            "need at least {MIN_SPLIT_CELLS} cells to split, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::new(spec.seed)
        .split("dataset-split")
        .shuffle(&mut order);
    let k = (n as f64 * 0.2).round() as usize;
    let mut test = order[..k].to_vec();
    let mut val = order[k..2 * k].to_vec();
    let mut train = order[2 * k..].to_vec();
    for part in [&mut train, &mut val, &mut test] {
        part.sort_unstable();
    }
    Ok(SplitIndices { train, val, test })
}

/// Returns `(train, val, test)` clones, each in input order.
pub fn split_dataset<T: Clone>(cells: &[T], spec: SplitSpec) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let idx = split_indices(cells.len(), spec)?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| cells[i].clone()).collect();
    Ok((pick(&idx.train), pick(&idx.val), pick(&idx.test)))
}
