//! Named-tensor traversal shared by every parameterized component.
//!
//! A component lists its tensors in a fixed order. That order defines the flat
//! layout used by the optimizer, the regularizer and checkpoints.

/// Anything that owns learnable tensors.
pub trait ParamSet {
    /// Visits every tensor as `(name, (rows, cols), values)` in layout order.
    #[allow(clippy::type_complexity)]
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, (usize, usize), &[f64]));

    /// Mutable visit in the same order as [`ParamSet::visit`].
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, _, v| n += v.len());
        n
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit("", &mut |_, _, v| out.extend_from_slice(v));
        out
    }

    /// Overwrites all tensors from `flat`. Panics if the length is wrong.
    fn unflatten(&mut self, flat: &[f64]) {
        let mut pos = 0;
        self.visit_mut(&mut |v| {
            let n = v.len();
            v.copy_from_slice(&flat[pos..pos + n]);
            pos += n;
        });
        assert_eq!(pos, flat.len(), "flat parameter length mismatch");
    }

    fn zero(&mut self) {
        self.visit_mut(&mut |v| v.iter_mut().for_each(|x| *x = 0.0));
    }

    /// Adds `other` elementwise; both must share a layout.
    fn accumulate(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let flat = other.flatten();
        let mut pos = 0;
        self.visit_mut(&mut |v| {
            for x in v.iter_mut() {
                *x += flat[pos];
                pos += 1;
            }
        });
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
