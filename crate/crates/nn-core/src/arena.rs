use ndarray::ArrayD;

use crate::Scalar;

/// Handle to a parameter (or buffer) in a [`ParamArena`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ParamEntry<F> {
    pub name: String,
    pub value: ArrayD<F>,
    /// Trainable parameters receive optimizer updates; buffers (batch-norm
    /// running statistics) do not.
    pub trainable: bool,
    /// Weight decay applies only to multiplicative weights, not to biases
    /// or normalization affine terms.
    pub decay: bool,
}

/// Central storage for all parameters and buffers of a network.
///
/// Layers hold [`ParamId`]s; the optimizer and the checkpoint code iterate
/// the arena directly.
#[derive(Debug, Clone)]
pub struct ParamArena<F> {
    pub(crate) entries: Vec<ParamEntry<F>>,
}

impl<F: Scalar> ParamArena<F> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn insert(
        &mut self,
        name: impl Into<String>,
        value: ArrayD<F>,
        trainable: bool,
        decay: bool,
    ) -> ParamId {
        let id = ParamId(self.entries.len());
        self.entries.push(ParamEntry {
            name: name.into(),
            value,
            trainable,
            decay,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &ArrayD<F> {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ArrayD<F> {
        &mut self.entries[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    /// Total number of scalar values across trainable parameters.
    pub fn trainable_scalar_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .map(|e| e.value.len())
            .sum()
    }

    pub fn iter_named(&self) -> impl Iterator<Item = (&str, &ArrayD<F>, bool)> {
        self.entries
            .iter()
            .map(|e| (e.name.as_str(), &e.value, e.trainable))
    }

    /// Replace a parameter's value by name; shapes must match.
    pub fn set_by_name(&mut self, name: &str, value: ArrayD<F>) -> Result<(), String> {
        let entry = self
            .entries
            .iter_mut()
            .find(|e| e.name == name)
            .ok_or_else(|| format!("no parameter named `{name}`"))?;
        if entry.value.shape() != value.shape() {
            return Err(format!(
                "shape mismatch for `{name}`: {:?} vs {:?}",
                entry.value.shape(),
                value.shape()
            ));
        }
        entry.value = value;
        Ok(())
    }

    /// Are all values finite? Training divergence check.
    pub fn all_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.value.iter().all(|v| v.to_f64_val().is_finite()))
    }
}

impl<F: Scalar> Default for ParamArena<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-parameter gradient accumulation, parallel to an arena.
pub(crate) type GradStore<F> = Vec<Option<ArrayD<F>>>;

pub(crate) fn add_grad<F: Scalar>(store: &mut GradStore<F>, id: ParamId, grad: ArrayD<F>) {
    match &mut store[id.0] {
        Some(acc) => *acc += &grad,
        slot @ None => *slot = Some(grad),
    }
}

pub(crate) fn merge_grads<F: Scalar>(into: &mut GradStore<F>, from: GradStore<F>) {
    for (dst, src) in into.iter_mut().zip(from) {
        match (dst.as_mut(), src) {
            (Some(a), Some(b)) => *a += &b,
            (None, Some(b)) => *dst = Some(b),
            _ => {}
        }
    }
}
