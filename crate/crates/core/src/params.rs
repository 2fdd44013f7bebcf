//! Named parameter storage and initializers.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Index of an entry in a [`ParamStore`]. Stable for the lifetime of the store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    name: String,
    pub value: Tensor,
    pub grad: Tensor,
    /// Adam first moment.
    pub m: Tensor,
    /// Adam second moment.
    pub v: Tensor,
    trainable: bool,
}

impl ParamEntry {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }
}

/// All model parameters, their gradients and the optimizer state.
///
/// Entries keep insertion order; names are unique. Frozen entries (for
/// instance pretrained embeddings) take part in the forward pass but never
/// receive gradients or updates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: BTreeMap<String, usize>,
    step: u64,
}

impl ParamStore {
    pub const fn new() -> Self {
        Self {
            entries: Vec::new(),
            index: BTreeMap::new(),
            step: 0,
        }
    }

    pub fn insert(&mut self, name: &str, value: Tensor, trainable: bool) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::DuplicateParam(name.to_string()));
        }
        let (r, c) = value.shape();
        let id = self.entries.len();
        self.entries.push(ParamEntry {
            name: name.to_string(),
            grad: Tensor::zeros(r, c),
            m: Tensor::zeros(r, c),
            v: Tensor::zeros(r, c),
            value,
            trainable,
        });
        self.index.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.index
            .get(name)
            .map(|&i| ParamId(i))
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn entry_mut(&mut self, id: ParamId) -> &mut ParamEntry {
        &mut self.entries[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].grad
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [ParamEntry] {
        &mut self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Optimizer steps taken so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub(crate) fn bump_step(&mut self) -> u64 {
        self.step += 1;
        self.step
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    /// Adds `g` into the gradient slot of `id`. Frozen entries ignore it.
    pub fn accumulate_grad(&mut self, id: ParamId, g: &Tensor) -> Result<()> {
        let e = &mut self.entries[id.0];
        if e.grad.shape() != g.shape() {
            return Err(Error::Shape {
                op: "accumulate_grad",
                lhs: e.grad.shape(),
                rhs: g.shape(),
            });
        }
        if e.trainable {
            e.grad.add_assign(g);
        }
        Ok(())
    }

    /// Number of trainable scalars.
    pub fn num_trainable(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .map(|e| e.value.len())
            .sum()
    }

    /// Replaces every value from `other`, matching by name and shape.
    pub fn load_values(&mut self, other: &[(String, Tensor)]) -> Result<()> {
        for (name, t) in other {
            let id = self.id(name)?;
            let e = &mut self.entries[id.0];
            if e.value.shape() != t.shape() {
                return Err(Error::Precondition(format!(
                    "checkpoint entry `{name}` has shape {:?}, model expects {:?}",
                    t.shape(),
                    e.value.shape()
                )));
            }
            e.value = t.clone();
        }
        Ok(())
    }

    /// `(name, value)` pairs in insertion order.
    pub fn snapshot(&self) -> Vec<(String, Tensor)> {
        self.entries
            .iter()
            .map(|e| (e.name.clone(), e.value.clone()))
            .collect()
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::Config(format!(
            "parameter shape must be positive, got {rows}x{cols}"
        )));
    }
    Ok(())
}

/// Independent draws from `U(low, high)`.
pub fn init_uniform(
    rows: usize,
    cols: usize,
    low: f64,
    high: f64,
    rng: &mut RngStream,
) -> Result<Tensor> {
    check_dims(rows, cols)?;
    if !(low < high) {
        return Err(Error::Config(format!("empty uniform range [{low}, {high})")));
    }
    let data = (0..rows * cols).map(|_| rng.uniform(low, high)).collect();
    Tensor::from_vec(rows, cols, data)
}

/// Independent draws from `N(mean, std²)`.
pub fn init_normal(
    rows: usize,
    cols: usize,
    mean: f64,
    std: f64,
    rng: &mut RngStream,
) -> Result<Tensor> {
    check_dims(rows, cols)?;
    let data = (0..rows * cols).map(|_| mean + std * rng.normal()).collect();
    Tensor::from_vec(rows, cols, data)
}
