use std::collections::HashSet;

use crate::error::{Result, TensorError};
use crate::ops::norm::Mode;
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BufferId(usize);

/// Trainable leaf tensor with a unique dotted name.
#[derive(Debug, Clone)]
pub struct Parameter<T: Real> {
    pub name: String,
    pub tensor: Tensor<T>,
}

/// Non-trainable state such as running moments.
#[derive(Debug, Clone)]
pub struct Buffer<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<T>,
}

/// Registry of every parameter and buffer of a model.
#[derive(Debug, Clone)]
pub struct ParamStore<T: Real> {
    params: Vec<Parameter<T>>,
    buffers: Vec<Buffer<T>>,
    names: HashSet<String>,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: Vec::new(),
            buffers: Vec::new(),
            names: HashSet::new(),
        }
    }

    fn claim(&mut self, name: &str) -> Result<()> {
        if !self.names.insert(name.to_owned()) {
            return Err(TensorError::Config(format!(
                "duplicate parameter name `{name}`"
            )));
        }
        Ok(())
    }

    pub fn add_param(&mut self, name: &str, data: Vec<T>, shape: &[usize]) -> Result<ParamId> {
        let tensor = Tensor::param(data, shape)?;
        self.claim(name)?;
        self.params.push(Parameter {
            name: name.to_owned(),
            tensor,
        });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn add_buffer(&mut self, name: &str, values: Vec<T>, shape: &[usize]) -> Result<BufferId> {
        if values.len() != shape.iter().product::<usize>() {
            return Err(TensorError::dim(
                "add_buffer",
                format!("{} values for shape {shape:?}", values.len()),
            ));
        }
        self.claim(name)?;
        self.buffers.push(Buffer {
            name: name.to_owned(),
            shape: shape.to_vec(),
            values,
        });
        Ok(BufferId(self.buffers.len() - 1))
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].tensor
    }

    pub fn params(&self) -> &[Parameter<T>] {
        &self.params
    }

    pub fn buffers(&self) -> &[Buffer<T>] {
        &self.buffers
    }

    pub fn buffer(&self, id: BufferId) -> &[T] {
        &self.buffers[id.0].values
    }

    pub fn set_buffer(&mut self, id: BufferId, values: Vec<T>) {
        debug_assert_eq!(values.len(), self.buffers[id.0].values.len());
        self.buffers[id.0].values = values;
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn find_buffer(&self, name: &str) -> Option<BufferId> {
        self.buffers
            .iter()
            .position(|b| b.name == name)
            .map(BufferId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Swaps in a new tensor for a parameter; the shape must not change.
    pub fn replace(&mut self, id: ParamId, tensor: Tensor<T>) -> Result<()> {
        let slot = &mut self.params[id.0];
        if slot.tensor.shape() != tensor.shape() {
            return Err(TensorError::dim(
                "replace",
                format!(
                    "`{}` has shape {:?}, got {:?}",
                    slot.name,
                    slot.tensor.shape(),
                    tensor.shape()
                ),
            ));
        }
        slot.tensor = tensor;
        Ok(())
    }

    /// Overwrites parameter values, keeping it a trainable leaf.
    pub fn set_values(&mut self, id: ParamId, data: Vec<T>) -> Result<()> {
        let shape = self.params[id.0].tensor.shape().to_vec();
        let rg = self.params[id.0].tensor.requires_grad();
        let t = if rg {
            Tensor::param(data, &shape)?
        } else {
            Tensor::new(data, &shape)?
        };
        self.replace(id, t)
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }

    pub fn zero_grad(&self) {
        self.params.iter().for_each(|p| p.tensor.zero_grad());
    }

    /// Rebuilds every parameter as a leaf with the given grad participation.
    /// Turning it off keeps inference from recording a tape.
    pub fn set_requires_grad(&mut self, on: bool) {
        for p in &mut self.params {
            p.tensor = p.tensor.with_requires_grad(on);
        }
    }

    /// Commits running-moment updates recorded during a forward pass.
    pub fn apply(&mut self, ctx: &mut Ctx<T>) {
        for (id, values) in ctx.updates.drain(..) {
            self.set_buffer(id, values);
        }
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    tensor: p.tensor.cast(),
                })
                .collect(),
            buffers: self
                .buffers
                .iter()
                .map(|b| Buffer {
                    name: b.name.clone(),
                    shape: b.shape.clone(),
                    values: b.values.iter().map(|v| U::cast(v.as_f64())).collect(),
                })
                .collect(),
            names: self.names.clone(),
        }
    }
}

/// Per-forward-pass state: the mode and any running-moment updates that
/// batch-norm layers produced.
#[derive(Debug)]
pub struct Ctx<T> {
    pub mode: Mode,
    updates: Vec<(BufferId, Vec<T>)>,
}

impl<T> Ctx<T> {
    pub fn new(mode: Mode) -> Self {
        Ctx {
            mode,
            updates: Vec::new(),
        }
    }

    pub fn train() -> Self {
        Self::new(Mode::Train)
    }

    pub fn eval() -> Self {
        Self::new(Mode::Eval)
    }

    pub fn record(&mut self, id: BufferId, values: Vec<T>) {
        self.updates.push((id, values));
    }

    pub fn pending(&self) -> usize {
        self.updates.len()
    }
}
