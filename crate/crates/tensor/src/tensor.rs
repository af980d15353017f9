use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::error::{Result, TensorError};
use crate::real::Real;

/// Maps the upstream gradient of an op's output to one gradient per parent.
/// `None` entries mean "no contribution" and are skipped.
pub type BackwardFn<T> = Box<dyn Fn(&[T]) -> Vec<Option<Vec<T>>> + Send + Sync>;

struct GradFn<T: Real> {
    name: &'static str,
    parents: Vec<Tensor<T>>,
    backward: BackwardFn<T>,
}

struct Node<T: Real> {
    data: Vec<T>,
    shape: Vec<usize>,
    requires_grad: bool,
    grad: Mutex<Option<Vec<T>>>,
    grad_fn: Option<GradFn<T>>,
}

/// Immutable dense tensor. Cloning is cheap and shares storage.
pub struct Tensor<T: Real = f32> {
    node: Arc<Node<T>>,
}

impl<T: Real> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            node: Arc::clone(&self.node),
        }
    }
}

impl<T: Real> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("Tensor");
        d.field("shape", &self.node.shape);
        if self.numel() <= 16 {
            d.field("data", &self.node.data);
        }
        d.field("requires_grad", &self.node.requires_grad);
        if let Some(op) = &self.node.grad_fn {
            d.field("op", &op.name);
        }
        d.finish()
    }
}

pub(crate) fn shape_numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    if shape.is_empty() {
        return Err(TensorError::dim("new", "shape must have at least one axis"));
    }
    if shape.contains(&0) {
        return Err(TensorError::dim(
            "new",
            format!("zero extent in shape {shape:?}"),
        ));
    }
    let mut n: usize = 1;
    for &d in shape {
        n = n
            .checked_mul(d)
            .ok_or_else(|| TensorError::dim("new", format!("shape {shape:?} overflows")))?;
    }
    if n != len {
        return Err(TensorError::dim(
            "new",
            format!("shape {shape:?} holds {n} values but {len} were given"),
        ));
    }
    Ok(())
}

impl<T: Real> Tensor<T> {
    fn leaf(data: Vec<T>, shape: Vec<usize>, requires_grad: bool) -> Self {
        Tensor {
            node: Arc::new(Node {
                data,
                shape,
                requires_grad,
                grad: Mutex::new(None),
                grad_fn: None,
            }),
        }
    }

    /// Constant tensor (does not require grad).
    pub fn new(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        check_shape(shape, data.len())?;
        Ok(Self::leaf(data, shape.to_vec(), false))
    }

    /// Leaf tensor that participates in differentiation.
    pub fn param(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        check_shape(shape, data.len())?;
        Ok(Self::leaf(data, shape.to_vec(), true))
    }

    pub fn from_f64(data: &[f64], shape: &[usize]) -> Result<Self> {
        Self::new(data.iter().map(|&v| T::cast(v)).collect(), shape)
    }

    pub fn scalar(v: T) -> Self {
        Self::leaf(vec![v], vec![1], false)
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], v: T) -> Result<Self> {
        let n = shape_numel(shape);
        Self::new(vec![v; n], shape)
    }

    /// Output of a differentiable op. The backward closure receives the
    /// upstream gradient (same length as `data`) and must return one entry
    /// per parent, in order.
    pub fn from_op(
        name: &'static str,
        data: Vec<T>,
        shape: Vec<usize>,
        parents: Vec<Tensor<T>>,
        backward: BackwardFn<T>,
    ) -> Result<Self> {
        check_shape(&shape, data.len())?;
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        let grad_fn = requires_grad.then(|| GradFn {
            name,
            parents,
            backward,
        });
        Ok(Tensor {
            node: Arc::new(Node {
                data,
                shape,
                requires_grad,
                grad: Mutex::new(None),
                grad_fn,
            }),
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.node.shape
    }

    pub fn rank(&self) -> usize {
        self.node.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.node.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.node.data
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.node.data.iter().map(|v| v.as_f64()).collect()
    }

    pub fn requires_grad(&self) -> bool {
        self.node.requires_grad
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.numel() != 1 {
            return Err(TensorError::Contract(format!(
                "item() on tensor of shape {:?}",
                self.shape()
            )));
        }
        Ok(self.node.data[0])
    }

    /// Accumulated gradient, if a backward pass has reached this tensor.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.node.grad.lock().expect("grad lock poisoned").clone()
    }

    pub fn zero_grad(&self) {
        *self.node.grad.lock().expect("grad lock poisoned") = None;
    }

    /// Same values, detached from the tape.
    pub fn detach(&self) -> Self {
        Self::leaf(self.node.data.clone(), self.node.shape.clone(), false)
    }

    /// Fresh leaf with the same values and the given grad participation.
    pub fn with_requires_grad(&self, requires_grad: bool) -> Self {
        Self::leaf(
            self.node.data.clone(),
            self.node.shape.clone(),
            requires_grad,
        )
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor::leaf(
            self.node.data.iter().map(|v| U::cast(v.as_f64())).collect(),
            self.node.shape.clone(),
            self.node.requires_grad,
        )
    }

    pub fn same_storage(&self, other: &Tensor<T>) -> bool {
        Arc::ptr_eq(&self.node, &other.node)
    }

    fn key(&self) -> usize {
        Arc::as_ptr(&self.node) as usize
    }

    /// Reverse-mode sweep from this scalar. Gradients accumulate: calling
    /// twice without [`Tensor::zero_grad`] doubles every populated grad.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(TensorError::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Err(TensorError::Contract(
                "loss is not reachable from any tensor that requires grad".into(),
            ));
        }

        let order = self.topological_order();
        let mut pending: HashMap<usize, Vec<T>> = HashMap::new();
        pending.insert(self.key(), vec![T::one()]);

        for t in order.iter().rev() {
            let Some(g) = pending.remove(&t.key()) else {
                continue;
            };
            if let Some(op) = &t.node.grad_fn {
                let parent_grads = (op.backward)(&g);
                debug_assert_eq!(parent_grads.len(), op.parents.len(), "{}", op.name);
                for (parent, pg) in op.parents.iter().zip(parent_grads) {
                    let Some(pg) = pg else { continue };
                    if !parent.requires_grad() {
                        continue;
                    }
                    debug_assert_eq!(pg.len(), parent.numel(), "{}", op.name);
                    match pending.get_mut(&parent.key()) {
                        Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, &b)| *a += b),
                        None => {
                            pending.insert(parent.key(), pg);
                        }
                    }
                }
            }
            let mut slot = t.node.grad.lock().expect("grad lock poisoned");
            match slot.as_mut() {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a += b),
                None => *slot = Some(g),
            }
        }
        Ok(())
    }

    /// Parents before children; only nodes that require grad.
    fn topological_order(&self) -> Vec<Tensor<T>> {
        let mut order = Vec::new();
        let mut visited = std::collections::HashSet::new();
        // (node, children expanded?)
        let mut stack = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !visited.insert(t.key()) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(op) = &t.node.grad_fn {
                for p in &op.parents {
                    if p.requires_grad() && !visited.contains(&p.key()) {
                        stack.push((p.clone(), false));
                    }
                }
            }
        }
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::<f32>::new(vec![1.0, 2.0], &[3]).is_err());
        assert!(Tensor::<f32>::new(vec![1.0, 2.0], &[2, 0]).is_err());
        assert!(Tensor::<f32>::new(vec![], &[]).is_err());
        assert_eq!(
            Tensor::<f32>::new(vec![1.0; 6], &[2, 3]).unwrap().numel(),
            6
        );
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let x = Tensor::<f64>::param(vec![1.0, 2.0], &[2]).unwrap();
        let err = x.backward().unwrap_err();
        assert!(matches!(err, TensorError::Contract(_)));
    }

    #[test]
    fn backward_rejects_constant_loss() {
        let x = Tensor::<f64>::scalar(2.0);
        assert!(matches!(x.backward(), Err(TensorError::Contract(_))));
    }
}
