//! Reverse-mode automatic differentiation over a flat tape.
//!
//! Nodes are appended in evaluation order, so a node's inputs always have
//! smaller ids. `backward` walks the tape once in reverse.

use crate::error::NnError;
use crate::kernels;
use crate::tensor::{Scalar, Tensor4};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv2d { x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize },
    ConvTranspose2d { x: Var, w: Var, b: Option<Var>, stride: usize },
    MaxPool { x: Var, argmax: Vec<u32> },
    Relu { x: Var },
    Concat { a: Var, b: Var },
    Mse { pred: Var, target: Var },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv2d { x, w, b, .. } | Op::ConvTranspose2d { x, w, b, .. } => {
                let mut v = vec![*x, *w];
                v.extend(b);
                v
            }
            Op::MaxPool { x, .. } | Op::Relu { x } => vec![*x],
            Op::Concat { a, b } => vec![*a, *b],
            Op::Mse { pred, target } => vec![*pred, *target],
        }
    }
}

#[derive(Debug)]
struct Node<T> {
    op: Op,
    value: Tensor4<T>,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor4<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor4<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor4<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor4<T>) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { op, value, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, v: Var) -> Result<(), NnError> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(NnError::Autograd(format!("variable {} is not on this tape", v.0)))
        }
    }

    /// Constant input; no gradient is produced for it.
    pub fn constant(&mut self, value: Tensor4<T>) -> Var {
        self.nodes.push(Node { op: Op::Leaf, value, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf; gradients are produced for it.
    pub fn param(&mut self, value: Tensor4<T>) -> Var {
        self.nodes.push(Node { op: Op::Leaf, value, requires_grad: true });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor4<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var, NnError> {
        self.check(x)?;
        self.check(w)?;
        if let Some(b) = b {
            self.check(b)?;
        }
        let bias = b.map(|b| self.nodes[b.0].value.data.as_slice());
        let y = kernels::conv2d(&self.nodes[x.0].value, &self.nodes[w.0].value, bias, stride, pad)?;
        Ok(self.push(Op::Conv2d { x, w, b, stride, pad }, y))
    }

    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize) -> Result<Var, NnError> {
        self.check(x)?;
        self.check(w)?;
        if let Some(b) = b {
            self.check(b)?;
        }
        let bias = b.map(|b| self.nodes[b.0].value.data.as_slice());
        let y = kernels::conv_transpose2d(&self.nodes[x.0].value, &self.nodes[w.0].value, bias, stride)?;
        Ok(self.push(Op::ConvTranspose2d { x, w, b, stride }, y))
    }

    pub fn maxpool2d(&mut self, x: Var, k: usize) -> Result<Var, NnError> {
        self.check(x)?;
        let (y, argmax) = kernels::maxpool2d(&self.nodes[x.0].value, k)?;
        Ok(self.push(Op::MaxPool { x, argmax }, y))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, NnError> {
        self.check(x)?;
        let y = kernels::relu(&self.nodes[x.0].value);
        Ok(self.push(Op::Relu { x }, y))
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.check(a)?;
        self.check(b)?;
        let y = kernels::concat_channels(&self.nodes[a.0].value, &self.nodes[b.0].value)?;
        Ok(self.push(Op::Concat { a, b }, y))
    }

    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var, NnError> {
        self.check(pred)?;
        self.check(target)?;
        let loss = kernels::mse(&self.nodes[pred.0].value, &self.nodes[target.0].value)?;
        Ok(self.push(Op::Mse { pred, target }, Tensor4::scalar(loss)))
    }

    /// Backpropagates from a scalar node with upstream gradient one.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, NnError> {
        self.check(loss)?;
        if self.nodes[loss.0].value.len() != 1 {
            return Err(NnError::Autograd(format!(
                "backward needs a scalar, node {} has shape {:?}",
                loss.0,
                self.nodes[loss.0].value.shape()
            )));
        }
        self.backward_from(loss, Tensor4::scalar(T::one()))
    }

    /// Backpropagates an arbitrary upstream gradient from `output`.
    pub fn backward_from(&self, output: Var, upstream: Tensor4<T>) -> Result<Gradients<T>, NnError> {
        self.check(output)?;
        if upstream.shape() != self.nodes[output.0].value.shape() {
            return Err(NnError::Autograd(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.shape(),
                self.nodes[output.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor4<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(upstream);
        for id in (0..=output.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                grads[id] = None;
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            for (input, contribution) in self.local_grads(node, &g)? {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot @ None => *slot = Some(contribution),
                }
            }
            if matches!(node.op, Op::Leaf) {
                grads[id] = Some(g);
            }
        }
        Ok(Gradients { grads })
    }

    fn local_grads(&self, node: &Node<T>, g: &Tensor4<T>) -> Result<Vec<(Var, Tensor4<T>)>, NnError> {
        let val = |v: Var| &self.nodes[v.0].value;
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        let mut out = Vec::new();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, stride, pad } => {
                if needs(*x) {
                    out.push((*x, kernels::conv2d_backward_input(g, val(*w), val(*x).shape(), *stride, *pad)?));
                }
                if needs(*w) || b.is_some_and(needs) {
                    let (gw, gb) = kernels::conv2d_backward_params(val(*x), g, val(*w).shape(), *stride, *pad)?;
                    out.push((*w, gw));
                    if let Some(b) = b {
                        out.push((*b, Tensor4::from_vec(val(*b).shape(), gb)?));
                    }
                }
            }
            Op::ConvTranspose2d { x, w, b, stride } => {
                if needs(*x) {
                    out.push((*x, kernels::conv_transpose2d_backward_input(g, val(*w), val(*x).shape(), *stride)?));
                }
                if needs(*w) || b.is_some_and(needs) {
                    let (gw, gb) = kernels::conv_transpose2d_backward_params(val(*x), g, val(*w).shape(), *stride)?;
                    out.push((*w, gw));
                    if let Some(b) = b {
                        out.push((*b, Tensor4::from_vec(val(*b).shape(), gb)?));
                    }
                }
            }
            Op::MaxPool { x, argmax } => {
                out.push((*x, kernels::maxpool2d_backward(g, argmax, val(*x).shape())?));
            }
            Op::Relu { x } => {
                out.push((*x, kernels::relu_backward(g, &node.value)));
            }
            Op::Concat { a, b } => {
                let (ga, gb) = kernels::split_channels(g, val(*a).c());
                out.push((*a, ga));
                out.push((*b, gb));
            }
            Op::Mse { pred, target } => {
                let gp = kernels::mse_backward(val(*pred), val(*target), g.data[0]);
                let gt = gp.map(|v| -v);
                out.push((*pred, gp));
                out.push((*target, gt));
            }
        }
        Ok(out)
    }
}
