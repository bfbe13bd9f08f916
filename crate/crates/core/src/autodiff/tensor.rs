use std::cell::{Ref, RefCell, RefMut};
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use super::ops::Op;
use crate::error::{Error, Result};

/// A dense row-major matrix that records how it was computed.
///
/// Cloning a `Tensor` is cheap and shares the underlying node. Leaves created
/// with [`Tensor::param`] collect gradients; every other node only passes
/// them through during [`Tensor::backward`].
#[derive(Clone)]
pub struct Tensor(pub(super) Rc<Node>);

pub(super) struct Node {
    pub(super) rows: usize,
    pub(super) cols: usize,
    pub(super) data: RefCell<Vec<f64>>,
    pub(super) grad: RefCell<Option<Vec<f64>>>,
    pub(super) op: Op,
    pub(super) requires_grad: bool,
}

impl Tensor {
    pub(super) fn from_op(rows: usize, cols: usize, data: Vec<f64>, op: Op) -> Tensor {
        debug_assert_eq!(data.len(), rows * cols);
        let requires_grad = op.parents().iter().any(|p| p.requires_grad());
        Tensor(Rc::new(Node {
            rows,
            cols,
            data: RefCell::new(data),
            grad: RefCell::new(None),
            op: if requires_grad { op } else { Op::Leaf },
            requires_grad,
        }))
    }

    fn leaf(rows: usize, cols: usize, data: Vec<f64>, requires_grad: bool) -> Result<Tensor> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "new",
                lhs: vec![rows, cols],
                rhs: vec![data.len()],
            });
        }
        Ok(Tensor(Rc::new(Node {
            rows,
            cols,
            data: RefCell::new(data),
            grad: RefCell::new(None),
            op: Op::Leaf,
            requires_grad,
        })))
    }

    /// Constant (non-differentiable) tensor.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor> {
        Self::leaf(rows, cols, data, false)
    }

    /// Trainable leaf that accumulates gradients.
    pub fn param(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor> {
        Self::leaf(rows, cols, data, true)
    }

    pub fn zeros(rows: usize, cols: usize) -> Tensor {
        Tensor::new(rows, cols, vec![0.0; rows * cols]).expect("positive dims")
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor::new(1, 1, vec![value]).expect("1x1")
    }

    pub fn row(values: &[f64]) -> Result<Tensor> {
        Tensor::new(1, values.len(), values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.0.rows
    }

    pub fn cols(&self) -> usize {
        self.0.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.0.rows, self.0.cols]
    }

    pub fn len(&self) -> usize {
        self.0.rows * self.0.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.0.op, Op::Leaf)
    }

    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.0.data.borrow()
    }

    /// Mutable access to a leaf's values. Tensors computed from this one
    /// keep the values they were built with.
    pub fn data_mut(&self) -> RefMut<'_, Vec<f64>> {
        debug_assert!(self.is_leaf(), "only leaves may be mutated");
        self.0.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.data().clone()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data()[row * self.0.cols + col]
    }

    /// Value of a 1x1 tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.len(), 1);
        self.data()[0]
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow().clone()
    }

    pub(crate) fn grad_ref(&self) -> Ref<'_, Option<Vec<f64>>> {
        self.0.grad.borrow()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    /// Same values, cut off from the graph.
    pub fn detach(&self) -> Tensor {
        Tensor::new(self.0.rows, self.0.cols, self.to_vec()).expect("valid shape")
    }

    pub fn ptr_eq(&self, other: &Tensor) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    /// Reverse-mode sweep from a 1x1 loss. Gradients are added into the
    /// `grad` slot of every trainable leaf reachable from `self`; callers
    /// reset them with [`Tensor::zero_grad`] between steps.
    pub fn backward(&self) -> Result<()> {
        if self.len() != 1 {
            return Err(Error::NonScalarLoss(self.shape().to_vec()));
        }
        if !self.requires_grad() {
            return Ok(());
        }

        let order = self.topological_order();
        let index: HashMap<*const Node, usize> = order
            .iter()
            .enumerate()
            .map(|(i, t)| (Rc::as_ptr(&t.0), i))
            .collect();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; order.len()];
        grads[order.len() - 1] = Some(vec![1.0]);

        for i in (0..order.len()).rev() {
            let Some(upstream) = grads[i].take() else {
                continue;
            };
            let node = &order[i];
            if node.is_leaf() {
                let mut slot = node.0.grad.borrow_mut();
                match slot.as_mut() {
                    Some(acc) => acc.iter_mut().zip(&upstream).for_each(|(a, g)| *a += g),
                    None => *slot = Some(upstream),
                }
                continue;
            }
            let mut sink = GradSink {
                index: &index,
                grads: &mut grads,
            };
            node.0.op.backward(node, &upstream, &mut sink);
        }
        Ok(())
    }

    /// Nodes that require grad, parents before children; `self` is last.
    fn topological_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut visited: HashMap<*const Node, ()> = HashMap::new();
        // (node, parents expanded)
        let mut stack = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            let key = Rc::as_ptr(&t.0);
            if expanded {
                order.push(t);
                continue;
            }
            if visited.insert(key, ()).is_some() {
                continue;
            }
            stack.push((t.clone(), true));
            for p in t.0.op.parents() {
                if p.requires_grad() && !visited.contains_key(&Rc::as_ptr(&p.0)) {
                    stack.push((p.clone(), false));
                }
            }
        }
        order
    }
}

/// Collects gradient contributions for the parents of the node being
/// processed.
pub(super) struct GradSink<'a> {
    index: &'a HashMap<*const Node, usize>,
    grads: &'a mut Vec<Option<Vec<f64>>>,
}

impl GradSink<'_> {
    /// Hands `f` the (zero-initialised on first use) gradient buffer of
    /// `parent`. Parents that do not require grad are skipped.
    pub(super) fn accumulate(&mut self, parent: &Tensor, f: impl FnOnce(&mut [f64])) {
        if !parent.requires_grad() {
            return;
        }
        let i = self.index[&Rc::as_ptr(&parent.0)];
        let buf = self.grads[i].get_or_insert_with(|| vec![0.0; parent.len()]);
        f(buf);
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape())
            .field("data", &*self.data())
            .field("requires_grad", &self.requires_grad())
            .finish()
    }
}
