//! Scalar reverse-mode tape.
//!
//! Every arithmetic operation on a [`Var`] appends one node holding the
//! indices of its (at most two) operands and the local partial derivatives
//! with respect to them. Operands always precede their results, so walking
//! the node list backwards is a valid reverse topological order.
//!
//! Constants (`Var::from(f64)`) are not recorded; an operation whose operands
//! are all constants produces another constant.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use super::DiffError;

const NO_PARENT: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

/// Node list of one recording session.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(capacity)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers an independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let idx = self.push(Node {
            parents: [NO_PARENT; 2],
            partials: [0.0; 2],
        });
        Var {
            tape: Some(self),
            idx,
            val: value,
        }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        assert!(idx < NO_PARENT as usize, "tape overflow");
        nodes.push(node);
        idx as u32
    }

    fn owns(&self, var: &Var<'_>) -> bool {
        match var.tape {
            Some(t) => std::ptr::eq(t, self) && (var.idx as usize) < self.len(),
            None => true,
        }
    }

    /// Gradient of a single scalar output with respect to every node.
    ///
    /// `outputs` must contain exactly one variable; anything else is
    /// reported as a non-scalar output.
    pub fn gradient(&self, outputs: &[Var<'_>]) -> Result<Gradients, DiffError> {
        match outputs {
            [out] => {
                if !self.owns(out) {
                    return Err(DiffError::ForeignVariable);
                }
                Ok(self.backward_seeded(std::iter::once((*out, 1.0))))
            }
            _ => Err(DiffError::NonScalarOutput { len: outputs.len() }),
        }
    }

    /// Vector-Jacobian product: propagates the given output adjoints back to
    /// every node. Used to chain externally differentiated stages (the
    /// rasterizer) onto the tape.
    pub fn backward_seeded<'t, I>(&self, seeds: I) -> Gradients
    where
        I: IntoIterator<Item = (Var<'t>, f64)>,
    {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        for (var, seed) in seeds {
            if var.tape.is_some() {
                adj[var.idx as usize] += seed;
            }
        }
        for i in (0..nodes.len()).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            for k in 0..2 {
                let p = node.parents[k];
                if p != NO_PARENT {
                    adj[p as usize] += a * node.partials[k];
                }
            }
        }
        Gradients { adjoints: adj }
    }

    fn unary<'t>(&'t self, x: u32, dx: f64, val: f64) -> Var<'t> {
        let idx = self.push(Node {
            parents: [x, NO_PARENT],
            partials: [dx, 0.0],
        });
        Var {
            tape: Some(self),
            idx,
            val,
        }
    }

    fn binary<'t>(&'t self, x: u32, dx: f64, y: u32, dy: f64, val: f64) -> Var<'t> {
        let idx = self.push(Node {
            parents: [x, y],
            partials: [dx, dy],
        });
        Var {
            tape: Some(self),
            idx,
            val,
        }
    }
}

/// Adjoints of every node after a backward pass.
#[derive(Clone, Debug)]
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    /// Derivative of the output with respect to `var`. Constants and nodes
    /// the output does not depend on read as zero.
    pub fn wrt(&self, var: Var<'_>) -> f64 {
        match var.tape {
            Some(_) => self.adjoints.get(var.idx as usize).copied().unwrap_or(0.0),
            None => 0.0,
        }
    }

    pub fn wrt_all(&self, vars: &[Var<'_>]) -> Vec<f64> {
        vars.iter().map(|&v| self.wrt(v)).collect()
    }
}

/// A recorded scalar, or a constant when it carries no tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tape {
            Some(_) => write!(f, "Var(#{}: {})", self.idx, self.val),
            None => write!(f, "Const({})", self.val),
        }
    }
}

impl<'t> Var<'t> {
    pub fn constant(value: f64) -> Self {
        Var {
            tape: None,
            idx: NO_PARENT,
            val: value,
        }
    }

    pub fn value(&self) -> f64 {
        self.val
    }

    pub fn is_constant(&self) -> bool {
        self.tape.is_none()
    }

    fn map(self, val: f64, d: f64) -> Self {
        match self.tape {
            Some(t) => t.unary(self.idx, d, val),
            None => Var::constant(val),
        }
    }

    fn zip(self, other: Self, val: f64, dx: f64, dy: f64) -> Self {
        match (self.tape, other.tape) {
            (Some(t), Some(_)) => t.binary(self.idx, dx, other.idx, dy, val),
            (Some(t), None) => t.unary(self.idx, dx, val),
            (None, Some(t)) => t.unary(other.idx, dy, val),
            (None, None) => Var::constant(val),
        }
    }
}

impl From<f64> for Var<'_> {
    fn from(value: f64) -> Self {
        Var::constant(value)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self {
        self.zip(rhs, self.val + rhs.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self {
        self.zip(rhs, self.val - rhs.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self {
        self.zip(rhs, self.val * rhs.val, rhs.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self {
        let q = self.val / rhs.val;
        self.zip(rhs, q, 1.0 / rhs.val, -q / rhs.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.map(-self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Self {
        self.map(self.val + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Self {
        self.map(self.val - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Self {
        self.map(self.val * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Self {
        self.map(self.val / rhs, 1.0 / rhs)
    }
}

impl AddAssign for Var<'_> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// Scalar arithmetic shared by plain `f64` evaluation and taped [`Var`]s.
///
/// Geometry and loss code is written once against this trait; evaluating it
/// with `f64` gives the fast forward path, with `Var` the differentiable one.
pub trait Real:
    Copy
    + fmt::Debug
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
{
    fn value(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;

    fn zero() -> Self {
        Self::from(0.0)
    }

    fn square(self) -> Self {
        self * self
    }
}

impl Real for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
}

impl Real for Var<'_> {
    fn value(&self) -> f64 {
        self.val
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.map(s, 0.5 / s)
    }
    fn sin(self) -> Self {
        self.map(self.val.sin(), self.val.cos())
    }
    fn cos(self) -> Self {
        self.map(self.val.cos(), -self.val.sin())
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.map(e, e)
    }
    fn ln(self) -> Self {
        self.map(self.val.ln(), 1.0 / self.val)
    }
}

/// Sum of a sequence, zero when empty.
pub fn sum<S: Real, I: IntoIterator<Item = S>>(items: I) -> S {
    let mut acc = S::zero();
    for x in items {
        acc += x;
    }
    acc
}
