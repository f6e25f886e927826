//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of one forward pass as a node holding
//! its output value. [`Tape::backward`] walks the nodes in reverse order and
//! accumulates `∂loss/∂node` for every node that depends on a
//! gradient-tracking leaf. The tape is rebuilt for each forward pass.
//!
//! Elementwise binary operations accept equal shapes, or a `1×n` row on
//! either side broadcast over an `m×n` operand (the bias-row case).

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Sqrt(Var),
    Square(Var),
    /// `scale * x + shift`
    Affine(Var, T, T),
    Sum(Var),
    Mean(Var),
    /// Column sums, `m×n → 1×n`.
    SumRows(Var),
    ConcatCols(Var, Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Dynamic computation graph for one forward/backward pass.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// How a binary elementwise operation lines up its operands.
#[derive(Clone, Copy)]
enum Broadcast {
    Same,
    /// Left operand is a single row.
    LeftRow,
    /// Right operand is a single row.
    RightRow,
}

fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> Result<((usize, usize), Broadcast)> {
    if a == b {
        Ok((a, Broadcast::Same))
    } else if a.1 == b.1 && b.0 == 1 {
        Ok((a, Broadcast::RightRow))
    } else if a.1 == b.1 && a.0 == 1 {
        Ok((b, Broadcast::LeftRow))
    } else {
        Err(Error::Shape(format!(
            "cannot broadcast {}x{} with {}x{}",
            a.0, a.1, b.0, b.1
        )))
    }
}

impl Broadcast {
    /// Range of row `r` within the left operand's storage.
    #[inline]
    fn left(self, r: usize, cols: usize) -> std::ops::Range<usize> {
        match self {
            Broadcast::LeftRow => 0..cols,
            _ => r * cols..(r + 1) * cols,
        }
    }

    #[inline]
    fn right(self, r: usize, cols: usize) -> std::ops::Range<usize> {
        match self {
            Broadcast::RightRow => 0..cols,
            _ => r * cols..(r + 1) * cols,
        }
    }
}

/// `out += a · b` for row-major `a: m×k`, `b: k×n`.
fn gemm_nn<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    let s = |cols: usize| (cols as isize, 1);
    T::gemm_acc(m, k, n, a, s(k), b, s(n), out, s(n));
}

/// `out += g · bᵀ` for `g: m×n`, `b: k×n`, `out: m×k`.
fn gemm_nt<T: Scalar>(g: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    T::gemm_acc(m, n, k, g, (n as isize, 1), b, (1, n as isize), out, (k as isize, 1));
}

/// `out += aᵀ · g` for `a: m×k`, `g: m×n`, `out: k×n`.
fn gemm_tn<T: Scalar>(a: &[T], g: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    T::gemm_acc(k, m, n, a, (1, k as isize), g, (n as isize, 1), out, (n as isize, 1));
}

/// Plain matrix product without recording, used by tests and inference helpers.
pub fn matmul_values<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.cols() != b.rows() {
        return Err(Error::Shape(format!(
            "matmul {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut out = vec![T::zero(); a.rows() * b.cols()];
    gemm_nn(a.data(), b.data(), &mut out, a.rows(), a.cols(), b.cols());
    Tensor::from_vec(a.rows(), b.cols(), out)
}

fn slot<T: Scalar>(grads: &mut [Option<Vec<T>>], v: Var, len: usize) -> &mut [T] {
    grads[v.0].get_or_insert_with(|| vec![T::zero(); len])
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), grads: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every recorded node and gradient.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.grads.clear();
    }

    /// Resets all gradients to zero while keeping the recorded graph.
    pub fn zero_grads(&mut self) {
        for g in self.grads.iter_mut().flatten() {
            g.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` loss with respect to `v`, if `v`
    /// lies on a gradient path.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient as a tensor; zero when `v` received no gradient.
    pub fn grad_tensor(&self, v: Var) -> Tensor<T> {
        let (r, c) = self.value(v).shape();
        match self.grad(v) {
            Some(g) => Tensor::from_vec(r, c, g.to_vec()).expect("shape recorded with node"),
            None => Tensor::zeros(r, c),
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Result<Var> {
        if !all_finite(value.data()) {
            let i = value.data().iter().position(|x| !x.is_finite()).unwrap_or(0);
            return Err(Error::NonFinite(format!(
                "{op:?} produced {} at element {i}",
                value.data()[i]
            )));
        }
        self.nodes.push(Node { value, op, requires_grad });
        self.grads.push(None);
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records an input. Only leaves with `requires_grad` seed gradient paths.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Result<Var> {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Result<Var> {
        self.leaf(value, false)
    }

    /// Records a copy of a learnable tensor, tracking gradients if the tensor does.
    pub fn param(&mut self, t: &Tensor<T>) -> Result<Var> {
        self.leaf(t.detached(), t.requires_grad())
    }

    fn rg(&self, a: Var) -> bool {
        self.nodes[a.0].requires_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let out = matmul_values(av, bv)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::MatMul(a, b), rg)
    }

    fn binary(&mut self, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let ((r, c), mode) = broadcast_shape(av.shape(), bv.shape())?;
        let (ad, bd) = (av.data(), bv.data());
        let mut data = Vec::with_capacity(r * c);
        for row in 0..r {
            let (x, y) = (&ad[mode.left(row, c)], &bd[mode.right(row, c)]);
            data.extend(x.iter().zip(y).map(|(&x, &y)| f(x, y)));
        }
        let out = Tensor::from_vec(r, c, data)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Div(a, b), |x, y| x / y)
    }

    fn unary(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Result<Var> {
        let out = self.nodes[a.0].value.map(f);
        let rg = self.rg(a);
        self.push(out, op, rg)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Tanh(a), tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Sqrt(a), T::sqrt)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    /// `scale * a + shift`, elementwise.
    pub fn affine(&mut self, a: Var, scale: T, shift: T) -> Result<Var> {
        self.unary(a, Op::Affine(a, scale, shift), |x| scale * x + shift)
    }

    pub fn scale(&mut self, a: Var, s: T) -> Result<Var> {
        self.affine(a, s, T::zero())
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.affine(a, -T::one(), T::zero())
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s: T = self.nodes[a.0].value.data().iter().copied().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = &self.nodes[a.0].value;
        let n = T::from_usize(v.len()).expect("length fits scalar");
        let s: T = v.data().iter().copied().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s / n), Op::Mean(a), rg)
    }

    /// Sums over rows, producing a `1×cols` row.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let v = &self.nodes[a.0].value;
        let (r, c) = v.shape();
        let mut out = vec![T::zero(); c];
        for i in 0..r {
            for (o, &x) in out.iter_mut().zip(v.row(i)) {
                *o += x;
            }
        }
        let rg = self.rg(a);
        self.push(Tensor::from_vec(1, c, out)?, Op::SumRows(a), rg)
    }

    /// Horizontal concatenation `[a | b]` of tensors with equal row counts.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.rows() != bv.rows() {
            return Err(Error::Shape(format!(
                "concat of {} rows with {} rows",
                av.rows(),
                bv.rows()
            )));
        }
        let (r, ca, cb) = (av.rows(), av.cols(), bv.cols());
        let mut data = Vec::with_capacity(r * (ca + cb));
        for i in 0..r {
            data.extend_from_slice(av.row(i));
            data.extend_from_slice(bv.row(i));
        }
        let out = Tensor::from_vec(r, ca + cb, data)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::ConcatCols(a, b), rg)
    }

    /// Propagates `∂loss/∂v` to every node on a gradient path. Gradients from
    /// previous calls are discarded; fan-out contributions add up.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.nodes[loss.0].value.shape();
        if shape != (1, 1) {
            return Err(Error::Shape(format!(
                "backward needs a 1x1 loss, got {}x{}",
                shape.0, shape.1
            )));
        }
        if !self.nodes[loss.0].requires_grad {
            return Err(Error::EmptyGradient);
        }
        self.grads.iter_mut().for_each(|g| *g = None);
        self.grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.grads[i].take() else { continue };
            self.propagate(i, &g);
            self.grads[i] = Some(g);
        }

        for (i, g) in self.grads.iter().enumerate() {
            if let Some(g) = g.as_deref().filter(|g| !all_finite(g)) {
                if let Some(j) = g.iter().position(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "gradient of node {i} ({:?}) at element {j}",
                        self.nodes[i].op
                    )));
                }
            }
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize, g: &[T]) {
        let nodes = &self.nodes;
        let grads = &mut self.grads;
        let out = &nodes[i].value;
        let rg = |v: Var| nodes[v.0].requires_grad;
        match nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                if rg(a) {
                    gemm_nt(g, bv.data(), slot(grads, a, m * k), m, k, n);
                }
                if rg(b) {
                    gemm_tn(av.data(), g, slot(grads, b, k * n), m, k, n);
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                let (_, mode) = broadcast_shape(av.shape(), bv.shape()).expect("checked on record");
                let (r, c) = out.shape();
                let (ad, bd) = (av.data(), bv.data());
                let op = nodes[i].op;
                if rg(a) {
                    let ga = slot(grads, a, av.len());
                    for row in 0..r {
                        let gr = &g[row * c..(row + 1) * c];
                        let dst = &mut ga[mode.left(row, c)];
                        let y = &bd[mode.right(row, c)];
                        match op {
                            Op::Add(..) | Op::Sub(..) => {
                                dst.iter_mut().zip(gr).for_each(|(d, &gi)| *d += gi)
                            }
                            Op::Mul(..) => dst
                                .iter_mut()
                                .zip(gr.iter().zip(y))
                                .for_each(|(d, (&gi, &yv))| *d += gi * yv),
                            _ => dst
                                .iter_mut()
                                .zip(gr.iter().zip(y))
                                .for_each(|(d, (&gi, &yv))| *d += gi / yv),
                        }
                    }
                }
                if rg(b) {
                    let gb = slot(grads, b, bv.len());
                    for row in 0..r {
                        let gr = &g[row * c..(row + 1) * c];
                        let dst = &mut gb[mode.right(row, c)];
                        let x = &ad[mode.left(row, c)];
                        let y = &bd[mode.right(row, c)];
                        match op {
                            Op::Add(..) => dst.iter_mut().zip(gr).for_each(|(d, &gi)| *d += gi),
                            Op::Sub(..) => dst.iter_mut().zip(gr).for_each(|(d, &gi)| *d -= gi),
                            Op::Mul(..) => dst
                                .iter_mut()
                                .zip(gr.iter().zip(x))
                                .for_each(|(d, (&gi, &xv))| *d += gi * xv),
                            _ => dst
                                .iter_mut()
                                .zip(gr.iter().zip(x.iter().zip(y)))
                                .for_each(|(d, (&gi, (&xv, &yv)))| *d -= gi * xv / (yv * yv)),
                        }
                    }
                }
            }
            Op::Tanh(a) => {
                let ga = slot(grads, a, out.len());
                for ((d, &gi), &y) in ga.iter_mut().zip(g).zip(out.data()) {
                    *d += gi * (T::one() - y * y);
                }
            }
            Op::Sigmoid(a) => {
                let ga = slot(grads, a, out.len());
                for ((d, &gi), &s) in ga.iter_mut().zip(g).zip(out.data()) {
                    *d += gi * s * (T::one() - s);
                }
            }
            Op::Sqrt(a) => {
                let half = T::lit(0.5);
                let ga = slot(grads, a, out.len());
                for ((d, &gi), &y) in ga.iter_mut().zip(g).zip(out.data()) {
                    *d += gi * half / y;
                }
            }
            Op::Square(a) => {
                let x = nodes[a.0].value.data();
                let ga = slot(grads, a, out.len());
                for ((d, &gi), &xv) in ga.iter_mut().zip(g).zip(x) {
                    *d += gi * (xv + xv);
                }
            }
            Op::Affine(a, scale, _) => {
                let ga = slot(grads, a, out.len());
                for (d, &gi) in ga.iter_mut().zip(g) {
                    *d += gi * scale;
                }
            }
            Op::Sum(a) | Op::Mean(a) => {
                let n = nodes[a.0].value.len();
                let gi = match nodes[i].op {
                    Op::Mean(_) => g[0] / T::from_usize(n).expect("length fits scalar"),
                    _ => g[0],
                };
                slot(grads, a, n).iter_mut().for_each(|d| *d += gi);
            }
            Op::SumRows(a) => {
                let (r, c) = nodes[a.0].value.shape();
                let ga = slot(grads, a, r * c);
                for row in ga.chunks_mut(c) {
                    for (d, &gi) in row.iter_mut().zip(g) {
                        *d += gi;
                    }
                }
            }
            Op::ConcatCols(a, b) => {
                let (ca, cb) = (nodes[a.0].value.cols(), nodes[b.0].value.cols());
                let r = out.rows();
                if rg(a) {
                    let ga = slot(grads, a, r * ca);
                    for row in 0..r {
                        for j in 0..ca {
                            ga[row * ca + j] += g[row * (ca + cb) + j];
                        }
                    }
                }
                if rg(b) {
                    let gb = slot(grads, b, r * cb);
                    for row in 0..r {
                        for j in 0..cb {
                            gb[row * cb + j] += g[row * (ca + cb) + ca + j];
                        }
                    }
                }
            }
        }
    }
}

/// Branch-free test; `x - x` is NaN exactly for infinities and NaN.
#[inline]
pub(crate) fn all_finite<T: Scalar>(xs: &[T]) -> bool {
    let mut acc = [T::zero(); 4];
    let mut chunks = xs.chunks_exact(4);
    for c in &mut chunks {
        for (a, &x) in acc.iter_mut().zip(c) {
            *a += x - x;
        }
    }
    let tail: T = chunks.remainder().iter().map(|&x| x - x).sum();
    (acc[0] + acc[1] + acc[2] + acc[3] + tail) == T::zero()
}

/// `tanh` through a single `exp`. Absolute error stays within a few ulp of
/// one; relative accuracy degrades only for `|x|` below about `1e-8`.
#[inline]
pub fn tanh<T: Scalar>(x: T) -> T {
    let e = (-(x.abs() + x.abs())).exp();
    let t = (T::one() - e) / (T::one() + e);
    if x < T::zero() {
        -t
    } else {
        t
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor<f64> {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_identity_and_dot() {
        let mut tape = Tape::new();
        let i = tape.constant(t(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        let v = tape.constant(t(&[&[3.0], &[4.0]])).unwrap();
        let p = tape.matmul(i, v).unwrap();
        assert_eq!(tape.value(p).data(), &[3.0, 4.0]);

        let a = tape.constant(t(&[&[1.0, 2.0]])).unwrap();
        let d = tape.matmul(a, v).unwrap();
        assert_eq!(tape.value(d).data(), &[11.0]);
    }

    #[test]
    fn matmul_gradient_against_hand_value() {
        let mut tape = Tape::new();
        let a = tape.leaf(t(&[&[1.0, 2.0]]), true).unwrap();
        let b = tape.constant(t(&[&[3.0], &[4.0]])).unwrap();
        let p = tape.matmul(a, b).unwrap();
        let l = tape.sum(p).unwrap();
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(a).unwrap(), &[3.0, 4.0]);
        assert!(tape.grad(b).is_none());
    }

    #[test]
    fn shape_errors() {
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::zeros(2, 3)).unwrap();
        let b = tape.constant(Tensor::zeros(2, 3)).unwrap();
        assert!(matches!(tape.matmul(a, b), Err(Error::Shape(_))));
        let c = tape.constant(Tensor::zeros(3, 2)).unwrap();
        assert!(matches!(tape.add(a, c), Err(Error::Shape(_))));
        let l = tape.leaf(Tensor::zeros(2, 2), true).unwrap();
        assert!(matches!(tape.backward(l), Err(Error::Shape(_))));
    }

    #[test]
    fn detached_loss_is_an_error() {
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::zeros(2, 2)).unwrap();
        let l = tape.sum(a).unwrap();
        assert!(matches!(tape.backward(l), Err(Error::EmptyGradient)));
    }

    #[test]
    fn activations_at_origin_and_saturation() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0), true).unwrap();
        let y = tape.tanh(x).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.value(y).data()[0], 0.0);
        assert_eq!(tape.grad(x).unwrap()[0], 1.0);

        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0), true).unwrap();
        let y = tape.sigmoid(x).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.value(y).data()[0], 0.5);
        assert_eq!(tape.grad(x).unwrap()[0], 0.25);

        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(20.0f64), true).unwrap();
        let y = tape.tanh(x).unwrap();
        tape.backward(y).unwrap();
        assert!((tape.value(y).data()[0] - 1.0).abs() <= 1e-12);
        assert!(tape.grad(x).unwrap()[0].abs() <= 1e-12);
    }

    #[test]
    fn sum_of_weights_gives_ones() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::<f64>::filled(2, 2, 0.3), true).unwrap();
        let l = tape.sum(w).unwrap();
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(w).unwrap(), &[1.0; 4]);
    }

    #[test]
    fn fan_out_gradients_add() {
        // l = sum(w + w + w) → 3 per element
        let mut tape = Tape::new();
        let w = tape.leaf(t(&[&[1.0, -2.0]]), true).unwrap();
        let a = tape.add(w, w).unwrap();
        let b = tape.add(a, w).unwrap();
        let l = tape.sum(b).unwrap();
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(w).unwrap(), &[3.0, 3.0]);

        // l = sum(w ⊙ w) → 2w
        let mut tape = Tape::new();
        let w = tape.leaf(t(&[&[1.5, -2.0]]), true).unwrap();
        let p = tape.mul(w, w).unwrap();
        let l = tape.sum(p).unwrap();
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(w).unwrap(), &[3.0, -4.0]);
    }

    #[test]
    fn bias_row_broadcast_reduces_gradient() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]])).unwrap();
        let b = tape.leaf(t(&[&[10.0, 20.0]]), true).unwrap();
        let y = tape.add(x, b).unwrap();
        assert_eq!(tape.value(y).data(), &[11.0, 22.0, 13.0, 24.0, 15.0, 26.0]);
        let y2 = tape.sub(b, x).unwrap();
        assert_eq!(tape.value(y2).data()[0], 9.0);
        let s = tape.add(y, y2).unwrap();
        let l = tape.sum(s).unwrap();
        tape.backward(l).unwrap();
        // each element of b appears in 3 rows of y and 3 rows of y2
        assert_eq!(tape.grad(b).unwrap(), &[6.0, 6.0]);
    }

    #[test]
    fn non_finite_forward_is_reported() {
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::scalar(1.0)).unwrap();
        let z = tape.constant(Tensor::scalar(0.0)).unwrap();
        assert!(matches!(tape.div(a, z), Err(Error::NonFinite(_))));
    }

    #[test]
    fn clear_and_zero() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::<f64>::filled(1, 2, 1.0), true).unwrap();
        let l = tape.sum(w).unwrap();
        tape.backward(l).unwrap();
        tape.zero_grads();
        assert_eq!(tape.grad(w).unwrap(), &[0.0, 0.0]);
        tape.clear();
        assert!(tape.is_empty());
    }

    #[test]
    fn tanh_matches_libm() {
        let mut worst = 0.0f64;
        for i in -4000..=4000 {
            let x = i as f64 * 0.005;
            worst = worst.max((tanh(x) - x.tanh()).abs());
        }
        assert!(worst < 4e-16, "{worst}");
        assert_eq!(tanh(0.0f64), 0.0);
        assert_eq!(tanh(-0.3f64), -tanh(0.3));
        assert_eq!(tanh(800.0f64), 1.0);
    }

    #[test]
    fn finiteness_scan() {
        assert!(all_finite(&[1.0, -2.0, 3.0, 4.0, 5.0f64]));
        assert!(!all_finite(&[1.0, -2.0, 3.0, 4.0, f64::NAN]));
        assert!(!all_finite(&[f64::INFINITY, 0.0]));
        assert!(all_finite::<f64>(&[]));
    }

    #[test]
    fn stable_sigmoid_tails() {
        assert_eq!(sigmoid(-800.0f64), 0.0);
        assert_eq!(sigmoid(800.0f64), 1.0);
        assert!((sigmoid(-2.0f64) + sigmoid(2.0) - 1.0).abs() < 1e-15);
    }
}
