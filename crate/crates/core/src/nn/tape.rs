//! Tape-based reverse-mode differentiation.
//!
//! A [`Tape`] records every operation of one forward pass as a node that
//! stores its output value and the handles of its inputs. Nodes only refer to
//! earlier nodes, so walking the tape backwards visits them in reverse
//! topological order. Parameters enter as leaves that remember their
//! [`ParamId`]; after [`Tape::backward`] the caller folds the resulting
//! [`Gradients`] into the owning [`Parameter`]s.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::nn::tensor::matmul_into;
use crate::nn::{Activation, ParamId, Parameter, Tensor};
use crate::Real;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<S> {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Tensor<S>),
    LinComb(Var, S, Var, S),
    Scale(Var, S),
    Act(Var, Activation),
    ConcatCols(Var, Var),
    GatherRows(Var, Vec<usize>),
    SumAll(Var),
    SquaredError { a: Var, b: Var, scale: S },
    PowerNormalize { x: Var, k: S, sum_sq: S },
    SoftmaxCrossEntropy { scores: Var, labels: Vec<usize>, probs: Tensor<S> },
    Sspa { x: Var, p: S, a0: S, v0: S },
    ComplexMulConst(Var, Tensor<S>),
}

#[derive(Debug, Clone)]
struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
}

/// Recording of one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape<S = f32> {
    nodes: Vec<Node<S>>,
}

impl<S: Real> Tape<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    /// Input that gradients may be taken with respect to.
    pub fn leaf(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Alias of [`Tape::leaf`] for values that are never differentiated.
    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.leaf(value)
    }

    pub fn param(&mut self, p: &Parameter<S>) -> Var {
        self.push(p.value().clone(), Op::Param(p.id()))
    }

    /// Copies a value into a fresh leaf, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.leaf(value)
    }

    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        let out = self.value(x).matmul(self.value(w))?;
        Ok(self.push(out, Op::MatMul(x, w)))
    }

    /// Adds a `[cols]` bias to every row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let xv = self.value(x);
        let bv = self.value(b);
        let c = xv.cols();
        if bv.len() != c || xv.shape().len() != 2 {
            return Err(shape_err(
                "add_bias",
                format!("{:?} + {:?}", xv.shape(), bv.shape()),
            ));
        }
        let mut out = xv.data().to_vec();
        for row in out.chunks_mut(c) {
            for (o, &bb) in row.iter_mut().zip(bv.data()) {
                *o += bb;
            }
        }
        let out = Tensor::raw(xv.shape().to_vec(), out);
        Ok(self.push(out, Op::AddBias(x, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).sub(self.value(b))?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// Elementwise product with a constant tensor of the same shape.
    pub fn mul_const(&mut self, a: Var, k: Tensor<S>) -> Result<Var> {
        let out = self.value(a).zip_map(&k, |x, y| x * y)?;
        Ok(self.push(out, Op::MulConst(a, k)))
    }

    /// `ka * a + kb * b`.
    pub fn lin_comb(&mut self, a: Var, ka: S, b: Var, kb: S) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| ka * x + kb * y)?;
        Ok(self.push(out, Op::LinComb(a, ka, b, kb)))
    }

    pub fn scale(&mut self, a: Var, k: S) -> Var {
        let out = self.value(a).scale(k);
        self.push(out, Op::Scale(a, k))
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Var {
        let out = self.value(a).map(|x| kind.apply(x));
        self.push(out, Op::Act(a, kind))
    }

    /// Joins `[b, m]` and `[b, n]` into `[b, m + n]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape().len() != 2 || bv.shape().len() != 2 || av.rows() != bv.rows() {
            return Err(shape_err(
                "concat_cols",
                format!("{:?} ++ {:?}", av.shape(), bv.shape()),
            ));
        }
        let rows = av.rows();
        let (ca, cb) = (av.cols(), bv.cols());
        let mut out = Vec::with_capacity(rows * (ca + cb));
        for r in 0..rows {
            out.extend_from_slice(av.row(r));
            out.extend_from_slice(bv.row(r));
        }
        let out = Tensor::raw(vec![rows, ca + cb], out);
        Ok(self.push(out, Op::ConcatCols(a, b)))
    }

    /// Row lookup into a `[rows, cols]` table.
    pub fn gather_rows(&mut self, table: Var, idx: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        if tv.shape().len() != 2 {
            return Err(shape_err("gather_rows", format!("{:?}", tv.shape())));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= tv.rows()) {
            return Err(shape_err(
                "gather_rows",
                format!("row {bad} of {}", tv.rows()),
            ));
        }
        let out = tv.gather_rows(idx);
        Ok(self.push(out, Op::GatherRows(table, idx.to_vec())))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::SumAll(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = S::of(self.value(a).len() as f64);
        let s = self.sum(a);
        self.scale(s, S::one() / n)
    }

    /// `scale * sum((a - b)^2)`.
    pub fn squared_error(&mut self, a: Var, b: Var, scale: S) -> Result<Var> {
        let d = self.value(a).sub(self.value(b))?;
        let out = Tensor::scalar(scale * d.sum_squares());
        Ok(self.push(out, Op::SquaredError { a, b, scale }))
    }

    /// Rescales `x` so that its total energy equals `target`.
    pub fn power_normalize(&mut self, x: Var, target: S) -> Result<Var> {
        let xv = self.value(x);
        let sum_sq = xv.sum_squares();
        if !(sum_sq > S::zero()) {
            return Err(Error::NonFinite("power_normalize: zero-energy batch"));
        }
        let k = (target / sum_sq).sqrt();
        let out = xv.scale(k);
        Ok(self.push(out, Op::PowerNormalize { x, k, sum_sq }))
    }

    /// Mean over rows of `-log softmax(scores)[label]`.
    pub fn softmax_cross_entropy(&mut self, scores: Var, labels: &[usize]) -> Result<Var> {
        let sv = self.value(scores);
        let (rows, cols) = (sv.rows(), sv.cols());
        if sv.shape().len() != 2 || labels.len() != rows {
            return Err(shape_err(
                "softmax_cross_entropy",
                format!("scores {:?}, {} labels", sv.shape(), labels.len()),
            ));
        }
        if let Some(&m) = labels.iter().find(|&&m| m >= cols) {
            return Err(Error::MessageOutOfRange { m, count: cols });
        }
        let mut probs = Vec::with_capacity(rows * cols);
        let mut loss = S::zero();
        for (r, &label) in labels.iter().enumerate() {
            let row = sv.row(r);
            let max = row.iter().copied().fold(S::neg_infinity(), S::max);
            let z: S = row.iter().map(|&v| (v - max).exp()).sum();
            let lse = max + z.ln();
            loss += lse - row[label];
            probs.extend(row.iter().map(|&v| (v - lse).exp()));
        }
        let out = Tensor::scalar(loss / S::of(rows as f64));
        let probs = Tensor::raw(vec![rows, cols], probs);
        Ok(self.push(
            out,
            Op::SoftmaxCrossEntropy { scores, labels: labels.to_vec(), probs },
        ))
    }

    /// Per complex symbol `(re, im)` pair: multiply by the SSPA amplitude gain.
    pub fn sspa(&mut self, x: Var, p: S, a0: S, v0: S) -> Result<Var> {
        let xv = self.value(x);
        if xv.cols() % 2 != 0 {
            return Err(shape_err("sspa", format!("odd width {:?}", xv.shape())));
        }
        let mut out = xv.data().to_vec();
        for pair in out.chunks_mut(2) {
            let r = (pair[0] * pair[0] + pair[1] * pair[1]).sqrt();
            let g = crate::channels::sspa_gain(r, p, a0, v0);
            pair[0] *= g;
            pair[1] *= g;
        }
        let out = Tensor::raw(xv.shape().to_vec(), out);
        Ok(self.push(out, Op::Sspa { x, p, a0, v0 }))
    }

    /// Complex elementwise product with constant coefficients, both packed
    /// as interleaved `(re, im)`.
    pub fn complex_mul_const(&mut self, x: Var, h: Tensor<S>) -> Result<Var> {
        let xv = self.value(x);
        if xv.shape() != h.shape() || xv.cols() % 2 != 0 {
            return Err(shape_err(
                "complex_mul_const",
                format!("{:?} vs {:?}", xv.shape(), h.shape()),
            ));
        }
        let mut out = Vec::with_capacity(xv.len());
        for (xp, hp) in xv.data().chunks(2).zip(h.data().chunks(2)) {
            out.push(hp[0] * xp[0] - hp[1] * xp[1]);
            out.push(hp[0] * xp[1] + hp[1] * xp[0]);
        }
        let out = Tensor::raw(xv.shape().to_vec(), out);
        Ok(self.push(out, Op::ComplexMulConst(x, h)))
    }

    /// Back-propagates from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<S>> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        lv.check_finite("loss")?;

        let mut grads: Vec<Option<Tensor<S>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(lv.shape().to_vec(), S::one()));
        let mut params = Vec::new();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            for parent in node.op.parents() {
                if parent.0 >= idx {
                    return Err(Error::GraphCycle { node: idx, parent: parent.0 });
                }
            }
            self.backprop_node(&node.op, &g, &mut grads)?;
            if let Op::Param(id) = node.op {
                params.push((id, idx));
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads, params })
    }

    fn backprop_node(
        &self,
        op: &Op<S>,
        g: &Tensor<S>,
        grads: &mut [Option<Tensor<S>>],
    ) -> Result<()> {
        match op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(x, w) => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (b, i, o) = (xv.rows(), xv.cols(), wv.cols());
                // dX = G W^T
                let mut gx = vec![S::zero(); b * i];
                for r in 0..b {
                    let grow = &g.data()[r * o..(r + 1) * o];
                    for k in 0..i {
                        let wrow = &wv.data()[k * o..(k + 1) * o];
                        gx[r * i + k] = grow.iter().zip(wrow).map(|(&a, &c)| a * c).sum();
                    }
                }
                // dW = X^T G
                let xt = xv.transpose()?;
                let mut gw = vec![S::zero(); i * o];
                matmul_into(xt.data(), g.data(), &mut gw, i, b, o);
                accumulate(grads, *x, Tensor::raw(xv.shape().to_vec(), gx));
                accumulate(grads, *w, Tensor::raw(wv.shape().to_vec(), gw));
            }
            Op::AddBias(x, b) => {
                let c = g.cols();
                let mut gb = vec![S::zero(); c];
                for row in g.data().chunks(c) {
                    for (a, &v) in gb.iter_mut().zip(row) {
                        *a += v;
                    }
                }
                accumulate(grads, *x, g.clone());
                let shape = self.value(*b).shape().to_vec();
                accumulate(grads, *b, Tensor::raw(shape, gb));
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.scale(-S::one()));
            }
            Op::Mul(a, b) => {
                let ga = g.zip_map(self.value(*b), |x, y| x * y)?;
                let gb = g.zip_map(self.value(*a), |x, y| x * y)?;
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::MulConst(a, k) => {
                accumulate(grads, *a, g.zip_map(k, |x, y| x * y)?);
            }
            Op::LinComb(a, ka, b, kb) => {
                accumulate(grads, *a, g.scale(*ka));
                accumulate(grads, *b, g.scale(*kb));
            }
            Op::Scale(a, k) => accumulate(grads, *a, g.scale(*k)),
            Op::Act(a, kind) => {
                let ga = g.zip_map(self.value(*a), |gv, x| gv * kind.derivative(x))?;
                accumulate(grads, *a, ga);
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let rows = g.rows();
                let mut ga = Vec::with_capacity(rows * ca);
                let mut gb = Vec::with_capacity(rows * cb);
                for r in 0..rows {
                    let row = g.row(r);
                    ga.extend_from_slice(&row[..ca]);
                    gb.extend_from_slice(&row[ca..]);
                }
                accumulate(grads, *a, Tensor::raw(vec![rows, ca], ga));
                accumulate(grads, *b, Tensor::raw(vec![rows, cb], gb));
            }
            Op::GatherRows(table, idx) => {
                let tv = self.value(*table);
                let c = tv.cols();
                let mut gt = vec![S::zero(); tv.len()];
                for (r, &i) in idx.iter().enumerate() {
                    for (a, &v) in gt[i * c..(i + 1) * c].iter_mut().zip(g.row(r)) {
                        *a += v;
                    }
                }
                accumulate(grads, *table, Tensor::raw(tv.shape().to_vec(), gt));
            }
            Op::SumAll(a) => {
                let shape = self.value(*a).shape().to_vec();
                accumulate(grads, *a, Tensor::full(shape, g.item()));
            }
            Op::SquaredError { a, b, scale } => {
                let k = S::of(2.0) * *scale * g.item();
                let d = self.value(*a).sub(self.value(*b))?.scale(k);
                accumulate(grads, *b, d.scale(-S::one()));
                accumulate(grads, *a, d);
            }
            Op::PowerNormalize { x, k, sum_sq } => {
                let xv = self.value(*x);
                let dot: S = g.data().iter().zip(xv.data()).map(|(&a, &b)| a * b).sum();
                let c = *k * dot / *sum_sq;
                let gx = g.zip_map(xv, |gv, xv| *k * gv - c * xv)?;
                accumulate(grads, *x, gx);
            }
            Op::SoftmaxCrossEntropy { scores, labels, probs } => {
                let rows = probs.rows();
                let c = probs.cols();
                let k = g.item() / S::of(rows as f64);
                let mut gs: Vec<S> = probs.data().iter().map(|&p| p * k).collect();
                for (r, &m) in labels.iter().enumerate() {
                    gs[r * c + m] -= k;
                }
                accumulate(grads, *scores, Tensor::raw(probs.shape().to_vec(), gs));
            }
            Op::Sspa { x, p, a0, v0 } => {
                let xv = self.value(*x);
                let mut gx = Vec::with_capacity(xv.len());
                for (xp, gp) in xv.data().chunks(2).zip(g.data().chunks(2)) {
                    let (re, im) = (xp[0], xp[1]);
                    let r2 = re * re + im * im;
                    let r = r2.sqrt();
                    let gain = crate::channels::sspa_gain(r, *p, *a0, *v0);
                    // d gain / dr divided by r
                    let dg_over_r = sspa_gain_slope_over_r(r, *p, *a0, *v0);
                    let proj = (gp[0] * re + gp[1] * im) * dg_over_r;
                    gx.push(gain * gp[0] + proj * re);
                    gx.push(gain * gp[1] + proj * im);
                }
                accumulate(grads, *x, Tensor::raw(xv.shape().to_vec(), gx));
            }
            Op::ComplexMulConst(x, h) => {
                let mut gx = Vec::with_capacity(h.len());
                for (hp, gp) in h.data().chunks(2).zip(g.data().chunks(2)) {
                    gx.push(hp[0] * gp[0] + hp[1] * gp[1]);
                    gx.push(-hp[1] * gp[0] + hp[0] * gp[1]);
                }
                accumulate(grads, *x, Tensor::raw(h.shape().to_vec(), gx));
            }
        }
        Ok(())
    }
}

/// `gain'(r) / r` for the SSPA gain, zero at the origin.
fn sspa_gain_slope_over_r<S: Real>(r: S, p: S, a0: S, v0: S) -> S {
    if r <= S::zero() || a0 <= S::zero() || v0 <= S::zero() {
        return S::zero();
    }
    let two_p = S::of(2.0) * p;
    let ratio = v0 / a0;
    let u = (ratio * r).powf(two_p);
    // gain' = -v0 (1 + u)^(-1/(2p) - 1) u / r
    -v0 * (S::one() + u).powf(-S::one() / two_p - S::one()) * u / (r * r)
}

fn accumulate<S: Real>(grads: &mut [Option<Tensor<S>>], v: Var, g: Tensor<S>) {
    match &mut grads[v.0] {
        Some(acc) => {
            for (a, &b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

impl<S> Op<S> {
    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Leaf | Op::Param(_) => vec![],
            Op::MatMul(a, b)
            | Op::AddBias(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::LinComb(a, _, b, _)
            | Op::ConcatCols(a, b) => vec![*a, *b],
            Op::SquaredError { a, b, .. } => vec![*a, *b],
            Op::MulConst(a, _)
            | Op::Scale(a, _)
            | Op::Act(a, _)
            | Op::GatherRows(a, _)
            | Op::SumAll(a)
            | Op::ComplexMulConst(a, _) => vec![*a],
            Op::PowerNormalize { x, .. } | Op::Sspa { x, .. } => vec![*x],
            Op::SoftmaxCrossEntropy { scores, .. } => vec![*scores],
        }
    }
}

/// Result of a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients<S = f32> {
    grads: Vec<Option<Tensor<S>>>,
    params: Vec<(ParamId, usize)>,
}

impl<S: Real> Gradients<S> {
    /// Gradient with respect to any node that the loss depends on.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<S>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Summed gradient of every leaf created from parameter `id`.
    pub fn param(&self, id: ParamId) -> Option<Tensor<S>> {
        let mut acc: Option<Tensor<S>> = None;
        for &(pid, node) in &self.params {
            if pid != id {
                continue;
            }
            if let Some(g) = &self.grads[node] {
                match &mut acc {
                    Some(a) => {
                        for (x, &y) in a.data_mut().iter_mut().zip(g.data()) {
                            *x += y;
                        }
                    }
                    None => acc = Some(g.clone()),
                }
            }
        }
        acc
    }

    /// Adds the gradients into each parameter's accumulator.
    pub fn accumulate_into<'a>(&self, params: impl IntoIterator<Item = &'a mut Parameter<S>>) {
        for p in params {
            if let Some(g) = self.param(p.id()) {
                p.accumulate(&g);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn squared_norm_gradient_is_twice_input() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[1, 3], &[1.0, -2.0, 0.5]));
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn linear_map_gradient_is_outer_product() {
        // loss = sum(x W); dW[i, o] = sum_b x[b, i]
        let mut tape = Tape::new();
        let w = Parameter::new("w", t(&[2, 3], &[0.0; 6]));
        let x = tape.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let wv = tape.param(&w);
        let y = tape.matmul(x, wv).unwrap();
        let loss = tape.sum(y);
        let g = tape.backward(loss).unwrap();
        let gw = g.param(w.id()).unwrap();
        assert_eq!(gw.data(), &[4.0, 4.0, 4.0, 6.0, 6.0, 6.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(t(&[2], &[1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn gradients_accumulate_until_zeroed() {
        let mut w = Parameter::new("w", t(&[1, 1], &[3.0]));
        for expected in [2.0, 4.0] {
            let mut tape = Tape::new();
            let x = tape.constant(t(&[1, 1], &[2.0]));
            let wv = tape.param(&w);
            let y = tape.matmul(x, wv).unwrap();
            let loss = tape.sum(y);
            tape.backward(loss).unwrap().accumulate_into([&mut w]);
            assert_eq!(w.grad().item(), expected);
        }
        w.zero_grad();
        assert_eq!(w.grad().item(), 0.0);
    }

    #[test]
    fn detach_cuts_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[1, 1], &[2.0]));
        let y = tape.mul(x, x).unwrap();
        let d = tape.detach(y);
        let loss = tape.sum(d);
        let g = tape.backward(loss).unwrap();
        assert!(g.wrt(x).is_none());
    }

    #[test]
    fn cross_entropy_of_uniform_scores_is_log_m() {
        let mut tape = Tape::new();
        let s = tape.leaf(Tensor::<f64>::zeros(vec![3, 4]));
        let l = tape.softmax_cross_entropy(s, &[0, 1, 3]).unwrap();
        assert!((tape.value(l).item() - 4f64.ln()).abs() < 1e-12);
        assert!(tape.softmax_cross_entropy(s, &[0, 1, 4]).is_err());
    }
}
