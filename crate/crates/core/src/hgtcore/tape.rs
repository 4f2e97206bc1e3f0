//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! Every op evaluates eagerly and appends a node to the tape. `backward`
//! walks the tape in reverse, applying each node's pullback and summing
//! contributions into its parents.

use std::sync::Arc;

use super::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    ScaleBy(Var, Var),
    MulRows(Var, Var),
    RowSoftmax(Var),
    Gelu(Var),
    L2Normalize(Var),
    RowDot(Var, Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    BlockDiag(Vec<Var>),
    LogSumExp(Var),
    GatherRows(Var, Arc<[usize]>),
    SliceCols(Var, usize),
    Reshape(Var),
    SegmentSoftmax(Var, Arc<[usize]>),
    SegmentSum(Var, Arc<[usize]>),
    Sum(Var),
    Mean(Var),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of a scalar loss with respect to every trainable leaf.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<(usize, usize)>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of `v`; zeros when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Tensor<T> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }

    pub fn get_ref(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads[v.0].as_ref()
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

fn shape_err(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::shape(op, format!("{}x{} vs {}x{}", a.0, a.1, b.0, b.1))
}

fn check_offsets(op: &'static str, offsets: &[usize], rows: usize) -> Result<()> {
    let ok = offsets.first() == Some(&0)
        && offsets.last() == Some(&rows)
        && offsets.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::shape(op, format!("bad segment offsets for {rows} rows")))
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        debug_assert!(value.is_finite(), "non-finite value from {op:?}");
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// A trainable leaf.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(shape_err("matmul", sa, sb));
        }
        let mut out = Tensor::zeros(sa.0, sb.1);
        gemm_acc(
            self.value(a).data(),
            self.value(b).data(),
            out.data_mut(),
            sa.0,
            sa.1,
            sb.1,
        );
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::MatMul(a, b), ng))
    }

    fn zip(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(op, sa, sb));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(sa.0, sa.1, data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip("add", a, b, |x, y| x + y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip("sub", a, b, |x, y| x - y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Sub(a, b), ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip("mul", a, b, |x, y| x * y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Mul(a, b), ng))
    }

    /// Multiplies by a constant.
    pub fn scalar_scale(&mut self, a: Var, s: T) -> Var {
        let out = self.value(a).map(|x| x * s);
        let ng = self.ng(a);
        self.push(out, Op::Scale(a, s), ng)
    }

    /// Multiplies every element of `a` by the `1 x 1` value `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.shape(s) != (1, 1) {
            return Err(shape_err("scale_by", self.shape(a), self.shape(s)));
        }
        let k = self.value(s).item();
        let out = self.value(a).map(|x| x * k);
        let ng = self.ng(a) || self.ng(s);
        Ok(self.push(out, Op::ScaleBy(a, s), ng))
    }

    /// Scales row `i` of `a` by `w[i]`, with `w: n x 1`.
    pub fn mul_rows(&mut self, a: Var, w: Var) -> Result<Var> {
        let (sa, sw) = (self.shape(a), self.shape(w));
        if sw != (sa.0, 1) {
            return Err(shape_err("mul_rows", sa, sw));
        }
        let mut out = self.value(a).clone();
        let wv = self.value(w).data().to_vec();
        for (r, &k) in wv.iter().enumerate() {
            out.row_mut(r).iter_mut().for_each(|x| *x *= k);
        }
        let ng = self.ng(a) || self.ng(w);
        Ok(self.push(out, Op::MulRows(a, w), ng))
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for r in 0..out.rows() {
            softmax_in_place(out.row_mut(r));
        }
        let ng = self.ng(a);
        self.push(out, Op::RowSoftmax(a), ng)
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let (c, k) = (T::of(GELU_C), T::of(GELU_A));
        let half = T::of(0.5);
        let out = self
            .value(a)
            .map(|x| half * x * (T::one() + (c * (x + k * x * x * x)).tanh()));
        let ng = self.ng(a);
        self.push(out, Op::Gelu(a), ng)
    }

    /// Scales each row to unit L2 norm; all-zero rows stay zero.
    pub fn l2_normalize(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let n = crate::scalar::norm(row);
            if n > T::zero() {
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
        let ng = self.ng(a);
        self.push(out, Op::L2Normalize(a), ng)
    }

    /// Row-wise inner product: `n x d, n x d -> n x 1`. On `1 x d` inputs
    /// this is the plain dot product.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err("dot", sa, sb));
        }
        let (va, vb) = (self.value(a), self.value(b));
        let data = (0..sa.0)
            .map(|r| crate::scalar::dot(va.row(r), vb.row(r)))
            .collect();
        let out = Tensor::new(sa.0, 1, data)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::RowDot(a, b), ng))
    }

    /// Side-by-side concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|&p| self.shape(p).0)
            .ok_or_else(|| Error::shape("concat", "no inputs"))?;
        if let Some(&p) = parts.iter().find(|&&p| self.shape(p).0 != rows) {
            return Err(shape_err("concat", (rows, 0), self.shape(p)));
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut at = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                out.row_mut(r)[at..at + src.len()].copy_from_slice(src);
                at += src.len();
            }
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), ng))
    }

    /// Stacks inputs vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts
            .first()
            .map(|&p| self.shape(p).1)
            .ok_or_else(|| Error::shape("concat_rows", "no inputs"))?;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.1 != cols {
                return Err(shape_err("concat_rows", (0, cols), s));
            }
            rows += s.0;
            data.extend_from_slice(self.value(p).data());
        }
        let out = Tensor::new(rows, cols, data)?;
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), ng))
    }

    /// Block-diagonal matrix with the inputs on the diagonal.
    pub fn block_diag(&mut self, blocks: &[Var]) -> Result<Var> {
        if blocks.is_empty() {
            return Err(Error::shape("block_diag", "no inputs"));
        }
        let rows: usize = blocks.iter().map(|&b| self.shape(b).0).sum();
        let cols: usize = blocks.iter().map(|&b| self.shape(b).1).sum();
        let mut out = Tensor::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for &b in blocks {
            let v = self.value(b);
            for r in 0..v.rows() {
                out.row_mut(r0 + r)[c0..c0 + v.cols()].copy_from_slice(v.row(r));
            }
            r0 += v.rows();
            c0 += v.cols();
        }
        let ng = blocks.iter().any(|&b| self.ng(b));
        Ok(self.push(out, Op::BlockDiag(blocks.to_vec()), ng))
    }

    /// Row-wise `log(sum(exp(row)))`, `n x m -> n x 1`.
    pub fn log_sum_exp(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let data = (0..v.rows()).map(|r| lse(v.row(r))).collect();
        let out = Tensor::new(v.rows(), 1, data).expect("shape");
        let ng = self.ng(a);
        self.push(out, Op::LogSumExp(a), ng)
    }

    /// Rows of `a` in the order given by `idx` (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, idx: Arc<[usize]>) -> Result<Var> {
        let v = self.value(a);
        let cols = v.cols();
        let mut data = Vec::with_capacity(idx.len() * cols);
        for &i in idx.iter() {
            if i >= v.rows() {
                return Err(Error::shape(
                    "gather_rows",
                    format!("row {i} out of {}", v.rows()),
                ));
            }
            data.extend_from_slice(v.row(i));
        }
        let out = Tensor::new(idx.len(), cols, data)?;
        let ng = self.ng(a);
        Ok(self.push(out, Op::GatherRows(a, idx), ng))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if start + len > c {
            return Err(Error::shape(
                "slice_cols",
                format!("{start}..{} of {c} columns", start + len),
            ));
        }
        let v = self.value(a);
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&v.row(i)[start..start + len]);
        }
        let out = Tensor::new(r, len, data)?;
        let ng = self.ng(a);
        Ok(self.push(out, Op::SliceCols(a, start), ng))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let out = Tensor::new(rows, cols, self.value(a).data().to_vec())?;
        let ng = self.ng(a);
        Ok(self.push(out, Op::Reshape(a), ng))
    }

    /// Softmax of each column of an `E x c` matrix within each segment of
    /// rows `offsets[s]..offsets[s + 1]`.
    pub fn segment_softmax(&mut self, a: Var, offsets: Arc<[usize]>) -> Result<Var> {
        let (r, c) = self.shape(a);
        check_offsets("segment_softmax", &offsets, r)?;
        let mut out = self.value(a).clone();
        let mut col = Vec::new();
        for w in offsets.windows(2) {
            for j in 0..c {
                col.clear();
                col.extend((w[0]..w[1]).map(|e| out.get(e, j)));
                softmax_in_place(&mut col);
                for (e, &x) in (w[0]..w[1]).zip(&col) {
                    out.row_mut(e)[j] = x;
                }
            }
        }
        let ng = self.ng(a);
        Ok(self.push(out, Op::SegmentSoftmax(a, offsets), ng))
    }

    /// Sums the rows of each segment: `E x c -> S x c`.
    pub fn segment_sum(&mut self, a: Var, offsets: Arc<[usize]>) -> Result<Var> {
        let (r, c) = self.shape(a);
        check_offsets("segment_sum", &offsets, r)?;
        let v = self.value(a);
        let mut out = Tensor::zeros(offsets.len() - 1, c);
        for (s, w) in offsets.windows(2).enumerate() {
            let orow = out.row_mut(s);
            for e in w[0]..w[1] {
                for (o, x) in orow.iter_mut().zip(v.row(e)) {
                    *o += *x;
                }
            }
        }
        let ng = self.ng(a);
        Ok(self.push(out, Op::SegmentSum(a, offsets), ng))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum();
        let ng = self.ng(a);
        self.push(Tensor::scalar(s), Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s: T = v.data().iter().copied().sum();
        let m = s / T::of(v.len() as f64);
        let ng = self.ng(a);
        self.push(Tensor::scalar(m), Op::Mean(a), ng)
    }

    /// Reverse pass from the `1 x 1` value `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(Error::shape("backward", format!("loss is {r}x{c}, not scalar")));
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(T::one()));
        for i in (0..n).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                grads[i] = None;
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            self.pullback(i, &g, &mut grads);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn acc(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.ng(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn pullback(&self, i: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let y = &self.nodes[i].value;
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (n, k, m) = (va.rows(), va.cols(), vb.cols());
                if self.ng(*a) {
                    let mut ga = Tensor::zeros(n, k);
                    gemm_nt_acc(g.data(), vb.data(), ga.data_mut(), n, m, k);
                    self.acc(grads, *a, ga);
                }
                if self.ng(*b) {
                    let mut gb = Tensor::zeros(k, m);
                    gemm_tn_acc(va.data(), g.data(), gb.data_mut(), n, k, m);
                    self.acc(grads, *b, gb);
                }
            }
            Op::Add(a, b) => {
                self.acc(grads, *a, g.clone());
                self.acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, g.clone());
                self.acc(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.ng(*a) {
                    self.acc(grads, *a, elementwise(g, vb, |x, y| x * y));
                }
                if self.ng(*b) {
                    self.acc(grads, *b, elementwise(g, va, |x, y| x * y));
                }
            }
            Op::Scale(a, s) => self.acc(grads, *a, g.map(|x| x * *s)),
            Op::ScaleBy(a, s) => {
                let va = self.value(*a);
                let k = self.value(*s).item();
                if self.ng(*a) {
                    self.acc(grads, *a, g.map(|x| x * k));
                }
                if self.ng(*s) {
                    let ds = crate::scalar::dot(g.data(), va.data());
                    self.acc(grads, *s, Tensor::scalar(ds));
                }
            }
            Op::MulRows(a, w) => {
                let (va, vw) = (self.value(*a), self.value(*w));
                if self.ng(*a) {
                    let mut ga = g.clone();
                    for r in 0..ga.rows() {
                        let k = vw.data()[r];
                        ga.row_mut(r).iter_mut().for_each(|x| *x *= k);
                    }
                    self.acc(grads, *a, ga);
                }
                if self.ng(*w) {
                    let data = (0..va.rows())
                        .map(|r| crate::scalar::dot(g.row(r), va.row(r)))
                        .collect();
                    self.acc(grads, *w, Tensor::new(va.rows(), 1, data).expect("shape"));
                }
            }
            Op::RowSoftmax(a) => {
                let mut ga = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    softmax_pullback(y.row(r), g.row(r), ga.row_mut(r));
                }
                self.acc(grads, *a, ga);
            }
            Op::Gelu(a) => {
                let (c, k) = (T::of(GELU_C), T::of(GELU_A));
                let half = T::of(0.5);
                let three = T::of(3.0);
                let ga = elementwise(g, self.value(*a), |gv, x| {
                    let t = (c * (x + k * x * x * x)).tanh();
                    let d = half * (T::one() + t)
                        + half * x * (T::one() - t * t) * c * (T::one() + three * k * x * x);
                    gv * d
                });
                self.acc(grads, *a, ga);
            }
            Op::L2Normalize(a) => {
                let va = self.value(*a);
                let mut ga = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let n = crate::scalar::norm(va.row(r));
                    if n == T::zero() {
                        continue;
                    }
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let yg = crate::scalar::dot(yr, gr);
                    for ((o, &yv), &gv) in ga.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *o = (gv - yv * yg) / n;
                    }
                }
                self.acc(grads, *a, ga);
            }
            Op::RowDot(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let scale_rows = |v: &Tensor<T>| {
                    let mut out = v.clone();
                    for r in 0..out.rows() {
                        let k = g.data()[r];
                        out.row_mut(r).iter_mut().for_each(|x| *x *= k);
                    }
                    out
                };
                if self.ng(*a) {
                    self.acc(grads, *a, scale_rows(vb));
                }
                if self.ng(*b) {
                    self.acc(grads, *b, scale_rows(va));
                }
            }
            Op::ConcatCols(parts) => {
                let mut at = 0;
                for &p in parts {
                    let (rows, cols) = self.shape(p);
                    if self.ng(p) {
                        let mut gp = Tensor::zeros(rows, cols);
                        for r in 0..rows {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[at..at + cols]);
                        }
                        self.acc(grads, p, gp);
                    }
                    at += cols;
                }
            }
            Op::ConcatRows(parts) => {
                let mut at = 0;
                for &p in parts {
                    let (rows, cols) = self.shape(p);
                    if self.ng(p) {
                        let data = g.data()[at * cols..(at + rows) * cols].to_vec();
                        self.acc(grads, p, Tensor::new(rows, cols, data).expect("shape"));
                    }
                    at += rows;
                }
            }
            Op::BlockDiag(blocks) => {
                let (mut r0, mut c0) = (0, 0);
                for &b in blocks {
                    let (rows, cols) = self.shape(b);
                    if self.ng(b) {
                        let mut gb = Tensor::zeros(rows, cols);
                        for r in 0..rows {
                            gb.row_mut(r).copy_from_slice(&g.row(r0 + r)[c0..c0 + cols]);
                        }
                        self.acc(grads, b, gb);
                    }
                    r0 += rows;
                    c0 += cols;
                }
            }
            Op::LogSumExp(a) => {
                let va = self.value(*a);
                let mut ga = va.clone();
                for r in 0..ga.rows() {
                    let row = ga.row_mut(r);
                    softmax_in_place(row);
                    let k = g.data()[r];
                    row.iter_mut().for_each(|x| *x *= k);
                }
                self.acc(grads, *a, ga);
            }
            Op::GatherRows(a, idx) => {
                let (rows, cols) = self.shape(*a);
                let mut ga = Tensor::zeros(rows, cols);
                for (j, &src) in idx.iter().enumerate() {
                    for (o, x) in ga.row_mut(src).iter_mut().zip(g.row(j)) {
                        *o += *x;
                    }
                }
                self.acc(grads, *a, ga);
            }
            Op::SliceCols(a, start) => {
                let (rows, cols) = self.shape(*a);
                let len = y.cols();
                let mut ga = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    ga.row_mut(r)[*start..*start + len].copy_from_slice(g.row(r));
                }
                self.acc(grads, *a, ga);
            }
            Op::Reshape(a) => {
                let (rows, cols) = self.shape(*a);
                self.acc(grads, *a, Tensor::new(rows, cols, g.data().to_vec()).expect("shape"));
            }
            Op::SegmentSoftmax(a, offsets) => {
                let (rows, cols) = y.shape();
                let mut ga = Tensor::zeros(rows, cols);
                for w in offsets.windows(2) {
                    for j in 0..cols {
                        let mut yg = T::zero();
                        for e in w[0]..w[1] {
                            yg += y.get(e, j) * g.get(e, j);
                        }
                        for e in w[0]..w[1] {
                            ga.row_mut(e)[j] = y.get(e, j) * (g.get(e, j) - yg);
                        }
                    }
                }
                self.acc(grads, *a, ga);
            }
            Op::SegmentSum(a, offsets) => {
                let (rows, cols) = self.shape(*a);
                let mut ga = Tensor::zeros(rows, cols);
                for (s, w) in offsets.windows(2).enumerate() {
                    for e in w[0]..w[1] {
                        ga.row_mut(e).copy_from_slice(g.row(s));
                    }
                }
                self.acc(grads, *a, ga);
            }
            Op::Sum(a) => {
                let (rows, cols) = self.shape(*a);
                let k = g.item();
                self.acc(grads, *a, Tensor::new(rows, cols, vec![k; rows * cols]).expect("shape"));
            }
            Op::Mean(a) => {
                let (rows, cols) = self.shape(*a);
                let k = g.item() / T::of((rows * cols) as f64);
                self.acc(grads, *a, Tensor::new(rows, cols, vec![k; rows * cols]).expect("shape"));
            }
        }
    }
}

fn elementwise<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.rows(), a.cols(), data).expect("same shape")
}

fn lse<T: Scalar>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    let s: T = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

fn softmax_in_place<T: Scalar>(xs: &mut [T]) {
    if xs.is_empty() {
        return;
    }
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    let mut s = T::zero();
    for x in xs.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in xs.iter_mut() {
        *x /= s;
    }
}

fn softmax_pullback<T: Scalar>(y: &[T], g: &[T], out: &mut [T]) {
    let yg = crate::scalar::dot(y, g);
    for ((o, &yv), &gv) in out.iter_mut().zip(y).zip(g) {
        *o = yv * (gv - yg);
    }
}
