use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn unit_rows<T: Scalar>(t: &Tensor<T>) -> Result<Tensor<T>> {
    let mut t = t.clone();
    for r in 0..t.rows() {
        let row = t.row_mut(r);
        let n = crate::scalar::norm(row);
        if n == T::zero() {
            return Err(Error::ZeroVector(format!("row {r}")));
        }
        row.iter_mut().for_each(|x| *x /= n);
    }
    Ok(t)
}

/// Mean InfoNCE over a batch of anchors, on the tape.
///
/// `anchors` is `B x d`; `positives` and each entry of `negatives` are
/// constant `B x d` matrices whose row `i` belongs to anchor `i`. All rows
/// are compared by cosine. With `strict` the positive term is left out of
/// the denominator. Returns the scalar mean and the `B x 1` per-anchor
/// losses.
pub fn infonce_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    anchors: Var,
    positives: &Tensor<T>,
    negatives: &[Tensor<T>],
    tau: T,
    strict: bool,
) -> Result<(Var, Var)> {
    if negatives.is_empty() {
        return Err(Error::Config("at least one negative is required".into()));
    }
    if !(tau > T::zero()) {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    let shape = tape.shape(anchors);
    for t in std::iter::once(positives).chain(negatives) {
        if t.shape() != shape {
            return Err(Error::DimMismatch {
                expected: shape.1,
                found: t.cols(),
            });
        }
    }
    let a = tape.l2_normalize(anchors);
    let p = tape.constant(unit_rows(positives)?);
    let pos = tape.dot(a, p)?;
    let mut cols = Vec::with_capacity(negatives.len() + 1);
    if !strict {
        cols.push(pos);
    }
    for n in negatives {
        let n = tape.constant(unit_rows(n)?);
        cols.push(tape.dot(a, n)?);
    }
    let inv = T::one() / tau;
    let logits = tape.concat(&cols)?;
    let logits = tape.scalar_scale(logits, inv);
    let lse = tape.log_sum_exp(logits);
    let pos = tape.scalar_scale(pos, inv);
    let per_anchor = tape.sub(lse, pos)?;
    Ok((tape.mean(per_anchor), per_anchor))
}

/// InfoNCE for one anchor:
/// `-log(exp(s_p / tau) / (exp(s_p / tau) + sum_j exp(s_j / tau)))` with
/// cosine similarities `s`. `strict` drops `exp(s_p / tau)` from the
/// denominator.
pub fn infonce_loss<T: Scalar>(
    anchor: &[T],
    positive: &[T],
    negatives: &[&[T]],
    tau: T,
    strict: bool,
) -> Result<T> {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::row_vector(anchor));
    let p = Tensor::row_vector(positive);
    let n: Vec<Tensor<T>> = negatives.iter().map(|n| Tensor::row_vector(n)).collect();
    let (loss, _) = infonce_on_tape(&mut tape, a, &p, &n, tau, strict)?;
    Ok(tape.value(loss).item())
}

/// InfoNCE from precomputed similarities `s_p` and `s_j`.
pub fn infonce_from_similarities<T: Scalar>(pos: T, negs: &[T], tau: T, strict: bool) -> Result<T> {
    if negs.is_empty() {
        return Err(Error::Config("at least one negative is required".into()));
    }
    if !(tau > T::zero()) {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    let logits: Vec<T> = (!strict)
        .then_some(pos)
        .into_iter()
        .chain(negs.iter().copied())
        .map(|s| s / tau)
        .collect();
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum = logits.iter().fold(T::zero(), |acc, &l| acc + (l - m).exp());
    Ok(m + sum.ln() - pos / tau)
}
