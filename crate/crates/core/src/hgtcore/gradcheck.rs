use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;
use crate::scalar::Scalar;

/// A scalar function of tensors, expressible at any precision.
pub trait TapeFn {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, inputs: &[Var]) -> Result<Var>;
}

/// Magnitude below which gradient components are compared absolutely.
pub const GRAD_CHECK_FLOOR: f64 = 1e-3;

/// Largest componentwise relative error between the reverse-mode gradient
/// (computed in `T`) and central differences with step `eps` (computed in
/// `f64`). Error is `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn grad_check<T: Scalar, F: TapeFn>(f: &F, inputs: &[Tensor<f64>], eps: f64) -> Result<f64> {
    let mut tape = Tape::<T>::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.cast())).collect();
    let out = f.eval(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let eval_at = |xs: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::<f64>::new();
        let vars: Vec<Var> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f.eval(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };

    let mut worst = 0.0f64;
    let mut xs = inputs.to_vec();
    for (i, &v) in vars.iter().enumerate() {
        let analytic = grads.get(v);
        for j in 0..xs[i].len() {
            let x0 = xs[i].data()[j];
            xs[i].data_mut()[j] = x0 + eps;
            let up = eval_at(&xs)?;
            xs[i].data_mut()[j] = x0 - eps;
            let down = eval_at(&xs)?;
            xs[i].data_mut()[j] = x0;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.data()[j].as_f64();
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
