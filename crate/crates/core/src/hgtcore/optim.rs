use super::tensor::Tensor;
use crate::scalar::Scalar;

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64, beta1: f64, beta2: f64, params: &[Tensor<T>]) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|p| Tensor::zeros(p.rows(), p.cols()))
                .collect()
        };
        Adam {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// Updates `params` in place. A missing gradient counts as zero.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Option<&Tensor<T>>]) {
        self.step += 1;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let c1 = T::of(1.0 - self.beta1.powi(self.step));
        let c2 = T::of(1.0 - self.beta2.powi(self.step));
        let (lr, eps) = (T::of(self.lr), T::of(self.eps));
        for (i, p) in params.iter_mut().enumerate() {
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let g = grads[i].map(Tensor::data);
            for (j, x) in p.data_mut().iter_mut().enumerate() {
                let gj = g.map_or(T::zero(), |g| g[j]);
                m[j] = b1 * m[j] + (T::one() - b1) * gj;
                v[j] = b2 * v[j] + (T::one() - b2) * gj * gj;
                let mh = m[j] / c1;
                let vh = v[j] / c2;
                *x -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![Tensor::<f64>::row_vector(&[1.0, -2.0])];
        let g = Tensor::row_vector(&[0.5, -3.0]);
        let mut opt = Adam::new(0.1, 0.9, 0.999, &p);
        opt.step(&mut p, &[Some(&g)]);
        // Bias-corrected first step is lr * sign(g).
        assert!((p[0].data()[0] - 0.9).abs() < 1e-6);
        assert!((p[0].data()[1] + 1.9).abs() < 1e-6);
    }

    #[test]
    fn zero_rate_leaves_params() {
        let mut p = vec![Tensor::<f32>::row_vector(&[1.0, -2.0])];
        let before = p.clone();
        let g = Tensor::row_vector(&[0.5, -3.0]);
        let mut opt = Adam::new(0.0, 0.9, 0.999, &p);
        for _ in 0..5 {
            opt.step(&mut p, &[Some(&g)]);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = vec![Tensor::<f64>::row_vector(&[3.0])];
        let mut opt = Adam::new(0.05, 0.9, 0.999, &p);
        for _ in 0..2000 {
            let g = Tensor::row_vector(&[2.0 * (p[0].data()[0] - 1.0)]);
            opt.step(&mut p, &[Some(&g)]);
        }
        assert!((p[0].data()[0] - 1.0).abs() < 1e-3);
    }
}
