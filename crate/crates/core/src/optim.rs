//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::params::{Param, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<F>>,
    second: Vec<Vec<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Updates every parameter from its gradient buffer, then zeroes the
    /// gradients. Moment buffers are allocated on the first call and must keep
    /// matching the parameter shapes afterwards.
    pub fn step(&mut self, params: &mut [&mut Param<F>]) -> Result<()> {
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![F::zero(); p.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len()
            || self.first.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len())
        {
            return Err(Error::ShapeMismatch("parameters do not match optimizer state".into()));
        }
        self.step += 1;
        let t = self.step as f64;
        let (b1, b2) = (F::lit(self.beta1), F::lit(self.beta2));
        let c1 = F::lit(1.0 - self.beta1);
        let c2 = F::lit(1.0 - self.beta2);
        let bias1 = F::lit(1.0 - self.beta1.powf(t));
        let bias2 = F::lit(1.0 - self.beta2.powf(t));
        let lr = F::lit(self.lr);
        let eps = F::lit(self.eps);

        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                m[i] = b1 * m[i] + c1 * g;
                v[i] = b2 * v[i] + c2 * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.zero_grad();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> Param<f64> {
        let mut p = Param::zeros(1, 1);
        p.value[0] = x;
        p
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut p = scalar(0.7);
        let mut opt = Adam::new(0.1);
        for _ in 0..5 {
            opt.step(&mut [&mut p]).unwrap();
        }
        assert_eq!(p.value[0], 0.7);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar(1.0);
        p.grad[0] = 3.0;
        let mut opt = Adam::new(0.01);
        opt.step(&mut [&mut p]).unwrap();
        assert!((p.value[0] - (1.0 - 0.01)).abs() < 1e-8);
        assert_eq!(p.grad[0], 0.0);
    }

    #[test]
    fn descends_quadratic() {
        let mut p = scalar(1.0);
        let mut opt = Adam::new(0.1);
        for _ in 0..100 {
            p.grad[0] = 2.0 * p.value[0];
            opt.step(&mut [&mut p]).unwrap();
        }
        assert!(p.value[0].abs() < 0.5);
    }

    #[test]
    fn shape_change_rejected() {
        let mut a = scalar(1.0);
        let mut opt = Adam::new(0.1);
        opt.step(&mut [&mut a]).unwrap();
        let mut b = Param::<f64>::zeros(2, 1);
        assert!(opt.step(&mut [&mut b]).is_err());
    }
}
