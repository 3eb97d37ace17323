use super::{Gradients, NetError, Network};

/// Bias-corrected Adam moments for one network.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        let zeros: Vec<Vec<f64>> = net.params().iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one Adam update to `net`. Non-finite gradients leave both the
    /// network and the optimizer state untouched.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients, learning_rate: f64) -> Result<(), NetError> {
        let mut params = net.params_mut();
        if grads.0.len() != params.len()
            || grads.0.iter().zip(&params).any(|(g, p)| g.shape() != p.shape())
        {
            return Err(NetError::GradientShape);
        }
        if !grads.is_finite() {
            return Err(NetError::NonFinite("gradient"));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(&grads.0)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((w, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximator::{LayerSpec, Tensor};

    fn scalar_net() -> Network {
        Network::build(&[LayerSpec::linear(1, 1)], &[1], 0).unwrap()
    }

    fn grads(w: f64, b: f64) -> Gradients {
        Gradients(vec![
            Tensor::new(vec![1, 1], vec![w]).unwrap(),
            Tensor::new(vec![1], vec![b]).unwrap(),
        ])
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut net = scalar_net();
        let before: Vec<f64> = net.params().iter().flat_map(|p| p.data().to_vec()).collect();
        let mut adam = AdamState::new(&net);
        adam.step(&mut net, &grads(0.0, 0.0), 1e-3).unwrap();
        let after: Vec<f64> = net.params().iter().flat_map(|p| p.data().to_vec()).collect();
        assert_eq!(before, after);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        for g in [2.5, -0.01, 300.0] {
            let mut net = scalar_net();
            let w0 = net.params()[0].data()[0];
            let mut adam = AdamState::new(&net);
            adam.step(&mut net, &grads(g, 0.0), 0.01).unwrap();
            let moved = net.params()[0].data()[0] - w0;
            let expected = -0.01 * g / (g.abs() + 1e-8);
            assert!((moved - expected).abs() < 1e-15, "{moved} vs {expected}");
        }
    }

    #[test]
    fn constant_gradient_moves_monotonically() {
        let mut net = scalar_net();
        let mut adam = AdamState::new(&net);
        let w0 = net.params()[0].data()[0];
        adam.step(&mut net, &grads(1.0, 0.0), 0.1).unwrap();
        let w1 = net.params()[0].data()[0];
        adam.step(&mut net, &grads(1.0, 0.0), 0.1).unwrap();
        let w2 = net.params()[0].data()[0];
        assert!(w1 < w0 && w2 < w1);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut net = scalar_net();
        let before = net.params()[0].data()[0];
        let mut adam = AdamState::new(&net);
        assert!(adam.step(&mut net, &grads(f64::NAN, 0.0), 0.1).is_err());
        assert_eq!(adam.step_count(), 0);
        assert_eq!(net.params()[0].data()[0], before);
    }
}
