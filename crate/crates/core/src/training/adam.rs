use super::model::{Gradient, SoftmaxClassifier};

/// Adam with bias correction, one moment pair per parameter.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64, betas: (f64, f64), eps: f64) -> Self {
        Self {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, model: &mut SoftmaxClassifier, grad: &Gradient) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let grads = grad.grid.iter().flat_map(|t| t.iter()).chain(
            grad.layers
                .iter()
                .flat_map(|l| l.weight.iter().chain(l.bias.iter())),
        );
        let moments = self.m.iter_mut().zip(self.v.iter_mut());
        for ((p, &g), (m, v)) in model.params_mut().zip(grads).zip(moments) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut m = SoftmaxClassifier::zeros(1, &[], 2);
        let mut g = Gradient {
            grid: Vec::new(),
            layers: m.layers().to_vec(),
        };
        g.layers[0].weight[(0, 0)] = 3.0;
        g.layers[0].bias[1] = -0.5;
        let mut opt = Adam::new(m.param_count(), 0.01, (0.9, 0.999), 1e-8);
        opt.step(&mut m, &g);
        assert!((m.layers()[0].weight[(0, 0)] + 0.01).abs() < 1e-9);
        assert!((m.layers()[0].bias[1] - 0.01).abs() < 1e-9);
        assert_eq!(m.layers()[0].weight[(0, 1)], 0.0);
    }
}
