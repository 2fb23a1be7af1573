use rand::Rng;
use rand_distr::StandardNormal;

/// Discrete Ornstein-Uhlenbeck process `x ← x + θ(μ − x) + σ·N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
    pub mu: f64,
    state: Vec<f64>,
}

impl OuNoise {
    pub fn new(dim: usize, theta: f64, sigma: f64, mu: f64) -> Self {
        Self {
            theta,
            sigma,
            mu,
            state: vec![mu; dim],
        }
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn set_state(&mut self, state: Vec<f64>) {
        self.state = state;
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = self.mu);
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[f64] {
        for x in &mut self.state {
            let z: f64 = if self.sigma > 0.0 {
                rng.sample(StandardNormal)
            } else {
                0.0
            };
            *x += self.theta * (self.mu - *x) + self.sigma * z;
        }
        &self.state
    }
}
