//! Two-hidden-layer perceptron with logistic units.
//!
//! Every neuron computes `φ(Σ w·x − bias)` with `φ(v) = 1 / (1 + e^{−αv})`.
//! Parameters are stored flat, layer by layer: first-layer weights
//! (row-major, one row per neuron), first-layer biases, then the same for the
//! second hidden layer and the output neuron.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Perceptron {
    inputs: usize,
    hidden: (usize, usize),
    slope: f64,
    params: Vec<f64>,
}

/// Offsets of each block inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    len: usize,
}

impl Layout {
    fn new(inputs: usize, (h1, h2): (usize, usize)) -> Self {
        let w1 = 0;
        let b1 = w1 + inputs * h1;
        let w2 = b1 + h1;
        let b2 = w2 + h1 * h2;
        let w3 = b2 + h2;
        let b3 = w3 + h2;
        Self { w1, b1, w2, b2, w3, b3, len: b3 + 1 }
    }
}

pub fn parameter_count(inputs: usize, hidden: (usize, usize)) -> usize {
    Layout::new(inputs, hidden).len
}

impl Perceptron {
    pub fn zeros(inputs: usize, hidden: (usize, usize), slope: f64) -> Self {
        Self { inputs, hidden, slope, params: vec![0.0; parameter_count(inputs, hidden)] }
    }

    /// All weights and biases drawn from `U[-range, range]`.
    pub fn random(inputs: usize, hidden: (usize, usize), slope: f64, range: f64, rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(inputs, hidden, slope);
        if range > 0.0 {
            for p in &mut net.params {
                *p = rng.random_range(-range..=range);
            }
        }
        net
    }

    pub fn from_params(inputs: usize, hidden: (usize, usize), slope: f64, params: Vec<f64>) -> Option<Self> {
        (params.len() == parameter_count(inputs, hidden)).then_some(Self { inputs, hidden, slope, params })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> (usize, usize) {
        self.hidden
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn max_abs_param(&self) -> f64 {
        self.params.iter().fold(0.0, |m, p| m.max(p.abs()))
    }

    fn layout(&self) -> Layout {
        Layout::new(self.inputs, self.hidden)
    }

    fn phi(&self, v: f64) -> f64 {
        1.0 / (1.0 + (-self.slope * v).exp())
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.inputs, "input width");
        let l = self.layout();
        let (h1, _) = self.hidden;
        let mut y1 = [0.0; 16];
        let y1 = self.first_layer(x, &mut y1[..h1.min(16)], l);
        self.upper_layers(y1, l)
    }

    /// `Q` for a fixed state and several values of the last input. The state
    /// part of the first layer is computed once.
    pub fn forward_last_input(&self, state: &[f64], last: &[f64], out: &mut Vec<f64>) {
        assert_eq!(state.len() + 1, self.inputs, "state width");
        let l = self.layout();
        let (h1, _) = self.hidden;
        let n = self.inputs;
        let mut partial = vec![0.0; h1];
        for (j, p) in partial.iter_mut().enumerate() {
            let row = &self.params[l.w1 + j * n..l.w1 + j * n + n - 1];
            *p = row.iter().zip(state).map(|(w, x)| w * x).sum::<f64>() - self.params[l.b1 + j];
        }
        out.clear();
        let mut y1 = vec![0.0; h1];
        for &u in last {
            for j in 0..h1 {
                y1[j] = self.phi(partial[j] + self.params[l.w1 + j * n + n - 1] * u);
            }
            out.push(self.upper_layers(&y1, l));
        }
    }

    fn first_layer<'a>(&self, x: &[f64], buf: &'a mut [f64], l: Layout) -> &'a [f64] {
        let n = self.inputs;
        let (h1, _) = self.hidden;
        if buf.len() < h1 {
            unreachable!("hidden layer wider than buffer");
        }
        for j in 0..h1 {
            let row = &self.params[l.w1 + j * n..l.w1 + (j + 1) * n];
            let v = row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() - self.params[l.b1 + j];
            buf[j] = self.phi(v);
        }
        &buf[..h1]
    }

    fn upper_layers(&self, y1: &[f64], l: Layout) -> f64 {
        let (h1, h2) = self.hidden;
        let mut v3 = -self.params[l.b3];
        for k in 0..h2 {
            let row = &self.params[l.w2 + k * h1..l.w2 + (k + 1) * h1];
            let v = row.iter().zip(y1).map(|(w, y)| w * y).sum::<f64>() - self.params[l.b2 + k];
            v3 += self.params[l.w3 + k] * self.phi(v);
        }
        self.phi(v3)
    }

    /// Output and its gradient with respect to every parameter.
    pub fn gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(x.len(), self.inputs, "input width");
        let l = self.layout();
        let (h1, h2) = self.hidden;
        let n = self.inputs;
        let a = self.slope;

        let y1: Vec<f64> = (0..h1)
            .map(|j| {
                let row = &self.params[l.w1 + j * n..l.w1 + (j + 1) * n];
                self.phi(row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() - self.params[l.b1 + j])
            })
            .collect();
        let y2: Vec<f64> = (0..h2)
            .map(|k| {
                let row = &self.params[l.w2 + k * h1..l.w2 + (k + 1) * h1];
                self.phi(row.iter().zip(&y1).map(|(w, y)| w * y).sum::<f64>() - self.params[l.b2 + k])
            })
            .collect();
        let v3 = (0..h2).map(|k| self.params[l.w3 + k] * y2[k]).sum::<f64>() - self.params[l.b3];
        let out = self.phi(v3);

        let mut g = vec![0.0; l.len];
        // δ = ∂out/∂v at each neuron.
        let d3 = a * out * (1.0 - out);
        g[l.b3] = -d3;
        let mut d2 = vec![0.0; h2];
        for k in 0..h2 {
            g[l.w3 + k] = d3 * y2[k];
            d2[k] = d3 * self.params[l.w3 + k] * a * y2[k] * (1.0 - y2[k]);
            g[l.b2 + k] = -d2[k];
            for j in 0..h1 {
                g[l.w2 + k * h1 + j] = d2[k] * y1[j];
            }
        }
        for j in 0..h1 {
            let back: f64 = (0..h2).map(|k| d2[k] * self.params[l.w2 + k * h1 + j]).sum();
            let d1 = back * a * y1[j] * (1.0 - y1[j]);
            g[l.b1 + j] = -d1;
            for (i, xi) in x.iter().enumerate() {
                g[l.w1 + j * n + i] = d1 * xi;
            }
        }
        (out, g)
    }

    /// `θ ← θ + step · ∇Q(x)`; returns the output before the step.
    pub fn step_towards(&mut self, x: &[f64], target: f64, learning_rate: f64) -> f64 {
        let (q, g) = self.gradient(x);
        let scale = learning_rate * (target - q);
        if scale != 0.0 {
            for (p, gi) in self.params.iter_mut().zip(&g) {
                *p += scale * gi;
            }
        }
        q
    }

    /// Swaps two first-hidden-layer neurons together with all their weights.
    pub fn swap_first_hidden(&mut self, a: usize, b: usize) {
        let l = self.layout();
        let n = self.inputs;
        let (h1, h2) = self.hidden;
        for i in 0..n {
            self.params.swap(l.w1 + a * n + i, l.w1 + b * n + i);
        }
        self.params.swap(l.b1 + a, l.b1 + b);
        for k in 0..h2 {
            self.params.swap(l.w2 + k * h1 + a, l.w2 + k * h1 + b);
        }
    }
}
