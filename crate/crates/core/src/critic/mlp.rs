use rand::Rng;

use crate::scalar::Scalar;

/// Two-layer perceptron: `sigmoid(W2 relu(W1 x + b1) + b2)`. Weights are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
}

/// Gradient with the same layout as [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Mlp {
            input,
            hidden,
            output,
            w1: vec![T::zero(); hidden * input],
            b1: vec![T::zero(); hidden],
            w2: vec![T::zero(); output * hidden],
            b2: vec![T::zero(); output],
        }
    }

    /// He-uniform hidden layer, Glorot-uniform output layer, zero biases.
    pub fn init<R: Rng>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(input, hidden, output);
        let a1 = (6.0 / input.max(1) as f64).sqrt();
        let a2 = (6.0 / (hidden + output) as f64).sqrt();
        for w in m.w1.iter_mut() {
            *w = T::of(rng.gen_range(-a1..a1));
        }
        for w in m.w2.iter_mut() {
            *w = T::of(rng.gen_range(-a2..a2));
        }
        m
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    fn hidden_pre(&self, x: &[T]) -> Vec<T> {
        (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.input..(j + 1) * self.input];
                row.iter().zip(x).fold(self.b1[j], |acc, (&w, &v)| acc + w * v)
            })
            .collect()
    }

    fn output_pre(&self, h: &[T]) -> Vec<T> {
        (0..self.output)
            .map(|k| {
                let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
                row.iter().zip(h).fold(self.b2[k], |acc, (&w, &v)| acc + w * v)
            })
            .collect()
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.input);
        let h: Vec<T> = self.hidden_pre(x).into_iter().map(|z| z.max(T::zero())).collect();
        self.output_pre(&h).into_iter().map(sigmoid).collect()
    }

    /// Mean squared error over samples and output components.
    pub fn mse(&self, xs: &[Vec<T>], ys: &[Vec<T>]) -> T {
        if xs.is_empty() {
            return T::zero();
        }
        let mut total = T::zero();
        for (x, y) in xs.iter().zip(ys) {
            for (p, t) in self.forward(x).into_iter().zip(y) {
                total += (p - *t) * (p - *t);
            }
        }
        total / T::of((xs.len() * self.output) as f64)
    }

    /// Loss and gradient of [`Mlp::mse`] on the given samples.
    pub fn gradients(&self, xs: &[&[T]], ys: &[&[T]]) -> (T, Gradients<T>) {
        let mut g = Gradients {
            w1: vec![T::zero(); self.w1.len()],
            b1: vec![T::zero(); self.b1.len()],
            w2: vec![T::zero(); self.w2.len()],
            b2: vec![T::zero(); self.b2.len()],
        };
        let scale = T::of(1.0 / (xs.len().max(1) * self.output) as f64);
        let two = T::of(2.0);
        let mut loss = T::zero();
        for (x, y) in xs.iter().zip(ys) {
            let z1 = self.hidden_pre(x);
            let h: Vec<T> = z1.iter().map(|&z| z.max(T::zero())).collect();
            let out: Vec<T> = self.output_pre(&h).into_iter().map(sigmoid).collect();
            let mut dh = vec![T::zero(); self.hidden];
            for k in 0..self.output {
                let err = out[k] - y[k];
                loss += err * err;
                let dz = two * err * out[k] * (T::one() - out[k]) * scale;
                g.b2[k] += dz;
                for j in 0..self.hidden {
                    g.w2[k * self.hidden + j] += dz * h[j];
                    dh[j] += dz * self.w2[k * self.hidden + j];
                }
            }
            for j in 0..self.hidden {
                if z1[j] <= T::zero() {
                    continue;
                }
                g.b1[j] += dh[j];
                for i in 0..self.input {
                    g.w1[j * self.input + i] += dh[j] * x[i];
                }
            }
        }
        (loss * scale, g)
    }

    pub fn params_mut(&mut self) -> [&mut Vec<T>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

impl<T: Scalar> Gradients<T> {
    pub fn parts(&self) -> [&Vec<T>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }
}

/// Adam optimizer state for one [`Mlp`].
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: i32,
    m: [Vec<T>; 4],
    v: [Vec<T>; 4],
}

impl<T: Scalar> Adam<T> {
    pub fn new(model: &Mlp<T>, lr: f64) -> Self {
        let zeros = |n: usize| vec![T::zero(); n];
        let shape = [model.w1.len(), model.b1.len(), model.w2.len(), model.b2.len()];
        Adam {
            lr: T::of(lr),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            step: 0,
            m: shape.map(zeros),
            v: shape.map(zeros),
        }
    }

    pub fn update(&mut self, model: &mut Mlp<T>, grad: &Gradients<T>) {
        self.step += 1;
        let c1 = T::one() - self.beta1.powi(self.step);
        let c2 = T::one() - self.beta2.powi(self.step);
        let state = self.m.iter_mut().zip(self.v.iter_mut());
        for ((params, g), (m, v)) in model.params_mut().into_iter().zip(grad.parts()).zip(state) {
            for i in 0..params.len() {
                m[i] = self.beta1 * m[i] + (T::one() - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (T::one() - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_outputs_one_half() {
        let m = Mlp::<f64>::zeros(4, 3, 3);
        assert_eq!(m.forward(&[1.0, -2.0, 3.0, 0.5]), vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn hand_set_two_by_two() {
        let m = Mlp {
            input: 2,
            hidden: 2,
            output: 2,
            w1: vec![1.0, -1.0, 0.5, 2.0],
            b1: vec![0.0, -1.0],
            w2: vec![1.0, 0.5, -1.0, 2.0],
            b2: vec![0.1, 0.0],
        };
        let x = [2.0, 1.0];
        // h = relu([2 - 1, 1 + 2 - 1]) = [1, 2]
        // z = [1 + 1 + 0.1, -1 + 4] = [2.1, 3]
        let want = [1.0 / (1.0 + (-2.1f64).exp()), 1.0 / (1.0 + (-3.0f64).exp())];
        let got = m.forward(&x);
        assert!((got[0] - want[0]).abs() < 1e-9 && (got[1] - want[1]).abs() < 1e-9);
    }
}
