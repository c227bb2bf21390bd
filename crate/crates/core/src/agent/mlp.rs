//! Dense feed-forward network with tanh hidden layers and a linear output.
//!
//! Checkpoint layout (little-endian):
//!
//! ```text
//! magic    8 bytes  "PRFQNET1"
//! n        u32      number of layer sizes (input, hidden..., output)
//! sizes    n × u32
//! params   f64 each, layer by layer: weights row-major [out][in], then biases
//! ```

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"PRFQNET1";

#[derive(Debug, Clone, PartialEq)]
struct Dense<T> {
    inputs: usize,
    outputs: usize,
    weights: Vec<T>,
    bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    fn forward_into(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
            let mut z = *b;
            for (w, xi) in row.iter().zip(x) {
                z += *w * *xi;
            }
            out.push(z);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T = f64> {
    layers: Vec<Dense<T>>,
}

/// Gradient buffers with the same shape as an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![T::zero(); l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![T::zero(); l.bias.len()]).collect(),
        }
    }

    /// Flattened in checkpoint order.
    pub fn flatten(&self) -> Vec<T> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.bias)
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

impl<T: Scalar> Mlp<T> {
    /// Glorot-uniform weights, zero biases. `sizes` lists input, hidden, and output widths.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::param("layer sizes", format!("{sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let limit = (6.0 / (inputs + outputs) as f64).sqrt();
                Dense {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs)
                        .map(|_| T::of(rng.gen_range(-limit..limit)))
                        .collect(),
                    bias: vec![T::zero(); outputs],
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened in checkpoint order.
    pub fn params(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::param(
                "params",
                format!("expected {} values, got {}", self.param_count(), params.len()),
            ));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: &[T]) -> Vec<T> {
        assert_eq!(input.len(), self.input_len(), "input width");
        let mut x = input.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            l.forward_into(&x, &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut x, &mut z);
        }
        x
    }

    /// Mean squared error between `Q(s, a)` and `target` over the batch, with its
    /// gradient. Only the chosen action's output receives gradient.
    pub fn td_loss_and_grad(&self, samples: &[(&[T], usize, T)]) -> (T, Gradients<T>) {
        let mut grads = Gradients::zeros_like(self);
        if samples.is_empty() {
            return (T::zero(), grads);
        }
        let n = T::of_usize(samples.len());
        let last = self.layers.len() - 1;
        let mut loss = T::zero();
        let mut acts: Vec<Vec<T>> = Vec::with_capacity(self.layers.len() + 1);
        for &(input, action, target) in samples {
            acts.clear();
            acts.push(input.to_vec());
            for (i, l) in self.layers.iter().enumerate() {
                let mut z = Vec::with_capacity(l.outputs);
                l.forward_into(acts.last().expect("input pushed"), &mut z);
                if i < last {
                    z.iter_mut().for_each(|v| *v = v.tanh());
                }
                acts.push(z);
            }
            let err = acts[last + 1][action] - target;
            loss += err * err;

            // d(mean sq err)/d(output) is nonzero only at the chosen action.
            let mut delta = vec![T::zero(); self.output_len()];
            delta[action] = T::of(2.0) * err / n;
            for i in (0..=last).rev() {
                let l = &self.layers[i];
                let x = &acts[i];
                let gw = &mut grads.weights[i];
                for (j, d) in delta.iter().enumerate() {
                    if *d == T::zero() {
                        continue;
                    }
                    grads.bias[i][j] += *d;
                    let row = &mut gw[j * l.inputs..(j + 1) * l.inputs];
                    for (g, xi) in row.iter_mut().zip(x) {
                        *g += *d * *xi;
                    }
                }
                if i == 0 {
                    break;
                }
                let mut prev = vec![T::zero(); l.inputs];
                for (j, d) in delta.iter().enumerate() {
                    if *d == T::zero() {
                        continue;
                    }
                    let row = &l.weights[j * l.inputs..(j + 1) * l.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += *w * *d;
                    }
                }
                // tanh' = 1 - a^2, with a the stored activation.
                for (p, a) in prev.iter_mut().zip(x) {
                    *p *= T::one() - *a * *a;
                }
                delta = prev;
            }
        }
        (loss / n, grads)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let sizes = self.sizes();
        let mut out = MAGIC.to_vec();
        out.extend((sizes.len() as u32).to_le_bytes());
        for s in &sizes {
            out.extend((*s as u32).to_le_bytes());
        }
        for p in self.params() {
            out.extend(p.as_f64().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.get(..8) != Some(MAGIC.as_slice()) {
            return Err(bad("missing PRFQNET1 magic"));
        }
        let mut pos = 8;
        let u32_at = |pos: &mut usize| -> Result<usize> {
            let b = bytes.get(*pos..*pos + 4).ok_or_else(|| bad("truncated header"))?;
            *pos += 4;
            Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
        };
        let n = u32_at(&mut pos)?;
        if !(2..=64).contains(&n) {
            return Err(bad("implausible layer count"));
        }
        let sizes = (0..n).map(|_| u32_at(&mut pos)).collect::<Result<Vec<_>>>()?;
        if sizes.contains(&0) {
            return Err(bad("zero-width layer"));
        }
        let layers: Vec<Dense<T>> = sizes
            .windows(2)
            .map(|w| Dense {
                inputs: w[0],
                outputs: w[1],
                weights: Vec::new(),
                bias: Vec::new(),
            })
            .collect();
        let count: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let body = &bytes[pos..];
        if body.len() != count * 8 {
            return Err(bad(&format!(
                "expected {count} parameters, found {} bytes",
                body.len()
            )));
        }
        let params: Vec<T> = body
            .chunks_exact(8)
            .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect();
        let mut net = Mlp {
            layers: layers
                .into_iter()
                .map(|l| Dense {
                    weights: vec![T::zero(); l.inputs * l.outputs],
                    bias: vec![T::zero(); l.outputs],
                    ..l
                })
                .collect(),
        };
        net.set_params(&params)?;
        Ok(net)
    }
}

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct Adam<T = f64> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(learning_rate: T, net: &Mlp<T>) -> Self {
        let n = net.param_count();
        Self {
            learning_rate,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            epsilon: T::of(1e-8),
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    pub fn step(&mut self, net: &mut Mlp<T>, grads: &Gradients<T>) {
        self.t = self.t.saturating_add(1);
        let bc1 = T::one() - self.beta1.powi(self.t);
        let bc2 = T::one() - self.beta2.powi(self.t);
        let mut k = 0;
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let pairs = layer
                .weights
                .iter_mut()
                .zip(&grads.weights[i])
                .chain(layer.bias.iter_mut().zip(&grads.bias[i]));
            for (p, g) in pairs {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = self.beta1 * *m + (T::one() - self.beta1) * *g;
                *v = self.beta2 * *v + (T::one() - self.beta2) * *g * *g;
                let update = self.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + self.epsilon);
                *p -= update;
                k += 1;
            }
        }
    }
}
