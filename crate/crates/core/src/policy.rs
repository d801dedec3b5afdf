//! Neural gain map: a tanh MLP from normalised flight condition to
//! autopilot gains, optionally squashed into fixed bounds by a sigmoid
//! scaling layer.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix in
//! row-major order (`out × in`) followed by the bias vector. Every layer but
//! the last applies `tanh`; the last is affine.

use nalgebra::DMatrix;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ParamVector = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("parameter vector has length {got}, network expects {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("input has length {got}, network expects {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
}

/// Output bounds enforced by the scaling layer `lower + (upper − lower)·σ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Default for GainBounds {
    fn default() -> Self {
        Self {
            lower: vec![1e-3, 1e-3, 1e-3],
            upper: vec![4.0, 0.2, 2.0],
        }
    }
}

/// Characteristic maxima dividing `(|α|, M, h)` before they enter the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputNormalisers {
    pub alpha_max: f64,
    pub mach_max: f64,
    pub h_max: f64,
}

impl Default for InputNormalisers {
    fn default() -> Self {
        Self {
            alpha_max: std::f64::consts::PI / 6.0,
            mach_max: 4.0,
            h_max: 11_000.0,
        }
    }
}

impl InputNormalisers {
    pub fn normalise(&self, alpha: f64, mach: f64, h: f64) -> [f64; 3] {
        [
            alpha.abs() / self.alpha_max,
            mach / self.mach_max,
            h / self.h_max,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpSpec {
    /// Widths from input to output, e.g. `[3, 10, 3]`.
    pub layer_sizes: Vec<usize>,
    pub scaling: Option<GainBounds>,
    pub normalisers: InputNormalisers,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            layer_sizes: vec![3, 10, 3],
            scaling: Some(GainBounds::default()),
            normalisers: InputNormalisers::default(),
        }
    }
}

/// The three tunable autopilot gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainVector {
    pub k_a: f64,
    pub k_i: f64,
    pub k_r: f64,
}

impl GainVector {
    pub fn to_array(self) -> [f64; 3] {
        [self.k_a, self.k_i, self.k_r]
    }
}

/// Network outputs with Jacobians.
#[derive(Debug, Clone)]
pub struct MlpEval {
    pub output: Vec<f64>,
    /// `n_out × n_in`.
    pub input_jacobian: DMatrix<f64>,
    /// `n_out × n_params`, when requested.
    pub param_jacobian: Option<DMatrix<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl MlpSpec {
    /// Single hidden layer of the given width between 3 inputs and 3 gains.
    pub fn with_hidden(width: usize) -> Self {
        Self {
            layer_sizes: vec![3, width, 3],
            ..Self::default()
        }
    }

    pub fn unscaled(mut self) -> Self {
        self.scaling = None;
        self
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(PolicyError::InvalidSpec(format!(
                "layer sizes {:?} need at least two nonzero entries",
                self.layer_sizes
            )));
        }
        let n = &self.normalisers;
        if !(n.alpha_max > 0.0 && n.mach_max > 0.0 && n.h_max > 0.0) {
            return Err(PolicyError::InvalidSpec(
                "input normalisers must be positive".into(),
            ));
        }
        if let Some(b) = &self.scaling {
            if b.lower.len() != self.n_outputs() || b.upper.len() != self.n_outputs() {
                return Err(PolicyError::InvalidSpec(
                    "bounds length differs from output width".into(),
                ));
            }
            if b.lower
                .iter()
                .zip(&b.upper)
                .any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite())
            {
                return Err(PolicyError::InvalidSpec(
                    "bounds need lower < upper elementwise".into(),
                ));
            }
        }
        Ok(())
    }

    fn check(&self, p: &[f64], input: &[f64]) -> Result<(), PolicyError> {
        self.validate()?;
        if p.len() != self.param_count() {
            return Err(PolicyError::ParamLength {
                expected: self.param_count(),
                got: p.len(),
            });
        }
        if input.len() != self.n_inputs() {
            return Err(PolicyError::InputLength {
                expected: self.n_inputs(),
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Activations of every layer; the last entry is the pre-scaling output.
    fn activations(&self, p: &[f64], input: &[f64]) -> Vec<Vec<f64>> {
        let n_layers = self.layer_sizes.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(input.to_vec());
        let mut off = 0;
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &p[off..off + n_in * n_out];
            let bias = &p[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let prev = &acts[l];
            let next: Vec<f64> = (0..n_out)
                .map(|r| {
                    let z = bias[r]
                        + weights[r * n_in..(r + 1) * n_in]
                            .iter()
                            .zip(prev)
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                    if l + 1 < n_layers {
                        z.tanh()
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(next);
        }
        acts
    }

    /// Output value and its derivative w.r.t. the pre-scaling output.
    fn scale(&self, j: usize, x: f64) -> (f64, f64) {
        match &self.scaling {
            Some(b) => {
                let s = sigmoid(x);
                let width = b.upper[j] - b.lower[j];
                // σ rounds to 0 or 1 for large |x|; keep the interval open.
                let y =
                    (b.lower[j] + width * s).clamp(b.lower[j].next_up(), b.upper[j].next_down());
                (y, width * s * (1.0 - s))
            }
            None => (x, 1.0),
        }
    }

    pub fn evaluate(&self, p: &[f64], input: &[f64]) -> Result<Vec<f64>, PolicyError> {
        self.check(p, input)?;
        let acts = self.activations(p, input);
        Ok(acts
            .last()
            .unwrap()
            .iter()
            .enumerate()
            .map(|(j, &x)| self.scale(j, x).0)
            .collect())
    }

    /// Outputs plus exact Jacobians by reverse accumulation, one sweep per output.
    pub fn evaluate_with_jacobians(
        &self,
        p: &[f64],
        input: &[f64],
        want_params: bool,
    ) -> Result<MlpEval, PolicyError> {
        self.check(p, input)?;
        let acts = self.activations(p, input);
        let n_out = self.n_outputs();
        let n_in = self.n_inputs();
        let n_layers = self.layer_sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for w in self.layer_sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }

        let mut output = Vec::with_capacity(n_out);
        let mut input_jacobian = DMatrix::zeros(n_out, n_in);
        let mut param_jacobian = want_params.then(|| DMatrix::zeros(n_out, p.len()));

        for j in 0..n_out {
            let (y, dy) = self.scale(j, acts[n_layers][j]);
            output.push(y);
            let mut delta = vec![0.0; n_out];
            delta[j] = dy;
            for l in (0..n_layers).rev() {
                let (li, lo) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
                let o = offsets[l];
                if let Some(pj) = param_jacobian.as_mut() {
                    for r in 0..lo {
                        if delta[r] == 0.0 {
                            continue;
                        }
                        for c in 0..li {
                            pj[(j, o + r * li + c)] = delta[r] * acts[l][c];
                        }
                        pj[(j, o + li * lo + r)] = delta[r];
                    }
                }
                let weights = &p[o..o + li * lo];
                let mut back = vec![0.0; li];
                for r in 0..lo {
                    for c in 0..li {
                        back[c] += weights[r * li + c] * delta[r];
                    }
                }
                if l > 0 {
                    for (b, a) in back.iter_mut().zip(&acts[l]) {
                        *b *= 1.0 - a * a;
                    }
                }
                delta = back;
            }
            for c in 0..n_in {
                input_jacobian[(j, c)] = delta[c];
            }
        }
        Ok(MlpEval {
            output,
            input_jacobian,
            param_jacobian,
        })
    }
}

fn gains(out: &[f64]) -> Result<GainVector, PolicyError> {
    match out {
        [k_a, k_i, k_r] => Ok(GainVector {
            k_a: *k_a,
            k_i: *k_i,
            k_r: *k_r,
        }),
        _ => Err(PolicyError::InvalidSpec(format!(
            "gain map needs 3 outputs, got {}",
            out.len()
        ))),
    }
}

pub fn mlp_forward(spec: &MlpSpec, p: &[f64], input: &[f64]) -> Result<GainVector, PolicyError> {
    gains(&spec.evaluate(p, input)?)
}

pub fn mlp_param_jacobian(
    spec: &MlpSpec,
    p: &[f64],
    input: &[f64],
) -> Result<DMatrix<f64>, PolicyError> {
    Ok(spec
        .evaluate_with_jacobians(p, input, true)?
        .param_jacobian
        .unwrap())
}

pub fn mlp_input_jacobian(
    spec: &MlpSpec,
    p: &[f64],
    input: &[f64],
) -> Result<DMatrix<f64>, PolicyError> {
    Ok(spec
        .evaluate_with_jacobians(p, input, false)?
        .input_jacobian)
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(spec: &MlpSpec, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Vec::with_capacity(spec.param_count());
    for w in spec.layer_sizes.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let bound = glorot_bound(n_in, n_out);
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        p.extend((0..n_in * n_out).map(|_| dist.sample(&mut rng)));
        p.extend(std::iter::repeat_n(0.0, n_out));
    }
    p
}

pub fn glorot_bound(n_in: usize, n_out: usize) -> f64 {
    (6.0 / (n_in + n_out) as f64).sqrt()
}
