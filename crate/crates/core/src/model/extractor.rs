use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{dim_check, Error, Result};
use crate::linalg::Matrix;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    Identity,
    /// Exact GELU, `x * Phi(x)`.
    Gelu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Gelu => 0.5 * x * (1.0 + libm::erf(x * core::f64::consts::FRAC_1_SQRT_2)),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Gelu => {
                let cdf = 0.5 * (1.0 + libm::erf(x * core::f64::consts::FRAC_1_SQRT_2));
                cdf + x * FRAC_1_SQRT_2PI * libm::exp(-0.5 * x * x)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Gelu => "gelu",
        }
    }
}

impl core::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "gelu" => Ok(Activation::Gelu),
            other => Err(Error::Validation(format!("unknown activation {other:?}"))),
        }
    }
}

/// One affine + activation layer: `act(x W^T + b)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Block {
    /// out x in.
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Block {
    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    fn pre_activation(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = x.matmul_t(&self.weight)?;
        z.add_row_broadcast(&self.bias)?;
        Ok(z)
    }
}

/// Architecture of a surrogate extractor, used to initialize one.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExtractorSpec {
    pub input_dim: usize,
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub taps: Vec<usize>,
}

/// Stack of blocks whose tapped outputs are concatenated into the feature.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExtractorParams {
    pub input_dim: usize,
    pub blocks: Vec<Block>,
    /// Strictly increasing block indices whose outputs form the feature.
    pub taps: Vec<usize>,
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct ExtractorTrace {
    pub inputs: Vec<Matrix>,
    pub pre: Vec<Matrix>,
    pub outputs: Vec<Matrix>,
}

impl ExtractorParams {
    /// Seeded initialization: weights `N(0, 1/fan_in)`, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: &ExtractorSpec, rng: &mut R) -> Result<Self> {
        let mut blocks = Vec::with_capacity(spec.widths.len());
        let mut fan_in = spec.input_dim;
        for &width in &spec.widths {
            let scale = 1.0 / libm::sqrt(fan_in as f64);
            let weight =
                Matrix::from_fn(width, fan_in, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
            blocks.push(Block {
                weight,
                bias: alloc::vec![0.0; width],
                activation: spec.activation,
            });
            fan_in = width;
        }
        let params = Self {
            input_dim: spec.input_dim,
            blocks,
            taps: spec.taps.clone(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Validation("extractor needs at least one block".into()));
        }
        let mut dim = self.input_dim;
        for (i, b) in self.blocks.iter().enumerate() {
            dim_check(&format!("extractor block {i} input"), dim, b.input_dim())?;
            dim_check(&format!("extractor block {i} bias"), b.output_dim(), b.bias.len())?;
            dim = b.output_dim();
        }
        if self.taps.is_empty() {
            return Err(Error::Validation("extractor needs at least one tap".into()));
        }
        if self.taps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("extractor taps must be strictly increasing".into()));
        }
        if let Some(&t) = self.taps.iter().find(|&&t| t >= self.blocks.len()) {
            return Err(Error::Validation(format!(
                "tap {t} out of range for {} blocks",
                self.blocks.len()
            )));
        }
        Ok(())
    }

    /// Width of the concatenated feature.
    pub fn feature_dim(&self) -> usize {
        self.taps.iter().map(|&t| self.blocks[t].output_dim()).sum()
    }

    /// Column offset of each tap inside the feature.
    pub(crate) fn tap_offsets(&self) -> Vec<usize> {
        let mut offset = 0;
        self.taps
            .iter()
            .map(|&t| {
                let o = offset;
                offset += self.blocks[t].output_dim();
                o
            })
            .collect()
    }

    /// Features for a batch of inputs. Deterministic: the extractor has no
    /// stochastic layers.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_traced(x)?.1)
    }

    pub(crate) fn forward_traced(&self, x: &Matrix) -> Result<(ExtractorTrace, Matrix)> {
        dim_check("extractor input width", self.input_dim, x.cols())?;
        // only blocks up to the last tap influence the feature
        let depth = self.taps.last().map_or(0, |&t| t + 1);
        let mut trace = ExtractorTrace {
            inputs: Vec::with_capacity(depth),
            pre: Vec::with_capacity(depth),
            outputs: Vec::with_capacity(depth),
        };
        let mut h = x.clone();
        for block in &self.blocks[..depth] {
            let z = block.pre_activation(&h)?;
            let act = block.activation;
            let out = z.map(|v| act.apply(v));
            trace.inputs.push(core::mem::replace(&mut h, out.clone()));
            trace.pre.push(z);
            trace.outputs.push(out);
        }
        let parts: Vec<&Matrix> = self.taps.iter().map(|&t| &trace.outputs[t]).collect();
        let features = Matrix::hconcat(&parts)?;
        Ok((trace, features))
    }
}
