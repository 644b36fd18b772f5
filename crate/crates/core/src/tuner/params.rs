use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

/// Shapes of every trainable block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TunerDims {
    pub image_dim: usize,
    pub token_dim: usize,
    pub context_length: usize,
    pub meta_hidden: usize,
}

impl TunerDims {
    /// Meta-net hidden width is `image_dim / 4`, at least 4.
    pub fn new(image_dim: usize, token_dim: usize, context_length: usize) -> Self {
        Self {
            image_dim,
            token_dim,
            context_length,
            meta_hidden: (image_dim / 4).max(4),
        }
    }

    pub fn shape(&self, group: ParamGroup) -> (usize, usize) {
        let (d, n, l, h) = (
            self.image_dim,
            self.token_dim,
            self.context_length,
            self.meta_hidden,
        );
        match group {
            ParamGroup::Context => (l, n),
            ParamGroup::MetaW1 => (h, d),
            ParamGroup::MetaB1 => (1, h),
            ParamGroup::MetaW2 => (n, h),
            ParamGroup::MetaB2 => (1, n),
            ParamGroup::Mu => (1, n),
            ParamGroup::Sigma => (1, n),
            ParamGroup::ImageToText => (d, d),
            ParamGroup::TextToImage => (d, d),
        }
    }
}

/// Trainable blocks, in their persisted order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Context,
    MetaW1,
    MetaB1,
    MetaW2,
    MetaB2,
    Mu,
    Sigma,
    ImageToText,
    TextToImage,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 9] = [
        ParamGroup::Context,
        ParamGroup::MetaW1,
        ParamGroup::MetaB1,
        ParamGroup::MetaW2,
        ParamGroup::MetaB2,
        ParamGroup::Mu,
        ParamGroup::Sigma,
        ParamGroup::ImageToText,
        ParamGroup::TextToImage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Context => "context",
            ParamGroup::MetaW1 => "meta_w1",
            ParamGroup::MetaB1 => "meta_b1",
            ParamGroup::MetaW2 => "meta_w2",
            ParamGroup::MetaB2 => "meta_b2",
            ParamGroup::Mu => "mu",
            ParamGroup::Sigma => "sigma",
            ParamGroup::ImageToText => "w_it",
            ParamGroup::TextToImage => "w_ti",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == name)
    }
}

/// All trainable state: context tokens, meta-net, bias distribution and the
/// two cross-modal linear maps. Gradients and optimizer velocity share this
/// layout.
#[derive(Debug, Clone, PartialEq)]
pub struct TunerParams {
    /// Row `k` is context token `V_k`.
    pub context: Matrix,
    pub meta_w1: Matrix,
    pub meta_b1: Vec<f64>,
    pub meta_w2: Matrix,
    pub meta_b2: Vec<f64>,
    pub mu: Vec<f64>,
    /// Diagonal scale of the bias distribution; its covariance is `diag(σ)²`.
    pub sigma: Vec<f64>,
    /// Image-to-text map.
    pub w_it: Matrix,
    /// Text-to-image map.
    pub w_ti: Matrix,
}

impl TunerParams {
    pub fn zeros(dims: &TunerDims) -> Self {
        let m = |g| {
            let (r, c) = dims.shape(g);
            Matrix::zeros(r, c)
        };
        Self {
            context: m(ParamGroup::Context),
            meta_w1: m(ParamGroup::MetaW1),
            meta_b1: vec![0.0; dims.meta_hidden],
            meta_w2: m(ParamGroup::MetaW2),
            meta_b2: vec![0.0; dims.token_dim],
            mu: vec![0.0; dims.token_dim],
            sigma: vec![0.0; dims.token_dim],
            w_it: m(ParamGroup::ImageToText),
            w_ti: m(ParamGroup::TextToImage),
        }
    }

    /// Context ~ N(0, 0.02²); meta-net weights ~ N(0, 1/fan_in) with zero
    /// biases; μ = 0; σ = 0.01; both maps start at the identity.
    pub fn init(dims: &TunerDims, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(dims);
        let mut r = rng::stream(seed, "tuner.init");
        let (l, n) = dims.shape(ParamGroup::Context);
        p.context = Matrix::from_rows(l, n, rng::normal_vec(&mut r, l * n, 0.02))?;
        let (h, d) = dims.shape(ParamGroup::MetaW1);
        p.meta_w1 = Matrix::from_rows(h, d, rng::normal_vec(&mut r, h * d, 1.0 / (d as f64).sqrt()))?;
        let (n2, h2) = dims.shape(ParamGroup::MetaW2);
        p.meta_w2 = Matrix::from_rows(n2, h2, rng::normal_vec(&mut r, n2 * h2, 1.0 / (h2 as f64).sqrt()))?;
        p.sigma = vec![0.01; dims.token_dim];
        p.w_it = Matrix::identity(dims.image_dim);
        p.w_ti = Matrix::identity(dims.image_dim);
        Ok(p)
    }

    pub fn dims(&self) -> TunerDims {
        TunerDims {
            image_dim: self.w_it.rows(),
            token_dim: self.mu.len(),
            context_length: self.context.rows(),
            meta_hidden: self.meta_b1.len(),
        }
    }

    pub fn group(&self, g: ParamGroup) -> &[f64] {
        match g {
            ParamGroup::Context => self.context.as_slice(),
            ParamGroup::MetaW1 => self.meta_w1.as_slice(),
            ParamGroup::MetaB1 => &self.meta_b1,
            ParamGroup::MetaW2 => self.meta_w2.as_slice(),
            ParamGroup::MetaB2 => &self.meta_b2,
            ParamGroup::Mu => &self.mu,
            ParamGroup::Sigma => &self.sigma,
            ParamGroup::ImageToText => self.w_it.as_slice(),
            ParamGroup::TextToImage => self.w_ti.as_slice(),
        }
    }

    pub fn group_mut(&mut self, g: ParamGroup) -> &mut [f64] {
        match g {
            ParamGroup::Context => self.context.as_mut_slice(),
            ParamGroup::MetaW1 => self.meta_w1.as_mut_slice(),
            ParamGroup::MetaB1 => &mut self.meta_b1,
            ParamGroup::MetaW2 => self.meta_w2.as_mut_slice(),
            ParamGroup::MetaB2 => &mut self.meta_b2,
            ParamGroup::Mu => &mut self.mu,
            ParamGroup::Sigma => &mut self.sigma,
            ParamGroup::ImageToText => self.w_it.as_mut_slice(),
            ParamGroup::TextToImage => self.w_ti.as_mut_slice(),
        }
    }

    pub fn param_count(&self) -> usize {
        ParamGroup::ALL.iter().map(|g| self.group(*g).len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        ParamGroup::ALL
            .iter()
            .all(|g| self.group(*g).iter().all(|x| x.is_finite()))
    }

    /// Little-endian f64 blocks in [`ParamGroup::ALL`] order, each row-major.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.param_count() * 8);
        for g in ParamGroup::ALL {
            for x in self.group(g) {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_le_bytes(dims: &TunerDims, bytes: &[u8]) -> Result<Self> {
        let mut p = Self::zeros(dims);
        let need = p.param_count() * 8;
        if bytes.len() != need {
            return Err(Error::DimMismatch {
                expected: need,
                found: bytes.len(),
            });
        }
        let mut words = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")));
        for g in ParamGroup::ALL {
            for x in p.group_mut(g) {
                *x = words.next().expect("length checked");
            }
        }
        if !p.is_finite() {
            return Err(Error::NonFinite("parameters"));
        }
        Ok(p)
    }
}
