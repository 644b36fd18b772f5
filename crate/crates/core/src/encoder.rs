//! Frozen text encoders.
//!
//! [`FrozenTextEncoder`] is a seeded surrogate for a vision-language text
//! tower: `e = W₂ · tanh(W₁ · meanpool(tokens) + b₁)`. Its weights never
//! change after construction, and [`DifferentiableEncoder::encode_vjp`] gives
//! exact input gradients so prompt parameters can be tuned through it.
//! [`PrecomputedTextEncoder`] replays stored prototypes (for example real
//! exported text embeddings) keyed by class token.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::rng;

/// A non-empty ordered list of token vectors of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    tokens: Vec<Vec<f64>>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<Vec<f64>>) -> Result<Self> {
        let first = tokens.first().ok_or(Error::EmptyInput)?.len();
        for t in &tokens {
            check_dim(first, t.len())?;
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[Vec<f64>] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_dim(&self) -> usize {
        self.tokens[0].len()
    }

    pub fn mean_pool(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.token_dim()];
        for t in &self.tokens {
            for (a, x) in acc.iter_mut().zip(t) {
                *a += x;
            }
        }
        let n = self.tokens.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

pub trait TextEncoder {
    fn token_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn encode(&self, seq: &TokenSequence) -> Result<Vec<f64>>;
}

pub trait DifferentiableEncoder: TextEncoder {
    /// Gradient of `⟨cotangent, encode(seq)⟩` with respect to every token.
    fn encode_vjp(&self, seq: &TokenSequence, cotangent: &[f64]) -> Result<Vec<Vec<f64>>>;
}

/// Everything needed to rebuild a [`FrozenTextEncoder`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub seed: u64,
    pub token_dim: usize,
    pub hidden: usize,
    pub output_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrozenTextEncoder {
    spec: EncoderSpec,
    w1: Matrix,
    b1: Vec<f64>,
    w2: Matrix,
}

impl FrozenTextEncoder {
    /// Draws `W₁`, `b₁` with std `1/√token_dim` and `W₂` with std `1/√hidden`.
    pub fn new(spec: EncoderSpec) -> Result<Self> {
        if spec.token_dim == 0 || spec.hidden == 0 || spec.output_dim == 0 {
            return Err(Error::BadConfig("encoder dimensions must be positive".into()));
        }
        let mut rng = rng::stream(spec.seed, "frozen-text-encoder");
        let s1 = 1.0 / (spec.token_dim as f64).sqrt();
        let s2 = 1.0 / (spec.hidden as f64).sqrt();
        let w1 = Matrix::from_rows(
            spec.hidden,
            spec.token_dim,
            rng::normal_vec(&mut rng, spec.hidden * spec.token_dim, s1),
        )?;
        let b1 = rng::normal_vec(&mut rng, spec.hidden, s1);
        let w2 = Matrix::from_rows(
            spec.output_dim,
            spec.hidden,
            rng::normal_vec(&mut rng, spec.output_dim * spec.hidden, s2),
        )?;
        Ok(Self { spec, w1, b1, w2 })
    }

    /// Hidden width defaults to the token dimension.
    pub fn with_default_hidden(seed: u64, token_dim: usize, output_dim: usize) -> Result<Self> {
        Self::new(EncoderSpec {
            seed,
            token_dim,
            hidden: token_dim,
            output_dim,
        })
    }

    pub fn spec(&self) -> EncoderSpec {
        self.spec
    }

    pub fn w1(&self) -> &Matrix {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &Matrix {
        &self.w2
    }

    fn hidden_activation(&self, seq: &TokenSequence) -> Result<Vec<f64>> {
        check_dim(self.spec.token_dim, seq.token_dim())?;
        let mut z = self.w1.matvec(&seq.mean_pool())?;
        for (zi, bi) in z.iter_mut().zip(&self.b1) {
            *zi = (*zi + bi).tanh();
        }
        Ok(z)
    }
}

impl TextEncoder for FrozenTextEncoder {
    fn token_dim(&self) -> usize {
        self.spec.token_dim
    }

    fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    fn encode(&self, seq: &TokenSequence) -> Result<Vec<f64>> {
        let a = self.hidden_activation(seq)?;
        self.w2.matvec(&a)
    }
}

impl DifferentiableEncoder for FrozenTextEncoder {
    fn encode_vjp(&self, seq: &TokenSequence, cotangent: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_dim(self.spec.output_dim, cotangent.len())?;
        let a = self.hidden_activation(seq)?;
        let mut g = self.w2.matvec_t(cotangent)?;
        for (gi, ai) in g.iter_mut().zip(&a) {
            *gi *= 1.0 - ai * ai;
        }
        let mut pooled = self.w1.matvec_t(&g)?;
        let n = seq.len() as f64;
        pooled.iter_mut().for_each(|x| *x /= n);
        Ok(vec![pooled; seq.len()])
    }
}

/// One frozen token vector per class, drawn from N(0, 1) per `(seed, class)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTokenTable {
    seed: u64,
    tokens: Vec<Vec<f64>>,
}

impl ClassTokenTable {
    pub fn new(seed: u64, classes: usize, token_dim: usize) -> Self {
        let tokens = (0..classes)
            .map(|c| {
                let mut r = rng::indexed_stream(seed, "class-token", c as u64);
                rng::normal_vec(&mut r, token_dim, 1.0)
            })
            .collect();
        Self { seed, tokens }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, class: usize) -> &[f64] {
        &self.tokens[class]
    }

    pub fn tokens(&self) -> &[Vec<f64>] {
        &self.tokens
    }
}

/// Encoder backed by a fixed table of `(class token, embedding)` pairs.
///
/// A sequence is resolved by its final token, which must bitwise-match one of
/// the stored class tokens; the stored embedding is returned verbatim.
#[derive(Debug, Clone)]
pub struct PrecomputedTextEncoder {
    token_dim: usize,
    output_dim: usize,
    entries: Vec<(Vec<f64>, Vec<f64>)>,
}

impl PrecomputedTextEncoder {
    pub fn new(token_dim: usize, output_dim: usize, entries: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        for (k, v) in &entries {
            check_dim(token_dim, k.len())?;
            check_dim(output_dim, v.len())?;
        }
        Ok(Self {
            token_dim,
            output_dim,
            entries,
        })
    }
}

impl TextEncoder for PrecomputedTextEncoder {
    fn token_dim(&self) -> usize {
        self.token_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn encode(&self, seq: &TokenSequence) -> Result<Vec<f64>> {
        check_dim(self.token_dim, seq.token_dim())?;
        let last = seq.tokens().last().expect("non-empty sequence");
        self.entries
            .iter()
            .find(|(k, _)| k == last)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::MissingInput("class token not in precomputed table".into()))
    }
}
