use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, Uniform};
use rand_chacha::ChaCha8Rng;

use super::hyper::Hyperparams;

/// One GRU layer: update gate, reset gate, and candidate, each with an
/// input weight (`in × H`), a recurrent weight (`H × H`), and a bias.
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayer {
    pub w_update: Array2<f64>,
    pub u_update: Array2<f64>,
    pub b_update: Array1<f64>,
    pub w_reset: Array2<f64>,
    pub u_reset: Array2<f64>,
    pub b_reset: Array1<f64>,
    pub w_cand: Array2<f64>,
    pub u_cand: Array2<f64>,
    pub b_cand: Array1<f64>,
}

impl GruLayer {
    fn zeros(input_dim: usize, hidden_dim: usize) -> GruLayer {
        GruLayer {
            w_update: Array2::zeros((input_dim, hidden_dim)),
            u_update: Array2::zeros((hidden_dim, hidden_dim)),
            b_update: Array1::zeros(hidden_dim),
            w_reset: Array2::zeros((input_dim, hidden_dim)),
            u_reset: Array2::zeros((hidden_dim, hidden_dim)),
            b_reset: Array1::zeros(hidden_dim),
            w_cand: Array2::zeros((input_dim, hidden_dim)),
            u_cand: Array2::zeros((hidden_dim, hidden_dim)),
            b_cand: Array1::zeros(hidden_dim),
        }
    }
}

/// Additive attention parameters: the decoder-state projection, the
/// encoder-state projection, and the scoring vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub w_query: Array2<f64>,
    pub u_keys: Array2<f64>,
    pub v_score: Array1<f64>,
}

/// All trainable parameters of the encoder–decoder.
///
/// The embedding matrix is shared between encoder and decoder inputs. The
/// output projection maps the concatenation of decoder state and attention
/// context (`2H`) to vocabulary logits. The same struct doubles as the
/// gradient container returned by the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel {
    pub embedding: Array2<f64>,
    pub encoder: Vec<GruLayer>,
    pub decoder: Vec<GruLayer>,
    pub attention: Attention,
    pub out_weight: Array2<f64>,
    pub out_bias: Array1<f64>,
}

/// A read-only view of one named parameter block.
pub enum BlockRef<'a> {
    Matrix(&'a Array2<f64>),
    Vector(&'a Array1<f64>),
}

impl BlockRef<'_> {
    pub fn len(&self) -> usize {
        match self {
            BlockRef::Matrix(m) => m.len(),
            BlockRef::Vector(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        match self {
            BlockRef::Matrix(m) => m.shape().to_vec(),
            BlockRef::Vector(v) => v.shape().to_vec(),
        }
    }

    /// Row-major values of the block.
    pub fn values(&self) -> Vec<f64> {
        match self {
            BlockRef::Matrix(m) => m.iter().copied().collect(),
            BlockRef::Vector(v) => v.iter().copied().collect(),
        }
    }
}

/// A mutable view of one named parameter block.
pub enum BlockMut<'a> {
    Matrix(&'a mut Array2<f64>),
    Vector(&'a mut Array1<f64>),
}

fn layer_blocks<'a>(prefix: String, layer: &'a GruLayer, out: &mut Vec<(String, BlockRef<'a>)>) {
    out.push((format!("{prefix}.w_update"), BlockRef::Matrix(&layer.w_update)));
    out.push((format!("{prefix}.u_update"), BlockRef::Matrix(&layer.u_update)));
    out.push((format!("{prefix}.b_update"), BlockRef::Vector(&layer.b_update)));
    out.push((format!("{prefix}.w_reset"), BlockRef::Matrix(&layer.w_reset)));
    out.push((format!("{prefix}.u_reset"), BlockRef::Matrix(&layer.u_reset)));
    out.push((format!("{prefix}.b_reset"), BlockRef::Vector(&layer.b_reset)));
    out.push((format!("{prefix}.w_cand"), BlockRef::Matrix(&layer.w_cand)));
    out.push((format!("{prefix}.u_cand"), BlockRef::Matrix(&layer.u_cand)));
    out.push((format!("{prefix}.b_cand"), BlockRef::Vector(&layer.b_cand)));
}

fn layer_blocks_mut<'a>(
    prefix: String,
    layer: &'a mut GruLayer,
    out: &mut Vec<(String, BlockMut<'a>)>,
) {
    out.push((format!("{prefix}.w_update"), BlockMut::Matrix(&mut layer.w_update)));
    out.push((format!("{prefix}.u_update"), BlockMut::Matrix(&mut layer.u_update)));
    out.push((format!("{prefix}.b_update"), BlockMut::Vector(&mut layer.b_update)));
    out.push((format!("{prefix}.w_reset"), BlockMut::Matrix(&mut layer.w_reset)));
    out.push((format!("{prefix}.u_reset"), BlockMut::Matrix(&mut layer.u_reset)));
    out.push((format!("{prefix}.b_reset"), BlockMut::Vector(&mut layer.b_reset)));
    out.push((format!("{prefix}.w_cand"), BlockMut::Matrix(&mut layer.w_cand)));
    out.push((format!("{prefix}.u_cand"), BlockMut::Matrix(&mut layer.u_cand)));
    out.push((format!("{prefix}.b_cand"), BlockMut::Vector(&mut layer.b_cand)));
}

impl Seq2SeqModel {
    /// All parameters zero; also the gradient accumulator shape.
    pub fn zeroed(hp: &Hyperparams) -> Seq2SeqModel {
        let (v, e, h) = (hp.vocab_size, hp.embed_dim, hp.hidden_dim);
        let layers = |input0: usize| -> Vec<GruLayer> {
            (0..hp.num_layers)
                .map(|l| GruLayer::zeros(if l == 0 { input0 } else { h }, h))
                .collect()
        };
        Seq2SeqModel {
            embedding: Array2::zeros((v, e)),
            encoder: layers(e),
            decoder: layers(e),
            attention: Attention {
                w_query: Array2::zeros((h, h)),
                u_keys: Array2::zeros((h, h)),
                v_score: Array1::zeros(h),
            },
            out_weight: Array2::zeros((2 * h, v)),
            out_bias: Array1::zeros(v),
        }
    }

    /// Seeded init: every parameter drawn uniformly from (−0.08, 0.08) in
    /// block order, so a given seed always yields the same model.
    pub fn init(hp: &Hyperparams, rng: &mut ChaCha8Rng) -> Seq2SeqModel {
        let mut model = Seq2SeqModel::zeroed(hp);
        let dist = Uniform::new(-0.08, 0.08);
        model.for_each_value_mut(|v| *v = dist.sample(rng));
        model
    }

    /// Gradient container matching this model's shapes.
    pub fn zeros_like(&self) -> Seq2SeqModel {
        let mut grads = self.clone();
        grads.for_each_value_mut(|v| *v = 0.0);
        grads
    }

    /// Named parameter blocks in a fixed, documented order.
    pub fn blocks(&self) -> Vec<(String, BlockRef<'_>)> {
        let mut out = Vec::new();
        out.push(("embedding".to_string(), BlockRef::Matrix(&self.embedding)));
        for (l, layer) in self.encoder.iter().enumerate() {
            layer_blocks(format!("encoder.{l}"), layer, &mut out);
        }
        for (l, layer) in self.decoder.iter().enumerate() {
            layer_blocks(format!("decoder.{l}"), layer, &mut out);
        }
        out.push(("attention.w_query".to_string(), BlockRef::Matrix(&self.attention.w_query)));
        out.push(("attention.u_keys".to_string(), BlockRef::Matrix(&self.attention.u_keys)));
        out.push(("attention.v_score".to_string(), BlockRef::Vector(&self.attention.v_score)));
        out.push(("out.weight".to_string(), BlockRef::Matrix(&self.out_weight)));
        out.push(("out.bias".to_string(), BlockRef::Vector(&self.out_bias)));
        out
    }

    /// Mutable variant of [`Seq2SeqModel::blocks`], same order.
    pub fn blocks_mut(&mut self) -> Vec<(String, BlockMut<'_>)> {
        let mut out = Vec::new();
        out.push(("embedding".to_string(), BlockMut::Matrix(&mut self.embedding)));
        for (l, layer) in self.encoder.iter_mut().enumerate() {
            layer_blocks_mut(format!("encoder.{l}"), layer, &mut out);
        }
        for (l, layer) in self.decoder.iter_mut().enumerate() {
            layer_blocks_mut(format!("decoder.{l}"), layer, &mut out);
        }
        out.push(("attention.w_query".to_string(), BlockMut::Matrix(&mut self.attention.w_query)));
        out.push(("attention.u_keys".to_string(), BlockMut::Matrix(&mut self.attention.u_keys)));
        out.push(("attention.v_score".to_string(), BlockMut::Vector(&mut self.attention.v_score)));
        out.push(("out.weight".to_string(), BlockMut::Matrix(&mut self.out_weight)));
        out.push(("out.bias".to_string(), BlockMut::Vector(&mut self.out_bias)));
        out
    }

    /// Applies `f` to every parameter value, in block order.
    pub fn for_each_value_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for (_, block) in self.blocks_mut() {
            match block {
                BlockMut::Matrix(m) => m.iter_mut().for_each(&mut f),
                BlockMut::Vector(v) => v.iter_mut().for_each(&mut f),
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        let mut finite = true;
        for (_, block) in self.blocks() {
            let ok = match block {
                BlockRef::Matrix(m) => m.iter().all(|v| v.is_finite()),
                BlockRef::Vector(v) => v.iter().all(|v| v.is_finite()),
            };
            finite &= ok;
        }
        finite
    }

    /// √(Σ v²) over every parameter: the global norm used for clipping.
    pub fn global_norm(&self) -> f64 {
        let mut sum = 0.0;
        for (_, block) in self.blocks() {
            match block {
                BlockRef::Matrix(m) => sum += m.iter().map(|v| v * v).sum::<f64>(),
                BlockRef::Vector(v) => sum += v.iter().map(|v| v * v).sum::<f64>(),
            }
        }
        sum.sqrt()
    }

    /// `self += alpha * other`, block-wise. Panics if shapes differ.
    pub fn axpy(&mut self, alpha: f64, other: &Seq2SeqModel) {
        let other_blocks = other.blocks();
        for ((_, mine), (_, theirs)) in self.blocks_mut().into_iter().zip(other_blocks) {
            match (mine, theirs) {
                (BlockMut::Matrix(m), BlockRef::Matrix(o)) => m.zip_mut_with(o, |a, b| *a += alpha * b),
                (BlockMut::Vector(v), BlockRef::Vector(o)) => v.zip_mut_with(o, |a, b| *a += alpha * b),
                _ => panic!("parameter block order mismatch"),
            }
        }
    }

    /// Flat indexing across all blocks in order; used by the gradient check.
    pub fn get_flat(&self, index: usize) -> f64 {
        let mut offset = index;
        for (_, block) in self.blocks() {
            if offset < block.len() {
                return match block {
                    BlockRef::Matrix(m) => *m.iter().nth(offset).expect("in range"),
                    BlockRef::Vector(v) => v[offset],
                };
            }
            offset -= block.len();
        }
        panic!("flat index {index} out of range");
    }

    pub fn set_flat(&mut self, index: usize, value: f64) {
        let mut offset = index;
        for (_, block) in self.blocks_mut() {
            let len = match &block {
                BlockMut::Matrix(m) => m.len(),
                BlockMut::Vector(v) => v.len(),
            };
            if offset < len {
                match block {
                    BlockMut::Matrix(m) => *m.iter_mut().nth(offset).expect("in range") = value,
                    BlockMut::Vector(v) => v[offset] = value,
                }
                return;
            }
            offset -= len;
        }
        panic!("flat index {index} out of range");
    }

    /// The block name owning a flat index; used in gradient-check reports.
    pub fn block_name_of(&self, index: usize) -> String {
        let mut offset = index;
        for (name, block) in self.blocks() {
            if offset < block.len() {
                return name;
            }
            offset -= block.len();
        }
        panic!("flat index {index} out of range");
    }
}
