//! Variational reference encoder over per-phoneme prosody vectors.
//!
//! A small tanh MLP maps each 7-dimensional vector to a Gaussian posterior
//! (mu, log sigma), embeddings are drawn with the reparameterization trick,
//! and training minimizes reconstruction MSE plus an annealed, periodically
//! gated KL term. Backpropagation is written out by hand in f64 and checked
//! against central finite differences.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Input dimensionality of the prosodic representation.
pub const INPUT_DIM: usize = 7;
/// log sigma is clamped to this symmetric range.
pub const LOG_SIGMA_CLAMP: f64 = 10.0;

pub type InputVector = [f64; INPUT_DIM];

#[derive(Debug, Error)]
pub enum VaeError {
    #[error("non-finite input vector")]
    NonFiniteInput,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("loss diverged (non-finite) at iteration {0}")]
    DivergedLoss(u64),
    #[error("sequence length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("malformed params json: {0}")]
    MalformedJson(String),
}

/// Per-phoneme Gaussian posterior of the prosody embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
}

impl GaussianPosterior {
    pub fn sigma(&self) -> Vec<f64> {
        self.log_sigma.iter().map(|&l| l.exp()).collect()
    }
}

/// Training schedule and optimizer settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub kl_start_iter: u64,
    pub kl_end_iter: u64,
    pub kl_period: u64,
    pub learning_rate: f64,
    pub iterations: u64,
    pub seed: u64,
    pub batch_size: usize,
    pub hidden: usize,
    pub latent: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kl_start_iter: 25_000,
            kl_end_iter: 150_000,
            kl_period: 200,
            learning_rate: 1e-3,
            iterations: 10_000,
            seed: 0,
            batch_size: 32,
            hidden: 32,
            latent: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), VaeError> {
        if self.kl_start_iter >= self.kl_end_iter {
            return Err(VaeError::InvalidConfig(format!(
                "kl_start_iter {} must be below kl_end_iter {}",
                self.kl_start_iter, self.kl_end_iter
            )));
        }
        if self.kl_period == 0 {
            return Err(VaeError::InvalidConfig("kl_period must be >= 1".into()));
        }
        if self.batch_size == 0 || self.hidden == 0 || self.latent == 0 {
            return Err(VaeError::InvalidConfig(
                "batch_size, hidden and latent must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, VaeError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| VaeError::MalformedJson(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// KL weight: 0 before the ramp, linear in between, 1 at and after the end.
pub fn kl_scale(iteration: u64, cfg: &TrainConfig) -> f64 {
    if iteration <= cfg.kl_start_iter {
        0.0
    } else if iteration >= cfg.kl_end_iter {
        1.0
    } else {
        (iteration - cfg.kl_start_iter) as f64 / (cfg.kl_end_iter - cfg.kl_start_iter) as f64
    }
}

/// The KL term only enters the loss every `kl_period` steps.
pub fn kl_active(iteration: u64, cfg: &TrainConfig) -> bool {
    iteration.is_multiple_of(cfg.kl_period)
}

/// KL divergence of the posterior from the standard normal prior,
/// 0.5 * sum(mu^2 + sigma^2 - 1 - 2 log sigma).
pub fn kl_divergence(post: &GaussianPosterior) -> f64 {
    post.mu
        .iter()
        .zip(&post.log_sigma)
        .map(|(&mu, &ls)| {
            let s2 = (2.0 * ls).exp();
            0.5 * (mu * mu + s2 - 1.0 - 2.0 * ls)
        })
        .sum()
}

/// z = mu + sigma .* eps with eps drawn from the caller's generator.
pub fn reparam_sample<R: Rng + ?Sized>(post: &GaussianPosterior, rng: &mut R) -> Vec<f64> {
    post.mu
        .iter()
        .zip(&post.log_sigma)
        .map(|(&mu, &ls)| {
            let eps: f64 = rng.sample(StandardNormal);
            mu + ls.exp() * eps
        })
        .collect()
}

/// Row-wise concatenation of linguistic and prosody embedding sequences.
pub fn concat_embeddings(
    linguistic: &[Vec<f64>],
    prosody: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, VaeError> {
    if linguistic.len() != prosody.len() {
        return Err(VaeError::LengthMismatch(linguistic.len(), prosody.len()));
    }
    Ok(linguistic
        .iter()
        .zip(prosody)
        .map(|(l, p)| l.iter().chain(p).copied().collect())
        .collect())
}

// parameter layout: five affine layers, weights row-major then bias
#[derive(Clone, Copy)]
struct LayerShape {
    rows: usize,
    cols: usize,
}

const LAYER_NAMES: [&str; 5] = ["enc_in", "enc_hidden", "enc_gauss", "dec_hidden", "dec_out"];

fn layer_shapes(input: usize, hidden: usize, latent: usize) -> [LayerShape; 5] {
    [
        LayerShape { rows: hidden, cols: input },
        LayerShape { rows: hidden, cols: hidden },
        LayerShape { rows: 2 * latent, cols: hidden },
        LayerShape { rows: hidden, cols: latent },
        LayerShape { rows: input, cols: hidden },
    ]
}

/// Weights of the encoder/decoder MLP pair (7 -> H -> H -> 2D, D -> H -> 7).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub latent: usize,
    theta: Vec<f64>,
}

impl EncoderParams {
    /// Uniform init in +-1/sqrt(fan_in) for weights, zero biases.
    pub fn init<R: Rng + ?Sized>(hidden: usize, latent: usize, rng: &mut R) -> Self {
        let shapes = layer_shapes(INPUT_DIM, hidden, latent);
        let mut theta = Vec::with_capacity(param_count(&shapes));
        for s in &shapes {
            let bound = 1.0 / (s.cols as f64).sqrt();
            for _ in 0..s.rows * s.cols {
                theta.push(rng.random_range(-bound..bound));
            }
            theta.extend(std::iter::repeat_n(0.0, s.rows));
        }
        Self {
            input_dim: INPUT_DIM,
            hidden,
            latent,
            theta,
        }
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    fn shapes(&self) -> [LayerShape; 5] {
        layer_shapes(self.input_dim, self.hidden, self.latent)
    }

    fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let shapes = self.shapes();
        let off = layer_offset(&shapes, k);
        let s = shapes[k];
        let w = &self.theta[off..off + s.rows * s.cols];
        let b = &self.theta[off + s.rows * s.cols..off + s.rows * s.cols + s.rows];
        (w, b)
    }

    /// Serialize as a shape header plus row-major weight arrays.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct LayerOut<'a> {
            name: &'a str,
            rows: usize,
            cols: usize,
            w: &'a [f64],
            b: &'a [f64],
        }
        #[derive(Serialize)]
        struct ParamsOut<'a> {
            input_dim: usize,
            hidden: usize,
            latent: usize,
            layers: Vec<LayerOut<'a>>,
        }
        let layers = (0..5)
            .map(|k| {
                let (w, b) = self.layer(k);
                let s = self.shapes()[k];
                LayerOut {
                    name: LAYER_NAMES[k],
                    rows: s.rows,
                    cols: s.cols,
                    w,
                    b,
                }
            })
            .collect();
        serde_json::to_string(&ParamsOut {
            input_dim: self.input_dim,
            hidden: self.hidden,
            latent: self.latent,
            layers,
        })
        .expect("params serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, VaeError> {
        #[derive(Deserialize)]
        struct LayerIn {
            name: String,
            rows: usize,
            cols: usize,
            w: Vec<f64>,
            b: Vec<f64>,
        }
        #[derive(Deserialize)]
        struct ParamsIn {
            input_dim: usize,
            hidden: usize,
            latent: usize,
            layers: Vec<LayerIn>,
        }
        let raw: ParamsIn =
            serde_json::from_str(text).map_err(|e| VaeError::MalformedJson(e.to_string()))?;
        if raw.input_dim != INPUT_DIM {
            return Err(VaeError::MalformedJson(format!(
                "input_dim {} unsupported, expected {INPUT_DIM}",
                raw.input_dim
            )));
        }
        let shapes = layer_shapes(raw.input_dim, raw.hidden, raw.latent);
        if raw.layers.len() != 5 {
            return Err(VaeError::MalformedJson(format!(
                "expected 5 layers, got {}",
                raw.layers.len()
            )));
        }
        let mut theta = Vec::with_capacity(param_count(&shapes));
        for (k, layer) in raw.layers.iter().enumerate() {
            let s = shapes[k];
            if layer.name != LAYER_NAMES[k]
                || layer.rows != s.rows
                || layer.cols != s.cols
                || layer.w.len() != s.rows * s.cols
                || layer.b.len() != s.rows
            {
                return Err(VaeError::MalformedJson(format!(
                    "layer {k} ({}) has inconsistent shape",
                    layer.name
                )));
            }
            theta.extend_from_slice(&layer.w);
            theta.extend_from_slice(&layer.b);
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(VaeError::MalformedJson("non-finite parameter".into()));
        }
        Ok(Self {
            input_dim: raw.input_dim,
            hidden: raw.hidden,
            latent: raw.latent,
            theta,
        })
    }
}

fn param_count(shapes: &[LayerShape]) -> usize {
    shapes.iter().map(|s| s.rows * s.cols + s.rows).sum()
}

fn layer_offset(shapes: &[LayerShape], k: usize) -> usize {
    shapes[..k].iter().map(|s| s.rows * s.cols + s.rows).sum()
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *o = b[r] + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
    }
}

struct Forward {
    x: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    mu: Vec<f64>,
    t_raw: Vec<f64>,
    log_sigma: Vec<f64>,
    sigma: Vec<f64>,
    eps: Vec<f64>,
    z: Vec<f64>,
    d1: Vec<f64>,
    y: Vec<f64>,
}

#[allow(clippy::needless_range_loop)]
fn forward_sample(params: &EncoderParams, x: &[f64], eps: &[f64]) -> Forward {
    let (h, d) = (params.hidden, params.latent);
    let mut a1 = vec![0.0; h];
    let (w, b) = params.layer(0);
    affine(w, b, x, &mut a1);
    a1.iter_mut().for_each(|v| *v = v.tanh());

    let mut a2 = vec![0.0; h];
    let (w, b) = params.layer(1);
    affine(w, b, &a1, &mut a2);
    a2.iter_mut().for_each(|v| *v = v.tanh());

    let mut gauss = vec![0.0; 2 * d];
    let (w, b) = params.layer(2);
    affine(w, b, &a2, &mut gauss);
    let mu = gauss[..d].to_vec();
    let t_raw = gauss[d..].to_vec();
    let log_sigma: Vec<f64> = t_raw
        .iter()
        .map(|&t| t.clamp(-LOG_SIGMA_CLAMP, LOG_SIGMA_CLAMP))
        .collect();
    let sigma: Vec<f64> = log_sigma.iter().map(|&l| l.exp()).collect();
    let z: Vec<f64> = (0..d).map(|i| mu[i] + sigma[i] * eps[i]).collect();

    let mut d1 = vec![0.0; h];
    let (w, b) = params.layer(3);
    affine(w, b, &z, &mut d1);
    d1.iter_mut().for_each(|v| *v = v.tanh());

    let mut y = vec![0.0; params.input_dim];
    let (w, b) = params.layer(4);
    affine(w, b, &d1, &mut y);

    Forward {
        x: x.to_vec(),
        a1,
        a2,
        mu,
        t_raw,
        log_sigma,
        sigma,
        eps: eps.to_vec(),
        z,
        d1,
        y,
    }
}

/// Deterministic forward pass to the Gaussian posterior.
pub fn encode(params: &EncoderParams, x: &InputVector) -> Result<GaussianPosterior, VaeError> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(VaeError::NonFiniteInput);
    }
    let eps = vec![0.0; params.latent];
    let f = forward_sample(params, x, &eps);
    Ok(GaussianPosterior {
        mu: f.mu,
        log_sigma: f.log_sigma,
    })
}

/// Batch loss and analytic gradient at a fixed KL weight and fixed noise.
///
/// recon is the mean squared error over batch * input entries, kl the mean
/// per-sample divergence; the gradient covers recon + kl_weight * kl.
fn batch_loss_grad(
    params: &EncoderParams,
    batch: &[InputVector],
    noise: &[Vec<f64>],
    kl_weight: f64,
    grad: Option<&mut [f64]>,
) -> (f64, f64) {
    let (h, d, input) = (params.hidden, params.latent, params.input_dim);
    let b_n = batch.len() as f64;
    let shapes = params.shapes();
    let mut recon = 0.0;
    let mut kl = 0.0;
    let mut grad = grad;

    for (x, eps) in batch.iter().zip(noise) {
        let f = forward_sample(params, x, eps);
        recon += f
            .y
            .iter()
            .zip(&f.x)
            .map(|(y, x)| (y - x) * (y - x))
            .sum::<f64>()
            / (b_n * input as f64);
        kl += f
            .mu
            .iter()
            .zip(&f.log_sigma)
            .map(|(&mu, &ls)| 0.5 * (mu * mu + (2.0 * ls).exp() - 1.0 - 2.0 * ls))
            .sum::<f64>()
            / b_n;

        let Some(g) = grad.as_deref_mut() else {
            continue;
        };

        // d loss / d y
        let dy: Vec<f64> = f
            .y
            .iter()
            .zip(&f.x)
            .map(|(y, x)| 2.0 * (y - x) / (b_n * input as f64))
            .collect();

        // dec_out
        let off4 = layer_offset(&shapes, 4);
        let (w4, _) = params.layer(4);
        for (r, &dyr) in dy.iter().enumerate() {
            for (c, &d1c) in f.d1.iter().enumerate() {
                g[off4 + r * h + c] += dyr * d1c;
            }
            g[off4 + input * h + r] += dyr;
        }
        let mut dd1 = vec![0.0; h];
        for (r, &dyr) in dy.iter().enumerate() {
            for c in 0..h {
                dd1[c] += w4[r * h + c] * dyr;
            }
        }
        for (v, &a) in dd1.iter_mut().zip(&f.d1) {
            *v *= 1.0 - a * a;
        }

        // dec_hidden
        let off3 = layer_offset(&shapes, 3);
        let (w3, _) = params.layer(3);
        for (r, &dd1r) in dd1.iter().enumerate() {
            for (c, &zc) in f.z.iter().enumerate() {
                g[off3 + r * d + c] += dd1r * zc;
            }
            g[off3 + h * d + r] += dd1r;
        }
        let mut dz = vec![0.0; d];
        for (r, &dd1r) in dd1.iter().enumerate() {
            for c in 0..d {
                dz[c] += w3[r * d + c] * dd1r;
            }
        }

        // through the reparameterization plus the KL term
        let mut dgauss = vec![0.0; 2 * d];
        for i in 0..d {
            dgauss[i] = dz[i] + kl_weight * f.mu[i] / b_n;
            let dls = dz[i] * f.eps[i] * f.sigma[i]
                + kl_weight * ((2.0 * f.log_sigma[i]).exp() - 1.0) / b_n;
            // clamp gate
            dgauss[d + i] = if f.t_raw[i].abs() <= LOG_SIGMA_CLAMP {
                dls
            } else {
                0.0
            };
        }

        // enc_gauss
        let off2 = layer_offset(&shapes, 2);
        let (w2, _) = params.layer(2);
        for (r, &dgr) in dgauss.iter().enumerate() {
            for (c, &a2c) in f.a2.iter().enumerate() {
                g[off2 + r * h + c] += dgr * a2c;
            }
            g[off2 + 2 * d * h + r] += dgr;
        }
        let mut da2 = vec![0.0; h];
        for (r, &dgr) in dgauss.iter().enumerate() {
            for c in 0..h {
                da2[c] += w2[r * h + c] * dgr;
            }
        }
        for (v, &a) in da2.iter_mut().zip(&f.a2) {
            *v *= 1.0 - a * a;
        }

        // enc_hidden
        let off1 = layer_offset(&shapes, 1);
        let (w1, _) = params.layer(1);
        for (r, &da2r) in da2.iter().enumerate() {
            for (c, &a1c) in f.a1.iter().enumerate() {
                g[off1 + r * h + c] += da2r * a1c;
            }
            g[off1 + h * h + r] += da2r;
        }
        let mut da1 = vec![0.0; h];
        for (r, &da2r) in da2.iter().enumerate() {
            for c in 0..h {
                da1[c] += w1[r * h + c] * da2r;
            }
        }
        for (v, &a) in da1.iter_mut().zip(&f.a1) {
            *v *= 1.0 - a * a;
        }

        // enc_in
        let off0 = layer_offset(&shapes, 0);
        for (r, &da1r) in da1.iter().enumerate() {
            for (c, &xc) in f.x.iter().enumerate() {
                g[off0 + r * input + c] += da1r * xc;
            }
            g[off0 + h * input + r] += da1r;
        }
    }

    (recon, kl)
}

/// One row of the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub iteration: u64,
    pub recon: f64,
    pub kl: f64,
    pub scale: f64,
    pub active: bool,
}

pub const HISTORY_CSV_HEADER: &str = "iteration,recon,kl,scale,active";

pub fn format_history_csv(history: &[LossRecord]) -> String {
    let mut out = String::from(HISTORY_CSV_HEADER);
    out.push('\n');
    for r in history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iteration,
            r.recon,
            r.kl,
            r.scale,
            u8::from(r.active)
        ));
    }
    out
}

/// Minibatch gradient descent on reconstruction MSE plus the gated, annealed
/// KL term. Deterministic for a fixed seed: parameter init, batch order and
/// sampling noise all come from one seeded generator.
pub fn train(
    dataset: &[InputVector],
    cfg: &TrainConfig,
) -> Result<(EncoderParams, Vec<LossRecord>), VaeError> {
    if dataset.is_empty() {
        return Err(VaeError::EmptyDataset);
    }
    cfg.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = EncoderParams::init(cfg.hidden, cfg.latent, &mut rng);
    let n = dataset.len();
    let batch_size = cfg.batch_size.min(n);

    let mut perm: Vec<usize> = (0..n).collect();
    let mut pos = n; // force a shuffle before the first batch
    let mut grad = vec![0.0; params.n_params()];
    let mut history = Vec::with_capacity(cfg.iterations as usize);

    for it in 0..cfg.iterations {
        if pos + batch_size > n {
            perm.shuffle(&mut rng);
            pos = 0;
        }
        let batch: Vec<InputVector> =
            perm[pos..pos + batch_size].iter().map(|&i| dataset[i]).collect();
        pos += batch_size;

        let noise: Vec<Vec<f64>> = (0..batch_size)
            .map(|_| (0..cfg.latent).map(|_| rng.sample(StandardNormal)).collect())
            .collect();

        let scale = kl_scale(it, cfg);
        let active = kl_active(it, cfg);
        let kl_weight = if active { scale } else { 0.0 };

        grad.iter_mut().for_each(|g| *g = 0.0);
        let (recon, kl) =
            batch_loss_grad(&params, &batch, &noise, kl_weight, Some(&mut grad));
        let loss = recon + kl_weight * kl;
        if !loss.is_finite() {
            return Err(VaeError::DivergedLoss(it));
        }
        history.push(LossRecord {
            iteration: it,
            recon,
            kl,
            scale,
            active,
        });

        for (p, g) in params.theta.iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }
    }

    Ok((params, history))
}

/// Mean squared reconstruction error over the dataset with z = mu.
pub fn reconstruction_mse(params: &EncoderParams, dataset: &[InputVector]) -> f64 {
    if dataset.is_empty() {
        return 0.0;
    }
    let noise = vec![vec![0.0; params.latent]; 1];
    let mut total = 0.0;
    for x in dataset {
        let (recon, _) =
            batch_loss_grad(params, std::slice::from_ref(x), &noise, 0.0, None);
        total += recon;
    }
    total / dataset.len() as f64
}

/// Compare analytic gradients of recon + KL (weight 1, fixed noise) against
/// central finite differences on every parameter. Returns the maximum
/// relative error |a - n| / max(|a| + |n|, 1).
#[allow(clippy::needless_range_loop)]
pub fn grad_check<R: Rng + ?Sized>(
    params: &EncoderParams,
    batch: &[InputVector],
    eps: f64,
    rng: &mut R,
) -> f64 {
    let noise: Vec<Vec<f64>> = (0..batch.len())
        .map(|_| (0..params.latent).map(|_| rng.sample(StandardNormal)).collect())
        .collect();

    let mut analytic = vec![0.0; params.n_params()];
    batch_loss_grad(params, batch, &noise, 1.0, Some(&mut analytic));

    let mut probe = params.clone();
    let mut max_err: f64 = 0.0;
    for i in 0..probe.theta.len() {
        let orig = probe.theta[i];
        probe.theta[i] = orig + eps;
        let (r_plus, k_plus) = batch_loss_grad(&probe, batch, &noise, 1.0, None);
        probe.theta[i] = orig - eps;
        let (r_minus, k_minus) = batch_loss_grad(&probe, batch, &noise, 1.0, None);
        probe.theta[i] = orig;

        let numeric = ((r_plus + k_plus) - (r_minus + k_minus)) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs()
            / (analytic[i].abs() + numeric.abs()).max(1.0);
        max_err = max_err.max(err);
    }
    max_err
}
