//! Act2Act: a conditional encoder-decoder generator and a pair critic
//! trained as a Wasserstein GAN with gradient penalty.
//!
//! The generator squeezes a stimulation into a short code `c`, appends a
//! noise vector `z`, and decodes a response whose limb vectors are rescaled
//! to unit length. The critic scores a stimulation and a response stacked
//! along the channel axis. The generator is trained by the critic alone.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Tensor, Var};
use crate::dataset::{FlatAction, PairedSet};
use crate::error::{Error, Result};
use crate::nn::{self, Adam, ConvArch, ConvDecoder, ConvEncoder, Params};
use crate::seed;

const NORM_EPS: f64 = 1e-12;
const GRAD_NORM_EPS: f64 = 1e-20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub epochs: usize,
    /// Critic updates per generator update.
    pub critic_steps: usize,
    pub lambda_gp: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    /// Generator updates per epoch; `None` means one pass over the pairs.
    pub steps_per_epoch: Option<usize>,
    pub dim_c: usize,
    pub dim_z: usize,
    pub arch: ConvArch,
    pub seed: u64,
}

impl GanConfig {
    pub fn standard(frames: usize, channels: usize) -> Self {
        Self {
            epochs: 60,
            critic_steps: 5,
            lambda_gp: 10.0,
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.9,
            batch_size: 32,
            steps_per_epoch: None,
            dim_c: 8,
            dim_z: 16,
            arch: ConvArch { seq_len: frames, channels, widths: vec![32, 64, 128], kernel: 3 },
            seed: 17,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.critic_steps == 0 {
            return Err(Error::Config("critic_steps must be >= 1".into()));
        }
        if !(self.lambda_gp >= 0.0) {
            return Err(Error::Config("lambda_gp must be >= 0".into()));
        }
        if self.batch_size == 0 || self.dim_c == 0 {
            return Err(Error::Config("batch_size and dim_c must be positive".into()));
        }
        if self.arch.channels % 3 != 0 {
            return Err(Error::Config("channel count must be a multiple of 3 (limb vectors)".into()));
        }
        self.arch.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Act2ActGenerator {
    pub arch: ConvArch,
    pub dim_c: usize,
    pub dim_z: usize,
    encoder: ConvEncoder,
    decoder: ConvDecoder,
    params: Params,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDiscriminator {
    pub arch: ConvArch,
    body: ConvEncoder,
    params: Params,
}

fn check_shape(arch: &ConvArch, a: &FlatAction) -> Result<()> {
    if a.frames != arch.seq_len || a.channels != arch.channels {
        return Err(Error::Argument(format!(
            "action of shape {}x{} does not fit a {}x{} network",
            a.frames, a.channels, arch.seq_len, arch.channels
        )));
    }
    Ok(())
}

fn stack(g: &mut Graph, actions: &[&FlatAction], channels: usize) -> Var {
    g.constant(nn::stack_rows(actions.iter().map(|a| a.data.as_slice()), channels))
}

/// Rescales every consecutive triple of columns to unit length.
fn unit_limbs(g: &mut Graph, y: Var) -> Var {
    let shape = g.shape(y).to_vec();
    let n = g.value(y).len() / 3;
    let v = g.reshape(y, vec![n, 3]);
    let sq = g.square(v);
    let norm2 = g.row_sums(sq);
    let norm2 = g.add_scalar(norm2, NORM_EPS);
    let norm = g.sqrt(norm2);
    let inv = g.recip(norm);
    let inv = g.broadcast_cols(inv, 3);
    let unit = g.mul(v, inv);
    g.reshape(unit, shape)
}

impl Act2ActGenerator {
    pub fn new(config: &GanConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed);
        let mut params = Params::new();
        let arch = &config.arch;
        let encoder = ConvEncoder::new(&mut params, &mut rng, arch, arch.channels, config.dim_c);
        let decoder = ConvDecoder::new(&mut params, &mut rng, arch, config.dim_c + config.dim_z);
        Ok(Self { arch: arch.clone(), dim_c: config.dim_c, dim_z: config.dim_z, encoder, decoder, params })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// `x`: stacked stimulations, `z`: `[batch, dim_z]`.
    fn forward_vars(&self, g: &mut Graph, p: &[Var], x: Var, z: Var, batch: usize) -> Var {
        let c = self.encoder.forward(g, p, x, batch);
        let cz = if self.dim_z == 0 { c } else { nn::concat_cols(g, c, z) };
        let y = self.decoder.forward(g, p, cz, batch);
        unit_limbs(g, y)
    }

    /// Responses for a batch of stimulations with one noise vector each.
    pub fn forward_many(&self, stims: &[&FlatAction], noise: &[Vec<f64>]) -> Result<Vec<FlatAction>> {
        if stims.len() != noise.len() {
            return Err(Error::Argument("one noise vector per stimulation required".into()));
        }
        if let Some(z) = noise.iter().find(|z| z.len() != self.dim_z) {
            return Err(Error::Argument(format!("noise of length {} but dim_z = {}", z.len(), self.dim_z)));
        }
        for a in stims {
            check_shape(&self.arch, a)?;
        }
        if stims.is_empty() {
            return Ok(vec![]);
        }
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let x = stack(&mut g, stims, self.arch.channels);
        let z = g.constant(Tensor::new(vec![stims.len(), self.dim_z], noise.iter().flatten().copied().collect()));
        let y = self.forward_vars(&mut g, &p, x, z, stims.len());
        let per = self.arch.seq_len * self.arch.channels;
        g.value(y)
            .data()
            .chunks(per)
            .map(|d| FlatAction::new(self.arch.seq_len, self.arch.channels, d.to_vec()))
            .collect()
    }
}

/// `â_r = G(a_s, z)`.
pub fn generator_forward(g: &Act2ActGenerator, a_s: &FlatAction, z: &[f64]) -> Result<FlatAction> {
    Ok(g.forward_many(&[a_s], &[z.to_vec()])?.remove(0))
}

/// Draws `z ~ N(0, I)` from `seed` and runs the generator.
pub fn generate_response(g: &Act2ActGenerator, a_s: &FlatAction, seed: u64) -> Result<FlatAction> {
    generator_forward(g, a_s, &noise_vector(g.dim_z, seed))
}

pub fn noise_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

impl PairDiscriminator {
    pub fn new(config: &GanConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed);
        let mut params = Params::new();
        let body = ConvEncoder::new(&mut params, &mut rng, &config.arch, 2 * config.arch.channels, 1);
        Ok(Self { arch: config.arch.clone(), body, params })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    /// Scores `[batch, 1]` for stacked stimulations and responses.
    pub fn score_vars(&self, g: &mut Graph, p: &[Var], stim: Var, resp: Var, batch: usize) -> Var {
        let x = nn::concat_cols(g, stim, resp);
        self.body.forward(g, p, x, batch)
    }

    pub fn score_many(&self, stims: &[&FlatAction], resps: &[&FlatAction]) -> Result<Vec<f64>> {
        if stims.len() != resps.len() {
            return Err(Error::Argument("stimulation and response counts differ".into()));
        }
        for a in stims.iter().chain(resps) {
            check_shape(&self.arch, a)?;
        }
        if stims.is_empty() {
            return Ok(vec![]);
        }
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let s = stack(&mut g, stims, self.arch.channels);
        let r = stack(&mut g, resps, self.arch.channels);
        let out = self.score_vars(&mut g, &p, s, r, stims.len());
        Ok(g.value(out).data().to_vec())
    }
}

/// Critic score of one pair.
pub fn discriminator_forward(d: &PairDiscriminator, a_s: &FlatAction, a_x: &FlatAction) -> Result<f64> {
    Ok(d.score_many(&[a_s], &[a_x])?[0])
}

/// Per-sample `(|∇_r D(a_s, r)| - 1)²` at `r = ε real + (1 - ε) fake`,
/// averaged over the batch. The stimulation is held fixed.
fn penalty_vars(
    g: &mut Graph,
    d: &PairDiscriminator,
    p: &[Var],
    stim: Var,
    real: Var,
    fake: Var,
    eps: &[f64],
) -> Var {
    let batch = eps.len();
    let rows = g.value(real).rows();
    let cols = g.value(real).cols();
    let per = rows / batch;
    let e: Vec<f64> = eps.iter().flat_map(|&v| std::iter::repeat_n(v, per * cols)).collect();
    let e = g.constant(Tensor::new(vec![rows, cols], e));
    let diff = g.sub(real, fake);
    let scaled = g.mul(e, diff);
    let mix = g.add(fake, scaled);
    let score = d.score_vars(g, p, stim, mix, batch);
    let total = g.sum(score);
    let grad = g.grad(total, &[mix])[0];
    let sq = g.square(grad);
    let sq = g.reshape(sq, vec![batch, per * cols]);
    let norm2 = g.row_sums(sq);
    let norm2 = g.add_scalar(norm2, GRAD_NORM_EPS);
    let norm = g.sqrt(norm2);
    let dev = g.add_scalar(norm, -1.0);
    let pen = g.square(dev);
    g.mean(pen)
}

/// Gradient penalty for a single pair with interpolation weight `eps`.
pub fn gradient_penalty_at(
    d: &PairDiscriminator,
    a_s: &FlatAction,
    real: &FlatAction,
    fake: &FlatAction,
    eps: f64,
) -> Result<f64> {
    for a in [a_s, real, fake] {
        check_shape(&d.arch, a)?;
    }
    let mut g = Graph::new();
    let p = d.params.bind_frozen(&mut g);
    let c = d.arch.channels;
    let s = stack(&mut g, &[a_s], c);
    let r = stack(&mut g, &[real], c);
    let f = stack(&mut g, &[fake], c);
    let pen = penalty_vars(&mut g, d, &p, s, r, f, &[eps]);
    Ok(g.value(pen).item())
}

/// Gradient penalty with `ε ~ U(0, 1)` drawn from `seed`. Both pairs share
/// the stimulation of `real_pair`.
pub fn gradient_penalty(
    d: &PairDiscriminator,
    real_pair: (&FlatAction, &FlatAction),
    fake_pair: (&FlatAction, &FlatAction),
    seed: u64,
) -> Result<f64> {
    let eps = Uniform::new(0.0, 1.0).map_err(|e| Error::Argument(e.to_string()))?.sample(&mut seed::rng(seed));
    gradient_penalty_at(d, real_pair.0, real_pair.1, fake_pair.1, eps)
}

/// Terms summed into a training loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossTerm {
    /// `-mean D(a_s, a_r)`
    CriticReal,
    /// `mean D(a_s, â_r)`
    CriticFake,
    /// `λ_gp * penalty`
    GradientPenalty,
    /// `-mean D(a_s, â_r)` for the generator
    Adversarial,
}

pub const CRITIC_LOSS: &[LossTerm] = &[LossTerm::CriticReal, LossTerm::CriticFake, LossTerm::GradientPenalty];
pub const GENERATOR_LOSS: &[LossTerm] = &[LossTerm::Adversarial];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GanHistory {
    /// Mean critic loss per epoch.
    pub critic: Vec<f64>,
    /// Mean generator loss per epoch.
    pub generator: Vec<f64>,
    /// Mean `D(real) - D(fake)` per epoch.
    pub wasserstein: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedAct2Act {
    pub config: GanConfig,
    pub generator: Act2ActGenerator,
    pub critic: PairDiscriminator,
    pub history: GanHistory,
}

struct Batch<'a> {
    stims: Vec<&'a FlatAction>,
    resps: Vec<&'a FlatAction>,
}

fn draw_batch<'a>(pairs: &'a PairedSet, order: &[usize]) -> Batch<'a> {
    Batch {
        stims: order.iter().map(|&i| &pairs.pairs[i].stim).collect(),
        resps: order.iter().map(|&i| &pairs.pairs[i].resp).collect(),
    }
}

fn draw_noise(rng: &mut seed::StageRng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| StandardNormal.sample(rng)).collect()).collect()
}

/// One critic update; returns `(loss, D(real) - D(fake))`.
fn critic_step(
    gen: &Act2ActGenerator,
    critic: &mut PairDiscriminator,
    opt: &mut Adam,
    batch: &Batch,
    noise: &[Vec<f64>],
    eps: &[f64],
    lambda_gp: f64,
) -> Result<(f64, f64)> {
    let fakes = gen.forward_many(&batch.stims, noise)?;
    let fake_refs: Vec<&FlatAction> = fakes.iter().collect();
    let n = batch.stims.len();
    let c = critic.arch.channels;
    let mut g = Graph::new();
    let p = critic.params.bind(&mut g);
    let s = stack(&mut g, &batch.stims, c);
    let r = stack(&mut g, &batch.resps, c);
    let f = stack(&mut g, &fake_refs, c);
    let d_real = critic.score_vars(&mut g, &p, s, r, n);
    let d_real = g.mean(d_real);
    let d_fake = critic.score_vars(&mut g, &p, s, f, n);
    let d_fake = g.mean(d_fake);
    let mut terms = Vec::new();
    for term in CRITIC_LOSS {
        let v = match term {
            LossTerm::CriticReal => g.scale(d_real, -1.0),
            LossTerm::CriticFake => d_fake,
            LossTerm::GradientPenalty => {
                if lambda_gp == 0.0 {
                    continue;
                }
                let pen = penalty_vars(&mut g, critic, &p, s, r, f, eps);
                g.scale(pen, lambda_gp)
            }
            LossTerm::Adversarial => unreachable!("generator term in critic loss"),
        };
        terms.push(v);
    }
    let loss = sum_terms(&mut g, &terms);
    let value = g.value(loss).item();
    let gap = g.value(d_real).item() - g.value(d_fake).item();
    let grads = nn::param_grads(&mut g, loss, &p);
    opt.step(&mut critic.params, &grads);
    Ok((value, gap))
}

fn generator_step(
    gen: &mut Act2ActGenerator,
    critic: &PairDiscriminator,
    opt: &mut Adam,
    stims: &[&FlatAction],
    noise: &[Vec<f64>],
) -> f64 {
    let n = stims.len();
    let c = gen.arch.channels;
    let mut g = Graph::new();
    let p = gen.params.bind(&mut g);
    let cp = critic.params.bind_frozen(&mut g);
    let x = stack(&mut g, stims, c);
    let z = g.constant(Tensor::new(vec![n, gen.dim_z], noise.iter().flatten().copied().collect()));
    let fake = gen.forward_vars(&mut g, &p, x, z, n);
    let mut terms = Vec::new();
    for term in GENERATOR_LOSS {
        let v = match term {
            LossTerm::Adversarial => {
                let score = critic.score_vars(&mut g, &cp, x, fake, n);
                let m = g.mean(score);
                g.scale(m, -1.0)
            }
            _ => unreachable!("critic term in generator loss"),
        };
        terms.push(v);
    }
    let loss = sum_terms(&mut g, &terms);
    let value = g.value(loss).item();
    let grads = nn::param_grads(&mut g, loss, &p);
    opt.step(&mut gen.params, &grads);
    value
}

fn sum_terms(g: &mut Graph, terms: &[Var]) -> Var {
    let mut it = terms.iter().copied();
    let first = it.next().expect("at least one loss term");
    it.fold(first, |acc, t| g.add(acc, t))
}

/// Trains generator and critic on every pair of `pairs` (originals and
/// augmented alike).
pub fn train_act2act(pairs: &PairedSet, config: &GanConfig) -> Result<TrainedAct2Act> {
    train_act2act_with(pairs, config, |_| Ok(None))
}

fn check_training_set(pairs: &PairedSet, config: &GanConfig) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no pairs to train Act2Act on".into()));
    }
    pairs.validate()?;
    for p in &pairs.pairs {
        check_shape(&config.arch, &p.stim)?;
        check_shape(&config.arch, &p.resp)?;
    }
    Ok(())
}

/// Like [`train_act2act`], but `refresh(epoch)` is asked before every epoch
/// after the first and may swap in a new training set of the same size.
pub fn train_act2act_with<F>(pairs: &PairedSet, config: &GanConfig, mut refresh: F) -> Result<TrainedAct2Act>
where
    F: FnMut(usize) -> Result<Option<PairedSet>>,
{
    config.validate()?;
    check_training_set(pairs, config)?;
    let mut current = std::borrow::Cow::Borrowed(pairs);
    let mut gen = Act2ActGenerator::new(config, seed::derive(config.seed, "generator"))?;
    let mut critic = PairDiscriminator::new(config, seed::derive(config.seed, "critic"))?;
    let mut opt_g = Adam::new(config.lr, config.beta1, config.beta2);
    let mut opt_d = Adam::new(config.lr, config.beta1, config.beta2);
    let mut rng = seed::rng(seed::derive(config.seed, "gan_train"));
    let unit = Uniform::new(0.0, 1.0).map_err(|e| Error::Argument(e.to_string()))?;

    let n = pairs.len();
    let bs = config.batch_size.min(n);
    let steps = config.steps_per_epoch.unwrap_or(n.div_ceil(bs)).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut next_batch = |rng: &mut seed::StageRng| {
        let mut idx = Vec::with_capacity(bs);
        while idx.len() < bs {
            if cursor == n {
                order.shuffle(rng);
                cursor = 0;
            }
            idx.push(order[cursor]);
            cursor += 1;
        }
        idx
    };

    let mut history = GanHistory::default();
    for epoch in 0..config.epochs {
        if epoch > 0 {
            if let Some(next) = refresh(epoch)? {
                check_training_set(&next, config)?;
                if next.len() != n {
                    return Err(Error::Argument(format!("refreshed set has {} pairs, expected {n}", next.len())));
                }
                current = std::borrow::Cow::Owned(next);
            }
        }
        let pairs: &PairedSet = &current;
        let (mut c_sum, mut w_sum, mut g_sum) = (0.0, 0.0, 0.0);
        for _ in 0..steps {
            for _ in 0..config.critic_steps {
                let idx = next_batch(&mut rng);
                let batch = draw_batch(pairs, &idx);
                let noise = draw_noise(&mut rng, idx.len(), config.dim_z);
                let eps: Vec<f64> = (0..idx.len()).map(|_| unit.sample(&mut rng)).collect();
                let (loss, gap) = critic_step(&gen, &mut critic, &mut opt_d, &batch, &noise, &eps, config.lambda_gp)?;
                c_sum += loss;
                w_sum += gap;
            }
            let idx = next_batch(&mut rng);
            let batch = draw_batch(pairs, &idx);
            let noise = draw_noise(&mut rng, idx.len(), config.dim_z);
            g_sum += generator_step(&mut gen, &critic, &mut opt_g, &batch.stims, &noise);
        }
        let critic_updates = (steps * config.critic_steps) as f64;
        let (c, w, gl) = (c_sum / critic_updates, w_sum / critic_updates, g_sum / steps as f64);
        if !(c.is_finite() && gl.is_finite()) {
            return Err(Error::Divergence { stage: "act2act", epoch });
        }
        history.critic.push(c);
        history.wasserstein.push(w);
        history.generator.push(gl);
        if epoch % 10 == 0 || epoch + 1 == config.epochs {
            log::debug!("act2act epoch {epoch}: critic {c:.4} W {w:.4} generator {gl:.4}");
        }
    }
    Ok(TrainedAct2Act { config: config.clone(), generator: gen, critic, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ActionPair, Provenance};

    fn tiny_config() -> GanConfig {
        let mut c = GanConfig::standard(8, 6);
        c.arch.widths = vec![4, 4];
        c.dim_c = 2;
        c.dim_z = 3;
        c.batch_size = 4;
        c.epochs = 1;
        c
    }

    fn unit_action(phase: f64) -> FlatAction {
        let raw = FlatAction::new(8, 6, (0..48).map(|i| ((i as f64) * 0.7 + phase).sin() + 0.1).collect()).unwrap();
        let mut data = raw.data;
        for v in data.chunks_mut(3) {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            v.iter_mut().for_each(|x| *x /= n);
        }
        FlatAction::new(8, 6, data).unwrap()
    }

    fn tiny_pairs(n: usize) -> PairedSet {
        PairedSet {
            pairs: (0..n)
                .map(|i| ActionPair {
                    stim_id: format!("s{i}"),
                    resp_id: format!("r{i}"),
                    stim: unit_action(i as f64),
                    resp: unit_action(0.5 - i as f64),
                    provenance: Provenance::Original,
                })
                .collect(),
        }
    }

    #[test]
    fn generator_output_has_unit_limbs() {
        let gen = Act2ActGenerator::new(&tiny_config(), 1).unwrap();
        let a = unit_action(0.3);
        let out = generator_forward(&gen, &a, &[0.1, -0.4, 2.0]).unwrap();
        for v in out.data.chunks(3) {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
        assert_eq!(out, generator_forward(&gen, &a, &[0.1, -0.4, 2.0]).unwrap());
        assert!(generator_forward(&gen, &a, &[0.0; 2]).is_err());
        assert_eq!(generate_response(&gen, &a, 9).unwrap(), generate_response(&gen, &a, 9).unwrap());
    }

    #[test]
    fn critic_is_deterministic_and_checks_shapes() {
        let d = PairDiscriminator::new(&tiny_config(), 2).unwrap();
        let (a, b) = (unit_action(0.0), unit_action(1.0));
        let s = discriminator_forward(&d, &a, &b).unwrap();
        assert!(s.is_finite());
        assert_eq!(s, discriminator_forward(&d, &a, &b).unwrap());
        let wrong = FlatAction::new(4, 6, vec![0.0; 24]).unwrap();
        assert!(discriminator_forward(&d, &a, &wrong).is_err());
    }

    #[test]
    fn zero_critic_has_unit_penalty() {
        let mut d = PairDiscriminator::new(&tiny_config(), 2).unwrap();
        for t in d.params_mut().tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let (a, b, c) = (unit_action(0.0), unit_action(1.0), unit_action(2.0));
        let pen = gradient_penalty(&d, (&a, &b), (&a, &c), 3).unwrap();
        assert!((pen - 1.0).abs() < 1e-9);
    }

    #[test]
    fn losses_contain_no_reconstruction_term() {
        assert_eq!(GENERATOR_LOSS, &[LossTerm::Adversarial]);
        assert!(CRITIC_LOSS.iter().all(|t| *t != LossTerm::Adversarial));
        assert_eq!(CRITIC_LOSS.len(), 3);
    }

    #[test]
    fn one_epoch_updates_both_networks() {
        let cfg = tiny_config();
        let pairs = tiny_pairs(6);
        let g0 = Act2ActGenerator::new(&cfg, seed::derive(cfg.seed, "generator")).unwrap();
        let d0 = PairDiscriminator::new(&cfg, seed::derive(cfg.seed, "critic")).unwrap();
        let t = train_act2act(&pairs, &cfg).unwrap();
        assert_eq!(t.history.critic.len(), 1);
        assert!(t.history.critic[0].is_finite() && t.history.generator[0].is_finite());
        assert!(t.generator.params().max_abs_diff(g0.params()) > 0.0);
        assert!(t.critic.params().max_abs_diff(d0.params()) > 0.0);
    }

    #[test]
    fn degenerate_wgan_runs() {
        let mut cfg = tiny_config();
        cfg.lambda_gp = 0.0;
        cfg.critic_steps = 1;
        cfg.epochs = 2;
        let t = train_act2act(&tiny_pairs(5), &cfg).unwrap();
        assert_eq!(t.history.generator.len(), 2);
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = tiny_config();
        cfg.critic_steps = 0;
        assert!(train_act2act(&tiny_pairs(3), &cfg).is_err());
        assert!(train_act2act(&PairedSet::default(), &tiny_config()).is_err());
    }
}
