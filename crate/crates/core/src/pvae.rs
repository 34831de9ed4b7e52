//! Paired variational auto-encoders.
//!
//! Two VAEs with the same architecture model stimulative and responsive
//! actions. Each epoch first takes one full-batch step on the VAE loss of
//! each network, then fits a PCA to each role's encoder means and takes one
//! step on the paired-embedding loss that pulls the projected means of every
//! original pair together. Only the encoders move in the second step; the
//! PCA projections are held fixed while differentiating.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Tensor, Var};
use crate::dataset::{FlatAction, PairedSet};
use crate::error::{Error, Result};
use crate::nn::{self, Adam, ConvArch, ConvDecoder, ConvEncoder, Params};
use crate::pe_augment::{fit_pca, PcaProjection};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaeArch {
    pub conv: ConvArch,
    pub latent_dim: usize,
}

impl VaeArch {
    /// Three stride-2 blocks (64, 128, 256 channels), kernel 3, 32 latents.
    pub fn standard(frames: usize, channels: usize) -> Self {
        Self {
            conv: ConvArch { seq_len: frames, channels, widths: vec![64, 128, 256], kernel: 3 },
            latent_dim: 32,
        }
    }
}

/// Encoder `h` to `(mu, log sigma)` and decoder `g` back to an action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeNetwork {
    pub arch: VaeArch,
    encoder: ConvEncoder,
    decoder: ConvDecoder,
    enc_params: Params,
    dec_params: Params,
}

/// Graph handles produced by one encoder pass.
pub struct EncodedVars {
    pub mu: Var,
    pub log_sigma: Var,
}

impl VaeNetwork {
    pub fn new(arch: &VaeArch, seed: u64) -> Result<Self> {
        arch.conv.validate()?;
        if arch.latent_dim == 0 {
            return Err(Error::Config("latent dimension must be positive".into()));
        }
        let mut rng = seed::rng(seed);
        let mut enc_params = Params::new();
        let encoder =
            ConvEncoder::new(&mut enc_params, &mut rng, &arch.conv, arch.conv.channels, 2 * arch.latent_dim);
        let mut dec_params = Params::new();
        let decoder = ConvDecoder::new(&mut dec_params, &mut rng, &arch.conv, arch.latent_dim);
        Ok(Self { arch: arch.clone(), encoder, decoder, enc_params, dec_params })
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    pub fn encoder_params(&self) -> &Params {
        &self.enc_params
    }

    pub fn decoder_params(&self) -> &Params {
        &self.dec_params
    }

    pub fn encoder_params_mut(&mut self) -> &mut Params {
        &mut self.enc_params
    }

    pub fn decoder_params_mut(&mut self) -> &mut Params {
        &mut self.dec_params
    }

    fn check(&self, a: &FlatAction) -> Result<()> {
        let c = &self.arch.conv;
        if a.frames != c.seq_len || a.channels != c.channels {
            return Err(Error::Argument(format!(
                "action of shape {}x{} does not fit a {}x{} VAE",
                a.frames, a.channels, c.seq_len, c.channels
            )));
        }
        Ok(())
    }

    fn batch_input(&self, g: &mut Graph, actions: &[&FlatAction]) -> Result<Var> {
        for a in actions {
            self.check(a)?;
        }
        let t = nn::stack_rows(actions.iter().map(|a| a.data.as_slice()), self.arch.conv.channels);
        Ok(g.constant(t))
    }

    /// Encoder pass over `batch` stacked actions.
    pub fn encode_vars(&self, g: &mut Graph, enc: &[Var], x: Var, batch: usize) -> EncodedVars {
        let h = self.encoder.forward(g, enc, x, batch);
        let m = self.arch.latent_dim;
        let mu = nn::slice_cols(g, h, 0, m);
        let log_sigma = nn::slice_cols(g, h, m, m);
        EncodedVars { mu, log_sigma }
    }

    pub fn decode_vars(&self, g: &mut Graph, dec: &[Var], z: Var, batch: usize) -> Var {
        self.decoder.forward(g, dec, z, batch)
    }

    /// `(mu, sigma)` for each action.
    pub fn encode_many(&self, actions: &[&FlatAction]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        if actions.is_empty() {
            return Ok((vec![], vec![]));
        }
        let mut g = Graph::new();
        let enc = self.enc_params.bind_frozen(&mut g);
        let x = self.batch_input(&mut g, actions)?;
        let e = self.encode_vars(&mut g, &enc, x, actions.len());
        let m = self.arch.latent_dim;
        let mu = g.value(e.mu).data().chunks(m).map(<[f64]>::to_vec).collect();
        let sigma = g.value(e.log_sigma).data().chunks(m).map(|r| r.iter().map(|v| v.exp()).collect()).collect();
        Ok((mu, sigma))
    }

    pub fn encode(&self, a: &FlatAction) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mut mu, mut sigma) = self.encode_many(&[a])?;
        Ok((mu.remove(0), sigma.remove(0)))
    }

    pub fn decode(&self, z: &[f64]) -> Result<FlatAction> {
        if z.len() != self.arch.latent_dim {
            return Err(Error::Argument(format!(
                "latent of length {} does not fit a {}-dimensional VAE",
                z.len(),
                self.arch.latent_dim
            )));
        }
        let mut g = Graph::new();
        let dec = self.dec_params.bind_frozen(&mut g);
        let zv = g.constant(Tensor::new(vec![1, z.len()], z.to_vec()));
        let y = self.decode_vars(&mut g, &dec, zv, 1);
        let c = &self.arch.conv;
        FlatAction::new(c.seq_len, c.channels, g.value(y).data().to_vec())
    }

    /// Summed VAE loss over a batch with fixed reparameterisation noise, and
    /// its gradients for the encoder and decoder parameters.
    pub fn loss_and_grads(
        &self,
        actions: &[&FlatAction],
        noise: &[Vec<f64>],
        lambda_kl: f64,
    ) -> Result<(f64, Vec<Tensor>, Vec<Tensor>)> {
        let mut g = Graph::new();
        let enc = self.enc_params.bind(&mut g);
        let dec = self.dec_params.bind(&mut g);
        let x = self.batch_input(&mut g, actions)?;
        let loss = self.loss_vars(&mut g, &enc, &dec, x, actions.len(), noise, lambda_kl);
        let value = g.value(loss).item();
        let mut all = enc.clone();
        all.extend_from_slice(&dec);
        let mut grads = nn::param_grads(&mut g, loss, &all);
        let dec_grads = grads.split_off(enc.len());
        Ok((value, grads, dec_grads))
    }

    #[allow(clippy::too_many_arguments)]
    fn loss_vars(
        &self,
        g: &mut Graph,
        enc: &[Var],
        dec: &[Var],
        x: Var,
        batch: usize,
        noise: &[Vec<f64>],
        lambda_kl: f64,
    ) -> Var {
        let m = self.arch.latent_dim;
        let e = self.encode_vars(g, enc, x, batch);
        let eps = g.constant(Tensor::new(vec![batch, m], noise.iter().flatten().copied().collect()));
        let sigma = g.exp(e.log_sigma);
        let spread = g.mul(sigma, eps);
        let z = g.add(e.mu, spread);
        let recon = self.decode_vars(g, dec, z, batch);
        let diff = g.sub(x, recon);
        let sq = g.square(diff);
        let rec = g.sum(sq);
        let kl = kl_vars(g, e.mu, e.log_sigma);
        let kl = g.scale(kl, lambda_kl);
        g.add(rec, kl)
    }
}

/// `1/2 Σ (mu² + sigma² - 1 - ln sigma²)` over every element, built on a graph.
fn kl_vars(g: &mut Graph, mu: Var, log_sigma: Var) -> Var {
    let mu2 = g.square(mu);
    let two_log = g.scale(log_sigma, 2.0);
    let sigma2 = g.exp(two_log);
    let a = g.add(mu2, sigma2);
    let a = g.sub(a, two_log);
    let a = g.add_scalar(a, -1.0);
    let s = g.sum(a);
    g.scale(s, 0.5)
}

/// KL divergence of `N(mu, diag(sigma²))` from the standard normal.
pub fn kl_divergence(mu: &[f64], sigma: &[f64]) -> Result<f64> {
    if mu.len() != sigma.len() {
        return Err(Error::Argument("mu and sigma lengths differ".into()));
    }
    if let Some(bad) = sigma.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::Argument(format!("sigma must be positive, got {bad}")));
    }
    Ok(0.5 * mu.iter().zip(sigma).map(|(m, s)| m * m + s * s - 1.0 - (s * s).ln()).sum::<f64>())
}

/// `|a - ã|² + lambda_kl * KL`, the squared error summed over every entry.
pub fn vae_loss(a: &FlatAction, recon: &FlatAction, mu: &[f64], sigma: &[f64], lambda_kl: f64) -> Result<f64> {
    if a.data.len() != recon.data.len() {
        return Err(Error::Argument("reconstruction shape differs from input".into()));
    }
    let rec: f64 = a.data.iter().zip(&recon.data).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(rec + lambda_kl * kl_divergence(mu, sigma)?)
}

/// Reparameterised draw `mu + sigma ⊙ eps`, `eps ~ N(0, I)`.
pub fn sample_latent(mu: &[f64], sigma: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    mu.iter()
        .zip(sigma)
        .map(|(m, s)| {
            let e: f64 = StandardNormal.sample(&mut rng);
            m + s * e
        })
        .collect()
}

/// Paired-embedding loss `Σ |P_s (mu_s - mean_s) - P_r (mu_r - mean_r)|²` over
/// original pairs, with gradients for both encoders. The projections are
/// treated as constants.
pub fn pe_loss_and_grads(
    vae_s: &VaeNetwork,
    vae_r: &VaeNetwork,
    stims: &[&FlatAction],
    resps: &[&FlatAction],
    p_s: &PcaProjection,
    p_r: &PcaProjection,
) -> Result<(f64, Vec<Tensor>, Vec<Tensor>)> {
    let mut g = Graph::new();
    let enc_s = vae_s.enc_params.bind(&mut g);
    let enc_r = vae_r.enc_params.bind(&mut g);
    let xs = vae_s.batch_input(&mut g, stims)?;
    let xr = vae_r.batch_input(&mut g, resps)?;
    let ls = projected_vars(&mut g, vae_s, &enc_s, xs, stims.len(), p_s);
    let lr = projected_vars(&mut g, vae_r, &enc_r, xr, resps.len(), p_r);
    let diff = g.sub(ls, lr);
    let sq = g.square(diff);
    let loss = g.sum(sq);
    let value = g.value(loss).item();
    let mut all = enc_s.clone();
    all.extend_from_slice(&enc_r);
    let mut grads = nn::param_grads(&mut g, loss, &all);
    let r = grads.split_off(enc_s.len());
    Ok((value, grads, r))
}

fn projected_vars(g: &mut Graph, net: &VaeNetwork, enc: &[Var], x: Var, batch: usize, p: &PcaProjection) -> Var {
    let e = net.encode_vars(g, enc, x, batch);
    let mean = g.constant(Tensor::new(
        vec![batch, p.mean.len()],
        (0..batch).flat_map(|_| p.mean.iter().copied()).collect(),
    ));
    let centered = g.sub(e.mu, mean);
    let comps = g.constant(Tensor::new(
        vec![p.dim(), p.input_dim()],
        p.components.iter().flatten().copied().collect(),
    ));
    g.matmul_t(centered, comps, false, true)
}

/// Hyper-parameters of [`train_pvaes`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvaeTrainConfig {
    pub epochs: usize,
    pub lambda_kl: f64,
    /// Dimension of the embedding space.
    pub embed_dim: usize,
    pub lr: f64,
    pub pe_lr: f64,
    /// Encoder updates under the PE loss per epoch, all against the same `P`.
    pub pe_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    /// Whether the second, paired-embedding step runs.
    pub pe_enabled: bool,
    pub arch: VaeArch,
    pub seed: u64,
}

impl PvaeTrainConfig {
    pub fn standard(frames: usize, channels: usize) -> Self {
        Self {
            epochs: 400,
            lambda_kl: 3.0,
            embed_dim: 3,
            lr: 1e-3,
            pe_lr: 1e-3,
            pe_steps: 5,
            beta1: 0.9,
            beta2: 0.999,
            pe_enabled: true,
            arch: VaeArch::standard(frames, channels),
            seed: 17,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::Config("embedding dimension must be >= 1".into()));
        }
        if !(self.lambda_kl >= 0.0) {
            return Err(Error::Config("lambda_kl must be >= 0".into()));
        }
        if self.pe_enabled && self.pe_steps == 0 {
            return Err(Error::Config("pe_steps must be >= 1 when PE is enabled".into()));
        }
        if self.embed_dim > self.arch.latent_dim {
            return Err(Error::Config("embedding dimension exceeds latent dimension".into()));
        }
        self.arch.conv.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvaePair {
    pub vae_s: VaeNetwork,
    pub vae_r: VaeNetwork,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PvaeHistory {
    pub vae_s: Vec<f64>,
    pub vae_r: Vec<f64>,
    /// Empty when the paired-embedding step is disabled.
    pub pe: Vec<f64>,
}

/// Trained networks together with the projections of the final epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedPvae {
    pub config: PvaeTrainConfig,
    pub pair: PvaePair,
    pub history: PvaeHistory,
    pub p_s: PcaProjection,
    pub p_r: PcaProjection,
}

fn draw_noise(rng: &mut seed::StageRng, n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..m).map(|_| StandardNormal.sample(rng)).collect()).collect()
}

/// Alternating VAE / paired-embedding training over the original pairs of `a`.
pub fn train_pvaes(a: &PairedSet, config: &PvaeTrainConfig) -> Result<TrainedPvae> {
    config.validate()?;
    let originals: Vec<_> = a.originals().collect();
    if originals.is_empty() {
        return Err(Error::InsufficientData("no original pairs to train on".into()));
    }
    a.validate()?;
    let stims: Vec<&FlatAction> = originals.iter().map(|p| &p.stim).collect();
    let resps: Vec<&FlatAction> = originals.iter().map(|p| &p.resp).collect();
    let n = stims.len();
    let m = config.arch.latent_dim;

    let mut vae_s = VaeNetwork::new(&config.arch, seed::derive(config.seed, "vae_s"))?;
    let mut vae_r = VaeNetwork::new(&config.arch, seed::derive(config.seed, "vae_r"))?;
    let adam = |lr| Adam::new(lr, config.beta1, config.beta2);
    let (mut opt_es, mut opt_ds, mut opt_er, mut opt_dr) =
        (adam(config.lr), adam(config.lr), adam(config.lr), adam(config.lr));
    let (mut opt_pe_s, mut opt_pe_r) = (adam(config.pe_lr), adam(config.pe_lr));
    let mut rng = seed::rng(seed::derive(config.seed, "pvae_noise"));
    let mut history = PvaeHistory::default();
    let mut last: Option<(PcaProjection, PcaProjection)> = None;

    for epoch in 0..config.epochs {
        let noise_s = draw_noise(&mut rng, n, m);
        let noise_r = draw_noise(&mut rng, n, m);
        let (ls, ges, gds) = vae_s.loss_and_grads(&stims, &noise_s, config.lambda_kl)?;
        let (lr_, ger, gdr) = vae_r.loss_and_grads(&resps, &noise_r, config.lambda_kl)?;
        if !ls.is_finite() || !lr_.is_finite() {
            return Err(Error::Divergence { stage: "pvae", epoch });
        }
        opt_es.step(&mut vae_s.enc_params, &ges);
        opt_ds.step(&mut vae_s.dec_params, &gds);
        opt_er.step(&mut vae_r.enc_params, &ger);
        opt_dr.step(&mut vae_r.dec_params, &gdr);
        history.vae_s.push(ls);
        history.vae_r.push(lr_);

        if config.pe_enabled {
            let (p_s, p_r) = fit_projections(&vae_s, &vae_r, &stims, &resps, config.embed_dim, last.as_ref())?;
            let mut first = None;
            for _ in 0..config.pe_steps {
                let (lp, gs, gr) = pe_loss_and_grads(&vae_s, &vae_r, &stims, &resps, &p_s, &p_r)?;
                if !lp.is_finite() {
                    return Err(Error::Divergence { stage: "pvae", epoch });
                }
                first.get_or_insert(lp);
                opt_pe_s.step(&mut vae_s.enc_params, &gs);
                opt_pe_r.step(&mut vae_r.enc_params, &gr);
            }
            let lp = first.unwrap_or(f64::NAN);
            history.pe.push(lp);
            last = Some((p_s, p_r));
        }
        if epoch % 50 == 0 || epoch + 1 == config.epochs {
            log::debug!(
                "pvae epoch {epoch}: L_vae_s {ls:.3} L_vae_r {lr_:.3} L_pe {:.4}",
                history.pe.last().copied().unwrap_or(f64::NAN)
            );
        }
    }
    let (p_s, p_r) = match last {
        Some(p) => p,
        None => fit_projections(&vae_s, &vae_r, &stims, &resps, config.embed_dim, None)?,
    };
    Ok(TrainedPvae { config: config.clone(), pair: PvaePair { vae_s, vae_r }, history, p_s, p_r })
}

fn fit_projections(
    vae_s: &VaeNetwork,
    vae_r: &VaeNetwork,
    stims: &[&FlatAction],
    resps: &[&FlatAction],
    d: usize,
    previous: Option<&(PcaProjection, PcaProjection)>,
) -> Result<(PcaProjection, PcaProjection)> {
    let (mu_s, _) = vae_s.encode_many(stims)?;
    let (mu_r, _) = vae_r.encode_many(resps)?;
    let mut p_s = fit_pca(&mu_s, d)?;
    let mut p_r = fit_pca(&mu_r, d)?;
    if let Some((prev_s, prev_r)) = previous {
        p_s.align_to(prev_s);
        p_r.align_to(prev_r);
    }
    Ok((p_s, p_r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_arch() -> VaeArch {
        VaeArch { conv: ConvArch { seq_len: 8, channels: 6, widths: vec![4, 4], kernel: 3 }, latent_dim: 3 }
    }

    fn action(phase: f64) -> FlatAction {
        FlatAction::new(8, 6, (0..48).map(|i| ((i as f64) * 0.3 + phase).sin()).collect()).unwrap()
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!((kl_divergence(&[1.0], &[1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(kl_divergence(&[0.0], &[0.0]).is_err());
        assert!(kl_divergence(&[0.0], &[-1.0]).is_err());
    }

    #[test]
    fn vae_loss_examples() {
        let a = action(0.0);
        assert_eq!(vae_loss(&a, &a, &[0.0; 3], &[1.0; 3], 0.7).unwrap(), 0.0);
        let b = action(0.5);
        let rec: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).powi(2)).sum();
        assert_eq!(vae_loss(&a, &b, &[0.3, 0.1, 0.0], &[0.5, 2.0, 1.0], 0.0).unwrap(), rec);
    }

    #[test]
    fn encode_is_deterministic_and_positive() {
        let net = VaeNetwork::new(&tiny_arch(), 3).unwrap();
        let a = action(0.2);
        let (mu, sigma) = net.encode(&a).unwrap();
        assert_eq!(mu.len(), 3);
        assert!(sigma.iter().all(|s| *s > 0.0 && s.is_finite()));
        assert_eq!(net.encode(&a).unwrap(), (mu, sigma));
        let wrong = FlatAction::new(8, 3, vec![0.0; 24]).unwrap();
        assert!(net.encode(&wrong).is_err());
    }

    #[test]
    fn decode_shape_contract() {
        let net = VaeNetwork::new(&tiny_arch(), 3).unwrap();
        let out = net.decode(&[0.1, -0.2, 0.3]).unwrap();
        assert_eq!((out.frames, out.channels), (8, 6));
        assert!(out.data.iter().all(|v| v.is_finite()));
        assert_eq!(net.decode(&[0.1, -0.2, 0.3]).unwrap(), out);
        assert!(net.decode(&[0.0; 2]).is_err());
    }

    #[test]
    fn sample_latent_degenerate_and_seeded() {
        let mu = [0.5, -1.0];
        let z = sample_latent(&mu, &[1e-12, 1e-12], 4);
        assert!((z[0] - 0.5).abs() < 1e-10 && (z[1] + 1.0).abs() < 1e-10);
        assert_eq!(sample_latent(&mu, &[1.0, 1.0], 4), sample_latent(&mu, &[1.0, 1.0], 4));
    }

    #[test]
    fn graph_loss_matches_closed_form() {
        let net = VaeNetwork::new(&tiny_arch(), 5).unwrap();
        let a = action(0.4);
        let noise = vec![vec![0.3, -0.7, 1.1]];
        let (loss, _, _) = net.loss_and_grads(&[&a], &noise, 0.25).unwrap();
        let (mu, sigma) = net.encode(&a).unwrap();
        let z: Vec<f64> = mu.iter().zip(&sigma).zip(&noise[0]).map(|((m, s), e)| m + s * e).collect();
        let recon = net.decode(&z).unwrap();
        let expected = vae_loss(&a, &recon, &mu, &sigma, 0.25).unwrap();
        assert!((loss - expected).abs() < 1e-9 * expected.max(1.0));
    }

    #[test]
    fn one_epoch_changes_parameters() {
        let pairs = PairedSet {
            pairs: (0..4)
                .map(|i| crate::dataset::ActionPair {
                    stim_id: format!("s{i}"),
                    resp_id: format!("r{i}"),
                    stim: action(i as f64),
                    resp: action(-(i as f64)),
                    provenance: crate::dataset::Provenance::Original,
                })
                .collect(),
        };
        let mut cfg = PvaeTrainConfig::standard(8, 6);
        cfg.arch = tiny_arch();
        cfg.embed_dim = 2;
        cfg.epochs = 1;
        let before = VaeNetwork::new(&cfg.arch, seed::derive(cfg.seed, "vae_s")).unwrap();
        let trained = train_pvaes(&pairs, &cfg).unwrap();
        assert_eq!(trained.history.vae_s.len(), 1);
        assert_eq!(trained.history.pe.len(), 1);
        assert!(trained.history.pe[0].is_finite());
        assert!(trained.pair.vae_s.encoder_params().max_abs_diff(before.encoder_params()) > 0.0);

        cfg.pe_enabled = false;
        cfg.lambda_kl = 0.0;
        let plain = train_pvaes(&pairs, &cfg).unwrap();
        assert!(plain.history.pe.is_empty());
        assert_eq!(plain.p_s.dim(), 2);
    }
}
