//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the criteria execute in
//! order and share trained models. `ACCEPTANCE_ONLY=1,2` restricts the run;
//! `ACCEPTANCE_DIR` keeps the experiment artifacts in a fixed directory
//! instead of a temporary one.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use iat::act2act::{discriminator_forward, gradient_penalty_at, GanConfig, PairDiscriminator};
use iat::cluster::{kmeans, purity};
use iat::dataset::{frame_limb_lengths, joints_to_limbs, limbs_to_joints_per_frame, root_trajectory, FlatAction, Role};
use iat::nn::{ConvArch, Params};
use iat::pe_augment::{
    compute_confidence, effectiveness, fit_pca, max_distinct_pairs, pe_loss, project, reliability, row_normalize,
    Embedding, NcMatrix, SquareMatrix,
};
use iat::pipeline::plot::fr_table;
use iat::pipeline::{run_experiment, AugmentMode, ExperimentConfig, ExperimentReport, PvaeArtifact};
use iat::pvae::{kl_divergence, pe_loss_and_grads, train_pvaes, VaeArch, VaeNetwork};
use iat::synth::{generate_synthetic, SynthSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

// ---------------------------------------------------------------------------
// 1: analytic identities

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, pass: bool, value: String| {
        ok &= pass;
        if !pass {
            notes.push(format!("{name} = {value}"));
        }
    };

    check("KL(0,1)", kl_divergence(&[0.0], &[1.0]).unwrap() == 0.0, "nonzero".into());
    let kl1 = kl_divergence(&[1.0], &[1.0]).unwrap();
    check("KL(1,1)", (kl1 - 0.5).abs() < 1e-12, kl1.to_string());

    // Monte-Carlo E_q[log q - log p] for q = N(0, 2^2).
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 400_000;
    let sigma: f64 = 2.0;
    let mut acc = 0.0;
    for _ in 0..n {
        let z = sigma * gaussian(&mut rng);
        let log_q = -0.5 * (z / sigma).powi(2) - sigma.ln();
        let log_p = -0.5 * z * z;
        acc += log_q - log_p;
    }
    let mc = acc / n as f64;
    let kl2 = kl_divergence(&[0.0], &[2.0]).unwrap();
    check("KL MC", (mc - kl2).abs() <= 1e-2 && (kl2 - 0.80685).abs() < 1e-5, format!("{kl2} vs MC {mc}"));

    let mut emb = Vec::new();
    let mut sig = Vec::new();
    for _ in 0..12 {
        emb.push(Embedding((0..3).map(|_| gaussian(&mut rng)).collect()));
        sig.push((0..5).map(|_| 0.2 + gaussian(&mut rng).abs()).collect::<Vec<f64>>());
    }
    let pca = fit_pca(&(0..20).map(|_| (0..5).map(|_| gaussian(&mut rng)).collect()).collect::<Vec<_>>(), 3).unwrap();
    let c = compute_confidence(&emb, &sig, &pca, 0.7).unwrap();
    let diag_ok = (0..12).all(|i| c.get(i, i) == 1.0);
    check("C(i,i)", diag_ok, "not 1".into());
    let nc = row_normalize(&c, Role::Stimulative);
    let worst = (0..12).map(|i| (nc.matrix.row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    check("NC row sums", worst <= 1e-9, worst.to_string());
    let mean_diag = (0..12).map(|i| nc.matrix.get(i, i)).sum::<f64>() / 12.0;
    let f = effectiveness(&nc);
    check("F", (f - (1.0 - mean_diag)).abs() <= 1e-12, format!("{f} vs {}", 1.0 - mean_diag));

    let n = 8;
    let uniform = NcMatrix {
        role: Role::Stimulative,
        matrix: row_normalize(&SquareMatrix { n, values: vec![1.0; n * n] }, Role::Stimulative).matrix,
    };
    let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
    let r = reliability(&uniform, &labels).unwrap();
    check("uniform R", r == 0.25, r.to_string());

    let pe = pe_loss(&Embedding(vec![0.0, 0.0]), &Embedding(vec![3.0, 4.0]));
    check("PE loss", pe == 25.0, pe.to_string());
    let m = max_distinct_pairs(80, 5).unwrap();
    check("max_distinct_pairs", m == 1280, m.to_string());

    let secs = start.elapsed().as_secs_f64();
    check("time", secs < 1.0, format!("{secs:.2}s"));
    let detail = if ok { format!("all identities hold ({secs:.2}s)") } else { notes.join("; ") };
    outcome(ok, detail)
}

// ---------------------------------------------------------------------------
// 2: numerical suite

/// Cyclic Jacobi eigenvalues of a symmetric matrix.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

fn tiny_vae_arch() -> VaeArch {
    VaeArch { conv: ConvArch { seq_len: 8, channels: 6, widths: vec![3, 4], kernel: 3 }, latent_dim: 3 }
}

fn smooth_action(phase: f64) -> FlatAction {
    FlatAction::new(8, 6, (0..48).map(|i| ((i as f64) * 0.37 + phase).sin()).collect()).unwrap()
}

/// `|analytic - numeric| / |numeric|` over all entries of `params`, with
/// central differences of step `h`.
fn grad_check(params: &mut Params, analytic: &[f64], h: f64, mut f: impl FnMut(&Params) -> f64) -> f64 {
    let mut numeric = Vec::with_capacity(analytic.len());
    for t in 0..params.len() {
        for k in 0..params.tensors()[t].len() {
            let orig = params.tensors()[t].data()[k];
            params.tensors_mut()[t].data_mut()[k] = orig + h;
            let up = f(params);
            params.tensors_mut()[t].data_mut()[k] = orig - h;
            let down = f(params);
            params.tensors_mut()[t].data_mut()[k] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    diff / norm
}

fn flat_grads(g: &[iat::autograd::Tensor]) -> Vec<f64> {
    g.iter().flat_map(|t| t.data().iter().copied()).collect()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    // PCA against an independent eigen-solver.
    let means: Vec<Vec<f64>> = (0..40)
        .map(|_| {
            let z: Vec<f64> = (0..6).map(|_| gaussian(&mut rng)).collect();
            vec![3.0 * z[0], z[0] + 2.0 * z[1], 0.5 * z[2], z[3] - z[1], 0.2 * z[4], z[5] + z[0]]
        })
        .collect();
    let p = fit_pca(&means, 3).unwrap();
    let mut ortho = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = p.components[i].iter().zip(&p.components[j]).map(|(a, b)| a * b).sum();
            ortho = ortho.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let n = means.len() as f64;
    let mean: Vec<f64> = (0..6).map(|k| means.iter().map(|m| m[k]).sum::<f64>() / n).collect();
    let cov: Vec<Vec<f64>> = (0..6)
        .map(|a| (0..6).map(|b| means.iter().map(|m| (m[a] - mean[a]) * (m[b] - mean[b])).sum::<f64>() / n).collect())
        .collect();
    let ev = jacobi_eigenvalues(cov);
    let top: f64 = ev[..3].iter().sum();
    let capture_err = (p.captured_variance() - top).abs();
    ok &= ortho <= 1e-6 && capture_err <= 1e-6;
    notes.push(format!("PCA ortho {ortho:.1e} capture {capture_err:.1e}"));

    // Limb round trip on a synthetic clip.
    let corpus = generate_synthetic(&SynthSpec { per_class: 2, ..SynthSpec::default() }).unwrap();
    let topo = SkeletonTopology::upper_body9();
    let mut round = 0.0f64;
    for clip in corpus.clips.iter().take(6) {
        let seq = joints_to_limbs(clip, &topo).unwrap();
        let back = limbs_to_joints_per_frame(&seq, &frame_limb_lengths(clip, &topo), &root_trajectory(clip, &topo)).unwrap();
        for (fa, fb) in clip.frames.iter().zip(&back.frames) {
            for (a, b) in fa.iter().zip(fb) {
                for k in 0..3 {
                    round = round.max((a[k] - b[k]).abs());
                }
            }
        }
    }
    ok &= round <= 1e-6;
    notes.push(format!("limb round trip {round:.1e}"));

    // VAE loss gradients.
    let arch = tiny_vae_arch();
    let net = VaeNetwork::new(&arch, 21).unwrap();
    let actions: Vec<FlatAction> = (0..3).map(|i| smooth_action(i as f64 * 0.9)).collect();
    let refs: Vec<&FlatAction> = actions.iter().collect();
    let noise: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| gaussian(&mut rng)).collect()).collect();
    let lambda = 0.5;
    let (_, ge, gd) = net.loss_and_grads(&refs, &noise, lambda).unwrap();
    let mut enc = net.encoder_params().clone();
    let enc_err = grad_check(&mut enc, &flat_grads(&ge), 1e-3, |p| {
        let mut n2 = net.clone();
        *n2.encoder_params_mut() = p.clone();
        n2.loss_and_grads(&refs, &noise, lambda).unwrap().0
    });
    let mut dec = net.decoder_params().clone();
    let dec_err = grad_check(&mut dec, &flat_grads(&gd), 1e-3, |p| {
        let mut n2 = net.clone();
        *n2.decoder_params_mut() = p.clone();
        n2.loss_and_grads(&refs, &noise, lambda).unwrap().0
    });

    // PE loss gradients with fixed projections.
    let net_r = VaeNetwork::new(&arch, 22).unwrap();
    let stims: Vec<FlatAction> = (0..5).map(|i| smooth_action(i as f64 * 0.7)).collect();
    let resps: Vec<FlatAction> = (0..5).map(|i| smooth_action(2.0 - i as f64 * 0.4)).collect();
    let (sr, rr): (Vec<&FlatAction>, Vec<&FlatAction>) = (stims.iter().collect(), resps.iter().collect());
    let p_s = fit_pca(&net.encode_many(&sr).unwrap().0, 2).unwrap();
    let p_r = fit_pca(&net_r.encode_many(&rr).unwrap().0, 2).unwrap();
    let (_, gs, gr) = pe_loss_and_grads(&net, &net_r, &sr, &rr, &p_s, &p_r).unwrap();
    let mut es = net.encoder_params().clone();
    let pe_s_err = grad_check(&mut es, &flat_grads(&gs), 1e-3, |p| {
        let mut n2 = net.clone();
        *n2.encoder_params_mut() = p.clone();
        pe_loss_and_grads(&n2, &net_r, &sr, &rr, &p_s, &p_r).unwrap().0
    });
    let mut er = net_r.encoder_params().clone();
    let pe_r_err = grad_check(&mut er, &flat_grads(&gr), 1e-3, |p| {
        let mut n2 = net_r.clone();
        *n2.encoder_params_mut() = p.clone();
        pe_loss_and_grads(&net, &n2, &sr, &rr, &p_s, &p_r).unwrap().0
    });
    let worst = enc_err.max(dec_err).max(pe_s_err).max(pe_r_err);
    ok &= worst <= 1e-4;
    notes.push(format!("grad rel err vae {:.1e}/{:.1e} pe {:.1e}/{:.1e}", enc_err, dec_err, pe_s_err, pe_r_err));

    // Gradient penalty against a finite-difference input gradient.
    let mut cfg = GanConfig::standard(8, 6);
    cfg.arch.widths = vec![4, 4];
    let critic = PairDiscriminator::new(&cfg, 9).unwrap();
    let (a_s, real, fake) = (smooth_action(0.1), smooth_action(1.3), smooth_action(2.2));
    let eps = 0.37;
    let pen = gradient_penalty_at(&critic, &a_s, &real, &fake, eps).unwrap();
    let mix: Vec<f64> = fake.data.iter().zip(&real.data).map(|(f, r)| f + eps * (r - f)).collect();
    let h = 1e-5;
    let mut norm2 = 0.0;
    for k in 0..mix.len() {
        let mut up = mix.clone();
        up[k] += h;
        let mut down = mix.clone();
        down[k] -= h;
        let su = discriminator_forward(&critic, &a_s, &FlatAction::new(8, 6, up).unwrap()).unwrap();
        let sd = discriminator_forward(&critic, &a_s, &FlatAction::new(8, 6, down).unwrap()).unwrap();
        norm2 += ((su - sd) / (2.0 * h)).powi(2);
    }
    let pen_fd = (norm2.sqrt() - 1.0).powi(2);
    let gp_err = (pen - pen_fd).abs();
    ok &= gp_err <= 1e-3;
    notes.push(format!("GP |analytic - fd| {gp_err:.1e}"));

    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 60.0;
    notes.push(format!("{secs:.1}s"));
    outcome(ok, notes.join(", "))
}

use iat::dataset::SkeletonTopology;

// ---------------------------------------------------------------------------
// Shared synthetic experiment

fn synth_spec() -> SynthSpec {
    SynthSpec { per_class: 40, ..SynthSpec::default() }
}

fn experiment_config(mode: AugmentMode) -> ExperimentConfig {
    ExperimentConfig::synthetic(synth_spec(), mode, 17)
}

struct Experiments {
    root: PathBuf,
    reports: BTreeMap<&'static str, ExperimentReport>,
    errors: BTreeMap<&'static str, String>,
}

impl Experiments {
    fn new(root: PathBuf) -> Self {
        Self { root, reports: BTreeMap::new(), errors: BTreeMap::new() }
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn get(&mut self, name: &'static str, mode: AugmentMode) -> Result<&ExperimentReport, String> {
        if !self.reports.contains_key(name) && !self.errors.contains_key(name) {
            let t = Instant::now();
            match run_experiment(&experiment_config(mode), &self.dir(name)) {
                Ok(r) => {
                    eprintln!("  [{name} arm finished in {:.0}s]", t.elapsed().as_secs_f64());
                    self.reports.insert(name, r);
                }
                Err(e) => {
                    self.errors.insert(name, e.to_string());
                }
            }
        }
        match self.reports.get(name) {
            Some(r) => Ok(r),
            None => Err(self.errors[name].clone()),
        }
    }
}

// ---------------------------------------------------------------------------
// 3 and 4: clustering ablation and F/R behaviour

struct Ablation {
    purity_pe: f64,
    purity_vae: f64,
    seconds: f64,
    fr_rows: Vec<iat::pipeline::plot::FrRow>,
    fr_seconds: f64,
}

fn stim_purity(trained: &iat::pvae::TrainedPvae, pairs: &[&iat::dataset::ActionPair], labels: &[String], k: usize) -> f64 {
    let stims: Vec<&FlatAction> = pairs.iter().map(|p| &p.stim).collect();
    let (mu, _) = trained.pair.vae_s.encode_many(&stims).unwrap();
    let pts: Vec<Vec<f64>> = mu.iter().map(|m| project(&trained.p_s, m).unwrap().0).collect();
    purity(&kmeans(&pts, k, 10, 1), labels)
}

fn ablation(exps: &mut Experiments) -> Result<Ablation, String> {
    exps.get("pe", AugmentMode::Pe)?;
    let dir = exps.dir("pe");
    let data: iat::pipeline::DataArtifact = iat::dataset::read_json(&dir.join("data.json")).map_err(|e| e.to_string())?;
    let pvae: PvaeArtifact = iat::dataset::read_json(&dir.join("pvae.json")).map_err(|e| e.to_string())?;
    let originals: Vec<_> = data.split.a.originals().collect();
    let labels: Vec<String> = data.split.a_labels.iter().map(|(s, _)| s.clone()).collect();
    let k = data.rules.len();

    let mut cfg = pvae.trained.config.clone();
    cfg.pe_enabled = false;
    let t = Instant::now();
    let plain = train_pvaes(&data.split.a, &cfg).map_err(|e| e.to_string())?;
    let plain_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let fr_rows = fr_table(&pvae.trained, &originals, &labels, &[0.01, 0.05, 0.1, 0.5, 1.0], &[1, 3], 0.1)
        .map_err(|e| e.to_string())?;
    let fr_seconds = t.elapsed().as_secs_f64();
    Ok(Ablation {
        purity_pe: stim_purity(&pvae.trained, &originals, &labels, k),
        purity_vae: stim_purity(&plain, &originals, &labels, k),
        seconds: pvae.seconds + plain_secs,
        fr_rows,
        fr_seconds,
    })
}

fn criterion_3(ab: &Result<Ablation, String>) -> Outcome {
    match ab {
        Err(e) => outcome(false, e.clone()),
        Ok(a) => outcome(
            a.purity_pe >= 0.90 && a.purity_pe - a.purity_vae >= 0.10 && a.seconds <= 600.0,
            format!(
                "purity PE {:.3}, VAE-only {:.3}, gap {:+.3} (need >= 0.90, >= +0.10); training {:.0}s",
                a.purity_pe,
                a.purity_vae,
                a.purity_pe - a.purity_vae,
                a.seconds
            ),
        ),
    }
}

/// Number of adjacent steps that go the wrong way, and whether each is small.
fn inversions(values: &[f64], increasing: bool) -> (usize, bool) {
    let mut count = 0;
    let mut small = true;
    for w in values.windows(2) {
        let step = if increasing { w[1] - w[0] } else { w[0] - w[1] };
        if step < 0.0 {
            count += 1;
            small &= -step <= 0.01;
        }
    }
    (count, small)
}

fn criterion_4(ab: &Result<Ablation, String>) -> Outcome {
    let a = match ab {
        Err(e) => return outcome(false, e.clone()),
        Ok(a) => a,
    };
    let s_rows: Vec<_> = a.fr_rows.iter().filter(|r| r.panel == "s").collect();
    let at = s_rows.iter().find(|r| r.s == 0.1).expect("s = 0.1 row");
    let d1 = a.fr_rows.iter().find(|r| r.panel == "d" && r.d == 1).expect("d = 1 row");
    let d3 = a.fr_rows.iter().find(|r| r.panel == "d" && r.d == 3).expect("d = 3 row");
    let fs: Vec<f64> = s_rows.iter().map(|r| r.f).collect();
    let rs: Vec<f64> = s_rows.iter().map(|r| r.r).collect();
    let (fi, f_small) = inversions(&fs, true);
    let (ri, r_small) = inversions(&rs, false);
    let monotone = fi + ri <= 1 && f_small && r_small;
    let pass = at.r >= 0.85 && at.f >= 0.30 && monotone && d3.r - d1.r >= 0.05 && a.fr_seconds < 60.0;
    let curve: Vec<String> = s_rows.iter().map(|r| format!("s={}:F{:.3}/R{:.3}", r.s, r.f, r.r)).collect();
    outcome(
        pass,
        format!(
            "s=0.1: F {:.3} (>= 0.30), R {:.3} (>= 0.85); inversions F {fi} R {ri}; R(d=3) - R(d=1) = {:+.3}; [{}]; {:.1}s",
            at.f,
            at.r,
            d3.r - d1.r,
            curve.join(" "),
            a.fr_seconds
        ),
    )
}

// ---------------------------------------------------------------------------
// 5, 6, 7: end-to-end arms

fn arm_seconds(r: &ExperimentReport) -> f64 {
    r.timings.values().sum()
}

fn criterion_5(exps: &mut Experiments) -> Outcome {
    let none = exps.get("none", AugmentMode::None).cloned();
    let pe = exps.get("pe", AugmentMode::Pe).cloned();
    match (none, pe) {
        (Ok(none), Ok(pe)) => {
            let secs = arm_seconds(&none) + arm_seconds(&pe);
            let gain = pe.iat_train - none.iat_train;
            let pass = gain >= 5.0 && pe.iat_test >= none.iat_test - 2.0 && pe.cv.mean >= 90.0 && secs <= 2700.0;
            outcome(
                pass,
                format!(
                    "IAT-train none {:.2} -> PE {:.2} ({gain:+.2}, need >= +5); IAT-test none {:.2}, PE {:.2}; CV {:.2}; {:.0}s",
                    none.iat_train, pe.iat_train, none.iat_test, pe.iat_test, pe.cv.mean, secs
                ),
            )
        }
        (a, b) => outcome(false, format!("{:?} {:?}", a.err(), b.err())),
    }
}

fn criterion_6(exps: &mut Experiments) -> Outcome {
    let none = exps.get("none", AugmentMode::None).cloned();
    let pe = exps.get("pe", AugmentMode::Pe).cloned();
    let re = exps.get("reassign", AugmentMode::Reassign).cloned();
    match (none, pe, re) {
        (Ok(none), Ok(pe), Ok(re)) => outcome(
            none.iat_train <= pe.iat_train && pe.iat_train <= re.iat_train + 3.0,
            format!(
                "IAT-train none {:.2} <= PE {:.2} <= reassign {:.2} + 3",
                none.iat_train, pe.iat_train, re.iat_train
            ),
        ),
        (a, b, c) => outcome(false, format!("{:?} {:?} {:?}", a.err(), b.err(), c.err())),
    }
}

fn criterion_7(exps: &mut Experiments) -> Outcome {
    match exps.get("pe", AugmentMode::Pe) {
        Err(e) => outcome(false, e),
        Ok(r) => match &r.oracle {
            None => outcome(false, "no oracle audit in report".into()),
            Some(o) => outcome(
                o.precision >= 0.80 && o.diversity > 0.05,
                format!(
                    "oracle precision {:.3} (>= 0.80); pairwise distance / norm {:.3} (> 0.05)",
                    o.precision, o.diversity
                ),
            ),
        },
    }
}

// ---------------------------------------------------------------------------
// 8: reproducibility

/// Largest absolute difference between numeric leaves of two JSON values,
/// skipping wall-clock timings. `None` if the structures differ.
fn max_numeric_diff(a: &serde_json::Value, b: &serde_json::Value, key: &str) -> Option<f64> {
    use serde_json::Value;
    if key == "timings" || key == "seconds" {
        return Some(0.0);
    }
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => Some((x.as_f64()? - y.as_f64()?).abs()),
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            x.iter().zip(y).try_fold(0.0f64, |m, (p, q)| Some(m.max(max_numeric_diff(p, q, "")?)))
        }
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => x.iter().try_fold(0.0f64, |m, (k, p)| {
            Some(m.max(max_numeric_diff(p, y.get(k)?, k)?))
        }),
        (Value::Object(_), _) | (Value::Array(_), _) | (Value::Number(_), _) => None,
        _ => Some(0.0),
    }
}

fn criterion_8(root: &Path) -> Outcome {
    let mut config = ExperimentConfig::synthetic(SynthSpec { per_class: 10, ..SynthSpec::default() }, AugmentMode::Pe, 23);
    config.pvae.epochs = 5;
    config.pvae.arch.conv.widths = vec![8, 16, 16];
    config.pvae.arch.latent_dim = 8;
    config.gan.epochs = 2;
    config.gan.steps_per_epoch = Some(2);
    config.gan.arch.widths = vec![8, 8, 8];
    config.eval.classifier.epochs = 2;
    config.eval.classifier.arch.widths = vec![8, 8, 8];
    let run = |name: &str| -> Result<serde_json::Value, String> {
        let report = run_experiment(&config, &root.join(name)).map_err(|e| e.to_string())?;
        let mut v = serde_json::to_value(report).map_err(|e| e.to_string())?;
        v.as_object_mut().map(|o| o.remove("artifacts"));
        Ok(v)
    };
    match (run("repro-a"), run("repro-b")) {
        (Ok(a), Ok(b)) => match max_numeric_diff(&a, &b, "") {
            Some(d) => outcome(d <= 1e-6, format!("max numeric difference {d:.1e} (<= 1e-6, wall-clock timings excluded)")),
            None => outcome(false, "report structures differ".into()),
        },
        (a, b) => outcome(false, format!("{:?} {:?}", a.err(), b.err())),
    }
}

// ---------------------------------------------------------------------------

fn main() {
    // `cargo test -- <filter>` passes arguments; the suite ignores them.
    let only: Option<Vec<u32>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |i: u32| only.as_ref().is_none_or(|o| o.contains(&i));
    let temp = tempfile::tempdir().expect("temporary directory");
    let root = std::env::var_os("ACCEPTANCE_DIR").map_or_else(|| temp.path().to_path_buf(), PathBuf::from);
    let mut exps = Experiments::new(root.clone());

    let names = [
        "analytic identities",
        "numerical suite",
        "clustering ablation",
        "F/R behaviour",
        "augmentation benefit",
        "label-given sandwich",
        "precision and diversity",
        "reproducibility",
    ];
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut report = |i: u32, o: Outcome| {
        println!("criterion {i} [{}] {}: {}", if o.pass { "PASS" } else { "FAIL" }, names[i as usize - 1], o.detail);
        results.push((i, o));
    };
    if wanted(1) {
        report(1, criterion_1());
    }
    if wanted(2) {
        report(2, criterion_2());
    }
    if wanted(3) || wanted(4) {
        let ab = ablation(&mut exps);
        if wanted(3) {
            report(3, criterion_3(&ab));
        }
        if wanted(4) {
            report(4, criterion_4(&ab));
        }
    }
    if wanted(5) {
        report(5, criterion_5(&mut exps));
    }
    if wanted(6) {
        report(6, criterion_6(&mut exps));
    }
    if wanted(7) {
        report(7, criterion_7(&mut exps));
    }
    if wanted(8) {
        report(8, criterion_8(&root));
    }
    let failed: Vec<u32> = results.iter().filter(|(_, o)| !o.pass).map(|(i, _)| *i).collect();
    println!("acceptance: {} passed, {} failed", results.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
