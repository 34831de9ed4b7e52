//! Experiment orchestration: configuration, stage checkpoints and reports.
//!
//! A run directory holds one JSON artifact per stage. Rerunning an experiment
//! in the same directory reuses every stage whose artifact already exists, so
//! metrics can be recomputed without retraining.

pub mod plot;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::act2act::{train_act2act_with, GanConfig, TrainedAct2Act};
use crate::dataset::{
    build_sets, derive_pos_neg, limbs_to_joints, load_manifest, read_json, write_json, ActionClip, ActionPair,
    EvalSet, FlatAction, InteractionRuleSet, LabeledAction, PairedSet, Provenance, Role, SetSplit, SkeletonTopology,
};
use crate::error::{Error, Result};
use crate::iat_metrics::{
    acceptance_rate, build_generated_set, iat_test, iat_train_classifier, train_pair_classifier, ClassifierConfig,
    CvReport, GeneratedSet, PairClassifier,
};
use crate::pe_augment::{
    compute_confidence, effectiveness, project, reliability, row_normalize, sample_augmented_pairs, NcMatrix,
    Replacement,
};
use crate::pvae::{train_pvaes, PvaeHistory, PvaeTrainConfig, TrainedPvae, VaeArch};
use crate::seed;
use crate::synth::{classify_flat, generate_synthetic, OracleParams, SynthSpec};

/// Environment variable naming the directory under which run directories live.
pub const ARTIFACT_ROOT_ENV: &str = "IAT_ARTIFACT_ROOT";

/// `$IAT_ARTIFACT_ROOT`, or `artifacts` in the working directory.
pub fn artifact_root() -> PathBuf {
    std::env::var_os(ARTIFACT_ROOT_ENV).map_or_else(|| PathBuf::from("artifacts"), PathBuf::from)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Synth(SynthSpec),
    Manifest { manifest: PathBuf, rules: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMode {
    None,
    Pe,
    Reassign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeConfig {
    /// Kernel scale factor.
    pub s: f64,
    /// Augmented pairs drawn per original pair.
    pub multiplier: usize,
    /// Redraw the augmented pairs before every GAN epoch.
    #[serde(default)]
    pub resample: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub kfolds: usize,
    pub per_stim_test: usize,
    pub per_stim_train: usize,
    /// Cap on each of B_pos and B_neg.
    pub max_per_class: usize,
    pub classifier: ClassifierConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub split: f64,
    pub seed: u64,
    pub frames: usize,
    pub mode: AugmentMode,
    pub pvae: PvaeTrainConfig,
    pub pe: PeConfig,
    pub gan: GanConfig,
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    /// Desk-scale defaults for a synthetic corpus.
    pub fn synthetic(spec: SynthSpec, mode: AugmentMode, seed: u64) -> Self {
        let frames = spec.frames;
        let channels = 3 * spec.topology.limb_count();
        let mut config = Self {
            data: DataSource::Synth(spec),
            split: 0.5,
            seed,
            frames,
            mode,
            pvae: PvaeTrainConfig::standard(frames, channels),
            pe: PeConfig { s: 0.1, multiplier: 4, resample: false },
            gan: GanConfig::standard(frames, channels),
            eval: EvalConfig {
                kfolds: 5,
                per_stim_test: 1,
                per_stim_train: 3,
                max_per_class: 200,
                classifier: ClassifierConfig::standard(frames, channels),
            },
        };
        config.gan.epochs = 100;
        config.gan.steps_per_epoch = Some(30);
        config.set_seed(seed);
        config
    }

    /// Sets the experiment seed and reseeds the training stages from it.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.pvae.seed = seed::derive(seed, "pvae");
        self.gan.seed = seed::derive(seed, "act2act");
    }

    /// Resizes every network to `frames x channels` inputs, keeping widths.
    pub fn set_shape(&mut self, frames: usize, channels: usize) {
        self.frames = frames;
        let latent = self.pvae.arch.latent_dim;
        let widths = self.pvae.arch.conv.widths.clone();
        self.pvae.arch = VaeArch::standard(frames, channels);
        self.pvae.arch.latent_dim = latent;
        self.pvae.arch.conv.widths = widths;
        for arch in [&mut self.gan.arch, &mut self.eval.classifier.arch] {
            arch.seq_len = frames;
            arch.channels = channels;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!("split must lie in (0, 1), got {}", self.split)));
        }
        if let DataSource::Synth(spec) = &self.data {
            spec.validate()?;
        }
        self.pvae.validate()?;
        self.gan.validate()?;
        self.eval.classifier.arch.validate()?;
        if !(self.pe.s > 0.0) || self.pe.multiplier == 0 {
            return Err(Error::Config("pe.s must be positive and pe.multiplier >= 1".into()));
        }
        if self.eval.kfolds < 2 || self.eval.per_stim_test == 0 || self.eval.per_stim_train == 0 {
            return Err(Error::Config("eval needs kfolds >= 2 and per_stim >= 1".into()));
        }
        for (name, arch) in
            [("pvae", &self.pvae.arch.conv), ("gan", &self.gan.arch), ("classifier", &self.eval.classifier.arch)]
        {
            if arch.seq_len != self.frames {
                return Err(Error::Config(format!(
                    "{name} network expects {} frames but frames = {}",
                    arch.seq_len, self.frames
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let config: Self = read_json(path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// Output of the data stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataArtifact {
    pub topology: SkeletonTopology,
    pub rules: InteractionRuleSet,
    pub split: SetSplit,
    pub eval: EvalSet,
    pub oracle: Option<OracleParams>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvaeArtifact {
    pub trained: TrainedPvae,
    pub seconds: f64,
}

/// Effectiveness and reliability of both replacement matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrSummary {
    pub f_s: f64,
    pub r_s: f64,
    pub f_r: f64,
    pub r_r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NcArtifact {
    pub nc_s: NcMatrix,
    pub nc_r: NcMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentArtifact {
    pub train_set: PairedSet,
    pub replacements: Vec<Replacement>,
    pub fr: Option<FrSummary>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Act2ActArtifact {
    pub trained: TrainedAct2Act,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierArtifact {
    pub classifier: PairClassifier,
    pub cv: CvReport,
    pub seconds: f64,
}

/// Oracle audit of generated responses on a synthetic corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    /// Fraction of B_g (test) responses whose oracle category follows the rule.
    pub precision: f64,
    /// Mean pairwise L2 distance between responses to the same stimulation,
    /// divided by the mean response norm.
    pub diversity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalArtifact {
    pub bg_test: GeneratedSet,
    pub bg_train: GeneratedSet,
    pub iat_train_classifier: PairClassifier,
    pub iat_test: f64,
    pub iat_train: f64,
    pub oracle: Option<OracleSummary>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSizes {
    pub a_pairs: usize,
    pub train_pairs: usize,
    pub b_instances: usize,
    pub b_pos: usize,
    pub b_neg: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub mode: AugmentMode,
    pub seeds: BTreeMap<String, u64>,
    /// Wall-clock seconds per stage, as recorded when the stage ran.
    pub timings: BTreeMap<String, f64>,
    pub sizes: SetSizes,
    pub pvae_history: Option<PvaeHistory>,
    pub fr: Option<FrSummary>,
    pub cv: CvReport,
    pub iat_test: f64,
    pub iat_train: f64,
    pub oracle: Option<OracleSummary>,
    pub artifacts: BTreeMap<String, PathBuf>,
}

impl ExperimentReport {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// Stage artifact file names inside a run directory.
pub mod files {
    pub const CONFIG: &str = "config.json";
    pub const DATA: &str = "data.json";
    pub const PVAE: &str = "pvae.json";
    pub const NC: &str = "nc.json";
    pub const AUGMENT: &str = "augment.json";
    pub const ACT2ACT: &str = "act2act.json";
    pub const CLASSIFIER: &str = "classifier.json";
    pub const EVALUATE: &str = "evaluate.json";
    pub const REPORT: &str = "report.json";
}

/// Loads the artifact at `path` if present, otherwise runs `make` and saves it.
fn cached<T, F>(path: &Path, stage: &'static str, make: F) -> Result<T>
where
    T: Serialize + for<'de> Deserialize<'de>,
    F: FnOnce() -> Result<T>,
{
    if path.exists() {
        log::info!("stage {stage}: reusing {}", path.display());
        return read_json(path).map_err(|e| e.in_stage(stage));
    }
    log::info!("stage {stage}: running");
    let value = make().map_err(|e| e.in_stage(stage))?;
    write_json(path, &value).map_err(|e| e.in_stage(stage))?;
    Ok(value)
}

fn check_config(dir: &Path, config: &ExperimentConfig) -> Result<()> {
    let path = dir.join(files::CONFIG);
    if path.exists() {
        let stored: serde_json::Value = read_json(&path)?;
        if stored != serde_json::to_value(config)? {
            return Err(Error::Config(format!(
                "{} holds a run with a different configuration",
                dir.display()
            )));
        }
        return Ok(());
    }
    config.save(&path)
}

/// Loads or synthesizes the corpus and builds sets A and B.
pub fn data_stage(config: &ExperimentConfig) -> Result<DataArtifact> {
    let start = Instant::now();
    let (clips, topology, rules, oracle) = match &config.data {
        DataSource::Synth(spec) => {
            let corpus = generate_synthetic(spec)?;
            (corpus.clips, spec.topology.clone(), corpus.rules, Some(corpus.oracle))
        }
        DataSource::Manifest { manifest, rules } => {
            let (clips, topology) = load_manifest(manifest)?;
            (clips, topology, InteractionRuleSet::load(rules)?, None)
        }
    };
    let channels = 3 * topology.limb_count();
    if config.pvae.arch.conv.channels != channels {
        return Err(Error::Config(format!(
            "networks expect {} channels but the skeleton has {} limbs",
            config.pvae.arch.conv.channels,
            topology.limb_count()
        )));
    }
    let split = build_sets(&clips, &topology, &rules, config.split, seed::derive(config.seed, "split"), config.frames)?;
    let (b_pos, b_neg) =
        derive_pos_neg(&split.b, &rules, config.eval.max_per_class, seed::derive(config.seed, "pos_neg"))?;
    let eval = EvalSet { instances: split.b.clone(), b_pos, b_neg };
    Ok(DataArtifact { topology, rules, split, eval, oracle, seconds: start.elapsed().as_secs_f64() })
}

/// Exhausts every rule-conformant re-pairing of A's instances using the
/// withheld labels. The original pairs come first, unchanged.
pub fn reassign_pairs(
    a: &PairedSet,
    labels: &[(String, String)],
    rules: &InteractionRuleSet,
) -> Result<PairedSet> {
    let originals: Vec<&ActionPair> = a.originals().collect();
    if labels.is_empty() || labels.len() != originals.len() {
        return Err(Error::Argument(format!(
            "re-pairing needs one label per original pair: {} labels for {} pairs",
            labels.len(),
            originals.len()
        )));
    }
    for (s, r) in labels {
        if !rules.conforms(s, r) {
            return Err(Error::Argument(format!("labeled pair ({s}, {r}) violates the rules")));
        }
    }
    let mut out = PairedSet { pairs: originals.iter().map(|p| (*p).clone()).collect() };
    for rule in &rules.rules {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].0 == rule.stimulus).collect();
        for &i in &members {
            for &j in &members {
                if i != j {
                    out.pairs.push(ActionPair {
                        stim_id: originals[i].stim_id.clone(),
                        resp_id: originals[j].resp_id.clone(),
                        stim: originals[i].stim.clone(),
                        resp: originals[j].resp.clone(),
                        provenance: Provenance::Augmented,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Row-normalized replacement matrices for both roles, with F and R when
/// `labels` are given.
pub fn confidence_matrices(
    trained: &TrainedPvae,
    a: &PairedSet,
    s: f64,
    labels: Option<&[(String, String)]>,
) -> Result<(NcArtifact, Option<FrSummary>)> {
    let originals: Vec<&ActionPair> = a.originals().collect();
    let stims: Vec<_> = originals.iter().map(|p| &p.stim).collect();
    let resps: Vec<_> = originals.iter().map(|p| &p.resp).collect();
    let nc = |vae: &crate::pvae::VaeNetwork, p, actions: &[&crate::dataset::FlatAction], role| -> Result<NcMatrix> {
        let (mu, sigma) = vae.encode_many(actions)?;
        let emb = mu.iter().map(|m| project(p, m)).collect::<Result<Vec<_>>>()?;
        Ok(row_normalize(&compute_confidence(&emb, &sigma, p, s)?, role))
    };
    let nc_s = nc(&trained.pair.vae_s, &trained.p_s, &stims, Role::Stimulative)?;
    let nc_r = nc(&trained.pair.vae_r, &trained.p_r, &resps, Role::Responsive)?;
    let fr = match labels {
        Some(labels) => {
            let ls: Vec<&str> = labels.iter().map(|(s, _)| s.as_str()).collect();
            let lr: Vec<&str> = labels.iter().map(|(_, r)| r.as_str()).collect();
            Some(FrSummary {
                f_s: effectiveness(&nc_s),
                r_s: reliability(&nc_s, &ls)?,
                f_r: effectiveness(&nc_r),
                r_r: reliability(&nc_r, &lr)?,
            })
        }
        None => None,
    };
    Ok((NcArtifact { nc_s, nc_r }, fr))
}

fn oracle_summary(
    oracle: &OracleParams,
    rules: &InteractionRuleSet,
    instances: &[LabeledAction],
    bg_test: &GeneratedSet,
    bg_train: &GeneratedSet,
    per_stim_train: usize,
) -> Result<OracleSummary> {
    let category_of = |id: &str| -> Result<&str> {
        instances
            .iter()
            .find(|a| a.id == id)
            .map(|a| a.category.as_str())
            .ok_or_else(|| Error::Argument(format!("generated pair refers to unknown stimulation {id}")))
    };
    let mut hits = 0;
    for ((_, resp), id) in bg_test.pairs.iter().zip(&bg_test.stim_ids) {
        let expected = rules.response_for(category_of(id)?);
        if expected == Some(classify_flat(resp, oracle).0.as_str()) {
            hits += 1;
        }
    }
    let precision = hits as f64 / bg_test.len().max(1) as f64;
    let (mut dist, mut count) = (0.0, 0usize);
    for group in bg_train.pairs.chunks(per_stim_train) {
        for i in 0..group.len() {
            for j in i + 1..group.len() {
                dist += group[i].1.distance(&group[j].1);
                count += 1;
            }
        }
    }
    let mean_norm = bg_train.pairs.iter().map(|(_, r)| r.norm()).sum::<f64>() / bg_train.len().max(1) as f64;
    let diversity = if count == 0 || mean_norm == 0.0 { 0.0 } else { dist / count as f64 / mean_norm };
    Ok(OracleSummary { precision, diversity })
}

/// Runs every stage of `config` inside `dir`, reusing finished stages.
pub fn run_experiment(config: &ExperimentConfig, dir: &Path) -> Result<ExperimentReport> {
    config.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    check_config(dir, config)?;
    let path = |name: &str| dir.join(name);
    let mut artifacts = BTreeMap::new();
    let mut timings = BTreeMap::new();

    let data: DataArtifact = cached(&path(files::DATA), "data", || data_stage(config))?;
    artifacts.insert("data".to_string(), path(files::DATA));
    timings.insert("data".to_string(), data.seconds);
    let a = &data.split.a;

    let mut pvae_history = None;
    let mut nc_pair = None;
    if config.mode == AugmentMode::Pe {
        let pvae: PvaeArtifact = cached(&path(files::PVAE), "pvae", || {
            let start = Instant::now();
            let trained = train_pvaes(a, &config.pvae)?;
            Ok(PvaeArtifact { trained, seconds: start.elapsed().as_secs_f64() })
        })?;
        artifacts.insert("pvae".to_string(), path(files::PVAE));
        timings.insert("pvae".to_string(), pvae.seconds);
        pvae_history = Some(pvae.trained.history.clone());
        nc_pair = Some(pvae.trained);
    }

    let augment: AugmentArtifact = cached(&path(files::AUGMENT), "augment", || {
        let start = Instant::now();
        let (train_set, replacements, fr) = match config.mode {
            AugmentMode::None => (a.clone(), Vec::new(), None),
            AugmentMode::Reassign => (reassign_pairs(a, &data.split.a_labels, &data.rules)?, Vec::new(), None),
            AugmentMode::Pe => {
                let trained = nc_pair.as_ref().ok_or_else(|| Error::Argument("PVAEs missing".into()))?;
                let (nc, fr) = confidence_matrices(trained, a, config.pe.s, Some(&data.split.a_labels))?;
                write_json(&path(files::NC), &nc)?;
                let (set, reps) =
                    sample_augmented_pairs(a, &nc.nc_s, &nc.nc_r, config.pe.multiplier, augment_seed(config, 0))?;
                (set, reps, fr)
            }
        };
        Ok(AugmentArtifact { train_set, replacements, fr, seconds: start.elapsed().as_secs_f64() })
    })?;
    artifacts.insert("augment".to_string(), path(files::AUGMENT));
    if config.mode == AugmentMode::Pe {
        artifacts.insert("nc".to_string(), path(files::NC));
    }
    timings.insert("augment".to_string(), augment.seconds);

    let gan: Act2ActArtifact = cached(&path(files::ACT2ACT), "act2act", || {
        let start = Instant::now();
        let trained = if config.mode == AugmentMode::Pe && config.pe.resample {
            let nc: NcArtifact = read_json(&path(files::NC))?;
            train_act2act_with(&augment.train_set, &config.gan, |epoch| {
                let seed = augment_seed(config, epoch);
                Ok(Some(sample_augmented_pairs(a, &nc.nc_s, &nc.nc_r, config.pe.multiplier, seed)?.0))
            })?
        } else {
            train_act2act_with(&augment.train_set, &config.gan, |_| Ok(None))?
        };
        Ok(Act2ActArtifact { trained, seconds: start.elapsed().as_secs_f64() })
    })?;
    artifacts.insert("act2act".to_string(), path(files::ACT2ACT));
    timings.insert("act2act".to_string(), gan.seconds);

    let classifier: ClassifierArtifact = cached(&path(files::CLASSIFIER), "classifier", || {
        let start = Instant::now();
        let (classifier, cv) = train_pair_classifier(
            &data.eval.pairs(&data.eval.b_pos),
            &data.eval.pairs(&data.eval.b_neg),
            config.eval.kfolds,
            &config.eval.classifier,
            seed::derive(config.seed, "classifier"),
        )?;
        Ok(ClassifierArtifact { classifier, cv, seconds: start.elapsed().as_secs_f64() })
    })?;
    artifacts.insert("classifier".to_string(), path(files::CLASSIFIER));
    timings.insert("classifier".to_string(), classifier.seconds);

    let evaluation: EvalArtifact = cached(&path(files::EVALUATE), "evaluate", || {
        let start = Instant::now();
        let generator = &gan.trained.generator;
        let stims: Vec<&LabeledAction> = data.eval.stimulations().collect();
        let bg_test =
            build_generated_set(generator, &stims, config.eval.per_stim_test, seed::derive(config.seed, "bg_test"))?;
        let bg_train =
            build_generated_set(generator, &stims, config.eval.per_stim_train, seed::derive(config.seed, "bg_train"))?;
        let test_score = iat_test(&classifier.classifier, &bg_test)?;
        let b_neg = data.eval.pairs(&data.eval.b_neg);
        let clf = iat_train_classifier(&bg_train, &b_neg, &config.eval.classifier, seed::derive(config.seed, "iat"))?;
        let train_score = acceptance_rate(&clf, a)?;
        let oracle = match &data.oracle {
            Some(o) => Some(oracle_summary(
                o,
                &data.rules,
                &data.eval.instances,
                &bg_test,
                &bg_train,
                config.eval.per_stim_train,
            )?),
            None => None,
        };
        Ok(EvalArtifact {
            bg_test,
            bg_train,
            iat_train_classifier: clf,
            iat_test: test_score,
            iat_train: train_score,
            oracle,
            seconds: start.elapsed().as_secs_f64(),
        })
    })?;
    artifacts.insert("evaluate".to_string(), path(files::EVALUATE));
    timings.insert("evaluate".to_string(), evaluation.seconds);

    let mut seeds = BTreeMap::new();
    seeds.insert("experiment".to_string(), config.seed);
    seeds.insert("pvae".to_string(), config.pvae.seed);
    seeds.insert("act2act".to_string(), config.gan.seed);
    if let DataSource::Synth(spec) = &config.data {
        seeds.insert("synth".to_string(), spec.seed);
    }
    artifacts.insert("report".to_string(), path(files::REPORT));
    let report = ExperimentReport {
        mode: config.mode,
        seeds,
        timings,
        sizes: SetSizes {
            a_pairs: a.len(),
            train_pairs: augment.train_set.len(),
            b_instances: data.eval.instances.len(),
            b_pos: data.eval.b_pos.len(),
            b_neg: data.eval.b_neg.len(),
        },
        pvae_history,
        fr: augment.fr.clone(),
        cv: classifier.cv.clone(),
        iat_test: evaluation.iat_test,
        iat_train: evaluation.iat_train,
        oracle: evaluation.oracle.clone(),
        artifacts,
    };
    write_json(&path(files::REPORT), &report)?;
    Ok(report)
}

/// Turns a flat limb-vector action back into joint positions with the
/// root fixed at the origin.
pub fn action_to_clip(action: &FlatAction, topology: &SkeletonTopology, limb_lengths: &[f64], id: &str) -> Result<ActionClip> {
    let seq = action.to_limbs(topology, limb_lengths.to_vec())?;
    let root = vec![[0.0; 3]; action.frames];
    let clip = limbs_to_joints(&seq, limb_lengths, &root)?;
    Ok(ActionClip { id: id.to_string(), ..clip })
}

fn augment_seed(config: &ExperimentConfig, epoch: usize) -> u64 {
    seed::derive_indexed(config.seed, "augment", epoch as u64)
}
