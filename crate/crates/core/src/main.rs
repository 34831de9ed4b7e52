//! Command-line front end over the `iat` library.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use iat::act2act::{generate_response, train_act2act, GanConfig, TrainedAct2Act};
use iat::dataset::{
    build_sets, derive_pos_neg, flatten_clip, joints_to_limbs, load_manifest, read_json, write_json, ActionClip,
    EvalSet, InteractionRuleSet, LabeledAction, Manifest, PairedSet, SkeletonTopology,
};
use iat::iat_metrics::{build_generated_set, iat_test, iat_train, train_pair_classifier, ClassifierConfig};
use iat::pe_augment::{project, sample_augmented_pairs};
use iat::pipeline::plot::{fr_table, plot_embeddings, plot_fr_curves, render_skeleton_grid};
use iat::pipeline::{
    action_to_clip, artifact_root, confidence_matrices, run_experiment, AugmentMode, ExperimentConfig,
};
use iat::pvae::{train_pvaes, PvaeTrainConfig, TrainedPvae};
use iat::seed;
use iat::synth::{generate_synthetic, SynthSpec};
use iat::Error;

/// Files inside a pair directory written by `ingest` and `augment`.
const PAIRS: &str = "pairs.json";
const LABELS: &str = "labels.json";
const EVAL_SET: &str = "eval_set.json";
const RULES: &str = "rules.json";
const TOPOLOGY: &str = "topology.json";

#[derive(Parser)]
#[command(name = "iat", version, about = "Interactive action translation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    None,
    Pe,
    Reassign,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus as a manifest plus its rules file.
    Synth {
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 32)]
        t: usize,
        /// Peak sway of the free limbs in radians.
        #[arg(long, default_value_t = 0.5)]
        free_amplitude: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Rules file; defaults to rules.json beside the manifest.
        #[arg(long)]
        rules_out: Option<PathBuf>,
    },
    /// Split a manifest into unlabeled pairs (A) and a labeled evaluation set (B).
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        split: f64,
        #[arg(long, default_value_t = 32)]
        frames: usize,
        #[arg(long, default_value_t = 200)]
        max_per_class: usize,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the paired VAEs on a pair directory.
    TrainPvae {
        #[arg(long)]
        pairs: PathBuf,
        /// Defaults to the standard configuration.
        #[arg(long)]
        epochs: Option<usize>,
        /// KL weight; defaults to the standard configuration.
        #[arg(long)]
        lkl: Option<f64>,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        /// Skip the paired-embedding step (plain VAEs).
        #[arg(long)]
        no_pe: bool,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw augmented pairs from trained PVAEs.
    Augment {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        s: f64,
        /// Must match the checkpoint's embedding dimension.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, default_value_t = 4)]
        mult: usize,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the Act2Act generator on a pair directory.
    TrainAct2act {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        /// Generator updates per epoch.
        #[arg(long, default_value_t = 30)]
        steps: usize,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate responses to a stimulation clip.
    Generate {
        #[arg(long)]
        ckpt: PathBuf,
        /// A single clip in manifest clip format.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a generator with IAT-test and IAT-train.
    Evaluate {
        #[arg(long)]
        gen_ckpt: PathBuf,
        /// Pair directory written by `ingest`.
        #[arg(long)]
        eval_set: PathBuf,
        #[arg(long, default_value_t = 5)]
        kfolds: usize,
        #[arg(long, default_value_t = 1)]
        per_stim_test: usize,
        #[arg(long, default_value_t = 3)]
        per_stim_train: usize,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole pipeline with stage checkpoints.
    Run {
        /// Experiment configuration (JSON); a synthetic default when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Augmentation mode for the default configuration.
        #[arg(long, value_enum, default_value = "pe")]
        mode: Mode,
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory; defaults to `$IAT_ARTIFACT_ROOT/run-<mode>-<seed>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the effective configuration here and exit.
        #[arg(long)]
        print_config: Option<PathBuf>,
    },
    /// Render figures.
    Plot {
        #[command(subcommand)]
        figure: Figure,
    },
}

#[derive(Subcommand)]
enum Figure {
    /// Stick-figure strips of clips from a manifest or a clip directory.
    Skeletons {
        /// Manifest, single clip JSON, or a directory of clip JSON files.
        #[arg(long)]
        input: PathBuf,
        /// Topology (parent array JSON) when the input is not a manifest.
        #[arg(long)]
        topology: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 5)]
        max_clips: usize,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scatter of stimulation embeddings colored by withheld category.
    Embeddings {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// F/R curves over scale factors and dimensions, with a JSON sidecar.
    Fr {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.5,1.0")]
        s_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        d_grid: Vec<usize>,
        #[arg(long, default_value_t = 0.1)]
        s: f64,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Generator checkpoint with the skeleton needed to turn outputs into joints.
#[derive(Serialize, Deserialize)]
struct GeneratorCheckpoint {
    topology: SkeletonTopology,
    limb_lengths: Vec<f64>,
    trained: TrainedAct2Act,
}

#[derive(Serialize)]
struct EvaluationReport {
    cv_mean: f64,
    cv_std: f64,
    cv_folds: Vec<f64>,
    iat_test: f64,
    iat_train: f64,
    kfolds: usize,
    per_stim_test: usize,
    per_stim_train: usize,
    classifier: ClassifierConfig,
    seed: u64,
}

fn staged<T>(stage: &'static str, r: iat::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| anyhow::Error::new(e.in_stage(stage)))
}

fn load_pairs(dir: &Path) -> anyhow::Result<PairedSet> {
    read_json(&dir.join(PAIRS)).with_context(|| format!("reading pairs from {}", dir.display()))
}

fn copy_sidecars(from: &Path, to: &Path) -> anyhow::Result<()> {
    for name in [LABELS, EVAL_SET, RULES, TOPOLOGY] {
        let src = from.join(name);
        if src.exists() && from != to {
            std::fs::create_dir_all(to)?;
            std::fs::copy(&src, to.join(name)).with_context(|| format!("copying {}", src.display()))?;
        }
    }
    Ok(())
}

fn stim_labels(dir: &Path) -> anyhow::Result<Vec<String>> {
    let labels: Vec<(String, String)> =
        read_json(&dir.join(LABELS)).with_context(|| format!("{} has no withheld labels", dir.display()))?;
    Ok(labels.into_iter().map(|(s, _)| s).collect())
}

fn mean_limb_lengths(clips: &[ActionClip], topology: &SkeletonTopology) -> iat::Result<Vec<f64>> {
    let mut sum = vec![0.0; topology.limb_count()];
    for clip in clips {
        for (s, l) in sum.iter_mut().zip(joints_to_limbs(clip, topology)?.limb_lengths) {
            *s += l;
        }
    }
    Ok(sum.into_iter().map(|s| s / clips.len().max(1) as f64).collect())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth { k, per_class, t, free_amplitude, seed, out, rules_out } => {
            let spec = SynthSpec { k, per_class, frames: t, free_amplitude, seed, ..SynthSpec::default() };
            let corpus = staged("synth", generate_synthetic(&spec))?;
            let manifest = Manifest::new("synthetic", &spec.topology, corpus.clips);
            staged("synth", manifest.save(&out))?;
            let rules_path = rules_out.unwrap_or_else(|| out.with_file_name(RULES));
            staged("synth", corpus.rules.save(&rules_path))?;
            println!("wrote {} clips to {} and rules to {}", manifest.clips.len(), out.display(), rules_path.display());
        }
        Command::Ingest { manifest, rules, split, frames, max_per_class, seed, out } => {
            let (clips, topology) = staged("ingest", load_manifest(&manifest))?;
            let rules = staged("ingest", InteractionRuleSet::load(&rules))?;
            let sets = staged("ingest", build_sets(&clips, &topology, &rules, split, seed, frames))?;
            let (b_pos, b_neg) =
                staged("ingest", derive_pos_neg(&sets.b, &rules, max_per_class, seed::derive(seed, "pos_neg")))?;
            let eval = EvalSet { instances: sets.b.clone(), b_pos, b_neg };
            staged("ingest", write_json(&out.join(PAIRS), &sets.a))?;
            staged("ingest", write_json(&out.join(LABELS), &sets.a_labels))?;
            staged("ingest", write_json(&out.join(EVAL_SET), &eval))?;
            staged("ingest", rules.save(&out.join(RULES)))?;
            let lengths = staged("ingest", mean_limb_lengths(&clips, &topology))?;
            staged("ingest", write_json(&out.join(TOPOLOGY), &(topology, lengths)))?;
            println!(
                "A: {} pairs; B: {} instances, {} positive / {} negative pairs -> {}",
                sets.a.len(),
                eval.instances.len(),
                eval.b_pos.len(),
                eval.b_neg.len(),
                out.display()
            );
        }
        Command::TrainPvae { pairs, epochs, lkl, dim, no_pe, seed, out } => {
            let a = load_pairs(&pairs)?;
            let (frames, channels) = staged("pvae", a.validate())?;
            let mut config = PvaeTrainConfig::standard(frames, channels);
            config.epochs = epochs.unwrap_or(config.epochs);
            config.lambda_kl = lkl.unwrap_or(config.lambda_kl);
            config.embed_dim = dim;
            config.pe_enabled = !no_pe;
            config.seed = seed;
            let trained = staged("pvae", train_pvaes(&a, &config))?;
            staged("pvae", write_json(&out, &trained))?;
            println!(
                "trained {} epochs; final L_vae {:.3}; checkpoint {}",
                config.epochs,
                trained.history.vae_s.last().copied().unwrap_or(f64::NAN),
                out.display()
            );
        }
        Command::Augment { ckpt, pairs, s, dim, mult, seed, out } => {
            let trained: TrainedPvae = staged("augment", read_json(&ckpt))?;
            if let Some(d) = dim.filter(|d| *d != trained.p_s.dim()) {
                return Err(Error::Argument(format!("checkpoint embeds in d = {}, not {d}", trained.p_s.dim()))
                    .in_stage("augment")
                    .into());
            }
            let a = load_pairs(&pairs)?;
            let labels: Option<Vec<(String, String)>> = read_json(&pairs.join(LABELS)).ok();
            let (nc, fr) = staged("augment", confidence_matrices(&trained, &a, s, labels.as_deref()))?;
            let (set, replacements) =
                staged("augment", sample_augmented_pairs(&a, &nc.nc_s, &nc.nc_r, mult, seed::derive(seed, "augment")))?;
            staged("augment", write_json(&out.join(PAIRS), &set))?;
            staged("augment", write_json(&out.join("replacements.json"), &replacements))?;
            staged("augment", write_json(&out.join("nc.json"), &nc))?;
            if let Some(fr) = &fr {
                staged("augment", write_json(&out.join("fr.json"), fr))?;
                println!("F_s {:.3} R_s {:.3} F_r {:.3} R_r {:.3}", fr.f_s, fr.r_s, fr.f_r, fr.r_r);
            }
            copy_sidecars(&pairs, &out)?;
            println!("{} pairs ({} original) -> {}", set.len(), a.len(), out.display());
        }
        Command::TrainAct2act { pairs, epochs, steps, seed, out } => {
            let set = load_pairs(&pairs)?;
            let (frames, channels) = staged("act2act", set.validate())?;
            let mut config = GanConfig::standard(frames, channels);
            config.epochs = epochs;
            config.steps_per_epoch = Some(steps);
            config.seed = seed;
            let trained = staged("act2act", train_act2act(&set, &config))?;
            let (topology, limb_lengths): (SkeletonTopology, Vec<f64>) = read_json(&pairs.join(TOPOLOGY))
                .with_context(|| format!("{} has no {TOPOLOGY}", pairs.display()))?;
            let ckpt = GeneratorCheckpoint { topology, limb_lengths, trained };
            staged("act2act", write_json(&out, &ckpt))?;
            println!("trained on {} pairs; checkpoint {}", set.len(), out.display());
        }
        Command::Generate { ckpt, input, samples, seed, out } => {
            let ckpt: GeneratorCheckpoint = staged("generate", read_json(&ckpt))?;
            let clip: ActionClip = staged("generate", read_json(&input))?;
            let frames = ckpt.trained.generator.arch.seq_len;
            let stim = staged("generate", flatten_clip(&clip, &ckpt.topology, frames))?;
            let mut clips = vec![staged("generate", action_to_clip(&stim, &ckpt.topology, &ckpt.limb_lengths, &clip.id))?];
            for i in 0..samples {
                let resp = staged(
                    "generate",
                    generate_response(&ckpt.trained.generator, &stim, seed::derive_indexed(seed, "generate", i as u64)),
                )?;
                let id = format!("{}_response{i}", clip.id);
                let joints = staged("generate", action_to_clip(&resp, &ckpt.topology, &ckpt.limb_lengths, &id))?;
                staged("generate", write_json(&out.join(format!("{id}.json")), &joints))?;
                clips.push(joints);
            }
            staged("generate", write_json(&out.join(TOPOLOGY), &ckpt.topology))?;
            staged("generate", render_skeleton_grid(&clips, &ckpt.topology, 8, &out.join("responses.svg")))?;
            println!("{samples} responses -> {}", out.display());
        }
        Command::Evaluate { gen_ckpt, eval_set, kfolds, per_stim_test, per_stim_train, seed, out } => {
            let ckpt: GeneratorCheckpoint = staged("evaluate", read_json(&gen_ckpt))?;
            let eval: EvalSet = staged("evaluate", read_json(&eval_set.join(EVAL_SET)))?;
            let a = load_pairs(&eval_set)?;
            let (frames, channels) = staged("evaluate", a.validate())?;
            let config = ClassifierConfig::standard(frames, channels);
            let (pos, neg) = (eval.pairs(&eval.b_pos), eval.pairs(&eval.b_neg));
            let (clf, cv) =
                staged("evaluate", train_pair_classifier(&pos, &neg, kfolds, &config, seed::derive(seed, "classifier")))?;
            let stims: Vec<&LabeledAction> = eval.stimulations().collect();
            let g = &ckpt.trained.generator;
            let bg_test = staged("evaluate", build_generated_set(g, &stims, per_stim_test, seed::derive(seed, "bg_test")))?;
            let bg_train =
                staged("evaluate", build_generated_set(g, &stims, per_stim_train, seed::derive(seed, "bg_train")))?;
            let report = EvaluationReport {
                cv_mean: cv.mean,
                cv_std: cv.std,
                cv_folds: cv.folds,
                iat_test: staged("evaluate", iat_test(&clf, &bg_test))?,
                iat_train: staged("evaluate", iat_train(&bg_train, &neg, &a, &config, seed::derive(seed, "iat")))?,
                kfolds,
                per_stim_test,
                per_stim_train,
                classifier: config,
                seed,
            };
            staged("evaluate", write_json(&out, &report))?;
            println!(
                "CV {:.2} +- {:.2}  IAT-test {:.2}  IAT-train {:.2}",
                report.cv_mean, report.cv_std, report.iat_test, report.iat_train
            );
        }
        Command::Run { config, mode, seed, out, print_config } => {
            let mut config = match config {
                Some(path) => ExperimentConfig::load(&path).with_context(|| format!("loading {}", path.display()))?,
                None => {
                    let mode = match mode {
                        Mode::None => AugmentMode::None,
                        Mode::Pe => AugmentMode::Pe,
                        Mode::Reassign => AugmentMode::Reassign,
                    };
                    ExperimentConfig::synthetic(SynthSpec::default(), mode, 17)
                }
            };
            if let Some(seed) = seed {
                config.set_seed(seed);
            }
            if let Some(path) = print_config {
                config.save(&path)?;
                println!("configuration written to {}", path.display());
                return Ok(());
            }
            let dir = out.unwrap_or_else(|| {
                artifact_root().join(format!("run-{}-{}", format!("{:?}", config.mode).to_lowercase(), config.seed))
            });
            let report = run_experiment(&config, &dir)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Plot { figure } => plot(figure)?,
    }
    Ok(())
}

fn plot(figure: Figure) -> anyhow::Result<()> {
    match figure {
        Figure::Skeletons { input, topology, samples, max_clips, seed: _, out } => {
            let (clips, topo) = if input.is_dir() {
                let topo_path = topology.context("--topology is required for a clip directory")?;
                let topo: SkeletonTopology = staged("plot", read_json(&topo_path))?;
                let mut paths: Vec<PathBuf> = std::fs::read_dir(&input)?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "json"))
                    .collect();
                paths.sort();
                let clips = paths.iter().map(|p| read_json(p)).collect::<iat::Result<Vec<ActionClip>>>();
                (staged("plot", clips)?, topo)
            } else if let Some(topo_path) = topology {
                let clip: ActionClip = staged("plot", read_json(&input))?;
                (vec![clip], staged("plot", read_json(&topo_path))?)
            } else {
                staged("plot", load_manifest(&input))?
            };
            let clips: Vec<ActionClip> = clips.into_iter().take(max_clips).collect();
            let shape = staged("plot", render_skeleton_grid(&clips, &topo, samples, &out))?;
            println!("{}x{} grid -> {}", shape.rows, shape.cols, out.display());
        }
        Figure::Embeddings { ckpt, pairs, seed: _, out } => {
            let trained: TrainedPvae = staged("plot", read_json(&ckpt))?;
            let a = load_pairs(&pairs)?;
            let labels = stim_labels(&pairs)?;
            let stims: Vec<_> = a.originals().map(|p| &p.stim).collect();
            let (mu, _) = staged("plot", trained.pair.vae_s.encode_many(&stims))?;
            let emb = staged("plot", mu.iter().map(|m| project(&trained.p_s, m)).collect::<iat::Result<Vec<_>>>())?;
            let score = staged("plot", plot_embeddings(&emb, &labels, &out))?;
            println!("silhouette {score:.3} -> {}", out.display());
        }
        Figure::Fr { ckpt, pairs, s_grid, d_grid, s, seed: _, out } => {
            let trained: TrainedPvae = staged("plot", read_json(&ckpt))?;
            let a = load_pairs(&pairs)?;
            let labels = stim_labels(&pairs)?;
            let originals: Vec<_> = a.originals().collect();
            let rows = staged("plot", fr_table(&trained, &originals, &labels, &s_grid, &d_grid, s))?;
            staged("plot", plot_fr_curves(&rows, &out))?;
            for r in &rows {
                println!("{} s={:<5} d={} F={:.3} R={:.3}", r.panel, r.s, r.d, r.f, r.r);
            }
        }
    }
    Ok(())
}
