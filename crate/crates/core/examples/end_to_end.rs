//! Full pipeline on the synthetic corpus for one augmentation mode.
//!
//! `cargo run --release --example end_to_end -- pe` (or `none`, `reassign`).
//! Artifacts go to `$IAT_ARTIFACT_ROOT/end_to_end-<mode>-<seed>`; rerunning
//! reuses finished stages. `SEED`, `PVAE_EPOCHS`, `GAN_EPOCHS` and `GAN_STEPS`
//! override the defaults.

use iat::pipeline::{artifact_root, run_experiment, AugmentMode, ExperimentConfig};
use iat::synth::SynthSpec;

fn env_or<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mode = match std::env::args().nth(1).as_deref().unwrap_or("pe") {
        "none" => AugmentMode::None,
        "pe" => AugmentMode::Pe,
        "reassign" => AugmentMode::Reassign,
        other => anyhow::bail!("unknown mode {other}"),
    };
    let spec = SynthSpec { per_class: 40, ..SynthSpec::default() };
    let mut config = ExperimentConfig::synthetic(spec, mode, env_or("SEED", 17));
    config.pvae.epochs = env_or("PVAE_EPOCHS", config.pvae.epochs);
    config.gan.epochs = env_or("GAN_EPOCHS", config.gan.epochs);
    config.gan.steps_per_epoch = std::env::var("GAN_STEPS").ok().and_then(|v| v.parse().ok()).or(config.gan.steps_per_epoch);
    let dir = artifact_root().join(format!("end_to_end-{}-{}", format!("{mode:?}").to_lowercase(), config.seed));
    let report = run_experiment(&config, &dir)?;
    println!("mode {:?}: {} training pairs", report.mode, report.sizes.train_pairs);
    if let Some(fr) = &report.fr {
        println!("F = {:.3}, R = {:.3} (stimulations)", fr.f_s, fr.r_s);
    }
    println!("classifier CV {:.2} +- {:.2}", report.cv.mean, report.cv.std);
    println!("IAT-test {:.2}  IAT-train {:.2}", report.iat_test, report.iat_train);
    if let Some(o) = &report.oracle {
        println!("oracle precision {:.3}, diversity {:.3}", o.precision, o.diversity);
    }
    for (stage, secs) in &report.timings {
        println!("  {stage:<10} {secs:>8.1}s");
    }
    Ok(())
}
