//! Trains the Act2Act generator on the unaugmented pairs of A, then
//! generates three responses for one held-out stimulation per category and
//! labels them with the synthetic oracle.
//!
//! `cargo run --release --example act2act_generation [epochs]`
//!
//! Stick figures go to `$IAT_ARTIFACT_ROOT/act2act_generation.svg`.

use std::time::Instant;

use iat::act2act::{generate_response, train_act2act};
use iat::pipeline::plot::render_skeleton_grid;
use iat::pipeline::{action_to_clip, artifact_root, data_stage, AugmentMode, ExperimentConfig};
use iat::synth::{classify_flat, SynthSpec};

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let mut config = ExperimentConfig::synthetic(SynthSpec { per_class: 40, ..SynthSpec::default() }, AugmentMode::None, 17);
    config.gan.epochs = std::env::args().nth(1).map(|e| e.parse()).transpose()?.unwrap_or(config.gan.epochs);
    let data = data_stage(&config)?;
    let oracle = data.oracle.as_ref().expect("synthetic source");

    let start = Instant::now();
    let trained = train_act2act(&data.split.a, &config.gan)?;
    let h = &trained.history;
    println!(
        "{} epochs in {:.0}s; final critic loss {:.3}, generator loss {:.3}, D(real) - D(fake) {:.3}",
        h.critic.len(),
        start.elapsed().as_secs_f64(),
        h.critic.last().copied().unwrap_or(f64::NAN),
        h.generator.last().copied().unwrap_or(f64::NAN),
        h.wasserstein.last().copied().unwrap_or(f64::NAN),
    );

    let mut clips = Vec::new();
    let (mut hits, mut total) = (0, 0);
    for rule in &data.rules.rules {
        let Some(stim) = data.eval.stimulations().find(|a| a.category == rule.stimulus) else { continue };
        clips.push(action_to_clip(&stim.action, &data.topology, &oracle.lengths, &stim.id)?);
        for seed in 0..3 {
            let resp = generate_response(&trained.generator, &stim.action, seed)?;
            let (label, _) = classify_flat(&resp, oracle);
            hits += usize::from(label == rule.response);
            total += 1;
            println!("  {} -> generated {label} (expected {})", stim.id, rule.response);
            clips.push(action_to_clip(&resp, &data.topology, &oracle.lengths, &format!("{}-gen{seed}", stim.id))?);
        }
    }
    println!("{hits}/{total} generated responses match the rule");
    let out = artifact_root().join("act2act_generation.svg");
    let shape = render_skeleton_grid(&clips, &data.topology, 8, &out)?;
    println!("{}x{} stick figures -> {}", shape.rows, shape.cols, out.display());
    Ok(())
}
