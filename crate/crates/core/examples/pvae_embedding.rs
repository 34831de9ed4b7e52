//! Trains paired VAEs on the synthetic corpus with and without the
//! paired-embedding step, then compares how well the stimulation
//! embeddings cluster by (withheld) category.
//!
//! `cargo run --release --example pvae_embedding [epochs]`
//!
//! Writes `pvae_embedding-{pe,vae}.svg` under `$IAT_ARTIFACT_ROOT`.

use std::time::Instant;

use iat::cluster::{kmeans, purity};
use iat::dataset::FlatAction;
use iat::pe_augment::project;
use iat::pipeline::plot::{fr_point, plot_embeddings};
use iat::pipeline::{artifact_root, data_stage, ExperimentConfig, AugmentMode};
use iat::pvae::train_pvaes;
use iat::synth::SynthSpec;

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let spec = SynthSpec { per_class: 40, ..SynthSpec::default() };
    let mut config = ExperimentConfig::synthetic(spec, AugmentMode::Pe, 17);
    if let Some(epochs) = std::env::args().nth(1) {
        config.pvae.epochs = epochs.parse()?;
    }
    let data = data_stage(&config)?;
    let labels: Vec<String> = data.split.a_labels.iter().map(|(s, _)| s.clone()).collect();
    let stims: Vec<&FlatAction> = data.split.a.originals().map(|p| &p.stim).collect();
    println!("{} pairs in A, {} rules", stims.len(), data.rules.len());

    for pe in [true, false] {
        let mut cfg = config.pvae.clone();
        cfg.pe_enabled = pe;
        let start = Instant::now();
        let trained = train_pvaes(&data.split.a, &cfg)?;
        let (mu, sigma) = trained.pair.vae_s.encode_many(&stims)?;
        let emb = mu.iter().map(|m| project(&trained.p_s, m)).collect::<Result<Vec<_>, _>>()?;
        let points: Vec<Vec<f64>> = emb.iter().map(|e| e.0.clone()).collect();
        let k_purity = purity(&kmeans(&points, data.rules.len(), 10, 1), &labels);
        let (f, r) = fr_point(&mu, &sigma, &trained.p_s, &labels, config.pe.s)?;
        let name = if pe { "pe" } else { "vae" };
        let svg = artifact_root().join(format!("pvae_embedding-{name}.svg"));
        let silhouette = plot_embeddings(&emb, &labels, &svg)?;
        println!(
            "{:<8} purity {k_purity:.3}  silhouette {silhouette:.3}  F {f:.3}  R {r:.3}  ({:.0}s) -> {}",
            if pe { "PE" } else { "VAE-only" },
            start.elapsed().as_secs_f64(),
            svg.display()
        );
    }
    Ok(())
}
