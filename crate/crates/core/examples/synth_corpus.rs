//! Generates a synthetic corpus, checks the nearest-template oracle on it,
//! saves it as a manifest and draws one clip per category.
//!
//! `cargo run --release --example synth_corpus [free_amplitude]`

use iat::dataset::{flatten_clip, Manifest};
use iat::pipeline::artifact_root;
use iat::pipeline::plot::render_skeleton_grid;
use iat::synth::{classify_flat, generate_synthetic, min_template_separation, template_distance, SynthSpec};

fn main() -> anyhow::Result<()> {
    let mut spec = SynthSpec { per_class: 40, ..SynthSpec::default() };
    if let Some(p) = std::env::args().nth(1) {
        spec.free_amplitude = p.parse()?;
    }
    let corpus = generate_synthetic(&spec)?;
    let oracle = &corpus.oracle;
    let mut correct = 0;
    let mut max_intra: f64 = 0.0;
    for clip in &corpus.clips {
        let flat = flatten_clip(clip, &spec.topology, spec.frames)?;
        let (label, _) = classify_flat(&flat, oracle);
        let own = clip.category.as_deref().unwrap_or_default();
        correct += usize::from(label == own);
        let idx = oracle.category_index(own).unwrap_or_default();
        max_intra = max_intra.max(template_distance(&flat, oracle, idx));
    }
    println!(
        "{} clips in {} categories, oracle accuracy {:.3}, max distance to own template {:.4}, min template separation {:.4}",
        corpus.clips.len(),
        oracle.categories.len(),
        correct as f64 / corpus.clips.len() as f64,
        max_intra,
        min_template_separation(oracle)
    );

    let dir = artifact_root().join("synth_corpus");
    Manifest::new("synthetic", &spec.topology, corpus.clips.clone()).save(&dir.join("manifest.json"))?;
    corpus.rules.save(&dir.join("rules.json"))?;
    let firsts: Vec<_> = corpus.clips.iter().step_by(spec.per_class).cloned().collect();
    render_skeleton_grid(&firsts, &spec.topology, 8, &dir.join("categories.svg"))?;
    println!("manifest, rules and categories.svg -> {}", dir.display());
    Ok(())
}
