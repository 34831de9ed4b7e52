//! Paired-embedding augmentation: train PVAEs, build the replacement
//! matrices, draw new pairs and audit them against the withheld labels.
//!
//! `cargo run --release --example pe_augmentation [epochs]`
//!
//! Also writes the F/R curves to `$IAT_ARTIFACT_ROOT/pe_augmentation-fr.svg`.

use iat::pe_augment::sample_augmented_pairs;
use iat::pipeline::plot::{fr_table, plot_fr_curves};
use iat::pipeline::{artifact_root, confidence_matrices, data_stage, AugmentMode, ExperimentConfig};
use iat::pvae::train_pvaes;
use iat::synth::SynthSpec;

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let mut config = ExperimentConfig::synthetic(SynthSpec { per_class: 40, ..SynthSpec::default() }, AugmentMode::Pe, 17);
    if let Some(epochs) = std::env::args().nth(1) {
        config.pvae.epochs = epochs.parse()?;
    }
    let data = data_stage(&config)?;
    let a = &data.split.a;
    let labels = &data.split.a_labels;
    let trained = train_pvaes(a, &config.pvae)?;

    let (nc, fr) = confidence_matrices(&trained, a, config.pe.s, Some(labels))?;
    let fr = fr.expect("labels given");
    println!("s = {}: stimulations F {:.3} R {:.3}, responses F {:.3} R {:.3}", config.pe.s, fr.f_s, fr.r_s, fr.f_r, fr.r_r);

    let (augmented, replacements) = sample_augmented_pairs(a, &nc.nc_s, &nc.nc_r, config.pe.multiplier, 5)?;
    let conforming = replacements
        .iter()
        .filter(|r| data.rules.conforms(&labels[r.stim_index].0, &labels[r.resp_index].1))
        .count();
    let changed = replacements.iter().filter(|r| r.stim_index != r.source_pair || r.resp_index != r.source_pair).count();
    println!(
        "{} pairs -> {} after augmentation; {:.1}% of new pairs differ from their source, {:.1}% follow the rules",
        a.len(),
        augmented.len(),
        100.0 * changed as f64 / replacements.len() as f64,
        100.0 * conforming as f64 / replacements.len() as f64
    );

    let originals: Vec<_> = a.originals().collect();
    let stim_labels: Vec<String> = labels.iter().map(|(s, _)| s.clone()).collect();
    let rows = fr_table(&trained, &originals, &stim_labels, &[0.01, 0.05, 0.1, 0.5, 1.0], &[1, 2, 3, 4, 5], config.pe.s)?;
    for row in &rows {
        println!("  {} s={:<5} d={}  F {:.3}  R {:.3}", row.panel, row.s, row.d, row.f, row.r);
    }
    let out = artifact_root().join("pe_augmentation-fr.svg");
    plot_fr_curves(&rows, &out)?;
    println!("curves -> {}", out.display());
    Ok(())
}
