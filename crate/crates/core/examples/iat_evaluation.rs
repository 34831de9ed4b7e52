//! The IAT scoring protocol on reference "generators" that need no
//! training: real B_pos pairs stand in for a perfect generator, B_neg pairs
//! for one that ignores the rules, and a single repeated pair for one with
//! no diversity.
//!
//! `cargo run --release --example iat_evaluation`

use iat::iat_metrics::{iat_test, iat_train, train_pair_classifier, GeneratedSet, Pair};
use iat::pipeline::{data_stage, AugmentMode, ExperimentConfig};
use iat::synth::SynthSpec;

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let config = ExperimentConfig::synthetic(SynthSpec { per_class: 40, ..SynthSpec::default() }, AugmentMode::None, 17);
    let data = data_stage(&config)?;
    let pos: Vec<Pair> = data.eval.pairs(&data.eval.b_pos);
    let neg: Vec<Pair> = data.eval.pairs(&data.eval.b_neg);
    println!("B: {} instances, {} positive and {} negative pairs", data.eval.instances.len(), pos.len(), neg.len());

    let clf_cfg = &config.eval.classifier;
    let (e, cv) = train_pair_classifier(&pos, &neg, config.eval.kfolds, clf_cfg, 1)?;
    println!("classifier E: {}-fold CV {:.2} +- {:.2}", cv.folds.len(), cv.mean, cv.std);

    let faithful = GeneratedSet::from_pairs(pos.clone());
    let rule_breaking = GeneratedSet::from_pairs(neg.clone());
    let repeated = GeneratedSet::from_pairs(vec![pos[0].clone(); pos.len()]);
    println!("IAT-test  real positives {:6.2}   rule-breaking {:6.2}", iat_test(&e, &faithful)?, iat_test(&e, &rule_breaking)?);
    println!(
        "IAT-train real positives {:6.2}   one repeated pair {:6.2}",
        iat_train(&faithful, &neg, &data.split.a, clf_cfg, 2)?,
        iat_train(&repeated, &neg, &data.split.a, clf_cfg, 2)?
    );
    Ok(())
}
