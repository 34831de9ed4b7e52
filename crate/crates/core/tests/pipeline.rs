//! Small end-to-end runs of the staged pipeline.

use iat::pipeline::{files, run_experiment, AugmentMode, ExperimentConfig, ExperimentReport};
use iat::synth::SynthSpec;
use iat::Error;

fn tiny(mode: AugmentMode, seed: u64) -> ExperimentConfig {
    let mut config = ExperimentConfig::synthetic(SynthSpec { per_class: 8, ..SynthSpec::default() }, mode, seed);
    config.pvae.epochs = 3;
    config.pvae.arch.conv.widths = vec![8, 8];
    config.pvae.arch.latent_dim = 6;
    config.gan.epochs = 2;
    config.gan.steps_per_epoch = Some(2);
    config.gan.arch.widths = vec![8, 8];
    config.eval.classifier.epochs = 2;
    config.eval.classifier.arch.widths = vec![8, 8];
    config.eval.kfolds = 3;
    config
}

#[test]
fn modes_produce_expected_training_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let none = run_experiment(&tiny(AugmentMode::None, 3), &dir.path().join("none")).unwrap();
    assert_eq!(none.sizes.train_pairs, none.sizes.a_pairs);
    assert!(none.fr.is_none());

    let pe_cfg = tiny(AugmentMode::Pe, 3);
    let pe = run_experiment(&pe_cfg, &dir.path().join("pe")).unwrap();
    assert_eq!(pe.sizes.train_pairs, pe.sizes.a_pairs * (pe_cfg.pe.multiplier + 1));
    let fr = pe.fr.as_ref().unwrap();
    for v in [fr.f_s, fr.r_s, fr.f_r, fr.r_r] {
        assert!((0.0..=1.0).contains(&v));
    }
    assert!(dir.path().join("pe").join(files::NC).exists());

    let re = run_experiment(&tiny(AugmentMode::Reassign, 3), &dir.path().join("reassign")).unwrap();
    // Balanced A: 5 rules with n pairs each gives 5 n^2 pairs.
    let per_rule = re.sizes.a_pairs / 5;
    assert_eq!(re.sizes.train_pairs, 5 * per_rule * per_rule);

    for r in [&none, &pe, &re] {
        assert!((0.0..=100.0).contains(&r.iat_test));
        assert!((0.0..=100.0).contains(&r.iat_train));
        assert!(r.oracle.is_some());
    }
}

#[test]
fn rerun_resumes_from_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(AugmentMode::Pe, 5);
    let first = run_experiment(&config, dir.path()).unwrap();
    let second = run_experiment(&config, dir.path()).unwrap();
    assert_eq!(first, second);
    let on_disk = ExperimentReport::load(&dir.path().join(files::REPORT)).unwrap();
    assert_eq!(on_disk, first);
}

#[test]
fn changed_config_in_existing_run_dir_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&tiny(AugmentMode::None, 5), dir.path()).unwrap();
    let err = run_experiment(&tiny(AugmentMode::None, 6), dir.path()).unwrap_err();
    assert!(matches!(err, Error::Config(_) | Error::Stage { .. }), "{err}");
}
