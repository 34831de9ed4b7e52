//! Classifier-based evaluation of generated interactions.
//!
//! A binary pair classifier learns to tell rule-conformant pairs from
//! rule-violating ones. IAT-test scores generated pairs with a classifier
//! trained on real pairs; IAT-train scores real pairs with a classifier
//! trained on generated positives.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::act2act::{noise_vector, Act2ActGenerator};
use crate::autograd::{Graph, Tensor};
use crate::dataset::{FlatAction, LabeledAction, PairedSet, Role};
use crate::error::{Error, Result};
use crate::nn::{self, Adam, ConvArch, ConvEncoder, Params};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub arch: ConvArch,
}

impl ClassifierConfig {
    pub fn standard(frames: usize, channels: usize) -> Self {
        Self {
            epochs: 30,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            batch_size: 32,
            arch: ConvArch { seq_len: frames, channels, widths: vec![32, 64, 128], kernel: 3 },
        }
    }
}

/// Pair classifier `E`: the critic body with a sigmoid head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairClassifier {
    pub arch: ConvArch,
    body: ConvEncoder,
    params: Params,
}

pub type Pair = (FlatAction, FlatAction);

impl PairClassifier {
    fn new(arch: &ConvArch, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut params = Params::new();
        let body = ConvEncoder::new(&mut params, &mut rng, arch, 2 * arch.channels, 1);
        Self { arch: arch.clone(), body, params }
    }

    fn logits(&self, pairs: &[&Pair]) -> Vec<f64> {
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(128) {
            let mut g = Graph::new();
            let p = self.params.bind_frozen(&mut g);
            let c = self.arch.channels;
            let s = g.constant(nn::stack_rows(chunk.iter().map(|x| x.0.data.as_slice()), c));
            let r = g.constant(nn::stack_rows(chunk.iter().map(|x| x.1.data.as_slice()), c));
            let x = nn::concat_cols(&mut g, s, r);
            let y = self.body.forward(&mut g, &p, x, chunk.len());
            out.extend_from_slice(g.value(y).data());
        }
        out
    }

    /// Probability that each pair is rule-conformant.
    pub fn probabilities(&self, pairs: &[&Pair]) -> Vec<f64> {
        self.logits(pairs).into_iter().map(crate::autograd::sigmoid).collect()
    }

    /// Hard 0/1 decisions at threshold 0.5.
    pub fn classify(&self, pairs: &[&Pair]) -> Vec<bool> {
        self.logits(pairs).into_iter().map(|l| l > 0.0).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Held-out accuracy of each fold, in percent.
    pub folds: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl CvReport {
    fn from_folds(folds: Vec<f64>) -> Self {
        let n = folds.len() as f64;
        let mean = folds.iter().sum::<f64>() / n;
        let std = (folds.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self { folds, mean, std }
    }
}

fn check_pairs(arch: &ConvArch, pairs: &[&Pair]) -> Result<()> {
    for (s, r) in pairs {
        for a in [s, r] {
            if a.frames != arch.seq_len || a.channels != arch.channels {
                return Err(Error::Argument(format!(
                    "pair member of shape {}x{} does not fit a {}x{} classifier",
                    a.frames, a.channels, arch.seq_len, arch.channels
                )));
            }
        }
    }
    Ok(())
}

/// Trains one classifier on all given examples.
pub fn fit_classifier(pos: &[&Pair], neg: &[&Pair], config: &ClassifierConfig, seed: u64) -> Result<PairClassifier> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InsufficientData("classifier needs positive and negative examples".into()));
    }
    config.arch.validate()?;
    check_pairs(&config.arch, pos)?;
    check_pairs(&config.arch, neg)?;
    let mut clf = PairClassifier::new(&config.arch, seed::derive(seed, "classifier_init"));
    let mut opt = Adam::new(config.lr, config.beta1, config.beta2);
    let mut rng = seed::rng(seed::derive(seed, "classifier_batches"));
    let examples: Vec<(&Pair, f64)> =
        pos.iter().map(|p| (*p, 1.0)).chain(neg.iter().map(|p| (*p, 0.0))).collect();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let c = config.arch.channels;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size.max(1)) {
            let mut g = Graph::new();
            let p = clf.params.bind(&mut g);
            let s = g.constant(nn::stack_rows(chunk.iter().map(|&i| examples[i].0 .0.data.as_slice()), c));
            let r = g.constant(nn::stack_rows(chunk.iter().map(|&i| examples[i].0 .1.data.as_slice()), c));
            let x = nn::concat_cols(&mut g, s, r);
            let logit = clf.body.forward(&mut g, &p, x, chunk.len());
            let y = g.constant(Tensor::new(vec![chunk.len(), 1], chunk.iter().map(|&i| examples[i].1).collect()));
            // Binary cross-entropy on logits: softplus(l) - y l.
            let sp = g.softplus(logit);
            let yl = g.mul(y, logit);
            let l = g.sub(sp, yl);
            let loss = g.mean(l);
            if !g.value(loss).item().is_finite() {
                return Err(Error::Divergence { stage: "classifier", epoch });
            }
            let grads = nn::param_grads(&mut g, loss, &p);
            opt.step(&mut clf.params, &grads);
        }
    }
    Ok(clf)
}

/// Fraction of examples classified correctly.
pub fn accuracy(clf: &PairClassifier, pos: &[&Pair], neg: &[&Pair]) -> f64 {
    let hits = clf.classify(pos).into_iter().filter(|b| *b).count()
        + clf.classify(neg).into_iter().filter(|b| !*b).count();
    hits as f64 / (pos.len() + neg.len()) as f64
}

/// `(train, test)` for one fold; ranks congruent to `fold` are held out.
fn fold_split<'a>(order: &[usize], set: &'a [Pair], kfolds: usize, fold: usize) -> (Vec<&'a Pair>, Vec<&'a Pair>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        if rank % kfolds == fold {
            test.push(&set[i]);
        } else {
            train.push(&set[i]);
        }
    }
    (train, test)
}

/// Stratified K-fold cross-validation followed by a refit on all data.
pub fn train_pair_classifier(
    pos: &[Pair],
    neg: &[Pair],
    kfolds: usize,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<(PairClassifier, CvReport)> {
    if kfolds < 2 {
        return Err(Error::Argument(format!("kfolds must be >= 2, got {kfolds}")));
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InsufficientData("classifier needs positive and negative examples".into()));
    }
    if pos.len() < kfolds || neg.len() < kfolds {
        return Err(Error::Argument(format!(
            "{} positives and {} negatives cannot fill {kfolds} folds",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = seed::rng(seed::derive(seed, "cv_folds"));
    let mut pos_order: Vec<usize> = (0..pos.len()).collect();
    let mut neg_order: Vec<usize> = (0..neg.len()).collect();
    pos_order.shuffle(&mut rng);
    neg_order.shuffle(&mut rng);
    let mut folds = Vec::with_capacity(kfolds);
    for fold in 0..kfolds {
        let (pos_train, pos_test) = fold_split(&pos_order, pos, kfolds, fold);
        let (neg_train, neg_test) = fold_split(&neg_order, neg, kfolds, fold);
        let clf = fit_classifier(&pos_train, &neg_train, config, seed::derive_indexed(seed, "cv_fit", fold as u64))?;
        folds.push(100.0 * accuracy(&clf, &pos_test, &neg_test));
    }
    let all_pos: Vec<&Pair> = pos.iter().collect();
    let all_neg: Vec<&Pair> = neg.iter().collect();
    let clf = fit_classifier(&all_pos, &all_neg, config, seed::derive(seed, "refit"))?;
    Ok((clf, CvReport::from_folds(folds)))
}

/// Generated pairs built from set B's stimulations.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSet {
    pub pairs: Vec<Pair>,
    pub stim_ids: Vec<String>,
    pub seeds: Vec<u64>,
}

impl GeneratedSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn from_pairs(pairs: Vec<Pair>) -> Self {
        let n = pairs.len();
        Self { pairs, stim_ids: vec![String::new(); n], seeds: vec![0; n] }
    }
}

/// `per_stim` responses for each stimulation, each with its own derived seed.
pub fn build_generated_set(
    g: &Act2ActGenerator,
    b_stims: &[&LabeledAction],
    per_stim: usize,
    seed: u64,
) -> Result<GeneratedSet> {
    if per_stim == 0 {
        return Err(Error::Argument("per_stim must be >= 1".into()));
    }
    if let Some(a) = b_stims.iter().find(|a| a.role != Role::Stimulative) {
        return Err(Error::Argument(format!("{} is not a stimulation", a.id)));
    }
    let mut stims = Vec::new();
    let mut noise = Vec::new();
    let mut out = GeneratedSet::default();
    for (i, a) in b_stims.iter().enumerate() {
        for j in 0..per_stim {
            let s = seed::derive_indexed(seed, "generated_set", (i * per_stim + j) as u64);
            stims.push(&a.action);
            noise.push(noise_vector(g.dim_z, s));
            out.stim_ids.push(a.id.clone());
            out.seeds.push(s);
        }
    }
    let responses = g.forward_many(&stims, &noise)?;
    out.pairs = stims.into_iter().cloned().zip(responses).collect();
    Ok(out)
}

fn percent_positive(clf: &PairClassifier, pairs: &[&Pair]) -> f64 {
    let ones = clf.classify(pairs).into_iter().filter(|b| *b).count();
    100.0 * ones as f64 / pairs.len() as f64
}

/// Percentage of generated pairs that `e` judges rule-conformant.
pub fn iat_test(e: &PairClassifier, bg: &GeneratedSet) -> Result<f64> {
    if bg.is_empty() {
        return Err(Error::Argument("generated set is empty".into()));
    }
    let refs: Vec<&Pair> = bg.pairs.iter().collect();
    check_pairs(&e.arch, &refs)?;
    Ok(percent_positive(e, &refs))
}

/// Trains a fresh classifier with `bg` as positives and `b_neg` as
/// negatives, then reports the percentage of A's pairs it accepts.
pub fn iat_train(
    bg: &GeneratedSet,
    b_neg: &[Pair],
    a: &PairedSet,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<f64> {
    if bg.is_empty() || b_neg.is_empty() || a.is_empty() {
        return Err(Error::InsufficientData("IAT-train needs nonempty B_g, B_neg and A".into()));
    }
    let clf = iat_train_classifier(bg, b_neg, config, seed)?;
    acceptance_rate(&clf, a)
}

/// The classifier [`iat_train`] fits on `bg` (positives) and `b_neg`.
pub fn iat_train_classifier(
    bg: &GeneratedSet,
    b_neg: &[Pair],
    config: &ClassifierConfig,
    seed: u64,
) -> Result<PairClassifier> {
    let pos: Vec<&Pair> = bg.pairs.iter().collect();
    let neg: Vec<&Pair> = b_neg.iter().collect();
    fit_classifier(&pos, &neg, config, seed::derive(seed, "iat_train"))
}

/// Percentage of A's original pairs that `clf` accepts.
pub fn acceptance_rate(clf: &PairClassifier, a: &PairedSet) -> Result<f64> {
    let a_pairs: Vec<Pair> = a.originals().map(|p| (p.stim.clone(), p.resp.clone())).collect();
    if a_pairs.is_empty() {
        return Err(Error::InsufficientData("A has no original pairs".into()));
    }
    let refs: Vec<&Pair> = a_pairs.iter().collect();
    check_pairs(&clf.arch, &refs)?;
    Ok(percent_positive(clf, &refs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ClassifierConfig {
        let mut c = ClassifierConfig::standard(8, 6);
        c.arch.widths = vec![4, 8];
        c.epochs = 40;
        c.batch_size = 8;
        c
    }

    fn action(freq: f64, phase: f64) -> FlatAction {
        FlatAction::new(8, 6, (0..48).map(|i| ((i / 6) as f64 * freq + phase + (i % 6) as f64).sin()).collect()).unwrap()
    }

    fn separable() -> (Vec<Pair>, Vec<Pair>) {
        let pos = (0..20).map(|i| (action(0.3, i as f64 * 0.1), action(0.3, 1.0 + i as f64 * 0.1))).collect();
        let neg = (0..20).map(|i| (action(0.3, i as f64 * 0.1), action(1.7, 1.0 + i as f64 * 0.1))).collect();
        (pos, neg)
    }

    #[test]
    fn cv_report_statistics() {
        let r = CvReport::from_folds(vec![0.5, 1.0, 0.75]);
        assert!((r.mean - 0.75).abs() < 1e-12);
        assert!(r.std > 0.0);
    }

    #[test]
    fn separable_pairs_are_learned_deterministically() {
        let (pos, neg) = separable();
        let (clf, cv) = train_pair_classifier(&pos, &neg, 4, &config(), 5).unwrap();
        assert_eq!(cv.folds.len(), 4);
        assert!(cv.mean >= 90.0, "cv mean {}", cv.mean);
        let (_, again) = train_pair_classifier(&pos, &neg, 4, &config(), 5).unwrap();
        assert_eq!(cv, again);
        let bg = GeneratedSet::from_pairs(pos.clone());
        let bn = GeneratedSet::from_pairs(neg.clone());
        assert!(iat_test(&clf, &bg).unwrap() > iat_test(&clf, &bn).unwrap());
    }

    #[test]
    fn argument_errors() {
        let (pos, neg) = separable();
        assert!(train_pair_classifier(&pos, &neg, 1, &config(), 0).is_err());
        assert!(train_pair_classifier(&pos[..2], &neg, 3, &config(), 0).is_err());
        assert!(train_pair_classifier(&[], &neg, 3, &config(), 0).is_err());
        let clf = fit_classifier(&[&pos[0]], &[&neg[0]], &config(), 0).unwrap();
        assert!(iat_test(&clf, &GeneratedSet::default()).is_err());
    }
}
