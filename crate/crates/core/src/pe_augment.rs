//! Paired-embedding augmentation: PCA projection of encoder means, the
//! paired-embedding loss, Gaussian replacement-confidence matrices and the
//! effectiveness / reliability diagnostics.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::dataset::{ActionPair, PairedSet, Provenance, Role};
use crate::error::{Error, Result};
use crate::seed;

/// Linear projection onto the top principal directions of a set of means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// `d` orthonormal rows of length `m`.
    pub components: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Variances captured along each component (descending).
    pub eigenvalues: Vec<f64>,
    pub total_variance: f64,
}

impl PcaProjection {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn captured_variance(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// `P v` without centering.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.components.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// Reorders and flips components so that each row follows the row of
    /// `previous` it overlaps most. Near-degenerate eigenvalues otherwise
    /// let components swap places between refits.
    pub fn align_to(&mut self, previous: &PcaProjection) {
        let d = self.dim();
        if previous.dim() != d || previous.input_dim() != self.input_dim() {
            return;
        }
        let dots: Vec<Vec<f64>> = previous
            .components
            .iter()
            .map(|prev| self.components.iter().map(|row| row.iter().zip(prev).map(|(a, b)| a * b).sum()).collect())
            .collect();
        let order = best_assignment(&dots);
        let components = order
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                let sign = if dots[k][j] < 0.0 { -1.0 } else { 1.0 };
                self.components[j].iter().map(|v| sign * v).collect()
            })
            .collect();
        let eigenvalues = order.iter().map(|&j| self.eigenvalues[j]).collect();
        self.components = components;
        self.eigenvalues = eigenvalues;
    }
}

/// Permutation `order` maximizing `Σ_k |w[k][order[k]]|`, by exhaustive
/// search for small `d` and greedily beyond.
fn best_assignment(w: &[Vec<f64>]) -> Vec<usize> {
    let d = w.len();
    if d > 6 {
        let mut taken = vec![false; d];
        return w
            .iter()
            .map(|row| {
                let j = (0..d)
                    .filter(|&j| !taken[j])
                    .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()))
                    .unwrap_or(0);
                taken[j] = true;
                j
            })
            .collect();
    }
    let mut perm: Vec<usize> = (0..d).collect();
    let mut best = (f64::NEG_INFINITY, perm.clone());
    permute(&mut perm, 0, &mut |p| {
        let score: f64 = p.iter().enumerate().map(|(k, &j)| w[k][j].abs()).sum();
        if score > best.0 + 1e-12 {
            best = (score, p.to_vec());
        }
    });
    best.1
}

fn permute(p: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// A point in the low-dimensional embedding space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Principal component analysis with population covariance.
///
/// Component signs follow a fixed convention: the entry of largest magnitude
/// is positive.
pub fn fit_pca(means: &[Vec<f64>], d: usize) -> Result<PcaProjection> {
    let m = means.first().map(Vec::len).unwrap_or(0);
    if d == 0 || d > m {
        return Err(Error::Argument(format!("embedding dimension {d} must lie in [1, {m}]")));
    }
    if means.len() < d + 1 {
        return Err(Error::InsufficientData(format!(
            "PCA to {d} dimensions needs at least {} samples, got {}",
            d + 1,
            means.len()
        )));
    }
    if means.iter().any(|v| v.len() != m) {
        return Err(Error::Argument("PCA inputs have differing lengths".into()));
    }
    let n = means.len() as f64;
    let mut mean = vec![0.0; m];
    for v in means {
        for (a, b) in mean.iter_mut().zip(v) {
            *a += b;
        }
    }
    mean.iter_mut().for_each(|a| *a /= n);
    let mut cov = DMatrix::<f64>::zeros(m, m);
    for v in means {
        let c: Vec<f64> = v.iter().zip(&mean).map(|(a, b)| a - b).collect();
        for i in 0..m {
            for j in i..m {
                cov[(i, j)] += c[i] * c[j];
            }
        }
    }
    for i in 0..m {
        for j in i..m {
            let v = cov[(i, j)] / n;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let total_variance = cov.trace();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut components = Vec::with_capacity(d);
    let mut eigenvalues = Vec::with_capacity(d);
    for &k in order.iter().take(d) {
        let mut row: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let lead = row.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if lead < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(row);
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
    }
    let tiny = 1e-12 * total_variance.max(f64::MIN_POSITIVE);
    let rank = eigenvalues.iter().filter(|&&v| v > tiny).count();
    if rank < d {
        log::warn!("PCA input has rank {rank} < {d}; trailing components are arbitrary");
    }
    Ok(PcaProjection { components, mean, eigenvalues, total_variance })
}

/// `l = P (mu - mean)`.
pub fn project(p: &PcaProjection, mu: &[f64]) -> Result<Embedding> {
    if mu.len() != p.input_dim() {
        return Err(Error::Argument(format!(
            "vector of length {} cannot be projected by a {}-input PCA",
            mu.len(),
            p.input_dim()
        )));
    }
    let centered: Vec<f64> = mu.iter().zip(&p.mean).map(|(a, b)| a - b).collect();
    Ok(Embedding(p.apply(&centered)))
}

/// Squared Euclidean distance between paired embeddings.
pub fn pe_loss(ls: &Embedding, lr: &Embedding) -> f64 {
    assert_eq!(ls.dim(), lr.dim(), "pe_loss: embedding dimensions differ");
    ls.0.iter().zip(&lr.0).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Dense square matrix in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    pub n: usize,
    pub values: Vec<f64>,
}

impl SquareMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn identity(n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        Self { n, values }
    }
}

/// `C(i, j) = exp(-|l_i - l_j|^2 / (2 |s P sigma_i|^2))`. The bandwidth is
/// specific to the row, so `C` is generally asymmetric.
pub fn compute_confidence(
    embeddings: &[Embedding],
    sigmas: &[Vec<f64>],
    p: &PcaProjection,
    s: f64,
) -> Result<SquareMatrix> {
    let n = embeddings.len();
    if sigmas.len() != n {
        return Err(Error::Argument(format!("{n} embeddings but {} sigma vectors", sigmas.len())));
    }
    if !(s > 0.0) {
        return Err(Error::Argument(format!("scale factor must be positive, got {s}")));
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        let ps = p.apply(&sigmas[i]);
        let bw: f64 = ps.iter().map(|v| (s * v) * (s * v)).sum();
        if !(bw > 0.0) {
            return Err(Error::DegenerateBandwidth { index: i });
        }
        for j in 0..n {
            values[i * n + j] = if i == j {
                1.0
            } else {
                let d2 = pe_loss(&embeddings[i], &embeddings[j]);
                (-d2 / (2.0 * bw)).exp()
            };
        }
    }
    Ok(SquareMatrix { n, values })
}

/// Row-stochastic replacement-confidence matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NcMatrix {
    pub role: Role,
    pub matrix: SquareMatrix,
}

impl NcMatrix {
    pub fn n(&self) -> usize {
        self.matrix.n
    }

    pub fn identity(n: usize, role: Role) -> Self {
        Self { role, matrix: SquareMatrix::identity(n) }
    }
}

/// Divides every row of `c` by its sum.
pub fn row_normalize(c: &SquareMatrix, role: Role) -> NcMatrix {
    let n = c.n;
    let mut values = c.values.clone();
    for row in values.chunks_mut(n) {
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= sum);
    }
    NcMatrix { role, matrix: SquareMatrix { n, values } }
}

/// Mean probability that an instance is replaced by a different one.
pub fn effectiveness(nc: &NcMatrix) -> f64 {
    let n = nc.n();
    let off: f64 = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| nc.matrix.get(i, j)).sum::<f64>())
        .sum();
    off / n as f64
}

/// Mean probability that a replacement keeps the ground-truth category.
pub fn reliability<L: PartialEq>(nc: &NcMatrix, labels: &[L]) -> Result<f64> {
    let n = nc.n();
    if labels.len() != n {
        return Err(Error::Argument(format!("{} labels for a {n}x{n} matrix", labels.len())));
    }
    let same: f64 = (0..n)
        .map(|i| (0..n).filter(|&j| labels[i] == labels[j]).map(|j| nc.matrix.get(i, j)).sum::<f64>())
        .sum();
    Ok(same / n as f64)
}

/// Index of the augmented pair's source instances in A's original list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub source_pair: usize,
    pub stim_index: usize,
    pub resp_index: usize,
}

/// Draws `multiplier` replacement pairs per original pair: the stimulation is
/// redrawn from row `i` of `nc_s`, the response independently from row `i` of
/// `nc_r`. Returns the originals followed by the augmented pairs.
pub fn sample_augmented_pairs(
    a: &PairedSet,
    nc_s: &NcMatrix,
    nc_r: &NcMatrix,
    multiplier: usize,
    seed: u64,
) -> Result<(PairedSet, Vec<Replacement>)> {
    let originals: Vec<&ActionPair> = a.originals().collect();
    let n = originals.len();
    if nc_s.n() != n || nc_r.n() != n {
        return Err(Error::Argument(format!(
            "NC matrices of size {} / {} do not match {n} original pairs",
            nc_s.n(),
            nc_r.n()
        )));
    }
    if multiplier == 0 {
        return Err(Error::Argument("augmentation multiplier must be >= 1".into()));
    }
    let rows = |nc: &NcMatrix| -> Result<Vec<WeightedIndex<f64>>> {
        (0..n)
            .map(|i| {
                WeightedIndex::new(nc.matrix.row(i).iter().copied())
                    .map_err(|e| Error::Argument(format!("row {i} of NC is not a distribution: {e}")))
            })
            .collect()
    };
    let (rows_s, rows_r) = (rows(nc_s)?, rows(nc_r)?);
    let mut rng = seed::rng(seed::derive(seed, "augment"));
    let mut out = PairedSet { pairs: originals.iter().map(|p| (*p).clone()).collect() };
    let mut replacements = Vec::with_capacity(n * multiplier);
    for i in 0..n {
        for _ in 0..multiplier {
            let si = rows_s[i].sample(&mut rng);
            let ri = rows_r[i].sample(&mut rng);
            out.pairs.push(ActionPair {
                stim_id: originals[si].stim_id.clone(),
                resp_id: originals[ri].resp_id.clone(),
                stim: originals[si].stim.clone(),
                resp: originals[ri].resp.clone(),
                provenance: Provenance::Augmented,
            });
            replacements.push(Replacement { source_pair: i, stim_index: si, resp_index: ri });
        }
    }
    Ok((out, replacements))
}

/// Upper bound `floor(N^2 / K)` on distinct rule-conformant pairs obtainable
/// by re-pairing `N` pairs spread evenly over `K` rules.
pub fn max_distinct_pairs(n: u64, k: i64) -> Result<u64> {
    if k <= 0 {
        return Err(Error::Argument(format!("rule count must be positive, got {k}")));
    }
    Ok(n * n / k as u64)
}
