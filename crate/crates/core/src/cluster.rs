//! k-means, cluster purity and silhouette for embedding diagnostics.

use std::collections::HashMap;
use std::hash::Hash;

use rand::Rng;

use crate::seed;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding; keeps the best of `restarts`
/// runs by inertia. Returns one cluster index per point.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Vec<usize> {
    assert!(k >= 1 && points.len() >= k, "kmeans needs at least k points");
    let mut rng = seed::rng(seed::derive(seed, "kmeans"));
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts.max(1) {
        let mut centers = plus_plus(points, k, &mut rng);
        let mut assign = vec![0; points.len()];
        for _ in 0..300 {
            let mut changed = false;
            for (i, p) in points.iter().enumerate() {
                let c = nearest(p, &centers);
                if c != assign[i] {
                    assign[i] = c;
                    changed = true;
                }
            }
            let dim = points[0].len();
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (p, &c) in points.iter().zip(&assign) {
                counts[c] += 1;
                for (s, v) in sums[c].iter_mut().zip(p) {
                    *s += v;
                }
            }
            for c in 0..k {
                if counts[c] > 0 {
                    centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                }
            }
            if !changed {
                break;
            }
        }
        let inertia: f64 = points.iter().zip(&assign).map(|(p, &c)| sq_dist(p, &centers[c])).sum();
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, assign));
        }
    }
    best.map(|(_, a)| a).unwrap_or_default()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    while centers.len() < k {
        let d: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[nearest(p, &centers)])).collect();
        let total: f64 = d.iter().sum();
        if total <= 0.0 {
            centers.push(points[rng.random_range(0..points.len())].clone());
            continue;
        }
        let mut target = rng.random_range(0.0..total);
        let mut pick = points.len() - 1;
        for (i, w) in d.iter().enumerate() {
            if target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        centers.push(points[pick].clone());
    }
    centers
}

/// Fraction of points whose label is the majority label of their cluster.
pub fn purity<L: Eq + Hash>(assign: &[usize], labels: &[L]) -> f64 {
    assert_eq!(assign.len(), labels.len());
    let mut counts: HashMap<usize, HashMap<&L, usize>> = HashMap::new();
    for (c, l) in assign.iter().zip(labels) {
        *counts.entry(*c).or_default().entry(l).or_default() += 1;
    }
    let majority: usize = counts.values().map(|m| m.values().copied().max().unwrap_or(0)).sum();
    majority as f64 / assign.len() as f64
}

/// Mean silhouette coefficient of a labeling.
pub fn silhouette<L: Eq + Hash + Clone>(points: &[Vec<f64>], labels: &[L]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut by_label: HashMap<&L, (f64, usize)> = HashMap::new();
        for j in 0..n {
            if i == j {
                continue;
            }
            let e = by_label.entry(&labels[j]).or_default();
            e.0 += sq_dist(&points[i], &points[j]).sqrt();
            e.1 += 1;
        }
        let a = by_label.get(&labels[i]).map_or(0.0, |(s, c)| s / *c as f64);
        let b = by_label
            .iter()
            .filter(|(l, _)| ***l != labels[i])
            .map(|(_, (s, c))| s / *c as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() && by_label.contains_key(&labels[i]) {
            total += (b - a) / a.max(b);
        }
    }
    total / n as f64
}
