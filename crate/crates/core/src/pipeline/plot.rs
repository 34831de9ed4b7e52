//! SVG figures: skeleton strips, embedding scatter plots and F/R curves.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::silhouette;
use crate::dataset::{write_json, ActionClip, ActionPair, Role, SkeletonTopology};
use crate::error::{Error, Result};
use crate::pe_augment::{
    compute_confidence, effectiveness, fit_pca, project, reliability, row_normalize, Embedding, PcaProjection,
};
use crate::pvae::TrainedPvae;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn write_svg(out: &Path, width: f64, height: f64, body: &str) -> Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    );
    fs::write(out, text).map_err(|e| Error::io(out, e))
}

/// Rows and columns of a rendered grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

/// Indices of `n` frames spread evenly over `t` frames.
pub fn sample_frames(t: usize, n: usize) -> Vec<usize> {
    if n == 1 {
        return vec![(t - 1) / 2];
    }
    (0..n).map(|k| ((k * (t - 1)) as f64 / (n - 1) as f64).round() as usize).collect()
}

/// One row per clip, `samples_per_clip` stick figures per row (x/y projection).
pub fn render_skeleton_grid(
    clips: &[ActionClip],
    topology: &SkeletonTopology,
    samples_per_clip: usize,
    out: &Path,
) -> Result<GridShape> {
    if clips.is_empty() {
        return Err(Error::Argument("no clips to render".into()));
    }
    if samples_per_clip == 0 {
        return Err(Error::Argument("samples_per_clip must be >= 1".into()));
    }
    for clip in clips {
        clip.validate(topology)?;
    }
    let cell = 96.0;
    let pad = 8.0;
    let mut body = String::new();
    for (row, clip) in clips.iter().enumerate() {
        let frames = sample_frames(clip.frame_count(), samples_per_clip);
        let points = frames.iter().flat_map(|&t| clip.frames[t].iter());
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
        let scale = (cell - 2.0 * pad) / span;
        let _ = writeln!(body, "<g class=\"clip\" data-id=\"{}\">", clip.id);
        for (col, &t) in frames.iter().enumerate() {
            let (ox, oy) = (col as f64 * cell + pad, row as f64 * cell + pad);
            let xy = |j: usize| {
                let p = clip.frames[t][j];
                (ox + (p[0] - lo[0]) * scale, oy + (hi[1] - p[1]) * scale)
            };
            let _ = writeln!(body, "<g class=\"frame\" data-frame=\"{t}\">");
            for &(p, c) in topology.limbs() {
                let ((x1, y1), (x2, y2)) = (xy(p), xy(c));
                let _ = writeln!(
                    body,
                    "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"black\" stroke-width=\"2\"/>"
                );
            }
            body.push_str("</g>\n");
        }
        body.push_str("</g>\n");
    }
    let shape = GridShape { rows: clips.len(), cols: samples_per_clip };
    write_svg(out, shape.cols as f64 * cell, shape.rows as f64 * cell, &body)?;
    Ok(shape)
}

/// Scatter of the first two embedding coordinates colored by label. Returns
/// the silhouette of the full embeddings under `labels`.
pub fn plot_embeddings(embeddings: &[Embedding], labels: &[String], out: &Path) -> Result<f64> {
    if embeddings.is_empty() {
        return Err(Error::Argument("no embeddings to plot".into()));
    }
    if labels.len() != embeddings.len() {
        return Err(Error::Argument(format!("{} labels for {} embeddings", labels.len(), embeddings.len())));
    }
    if let Some(e) = embeddings.iter().find(|e| e.dim() < 2) {
        return Err(Error::Argument(format!("scatter needs d >= 2, got d = {}", e.dim())));
    }
    let mut names: Vec<&String> = labels.iter().collect();
    names.sort();
    names.dedup();
    let (size, margin) = (480.0, 40.0);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for e in embeddings {
        for k in 0..2 {
            lo[k] = lo[k].min(e.0[k]);
            hi[k] = hi[k].max(e.0[k]);
        }
    }
    let sx = (size - 2.0 * margin) / (hi[0] - lo[0]).max(1e-9);
    let sy = (size - 2.0 * margin) / (hi[1] - lo[1]).max(1e-9);
    let mut body = String::new();
    for (e, l) in embeddings.iter().zip(labels) {
        let color = PALETTE[names.iter().position(|n| *n == l).unwrap_or(0) % PALETTE.len()];
        let (x, y) = (margin + (e.0[0] - lo[0]) * sx, size - margin - (e.0[1] - lo[1]) * sy);
        let _ = writeln!(body, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"{color}\" data-label=\"{l}\"/>");
    }
    for (i, name) in names.iter().enumerate() {
        let y = 16.0 + 14.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            body,
            "<circle cx=\"{}\" cy=\"{y}\" r=\"4\" fill=\"{color}\"/><text x=\"{}\" y=\"{}\" font-size=\"11\">{name}</text>",
            size + 10.0,
            size + 18.0,
            y + 4.0
        );
    }
    write_svg(out, size + 120.0, size, &body)?;
    let points: Vec<Vec<f64>> = embeddings.iter().map(|e| e.0.clone()).collect();
    let score = silhouette(&points, labels);
    log::info!("embedding plot {}: silhouette {score:.3}", out.display());
    Ok(score)
}

/// One grid point of an F/R sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrRow {
    /// `"s"` for the scale sweep, `"d"` for the dimension sweep.
    pub panel: String,
    pub s: f64,
    pub d: usize,
    pub f: f64,
    pub r: f64,
}

/// F and R of the stimulation replacement matrix at `(s, p)`.
pub fn fr_point(mu: &[Vec<f64>], sigma: &[Vec<f64>], p: &PcaProjection, labels: &[String], s: f64) -> Result<(f64, f64)> {
    let emb = mu.iter().map(|m| project(p, m)).collect::<Result<Vec<_>>>()?;
    let nc = row_normalize(&compute_confidence(&emb, sigma, p, s)?, Role::Stimulative);
    Ok((effectiveness(&nc), reliability(&nc, labels)?))
}

/// Sweeps `s` at the trained dimension and `d` at `s_default` over the
/// stimulations of `pairs`. Projections for other dimensions are refit on
/// the final encoder means.
pub fn fr_table(
    trained: &TrainedPvae,
    pairs: &[&ActionPair],
    labels: &[String],
    s_grid: &[f64],
    d_grid: &[usize],
    s_default: f64,
) -> Result<Vec<FrRow>> {
    if labels.len() != pairs.len() {
        return Err(Error::Argument(format!("{} labels for {} pairs", labels.len(), pairs.len())));
    }
    let stims: Vec<_> = pairs.iter().map(|p| &p.stim).collect();
    let (mu, sigma) = trained.pair.vae_s.encode_many(&stims)?;
    let d0 = trained.p_s.dim();
    let mut rows = Vec::with_capacity(s_grid.len() + d_grid.len());
    for &s in s_grid {
        let (f, r) = fr_point(&mu, &sigma, &trained.p_s, labels, s)?;
        rows.push(FrRow { panel: "s".into(), s, d: d0, f, r });
    }
    for &d in d_grid {
        let p = if d == d0 { trained.p_s.clone() } else { fit_pca(&mu, d)? };
        let (f, r) = fr_point(&mu, &sigma, &p, labels, s_default)?;
        rows.push(FrRow { panel: "d".into(), s: s_default, d, f, r });
    }
    Ok(rows)
}

fn panel(body: &mut String, x0: f64, title: &str, xs: &[f64], fs: &[f64], rs: &[f64], log_x: bool) {
    let (w, h, m) = (320.0, 240.0, 36.0);
    let map_x = |v: f64| if log_x { v.log10() } else { v };
    let lo = xs.iter().copied().map(map_x).fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().map(map_x).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let px = |v: f64| if hi > lo { x0 + m + (map_x(v) - lo) / span * (w - 2.0 * m) } else { x0 + w / 2.0 };
    let py = |v: f64| h - m - v * (h - 2.0 * m);
    let _ = writeln!(body, "<text x=\"{}\" y=\"16\" font-size=\"12\">{title}</text>", x0 + m);
    let _ = writeln!(
        body,
        "<rect x=\"{}\" y=\"{m}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>",
        x0 + m,
        w - 2.0 * m,
        h - 2.0 * m
    );
    for (ys, color, name) in [(fs, PALETTE[0], "F"), (rs, PALETTE[3], "R")] {
        let pts: Vec<String> = xs.iter().zip(ys).map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
        let _ = writeln!(
            body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" data-series=\"{name}\"/>",
            pts.join(" ")
        );
        for (x, y) in xs.iter().zip(ys) {
            let _ = writeln!(body, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>", px(*x), py(*y));
        }
    }
    for x in xs {
        let _ = writeln!(body, "<text x=\"{:.2}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{x}</text>", px(*x), h - m + 14.0);
    }
}

/// Writes the F/R curves of `rows` to `out` and the rows themselves to a
/// JSON sidecar next to it.
pub fn plot_fr_curves(rows: &[FrRow], out: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Argument("no F/R rows to plot".into()));
    }
    let mut body = String::new();
    for (i, name) in ["s", "d"].iter().enumerate() {
        let sel: Vec<&FrRow> = rows.iter().filter(|r| r.panel == *name).collect();
        if sel.is_empty() {
            continue;
        }
        let xs: Vec<f64> = sel.iter().map(|r| if *name == "s" { r.s } else { r.d as f64 }).collect();
        let fs: Vec<f64> = sel.iter().map(|r| r.f).collect();
        let rs: Vec<f64> = sel.iter().map(|r| r.r).collect();
        let title = if *name == "s" { "F / R versus scale s" } else { "F / R versus dimension d" };
        panel(&mut body, i as f64 * 320.0, title, &xs, &fs, &rs, *name == "s");
    }
    write_svg(out, 640.0, 240.0, &body)?;
    write_json(&out.with_extension("json"), &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(frames: usize) -> ActionClip {
        ActionClip {
            id: "c".into(),
            category: None,
            subject: None,
            role: None,
            frames: (0..frames)
                .map(|t| vec![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [t as f64 * 0.1, 1.5, 0.0]])
                .collect(),
        }
    }

    #[test]
    fn frame_sampling_is_even() {
        assert_eq!(sample_frames(32, 8), vec![0, 4, 9, 13, 18, 22, 27, 31]);
        assert_eq!(sample_frames(5, 1), vec![2]);
    }

    #[test]
    fn grid_shape_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let topo = SkeletonTopology::new(vec![-1, 0, 1]).unwrap();
        let out = dir.path().join("grid.svg");
        let shape = render_skeleton_grid(&[clip(32)], &topo, 8, &out).unwrap();
        assert_eq!(shape, GridShape { rows: 1, cols: 8 });
        let svg = fs::read_to_string(&out).unwrap();
        assert_eq!(svg.matches("class=\"frame\"").count(), 8);
        assert!(matches!(render_skeleton_grid(&[], &topo, 8, &out), Err(Error::Argument(_))));
    }

    #[test]
    fn embeddings_need_two_dims() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("e.svg");
        let one = vec![Embedding(vec![0.0]), Embedding(vec![1.0])];
        let labels = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(plot_embeddings(&one, &labels, &out), Err(Error::Argument(_))));
        assert!(matches!(plot_embeddings(&[], &[], &out), Err(Error::Argument(_))));
    }

    #[test]
    fn separated_clusters_have_high_silhouette() {
        let dir = tempfile::tempdir().unwrap();
        let mut emb = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]].iter().enumerate() {
            for i in 0..6 {
                let a = i as f64;
                emb.push(Embedding(vec![center[0] + 0.2 * a.cos(), center[1] + 0.2 * a.sin()]));
                labels.push(format!("c{c}"));
            }
        }
        let score = plot_embeddings(&emb, &labels, &dir.path().join("e.svg")).unwrap();
        assert!(score >= 0.5);
        let svg = fs::read_to_string(dir.path().join("e.svg")).unwrap();
        assert_eq!(svg.matches("data-label").count(), 18);
    }

    #[test]
    fn fr_sidecar_has_one_row_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("fr.svg");
        let rows = vec![
            FrRow { panel: "s".into(), s: 0.1, d: 3, f: 0.2, r: 0.9 },
            FrRow { panel: "s".into(), s: 1.0, d: 3, f: 0.6, r: 0.5 },
            FrRow { panel: "d".into(), s: 0.1, d: 1, f: 0.4, r: 0.6 },
        ];
        plot_fr_curves(&rows, &out).unwrap();
        let back: Vec<FrRow> = serde_json::from_str(&fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
        assert_eq!(back, rows);
    }
}
