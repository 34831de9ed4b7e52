//! Skeleton clips, limb-vector representation and the A / B set construction.
//!
//! Clips are ingested from a JSON manifest, resampled to a fixed length,
//! converted to unit limb vectors and flattened into `[frames, 3 * limbs]`
//! matrices ([`FlatAction`]). Set A holds unlabeled (stimulation, response)
//! pairs for training; set B holds labeled individual instances for scoring.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Joint hierarchy. `parent[root] == -1`; limb `l` connects joint `l + 1`
/// (or, generally, the `l`-th non-root joint) to its parent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct SkeletonTopology {
    parent: Vec<i64>,
    limbs: Vec<(usize, usize)>,
    order: Vec<usize>,
}

impl TryFrom<Vec<i64>> for SkeletonTopology {
    type Error = Error;

    fn try_from(parent: Vec<i64>) -> Result<Self> {
        Self::new(parent)
    }
}

impl From<SkeletonTopology> for Vec<i64> {
    fn from(t: SkeletonTopology) -> Self {
        t.parent
    }
}

impl SkeletonTopology {
    pub fn new(parent: Vec<i64>) -> Result<Self> {
        let j = parent.len();
        if j < 2 {
            return Err(Error::Schema("skeleton needs at least two joints".into()));
        }
        let roots: Vec<usize> = (0..j).filter(|&i| parent[i] == -1).collect();
        if roots.len() != 1 {
            return Err(Error::Schema(format!(
                "skeleton must have exactly one root (parent -1), found {}",
                roots.len()
            )));
        }
        for (i, &p) in parent.iter().enumerate() {
            if p != -1 && (p < 0 || p as usize >= j || p as usize == i) {
                return Err(Error::Schema(format!("joint {i} has invalid parent {p}")));
            }
        }
        // Breadth-first from the root; anything unreached sits on a cycle.
        let mut order = vec![roots[0]];
        let mut head = 0;
        while head < order.len() {
            let cur = order[head] as i64;
            head += 1;
            order.extend((0..j).filter(|&c| parent[c] == cur));
        }
        if order.len() != j {
            return Err(Error::Schema("parent array contains a cycle".into()));
        }
        let limbs = (0..j)
            .filter(|&c| parent[c] != -1)
            .map(|c| (parent[c] as usize, c))
            .collect();
        Ok(Self { parent, limbs, order })
    }

    /// Nine-joint upper body: hip, neck, head, left shoulder/elbow/wrist,
    /// right shoulder/elbow/wrist.
    pub fn upper_body9() -> Self {
        Self::new(vec![-1, 0, 1, 1, 3, 4, 1, 6, 7]).expect("static topology is valid")
    }

    pub fn joint_count(&self) -> usize {
        self.parent.len()
    }

    pub fn limb_count(&self) -> usize {
        self.parent.len() - 1
    }

    pub fn parent(&self) -> &[i64] {
        &self.parent
    }

    /// `(parent, child)` joint indices, one per limb.
    pub fn limbs(&self) -> &[(usize, usize)] {
        &self.limbs
    }

    pub fn root(&self) -> usize {
        self.order[0]
    }

    fn limb_of_child(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.joint_count()];
        for (l, &(_, c)) in self.limbs.iter().enumerate() {
            out[c] = Some(l);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Stimulative,
    Responsive,
}

/// One skeleton sequence, `frames[t][j] = [x, y, z]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionClip {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    pub frames: Vec<Vec<Vec3>>,
}

impl ActionClip {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn validate(&self, topology: &SkeletonTopology) -> Result<()> {
        let bad = |message: String| Error::InvalidClip { clip: self.id.clone(), message };
        if self.frames.len() < 2 {
            return Err(bad(format!("needs at least 2 frames, has {}", self.frames.len())));
        }
        for (t, frame) in self.frames.iter().enumerate() {
            if frame.len() != topology.joint_count() {
                return Err(Error::Schema(format!(
                    "clip {}: frame {t} has {} joints, topology has {}",
                    self.id,
                    frame.len(),
                    topology.joint_count()
                )));
            }
            if frame.iter().flatten().any(|v| !v.is_finite()) {
                return Err(bad(format!("non-finite coordinate at frame {t}")));
            }
        }
        Ok(())
    }
}

/// Unit limb directions per frame plus the mean length of each limb.
#[derive(Clone, Debug, PartialEq)]
pub struct LimbSequence {
    pub vectors: Vec<Vec<Vec3>>,
    pub limb_lengths: Vec<f64>,
    pub topology: SkeletonTopology,
}

/// Converts joint positions into unit limb vectors.
pub fn joints_to_limbs(clip: &ActionClip, topology: &SkeletonTopology) -> Result<LimbSequence> {
    clip.validate(topology)?;
    let lengths = frame_limb_lengths(clip, topology);
    let mut vectors = Vec::with_capacity(clip.frames.len());
    for (t, frame) in clip.frames.iter().enumerate() {
        let mut row = Vec::with_capacity(topology.limb_count());
        for (l, &(p, c)) in topology.limbs().iter().enumerate() {
            let d = sub(frame[c], frame[p]);
            let n = lengths[t][l];
            if !(n > 0.0) {
                return Err(Error::DegeneratePose { clip: clip.id.clone(), frame: t, limb: l });
            }
            row.push([d[0] / n, d[1] / n, d[2] / n]);
        }
        vectors.push(row);
    }
    let frames = clip.frames.len() as f64;
    let limb_lengths = (0..topology.limb_count())
        .map(|l| lengths.iter().map(|f| f[l]).sum::<f64>() / frames)
        .collect();
    Ok(LimbSequence { vectors, limb_lengths, topology: topology.clone() })
}

/// Per-frame limb lengths, `[frames][limbs]`.
pub fn frame_limb_lengths(clip: &ActionClip, topology: &SkeletonTopology) -> Vec<Vec<f64>> {
    clip.frames
        .iter()
        .map(|frame| topology.limbs().iter().map(|&(p, c)| norm(sub(frame[c], frame[p]))).collect())
        .collect()
}

/// Root trajectory of a clip, one position per frame.
pub fn root_trajectory(clip: &ActionClip, topology: &SkeletonTopology) -> Vec<Vec3> {
    clip.frames.iter().map(|f| f[topology.root()]).collect()
}

/// Forward kinematics with one constant length per limb.
pub fn limbs_to_joints(
    seq: &LimbSequence,
    limb_lengths: &[f64],
    root_trajectory: &[Vec3],
) -> Result<ActionClip> {
    let per_frame: Vec<Vec<f64>> = vec![limb_lengths.to_vec(); seq.vectors.len()];
    limbs_to_joints_per_frame(seq, &per_frame, root_trajectory)
}

/// Forward kinematics with a length per limb per frame.
pub fn limbs_to_joints_per_frame(
    seq: &LimbSequence,
    lengths: &[Vec<f64>],
    root_trajectory: &[Vec3],
) -> Result<ActionClip> {
    let topo = &seq.topology;
    let frames = seq.vectors.len();
    if lengths.len() != frames || root_trajectory.len() != frames {
        return Err(Error::Argument(format!(
            "expected {frames} frames of lengths and root positions, got {} and {}",
            lengths.len(),
            root_trajectory.len()
        )));
    }
    let limb_of = topo.limb_of_child();
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        if lengths[t].len() != topo.limb_count() {
            return Err(Error::Argument("limb length count does not match topology".into()));
        }
        if let Some(bad) = lengths[t].iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::Argument(format!("limb lengths must be positive, got {bad}")));
        }
        let mut joints = vec![[0.0; 3]; topo.joint_count()];
        joints[topo.root()] = root_trajectory[t];
        for &j in &topo.order[1..] {
            let l = limb_of[j].expect("non-root joint has a limb");
            let p = topo.parent[j] as usize;
            let v = seq.vectors[t][l];
            let len = lengths[t][l];
            joints[j] = [
                joints[p][0] + v[0] * len,
                joints[p][1] + v[1] * len,
                joints[p][2] + v[2] * len,
            ];
        }
        out.push(joints);
    }
    Ok(ActionClip { id: "reconstructed".into(), category: None, subject: None, role: None, frames: out })
}

/// Linear interpolation onto `t_out` evenly spaced samples, endpoints kept.
pub fn resample_temporal(clip: &ActionClip, t_out: usize) -> Result<ActionClip> {
    let t_in = clip.frames.len();
    if t_in < 2 || t_out < 2 {
        return Err(Error::Argument(format!(
            "resampling needs at least 2 input and output frames (got {t_in} -> {t_out})"
        )));
    }
    if t_in == t_out {
        return Ok(clip.clone());
    }
    let mut frames = Vec::with_capacity(t_out);
    for k in 0..t_out {
        if k == 0 {
            frames.push(clip.frames[0].clone());
            continue;
        }
        if k == t_out - 1 {
            frames.push(clip.frames[t_in - 1].clone());
            continue;
        }
        let pos = k as f64 * (t_in - 1) as f64 / (t_out - 1) as f64;
        let i = (pos.floor() as usize).min(t_in - 2);
        let w = pos - i as f64;
        let (a, b) = (&clip.frames[i], &clip.frames[i + 1]);
        frames.push(
            a.iter()
                .zip(b)
                .map(|(p, q)| {
                    [
                        p[0] + w * (q[0] - p[0]),
                        p[1] + w * (q[1] - p[1]),
                        p[2] + w * (q[2] - p[2]),
                    ]
                })
                .collect(),
        );
    }
    Ok(ActionClip { frames, ..clip.clone() })
}

/// A `[frames, channels]` matrix of limb vectors, `channels = 3 * limbs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatAction {
    pub frames: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FlatAction {
    pub fn new(frames: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != frames * channels {
            return Err(Error::Argument(format!(
                "flat action of {frames}x{channels} needs {} values, got {}",
                frames * channels,
                data.len()
            )));
        }
        Ok(Self { frames, channels, data })
    }

    pub fn from_limbs(seq: &LimbSequence) -> Self {
        let frames = seq.vectors.len();
        let channels = 3 * seq.topology.limb_count();
        let data = seq.vectors.iter().flatten().flat_map(|v| v.iter().copied()).collect();
        Self { frames, channels, data }
    }

    /// Splits back into limb vectors, renormalising each to unit length.
    pub fn to_limbs(&self, topology: &SkeletonTopology, limb_lengths: Vec<f64>) -> Result<LimbSequence> {
        if self.channels != 3 * topology.limb_count() {
            return Err(Error::Argument(format!(
                "{} channels do not match {} limbs",
                self.channels,
                topology.limb_count()
            )));
        }
        let mut vectors = Vec::with_capacity(self.frames);
        for (t, row) in self.data.chunks(self.channels).enumerate() {
            let mut limbs = Vec::with_capacity(topology.limb_count());
            for (l, v) in row.chunks(3).enumerate() {
                let v = [v[0], v[1], v[2]];
                let n = norm(v);
                if !(n > 0.0) || !n.is_finite() {
                    return Err(Error::DegeneratePose { clip: "flat action".into(), frame: t, limb: l });
                }
                limbs.push([v[0] / n, v[1] / n, v[2] / n]);
            }
            vectors.push(limbs);
        }
        Ok(LimbSequence { vectors, limb_lengths, topology: topology.clone() })
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &FlatAction) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// Resamples, converts to limb vectors and flattens.
pub fn flatten_clip(clip: &ActionClip, topology: &SkeletonTopology, frames: usize) -> Result<FlatAction> {
    let resampled = resample_temporal(clip, frames)?;
    Ok(FlatAction::from_limbs(&joints_to_limbs(&resampled, topology)?))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rule {
    pub stimulus: String,
    pub response: String,
}

/// One-to-one mapping from stimulus categories to response categories.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRuleSet {
    pub rules: Vec<Rule>,
}

impl InteractionRuleSet {
    pub fn new(rules: Vec<Rule>) -> Result<Self> {
        let mut stim = HashSet::new();
        let mut resp = HashSet::new();
        for r in &rules {
            if !stim.insert(r.stimulus.as_str()) {
                return Err(Error::Schema(format!("stimulus {} appears in two rules", r.stimulus)));
            }
            if !resp.insert(r.response.as_str()) {
                return Err(Error::Schema(format!("response {} appears in two rules", r.response)));
            }
        }
        Ok(Self { rules })
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn conforms(&self, stimulus: &str, response: &str) -> bool {
        self.rules.iter().any(|r| r.stimulus == stimulus && r.response == response)
    }

    pub fn response_for(&self, stimulus: &str) -> Option<&str> {
        self.rules.iter().find(|r| r.stimulus == stimulus).map(|r| r.response.as_str())
    }

    pub fn role_of(&self, category: &str) -> Option<Role> {
        if self.rules.iter().any(|r| r.stimulus == category) {
            Some(Role::Stimulative)
        } else if self.rules.iter().any(|r| r.response == category) {
            Some(Role::Responsive)
        } else {
            None
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: InteractionRuleSet = serde_json::from_str(&text).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::new(raw.rules)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// On-disk manifest of a clip corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub joint_count: usize,
    pub parent: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    pub clips: Vec<ActionClip>,
}

impl Manifest {
    pub fn new(name: &str, topology: &SkeletonTopology, clips: Vec<ActionClip>) -> Self {
        Self {
            name: name.to_string(),
            joint_count: topology.joint_count(),
            parent: topology.parent().to_vec(),
            fps: None,
            clips,
        }
    }

    pub fn topology(&self) -> Result<SkeletonTopology> {
        if self.parent.len() != self.joint_count {
            return Err(Error::Schema(format!(
                "joint_count {} does not match parent array of length {}",
                self.joint_count,
                self.parent.len()
            )));
        }
        SkeletonTopology::new(self.parent.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// Loads and validates a manifest.
pub fn load_manifest(path: &Path) -> Result<(Vec<ActionClip>, SkeletonTopology)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

pub fn parse_manifest(text: &str) -> Result<(Vec<ActionClip>, SkeletonTopology)> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse { context: "manifest".into(), message: e.to_string() })?;
    // Parse clip by clip so that errors name the offending clip.
    let clips_raw = value
        .get("clips")
        .and_then(|c| c.as_array())
        .ok_or_else(|| Error::Parse { context: "manifest".into(), message: "missing clips array".into() })?;
    let mut clips = Vec::with_capacity(clips_raw.len());
    for (i, raw) in clips_raw.iter().enumerate() {
        let id = raw.get("id").and_then(|v| v.as_str()).map_or_else(|| format!("#{i}"), String::from);
        let clip = parse_clip(raw, &id)?;
        clips.push(clip);
    }
    let header = |key: &str| {
        value.get(key).cloned().ok_or_else(|| Error::Parse {
            context: "manifest".into(),
            message: format!("missing field {key}"),
        })
    };
    let joint_count: usize = serde_json::from_value(header("joint_count")?)
        .map_err(|e| Error::Parse { context: "manifest.joint_count".into(), message: e.to_string() })?;
    let parent: Vec<i64> = serde_json::from_value(header("parent")?)
        .map_err(|e| Error::Parse { context: "manifest.parent".into(), message: e.to_string() })?;
    if parent.len() != joint_count {
        return Err(Error::Schema(format!(
            "joint_count {joint_count} does not match parent array of length {}",
            parent.len()
        )));
    }
    let topology = SkeletonTopology::new(parent)?;
    for clip in &clips {
        clip.validate(&topology)?;
    }
    Ok((clips, topology))
}

fn parse_clip(raw: &serde_json::Value, id: &str) -> Result<ActionClip> {
    let err = |message: String| Error::Parse { context: format!("clip {id}"), message };
    let frames = raw.get("frames").and_then(|f| f.as_array()).ok_or_else(|| err("missing frames".into()))?;
    let mut parsed = Vec::with_capacity(frames.len());
    for (t, frame) in frames.iter().enumerate() {
        let joints = frame.as_array().ok_or_else(|| err(format!("frame {t} is not an array")))?;
        let mut row = Vec::with_capacity(joints.len());
        for joint in joints {
            let xyz = joint.as_array().filter(|a| a.len() == 3).ok_or_else(|| {
                err(format!("frame {t}: joint is not an [x, y, z] triple"))
            })?;
            let mut p = [0.0; 3];
            for (k, c) in xyz.iter().enumerate() {
                // JSON has no NaN literal; null is how NaN usually leaks in.
                p[k] = c.as_f64().unwrap_or(f64::NAN);
            }
            row.push(p);
        }
        parsed.push(row);
    }
    let text_field = |key: &str| raw.get(key).and_then(|v| v.as_str()).map(String::from);
    let role = match raw.get("role") {
        None | Some(serde_json::Value::Null) => None,
        Some(v) => Some(serde_json::from_value(v.clone()).map_err(|e| err(e.to_string()))?),
    };
    Ok(ActionClip {
        id: id.to_string(),
        category: text_field("category"),
        subject: text_field("subject"),
        role,
        frames: parsed,
    })
}

/// Writes `value` as JSON, creating parent directories.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse { context: path.display().to_string(), message: e.to_string() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Augmented,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionPair {
    pub stim_id: String,
    pub resp_id: String,
    pub stim: FlatAction,
    pub resp: FlatAction,
    pub provenance: Provenance,
}

/// Set A: unlabeled (stimulation, response) pairs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairedSet {
    pub pairs: Vec<ActionPair>,
}

impl PairedSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn originals(&self) -> impl Iterator<Item = &ActionPair> {
        self.pairs.iter().filter(|p| p.provenance == Provenance::Original)
    }

    /// Checks that every stimulation (and every response) shares one shape.
    pub fn validate(&self) -> Result<(usize, usize)> {
        let first = self.pairs.first().ok_or_else(|| Error::InsufficientData("paired set is empty".into()))?;
        let (t, c) = (first.stim.frames, first.stim.channels);
        for p in &self.pairs {
            for a in [&p.stim, &p.resp] {
                if a.frames != t || a.channels != c {
                    return Err(Error::Argument(format!(
                        "pair ({}, {}) has shape {}x{}, expected {t}x{c}",
                        p.stim_id, p.resp_id, a.frames, a.channels
                    )));
                }
            }
        }
        Ok((t, c))
    }
}

/// A labeled individual action from set B.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledAction {
    pub id: String,
    pub category: String,
    pub role: Role,
    pub action: FlatAction,
}

/// Set B with its positive and negative pair indices `(stim, resp)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSet {
    pub instances: Vec<LabeledAction>,
    pub b_pos: Vec<(usize, usize)>,
    pub b_neg: Vec<(usize, usize)>,
}

impl EvalSet {
    pub fn pairs(&self, idx: &[(usize, usize)]) -> Vec<(FlatAction, FlatAction)> {
        idx.iter()
            .map(|&(s, r)| (self.instances[s].action.clone(), self.instances[r].action.clone()))
            .collect()
    }

    pub fn stimulations(&self) -> impl Iterator<Item = &LabeledAction> {
        self.instances.iter().filter(|a| a.role == Role::Stimulative)
    }
}

/// Result of splitting a corpus: unlabeled A, its withheld ground truth, and B.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSplit {
    pub a: PairedSet,
    /// Ground-truth `(stim category, resp category)` of each pair in `a`,
    /// kept apart for diagnostics and the label-given baseline.
    pub a_labels: Vec<(String, String)>,
    pub b: Vec<LabeledAction>,
}

fn clip_role(clip: &ActionClip, rules: &InteractionRuleSet) -> Result<(String, Role)> {
    let category = clip.category.clone().ok_or_else(|| Error::InvalidClip {
        clip: clip.id.clone(),
        message: "clip has no category".into(),
    })?;
    let inferred = rules.role_of(&category).ok_or_else(|| Error::InvalidClip {
        clip: clip.id.clone(),
        message: format!("category {category} is not covered by any rule"),
    })?;
    if let Some(role) = clip.role {
        if role != inferred {
            return Err(Error::InvalidClip {
                clip: clip.id.clone(),
                message: format!("role {role:?} contradicts the rules for {category}"),
            });
        }
    }
    Ok((category, inferred))
}

/// Splits clips into set A (random rule-conformant matching, labels withheld)
/// and set B (labeled instances).
pub fn build_sets(
    clips: &[ActionClip],
    topology: &SkeletonTopology,
    rules: &InteractionRuleSet,
    split: f64,
    seed: u64,
    frames: usize,
) -> Result<SetSplit> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::Argument(format!("split fraction must lie in (0, 1), got {split}")));
    }
    let mut by_category: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut roles = Vec::with_capacity(clips.len());
    for (i, clip) in clips.iter().enumerate() {
        let (cat, role) = clip_role(clip, rules)?;
        by_category.entry(cat).or_default().push(i);
        roles.push(role);
    }
    let mut rng = seed::rng(seed::derive(seed, "build_sets"));
    let mut part_a: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut part_b = Vec::new();
    for (cat, mut idx) in by_category {
        idx.shuffle(&mut rng);
        let n_a = ((idx.len() as f64) * split).round() as usize;
        let n_a = n_a.min(idx.len());
        part_b.extend_from_slice(&idx[n_a..]);
        part_a.insert(cat, idx[..n_a].to_vec());
    }
    part_b.sort_unstable();

    let mut a = PairedSet::default();
    let mut a_labels = Vec::new();
    for rule in &rules.rules {
        let mut stims = part_a.get(&rule.stimulus).cloned().unwrap_or_default();
        let mut resps = part_a.get(&rule.response).cloned().unwrap_or_default();
        if stims.is_empty() || resps.is_empty() {
            return Err(Error::UnsatisfiableRule {
                stimulus: rule.stimulus.clone(),
                response: rule.response.clone(),
                message: format!(
                    "{} stimulations and {} responses available for pairing",
                    stims.len(),
                    resps.len()
                ),
            });
        }
        stims.shuffle(&mut rng);
        resps.shuffle(&mut rng);
        for (&s, &r) in stims.iter().zip(&resps) {
            a.pairs.push(ActionPair {
                stim_id: clips[s].id.clone(),
                resp_id: clips[r].id.clone(),
                stim: flatten_clip(&clips[s], topology, frames)?,
                resp: flatten_clip(&clips[r], topology, frames)?,
                provenance: Provenance::Original,
            });
            a_labels.push((rule.stimulus.clone(), rule.response.clone()));
        }
    }
    let b = part_b
        .into_iter()
        .map(|i| {
            Ok(LabeledAction {
                id: clips[i].id.clone(),
                category: clips[i].category.clone().unwrap_or_default(),
                role: roles[i],
                action: flatten_clip(&clips[i], topology, frames)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SetSplit { a, a_labels, b })
}

/// Samples balanced rule-conformant (`b_pos`) and rule-violating (`b_neg`)
/// pairs from labeled instances. Both lists get `min(cap, |pos|, |neg|)` pairs.
pub fn derive_pos_neg(
    instances: &[LabeledAction],
    rules: &InteractionRuleSet,
    max_per_class: usize,
    seed: u64,
) -> Result<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    let stims: Vec<usize> = (0..instances.len()).filter(|&i| instances[i].role == Role::Stimulative).collect();
    let resps: Vec<usize> = (0..instances.len()).filter(|&i| instances[i].role == Role::Responsive).collect();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for &s in &stims {
        for &r in &resps {
            if rules.conforms(&instances[s].category, &instances[r].category) {
                pos.push((s, r));
            } else {
                neg.push((s, r));
            }
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InsufficientData(format!(
            "set B yields {} positive and {} negative pairs; both must be nonempty",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = seed::rng(seed::derive(seed, "pos_neg"));
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let n = max_per_class.min(pos.len()).min(neg.len());
    if n == 0 {
        return Err(Error::InsufficientData("max_per_class must be at least 1".into()));
    }
    pos.truncate(n);
    neg.truncate(n);
    Ok((pos, neg))
}
