//! Dataset construction: scene-level splits, per-scene episode generation
//! for every task type, JSONL serialization and the manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{load_scene, ObjectSpec, Scene, SceneContext, SceneIoError};
use crate::geometry::{PlannedPath, WorldPoint, DEFAULT_RESOLUTION};
use crate::sim::{sense, AgentBody, Pose};

use super::chain::{chain_long_horizon, ChainError};
use super::episode::{Episode, Goal, GoalSnapshot, InstructionBundle, TaskType};
use super::instructions::{make_coarse_instructions, make_fine_instruction};
use super::refine::{refine, RefineContext, RefinementClients};
use super::sampling::{PathConstraints, PathSampler, SamplingError};

pub const GENERATOR_VERSION: &str = concat!("embodinav ", env!("CARGO_PKG_VERSION"));
/// Coarse styles stored per coarse episode; reported for comparisons with
/// datasets that count each style as its own episode.
pub const COARSE_STYLE_EXPANSION: usize = 3;
/// Goal-to-target distance limit for object-goal tasks, meters.
pub const TARGET_RADIUS: f64 = 2.0;
const NON_TARGETS: &[&str] = &["rug", "ceiling lamp"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    ValSeen,
    ValUnseen,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 4] = [
        SplitName::Train,
        SplitName::ValSeen,
        SplitName::ValUnseen,
        SplitName::Test,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::ValSeen => "val_seen",
            SplitName::ValUnseen => "val_unseen",
            SplitName::Test => "test",
        }
    }

    pub fn file_name(self) -> String {
        format!("episodes_{}.jsonl", self.as_str())
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: u32,
    pub val_unseen: u32,
    pub test: u32,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 177,
            val_unseen: 33,
            test: 53,
        }
    }
}

/// Trajectories per scene for each trajectory family. Coarse trajectories
/// are shared by the coarse, visual-reference and dialogue tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerSceneCounts {
    pub fine: usize,
    pub coarse: usize,
    pub long_horizon: usize,
}

impl Default for PerSceneCounts {
    fn default() -> Self {
        Self {
            fine: 10,
            coarse: 10,
            long_horizon: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub seed: u64,
    pub counts: PerSceneCounts,
    pub ratios: SplitRatios,
    pub tasks: Vec<TaskType>,
    pub constraints: PathConstraints,
    pub success_thresh: f64,
    /// Fraction of each train scene's trajectories held out for val_seen.
    pub val_seen_fraction: f64,
    pub agent: AgentBody,
    pub resolution: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            counts: PerSceneCounts::default(),
            ratios: SplitRatios::default(),
            tasks: TaskType::ALL.to_vec(),
            constraints: PathConstraints::default(),
            success_thresh: 3.0,
            val_seen_fraction: 0.1,
            agent: AgentBody::default(),
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub scene_ids: Vec<String>,
    pub episode_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewEntry {
    pub episode_id: String,
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator_version: String,
    pub config: DatasetConfig,
    pub coarse_style_expansion_factor: usize,
    pub splits: Vec<DatasetSplit>,
    pub reviews: Vec<ReviewEntry>,
}

impl Manifest {
    pub fn split(&self, name: SplitName) -> Option<&DatasetSplit> {
        self.splits.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub episodes: BTreeMap<SplitName, Vec<Episode>>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("need at least 3 scenes, got {0}")]
    TooFewScenes(usize),
    #[error("duplicate scene id {0}")]
    DuplicateScene(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("scene {scene_id}: {source}")]
    Chain {
        scene_id: String,
        source: ChainError,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Scene { path: PathBuf, source: SceneIoError },
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// 64-bit FNV-1a, used to derive per-scene RNG streams.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn scene_rng(seed: u64, scene_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(scene_id.as_bytes()))
}

/// Scene counts `(train, val_unseen, test)` for `n` scenes: the held-out
/// splits get their rounded share (at least one each), train the remainder.
pub fn split_scene_counts(n: usize, r: &SplitRatios) -> (usize, usize, usize) {
    let total = (r.train + r.val_unseen + r.test) as f64;
    let share = |w: u32| ((n as f64 * w as f64 / total).round() as usize).max(1);
    let (vu, te) = (share(r.val_unseen), share(r.test));
    (n.saturating_sub(vu + te), vu, te)
}

/// Nearest eligible object to `goal` within [`TARGET_RADIUS`].
pub fn nearest_target<'a>(scene: &'a Scene, goal: WorldPoint) -> Option<&'a ObjectSpec> {
    scene
        .objects
        .iter()
        .filter(|o| !NON_TARGETS.contains(&o.label.as_str()))
        .map(|o| (o.center().distance(&goal), o))
        .filter(|(d, _)| *d <= TARGET_RADIUS)
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.object_id.cmp(&b.1.object_id)))
        .map(|(_, o)| o)
}

fn final_heading(path: &PlannedPath) -> f64 {
    path.waypoints
        .windows(2)
        .rev()
        .find(|w| w[0] != w[1])
        .map_or(0.0, |w| w[0].bearing_to(&w[1]))
}

/// Observation at the goal, facing along the last path segment.
pub fn goal_snapshot(ctx: &SceneContext, path: &PlannedPath) -> GoalSnapshot {
    let g = path.end().expect("non-empty path");
    let pose = Pose::new(g.x, g.y, final_heading(path));
    GoalSnapshot {
        captured_at: pose,
        visible: sense(ctx, pose, 0, false).detections,
    }
}

/// Episodes of one scene, tagged with their trajectory index and family.
struct SceneEpisodes {
    scene_id: String,
    /// (family size, trajectory index, episode)
    episodes: Vec<(usize, usize, Episode)>,
}

fn episode_id(scene: &str, task: TaskType, k: usize) -> String {
    format!("{scene}-{task}-{k:04}")
}

fn object_goal_sample(
    sampler: &PathSampler,
    scene: &Scene,
    cfg: &DatasetConfig,
    rng: &mut ChaCha8Rng,
    from: Option<WorldPoint>,
) -> Result<(Pose, WorldPoint, PlannedPath, String), SamplingError> {
    let accept = |g: WorldPoint| nearest_target(scene, g).is_some();
    let (start, goal, path) = match from {
        None => {
            let s = sampler.sample(&cfg.constraints, rng, accept)?;
            (s.start, s.goal, s.path)
        }
        Some(p) => {
            let (g, path) = sampler.sample_goal_from(p, &cfg.constraints, rng, accept)?;
            (Pose::new(p.x, p.y, super::sampling::initial_heading(&path)), g, path)
        }
    };
    let target = nearest_target(scene, goal).expect("accepted").object_id.clone();
    Ok((start, goal, path, target))
}

fn generate_scene_episodes(
    ctx: &SceneContext,
    cfg: &DatasetConfig,
    clients: &RefinementClients,
) -> Result<SceneEpisodes, DatasetError> {
    let scene = &ctx.scene;
    let sid = scene.scene_id.as_str();
    let mut rng = scene_rng(cfg.seed, sid);
    let sampler = PathSampler::new(ctx);
    let wants = |t: TaskType| cfg.tasks.contains(&t);
    let mut out = Vec::new();
    let finish = |e: Episode| -> Episode {
        if clients.is_empty() {
            return e;
        }
        let c = RefineContext::for_episode(ctx, &e);
        let bundle = refine(&e.instruction_bundle, &c, clients);
        Episode {
            instruction_bundle: bundle,
            ..e
        }
    };

    if wants(TaskType::Fine) {
        let n = cfg.counts.fine;
        for k in 0..n {
            let s = sampler.sample(&cfg.constraints, &mut rng, |_| true)?;
            let fine = make_fine_instruction(&s.path, &ctx.graph, scene);
            let e = Episode {
                episode_id: episode_id(sid, TaskType::Fine, k),
                scene_id: sid.to_string(),
                task_type: TaskType::Fine,
                instruction_bundle: InstructionBundle {
                    fine: Some(fine),
                    ..InstructionBundle::default()
                },
                start: s.start,
                goals: vec![Goal {
                    point: s.goal,
                    target_object_id: None,
                }],
                reference_path: s.path,
                success_thresh: cfg.success_thresh,
            };
            out.push((n, k, finish(e)));
        }
    }

    let coarse_tasks: Vec<TaskType> = [TaskType::Coarse, TaskType::VisualRef, TaskType::Dialogue]
        .into_iter()
        .filter(|t| wants(*t))
        .collect();
    if !coarse_tasks.is_empty() {
        let n = cfg.counts.coarse;
        for k in 0..n {
            let (start, goal, path, target) = object_goal_sample(&sampler, scene, cfg, &mut rng, None)?;
            let coarse = make_coarse_instructions(scene, &ctx.graph, &target);
            let base = Episode {
                episode_id: String::new(),
                scene_id: sid.to_string(),
                task_type: TaskType::Coarse,
                instruction_bundle: InstructionBundle {
                    coarse,
                    ..InstructionBundle::default()
                },
                start,
                goals: vec![Goal {
                    point: goal,
                    target_object_id: Some(target),
                }],
                reference_path: path,
                success_thresh: cfg.success_thresh,
            };
            // refine once so the three tasks keep identical instructions
            let base = finish(base);
            for &task in &coarse_tasks {
                let mut e = base.clone();
                e.episode_id = episode_id(sid, task, k);
                e.task_type = task;
                match task {
                    TaskType::VisualRef => {
                        e.instruction_bundle.goal_snapshot = Some(goal_snapshot(ctx, &e.reference_path))
                    }
                    TaskType::Dialogue => e.instruction_bundle.oracle_enabled = true,
                    _ => {}
                }
                out.push((n, k, e));
            }
        }
    }

    if wants(TaskType::LongHorizon) {
        let n = cfg.counts.long_horizon;
        for k in 0..n {
            let legs_n = rng.gen_range(2..=3);
            let mut legs = Vec::with_capacity(legs_n);
            let mut from = None;
            for _ in 0..legs_n {
                let (start, goal, path, target) = object_goal_sample(&sampler, scene, cfg, &mut rng, from)?;
                legs.push(Episode {
                    episode_id: String::new(),
                    scene_id: sid.to_string(),
                    task_type: TaskType::Coarse,
                    instruction_bundle: InstructionBundle {
                        coarse: make_coarse_instructions(scene, &ctx.graph, &target),
                        ..InstructionBundle::default()
                    },
                    start,
                    goals: vec![Goal {
                        point: goal,
                        target_object_id: Some(target),
                    }],
                    reference_path: path,
                    success_thresh: cfg.success_thresh,
                });
                from = Some(goal);
            }
            let e = chain_long_horizon(ctx, &legs, episode_id(sid, TaskType::LongHorizon, k)).map_err(
                |source| DatasetError::Chain {
                    scene_id: sid.to_string(),
                    source,
                },
            )?;
            out.push((n, k, e));
        }
    }
    Ok(SceneEpisodes {
        scene_id: sid.to_string(),
        episodes: out,
    })
}

/// Build all splits. Deterministic for a given seed regardless of thread count.
pub fn build_dataset(
    contexts: &[Arc<SceneContext>],
    cfg: &DatasetConfig,
    clients: &RefinementClients,
) -> Result<Dataset, DatasetError> {
    let n = contexts.len();
    if n < 3 {
        return Err(DatasetError::TooFewScenes(n));
    }
    let mut ids: Vec<String> = contexts.iter().map(|c| c.scene.scene_id.clone()).collect();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(DatasetError::DuplicateScene(w[0].clone()));
    }
    let mut shuffled = ids.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let (n_train, n_vu, _) = split_scene_counts(n, &cfg.ratios);
    let mut scene_split: BTreeMap<String, SplitName> = BTreeMap::new();
    for (i, id) in shuffled.iter().enumerate() {
        let split = if i < n_train {
            SplitName::Train
        } else if i < n_train + n_vu {
            SplitName::ValUnseen
        } else {
            SplitName::Test
        };
        scene_split.insert(id.clone(), split);
    }

    let mut ordered: Vec<&Arc<SceneContext>> = contexts.iter().collect();
    ordered.sort_by(|a, b| a.scene.scene_id.cmp(&b.scene.scene_id));
    let per_scene: Vec<SceneEpisodes> = ordered
        .par_iter()
        .map(|ctx| generate_scene_episodes(ctx, cfg, clients))
        .collect::<Result<_, _>>()?;

    let mut episodes: BTreeMap<SplitName, Vec<Episode>> =
        SplitName::ALL.iter().map(|s| (*s, Vec::new())).collect();
    let mut split_scenes: BTreeMap<SplitName, Vec<String>> =
        SplitName::ALL.iter().map(|s| (*s, Vec::new())).collect();
    for se in per_scene {
        let split = scene_split[&se.scene_id];
        split_scenes.get_mut(&split).unwrap().push(se.scene_id.clone());
        let mut has_val_seen = false;
        for (family, k, e) in se.episodes {
            let held = if split == SplitName::Train && family >= 2 {
                let h = ((family as f64 * cfg.val_seen_fraction).round() as usize).max(1);
                k >= family - h
            } else {
                false
            };
            let dest = if held { SplitName::ValSeen } else { split };
            has_val_seen |= held;
            episodes.get_mut(&dest).unwrap().push(e);
        }
        if has_val_seen {
            split_scenes
                .get_mut(&SplitName::ValSeen)
                .unwrap()
                .push(se.scene_id.clone());
        }
    }

    let splits = SplitName::ALL
        .iter()
        .map(|s| DatasetSplit {
            name: *s,
            scene_ids: split_scenes[s].clone(),
            episode_ids: episodes[s].iter().map(|e| e.episode_id.clone()).collect(),
        })
        .collect();
    let reviews = episodes
        .values()
        .flatten()
        .map(|e| ReviewEntry {
            episode_id: e.episode_id.clone(),
            verified: false,
            score: None,
        })
        .collect();
    Ok(Dataset {
        manifest: Manifest {
            generator_version: GENERATOR_VERSION.to_string(),
            config: cfg.clone(),
            coarse_style_expansion_factor: COARSE_STYLE_EXPANSION,
            splits,
            reviews,
        },
        episodes,
    })
}

pub fn episodes_to_jsonl(episodes: &[Episode]) -> String {
    let mut out = String::new();
    for e in episodes {
        out.push_str(&serde_json::to_string(e).expect("episodes serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_episodes_jsonl(text: &str, path: &Path) -> Result<Vec<Episode>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn manifest_to_json(m: &Manifest) -> String {
    let mut s = serde_json::to_string_pretty(m).expect("manifest serializes");
    s.push('\n');
    s
}

/// Write `episodes_<split>.jsonl`, `manifest.json` and `scenes/<id>.json`.
pub fn write_dataset(dir: &Path, dataset: &Dataset, scenes: &[&Scene]) -> Result<(), DatasetError> {
    fs::create_dir_all(dir.join("scenes")).map_err(io_err(dir))?;
    for (split, eps) in &dataset.episodes {
        let p = dir.join(split.file_name());
        fs::write(&p, episodes_to_jsonl(eps)).map_err(io_err(&p))?;
    }
    let p = dir.join("manifest.json");
    fs::write(&p, manifest_to_json(&dataset.manifest)).map_err(io_err(&p))?;
    for s in scenes {
        let p = dir.join("scenes").join(format!("{}.json", s.scene_id));
        fs::write(&p, s.to_json_string()).map_err(io_err(&p))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub manifest: Manifest,
    pub episodes: BTreeMap<SplitName, Vec<Episode>>,
    pub scenes: BTreeMap<String, Scene>,
}

impl LoadedDataset {
    pub fn all_episodes(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.values().flatten()
    }

    pub fn episode(&self, id: &str) -> Option<&Episode> {
        self.all_episodes().find(|e| e.episode_id == id)
    }

    /// Scene contexts for the dataset's agent body and resolution.
    pub fn contexts(&self) -> BTreeMap<String, Arc<SceneContext>> {
        let c = &self.manifest.config;
        self.scenes
            .iter()
            .map(|(id, s)| {
                (
                    id.clone(),
                    Arc::new(SceneContext::new(s.clone(), c.resolution, c.agent.radius, c.agent.height)),
                )
            })
            .collect()
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn load_dataset(dir: &Path) -> Result<LoadedDataset, DatasetError> {
    let manifest = read_manifest(&dir.join("manifest.json"))?;
    let mut episodes = BTreeMap::new();
    for split in SplitName::ALL {
        let p = dir.join(split.file_name());
        let eps = if p.exists() {
            parse_episodes_jsonl(&fs::read_to_string(&p).map_err(io_err(&p))?, &p)?
        } else {
            Vec::new()
        };
        episodes.insert(split, eps);
    }
    let mut scenes = BTreeMap::new();
    let sdir = dir.join("scenes");
    let mut entries: Vec<PathBuf> = fs::read_dir(&sdir)
        .map_err(io_err(&sdir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    for p in entries {
        let s = load_scene(&p).map_err(|source| DatasetError::Scene {
            path: p.clone(),
            source,
        })?;
        scenes.insert(s.scene_id.clone(), s);
    }
    for e in episodes.values().flatten() {
        if !scenes.contains_key(&e.scene_id) {
            return Err(DatasetError::Invalid(format!(
                "episode {} references missing scene {}",
                e.episode_id, e.scene_id
            )));
        }
    }
    Ok(LoadedDataset {
        manifest,
        episodes,
        scenes,
    })
}

/// Merge reviewer verdicts into the manifest. Returns the number updated.
pub fn apply_reviews(manifest: &mut Manifest, reviews: &[ReviewEntry]) -> Result<usize, DatasetError> {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, r) in manifest.reviews.iter().enumerate() {
        index.insert(r.episode_id.as_str(), i);
    }
    let mut updates = Vec::with_capacity(reviews.len());
    for r in reviews {
        let i = *index
            .get(r.episode_id.as_str())
            .ok_or_else(|| DatasetError::Invalid(format!("review for unknown episode {}", r.episode_id)))?;
        if r.score.is_some_and(|s| !s.is_finite()) {
            return Err(DatasetError::Invalid(format!("non-finite score for {}", r.episode_id)));
        }
        updates.push((i, r.clone()));
    }
    let n = updates.len();
    for (i, r) in updates {
        manifest.reviews[i] = r;
    }
    Ok(n)
}
