//! Dataset construction: determinism, file round trips, instruction checks
//! and refinement under injected client faults.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use proptest::prelude::*;

use embodinav_core::env::{generate_scene, GeneratorParams, Scene, SceneContext};
use embodinav_core::geometry::polyline_length;
use embodinav_core::tasks::{
    build_dataset, landmark_vocabulary, load_dataset, refine, validate_fine_instruction, write_dataset, Dataset,
    DatasetConfig, Episode, RefineContext, RefinementClient, RefinementClients, RefinementError, RefinementRequest,
    Role, TaskType,
};

fn scenes(n: u64, first_seed: u64) -> (Vec<Scene>, Vec<Arc<SceneContext>>) {
    let params = GeneratorParams::default();
    let scenes: Vec<Scene> = (0..n).map(|i| generate_scene(&params, first_seed + i).unwrap()).collect();
    let ctxs = scenes
        .iter()
        .map(|s| Arc::new(SceneContext::new(s.clone(), 0.05, 0.30, 1.50)))
        .collect();
    (scenes, ctxs)
}

fn all(ds: &Dataset) -> Vec<&Episode> {
    ds.episodes.values().flatten().collect()
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
        out.insert(rel, fs::read(&entry).unwrap());
    }
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            v.extend(walk(&p));
        } else {
            v.push(p);
        }
    }
    v
}

/// Third-person verb forms that must never appear in imperative instructions.
const THIRD_PERSON: &[&str] = &[
    "walks", "moves", "turns", "goes", "heads", "enters", "exits", "proceeds", "passes", "stops", "continues",
    "crosses", "follows", "reaches", "leaves", "waits", "halts", "keeps",
];

#[test]
fn fine_instructions_pass_the_lexical_check() {
    let (_, ctxs) = scenes(50, 1000);
    let cfg = DatasetConfig {
        tasks: vec![TaskType::Fine],
        seed: 5,
        ..DatasetConfig::default()
    };
    let ds = build_dataset(&ctxs, &cfg, &RefinementClients::default()).unwrap();
    let by_scene: BTreeMap<_, _> = ctxs.iter().map(|c| (c.scene.scene_id.clone(), c)).collect();
    let eps = all(&ds);
    assert!(eps.len() >= 500, "{} fine episodes", eps.len());
    for e in eps {
        let text = e.instruction_bundle.fine.as_deref().expect("fine text");
        let ctx = by_scene[&e.scene_id];
        let check = validate_fine_instruction(text, &landmark_vocabulary(&ctx.scene));
        assert!(check.passes(), "{}: {check:?} in {text:?}", e.episode_id);
        let lower = text.to_lowercase();
        for w in lower.split(|c: char| !c.is_alphanumeric()) {
            assert!(!THIRD_PERSON.contains(&w), "{}: `{w}` in {text:?}", e.episode_id);
        }
        e.validate(ctx).unwrap();
    }
}

#[test]
fn same_seed_same_files() {
    let (sc, ctxs) = scenes(6, 40);
    let cfg = DatasetConfig {
        seed: 9,
        ..DatasetConfig::default()
    };
    let refs: Vec<&Scene> = sc.iter().collect();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let da = build_dataset(&ctxs, &cfg, &RefinementClients::default()).unwrap();
    let db = build_dataset(&ctxs, &cfg, &RefinementClients::default()).unwrap();
    write_dataset(a.path(), &da, &refs).unwrap();
    write_dataset(b.path(), &db, &refs).unwrap();
    assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()));

    let loaded = load_dataset(a.path()).unwrap();
    assert_eq!(loaded.manifest, da.manifest);
    assert_eq!(loaded.episodes, da.episodes);
    let c = tempfile::tempdir().unwrap();
    let again = Dataset {
        manifest: loaded.manifest.clone(),
        episodes: loaded.episodes.clone(),
    };
    let scenes_back: Vec<&Scene> = loaded.scenes.values().collect();
    write_dataset(c.path(), &again, &scenes_back).unwrap();
    assert_eq!(dir_bytes(a.path()), dir_bytes(c.path()));

    let other = build_dataset(&ctxs, &DatasetConfig { seed: 10, ..cfg }, &RefinementClients::default()).unwrap();
    assert_ne!(other.episodes, da.episodes);
}

#[test]
fn reference_paths_keep_agent_clearance() {
    let (_, ctxs) = scenes(8, 200);
    let ds = build_dataset(&ctxs, &DatasetConfig::default(), &RefinementClients::default()).unwrap();
    let by_scene: BTreeMap<_, _> = ctxs.iter().map(|c| (c.scene.scene_id.clone(), c)).collect();
    for e in all(&ds) {
        let ctx = by_scene[&e.scene_id];
        let occ = &ctx.occupancy;
        for w in &e.reference_path.waypoints {
            let d = occ
                .occupied_cells()
                .map(|c| occ.cell_center(c).distance(w))
                .fold(f64::INFINITY, f64::min);
            assert!(d >= 0.30, "{}: waypoint {w:?} clearance {d}", e.episode_id);
        }
        let len = polyline_length(&e.reference_path.waypoints);
        assert!((len - e.reference_path.length).abs() < 1e-6);
        assert!(e.reference_path.length > 0.0);
        if e.task_type == TaskType::LongHorizon {
            assert!((2..=3).contains(&e.goals.len()));
            let subs = e.instruction_bundle.sub_instructions.as_ref().unwrap();
            assert_eq!(subs.len(), e.goals.len());
        }
    }
}

/// A client that misbehaves in a fixed rotation.
struct Faulty {
    calls: AtomicUsize,
    replies: Vec<Result<String, RefinementError>>,
}

impl RefinementClient for Faulty {
    fn complete(&self, _: &RefinementRequest) -> Result<String, RefinementError> {
        let i = self.calls.fetch_add(1, Ordering::Relaxed);
        self.replies[i % self.replies.len()].clone()
    }
}

fn faulty() -> Faulty {
    Faulty {
        calls: AtomicUsize::new(0),
        replies: vec![
            Err(RefinementError::ClientTimeout),
            Err(RefinementError::Transport("connection reset".into())),
            Ok(String::new()),
            Ok("{not json".into()),
            Ok(r#"{"formal":"x","natural":"y"}"#.into()),
            Ok(r#"{"relation":"BESIDE"}"#.into()),
            Ok("The agent walks to the door and stops.".into()),
            Ok("Sure! Here you go: {\"formal\": \"a\"}".into()),
        ],
    }
}

#[test]
fn failing_clients_leave_templates_untouched() {
    let (_, ctxs) = scenes(4, 300);
    let cfg = DatasetConfig::default();
    let plain = build_dataset(&ctxs, &cfg, &RefinementClients::default()).unwrap();
    let f = Arc::new(faulty());
    let noisy = build_dataset(&ctxs, &cfg, &RefinementClients::uniform(f.clone())).unwrap();
    assert!(f.calls.load(Ordering::Relaxed) > 0);
    assert_eq!(plain.episodes, noisy.episodes);
}

struct Fixed(Role, String);

impl RefinementClient for Fixed {
    fn complete(&self, r: &RefinementRequest) -> Result<String, RefinementError> {
        if r.role == self.0 {
            Ok(self.1.clone())
        } else {
            Err(RefinementError::ClientTimeout)
        }
    }
}

fn coarse_episode() -> (Arc<SceneContext>, Episode) {
    let (_, ctxs) = scenes(3, 500);
    let ds = build_dataset(&ctxs, &DatasetConfig::default(), &RefinementClients::default()).unwrap();
    let e = all(&ds)
        .into_iter()
        .find(|e| e.task_type == TaskType::Coarse)
        .unwrap()
        .clone();
    let ctx = ctxs.iter().find(|c| c.scene.scene_id == e.scene_id).unwrap().clone();
    (ctx, e)
}

#[test]
fn valid_synthesizer_reply_is_accepted() {
    let (ctx, e) = coarse_episode();
    let c = RefineContext::for_episode(&ctx, &e);
    let t = c.target_label.clone().unwrap();
    let reply = format!(
        r#"{{"formal":"Proceed to the {t}.","natural":"Could you find the {t}, please?","casual":"{t}, over there."}}"#
    );
    let clients = RefinementClients {
        synthesizer: Some(Arc::new(Fixed(Role::Synthesizer, reply))),
        ..Default::default()
    };
    let out = refine(&e.instruction_bundle, &c, &clients);
    let coarse = out.coarse.unwrap();
    assert_eq!(coarse.formal, format!("Proceed to the {t}."));
    assert_eq!(out.fine, e.instruction_bundle.fine);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn garbage_replies_never_change_the_bundle(reply in "[0-9 ,.;:!?{}\\[\\]\"-]{0,80}") {
        let (ctx, e) = COARSE.with(|c| c.clone());
        let c = RefineContext::for_episode(&ctx, &e);
        let client: Arc<dyn RefinementClient> = Arc::new(Fixed(Role::Describer, reply.clone()));
        let mut clients = RefinementClients::uniform(client);
        clients.synthesizer = Some(Arc::new(Fixed(Role::Synthesizer, reply)));
        prop_assert_eq!(refine(&e.instruction_bundle, &c, &clients), e.instruction_bundle.clone());
    }
}

thread_local! {
    static COARSE: (Arc<SceneContext>, Episode) = coarse_episode();
}
