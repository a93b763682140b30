//! Implementations behind the `embodinav` subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use embodinav_core::env::{generate_scene, load_scene, GeneratorParams, Scene, SceneContext};
use embodinav_core::eval::{aggregate, score_logged, MetricsReport};
use embodinav_core::sim::{Mode, SimConfig, Trajectory, TrajectoryMeta};
use embodinav_core::tasks::{
    apply_reviews, build_dataset, load_dataset, manifest_to_json, read_manifest, DatasetConfig,
    Episode, LoadedDataset, RefinementClients, ReviewEntry, SplitName, TaskType,
};

use crate::agents::AgentKind;
use crate::http_client::HttpRefinementClient;
use crate::output::{write_file_atomic, StagedDir};
use crate::runner::{report_config, run_batch};
use crate::server::{serve_stdio, Server};
use crate::session::{DoneHook, DoneRecord, ServiceData};

pub fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "strict" => Ok(Mode::Strict),
        "telhop" | "tel_hop" => Ok(Mode::TelHop),
        other => Err(format!("unknown mode `{other}` (expected strict or telhop)")),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Scene `i` uses seed `seed + i`.
pub fn gen_scenes(count: usize, seed: u64, out: &Path, params: Option<&Path>) -> Result<Vec<PathBuf>> {
    let params: GeneratorParams = match params {
        Some(p) => read_json(p)?,
        None => GeneratorParams::default(),
    };
    let scenes: Vec<Scene> = (0..count as u64)
        .into_par_iter()
        .map(|i| generate_scene(&params, seed.wrapping_add(i)).map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    let stage = StagedDir::new(out)?;
    let mut names = Vec::with_capacity(scenes.len());
    for s in &scenes {
        let name = format!("{}.json", s.scene_id);
        fs::write(stage.path().join(&name), s.to_json_string())?;
        names.push(out.join(name));
    }
    stage.commit()?;
    Ok(names)
}

pub fn load_scene_dir(dir: &Path) -> Result<Vec<Scene>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| load_scene(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

pub struct GenEpisodes<'a> {
    pub scenes: &'a Path,
    pub tasks: Option<Vec<TaskType>>,
    pub seed: u64,
    pub out: &'a Path,
    pub config: Option<&'a Path>,
    /// Use the HTTP refinement client when `REFINEMENT_ENDPOINT` is set.
    pub refine: bool,
}

pub fn gen_episodes(args: &GenEpisodes) -> Result<usize> {
    let mut cfg: DatasetConfig = match args.config {
        Some(p) => read_json(p)?,
        None => DatasetConfig::default(),
    };
    cfg.seed = args.seed;
    if let Some(t) = &args.tasks {
        cfg.tasks = t.clone();
    }
    let scenes = load_scene_dir(args.scenes)?;
    let contexts: Vec<Arc<SceneContext>> = scenes
        .par_iter()
        .map(|s| Arc::new(SceneContext::new(s.clone(), cfg.resolution, cfg.agent.radius, cfg.agent.height)))
        .collect();
    let clients = if args.refine {
        match HttpRefinementClient::from_env(Duration::from_secs(30)) {
            Some(c) => RefinementClients::uniform(Arc::new(c)),
            None => bail!("--refine needs REFINEMENT_ENDPOINT"),
        }
    } else {
        RefinementClients::default()
    };
    let dataset = build_dataset(&contexts, &cfg, &clients)?;
    let stage = StagedDir::new(args.out)?;
    let refs: Vec<&Scene> = scenes.iter().collect();
    embodinav_core::tasks::write_dataset(stage.path(), &dataset, &refs)?;
    stage.commit()?;
    Ok(dataset.episodes.values().map(Vec::len).sum())
}

fn select<'a>(ds: &'a LoadedDataset, split: Option<SplitName>, tasks: Option<&[TaskType]>) -> Vec<&'a Episode> {
    ds.episodes
        .iter()
        .filter(|(s, _)| split.map_or(true, |want| **s == want))
        .flat_map(|(_, eps)| eps.iter())
        .filter(|e| tasks.map_or(true, |t| t.contains(&e.task_type)))
        .collect()
}

fn report_files(dir: &Path, report: &Path, rep: &MetricsReport) -> Result<()> {
    let name = report
        .file_name()
        .ok_or_else(|| anyhow!("report path has no file name"))?;
    fs::write(dir.join(name), rep.to_json())?;
    fs::write(dir.join(Path::new(name).with_extension("csv")), rep.to_csv())?;
    Ok(())
}

/// Move every file of a staged flat directory next to `report`.
fn install_flat(stage: StagedDir, dest_dir: &Path) -> Result<()> {
    fs::create_dir_all(dest_dir)?;
    let mut staged: Vec<PathBuf> = fs::read_dir(stage.path())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    staged.sort();
    for p in staged {
        let bytes = fs::read(&p)?;
        write_file_atomic(&dest_dir.join(p.file_name().expect("file")), &bytes)?;
    }
    Ok(())
}

pub fn write_trajectory(dir: &Path, t: &Trajectory, mode: Mode) -> Result<()> {
    fs::write(dir.join(format!("{}.csv", t.episode_id)), t.to_csv())?;
    let meta = serde_json::to_string_pretty(&t.meta(mode))? + "\n";
    fs::write(dir.join(format!("{}.meta.json", t.episode_id)), meta)?;
    Ok(())
}

pub struct RunArgs<'a> {
    pub dataset: &'a Path,
    pub agent: AgentKind,
    pub mode: Mode,
    pub report: &'a Path,
    pub split: Option<SplitName>,
    pub tasks: Option<Vec<TaskType>>,
    pub limit: Option<usize>,
    pub seed: u64,
    pub trajectories: Option<&'a Path>,
    pub max_steps: Option<usize>,
}

pub fn run(args: &RunArgs) -> Result<MetricsReport> {
    let ds = load_dataset(args.dataset)?;
    let mut episodes = select(&ds, args.split, args.tasks.as_deref());
    if let Some(n) = args.limit {
        episodes.truncate(n);
    }
    if episodes.is_empty() {
        bail!("no episodes selected");
    }
    let mut config = SimConfig::with_mode(args.mode);
    if let Some(m) = args.max_steps {
        config.max_steps = m;
    }
    config.validate()?;
    let contexts = ds.contexts();
    let out = run_batch(&contexts, &episodes, args.agent, config, ds.manifest.config.agent, args.seed)?;
    let report = out.report.ok_or_else(|| anyhow!("no episodes scored"))?;

    let report_stage = StagedDir::new(&args.report.with_extension("staging"))?;
    report_files(report_stage.path(), args.report, &report)?;
    let traj_stage = match args.trajectories {
        Some(dir) => {
            let s = StagedDir::new(dir)?;
            for t in &out.trajectories {
                write_trajectory(s.path(), t, args.mode)?;
            }
            Some(s)
        }
        None => None,
    };
    if let Some(s) = traj_stage {
        s.commit()?;
    }
    let parent = args.report.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    install_flat(report_stage, parent)?;
    Ok(report)
}

/// Score every `<episode_id>.csv` + `<episode_id>.meta.json` pair in `dir`.
pub fn eval_dir(dataset: &Path, dir: &Path) -> Result<MetricsReport> {
    let ds = load_dataset(dataset)?;
    let contexts = ds.contexts();
    let index: BTreeMap<&str, &Episode> = ds.all_episodes().map(|e| (e.episode_id.as_str(), e)).collect();
    let mut csvs: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    csvs.sort();
    if csvs.is_empty() {
        bail!("no trajectory CSV files in {}", dir.display());
    }
    let mut mode = None;
    let mut results = Vec::with_capacity(csvs.len());
    for csv in &csvs {
        let id = csv.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let ep = index
            .get(id)
            .ok_or_else(|| anyhow!("{}: no episode {id} in the dataset", csv.display()))?;
        let meta_path = dir.join(format!("{id}.meta.json"));
        let meta: TrajectoryMeta = read_json(&meta_path)?;
        mode.get_or_insert(meta.mode);
        let ctx = contexts
            .get(&ep.scene_id)
            .ok_or_else(|| anyhow!("scene {} missing", ep.scene_id))?;
        let text = fs::read_to_string(csv)?;
        let r = score_logged(ep, &text, &meta, ctx).with_context(|| format!("scoring {}", csv.display()))?;
        results.push(r);
    }
    let mut config = SimConfig::with_mode(mode.unwrap_or(Mode::Strict));
    config.success_thresh = results.first().map_or(config.success_thresh, |_| ds.manifest.config.success_thresh);
    aggregate(results, report_config(&config, &ds.manifest.config.agent, None)).ok_or_else(|| anyhow!("nothing scored"))
}

pub fn write_report(report_path: &Path, rep: &MetricsReport) -> Result<()> {
    write_file_atomic(report_path, rep.to_json().as_bytes())?;
    write_file_atomic(&report_path.with_extension("csv"), rep.to_csv().as_bytes())?;
    Ok(())
}

pub fn service_data(dataset: &Path, mode: Mode, max_steps: Option<usize>) -> Result<ServiceData> {
    let ds = load_dataset(dataset)?;
    let mut config = SimConfig::with_mode(mode);
    if let Some(m) = max_steps {
        config.max_steps = m;
    }
    config.validate()?;
    Ok(ServiceData::from_dataset(&ds, config))
}

/// Serve forever on `listen`, or on the standard streams when `listen` is
/// `None`. Announces the bound address on stderr as one JSON line.
pub fn serve(data: ServiceData, listen: Option<&str>) -> Result<()> {
    let data = Arc::new(data);
    match listen {
        None => serve_stdio(data, None)?,
        Some(addr) => {
            let server = Server::bind(addr, data, None).with_context(|| format!("binding {addr}"))?;
            eprintln!("{}", serde_json::json!({ "listening": server.local_addr().to_string() }));
            loop {
                std::thread::park();
            }
        }
    }
    Ok(())
}

/// Files written when a human session ends.
pub fn write_session_outputs(out: &Path, record: &DoneRecord, mode: Mode) -> Result<()> {
    let id = &record.episode.episode_id;
    let stage = StagedDir::new(&out.join(format!(".{id}.session")))?;
    write_trajectory(stage.path(), &record.trajectory, mode)?;
    let rep = aggregate(
        vec![record.reply.result.clone()],
        report_config(&SimConfig::with_mode(mode), &embodinav_core::sim::AgentBody::default(), Some("human")),
    )
    .expect("one result");
    fs::write(stage.path().join(format!("{id}.report.json")), rep.to_json())?;
    install_flat(stage, out)
}

/// Serve a single episode and return once one session completes it.
pub fn human_session(mut data: ServiceData, episode: &str, listen: &str, out: &Path) -> Result<DoneRecord> {
    if !data.episodes.contains_key(episode) {
        bail!("unknown episode {episode}");
    }
    data.restrict(&[episode]);
    let (tx, rx) = mpsc::channel::<DoneRecord>();
    let tx = std::sync::Mutex::new(tx);
    let hook: DoneHook = Arc::new(move |r: &DoneRecord| {
        let _ = tx.lock().map(|t| t.send(r.clone()));
    });
    let server = Server::bind(listen, Arc::new(data), Some(hook)).with_context(|| format!("binding {listen}"))?;
    eprintln!(
        "{}",
        serde_json::json!({ "listening": server.local_addr().to_string(), "episode_id": episode })
    );
    let record = rx.recv().map_err(|_| anyhow!("service stopped before the episode finished"))?;
    write_session_outputs(out, &record, record.reply.meta.mode)?;
    Ok(record)
}

/// Reviews come as a JSON array or JSON lines of `ReviewEntry`.
pub fn import_reviews(dataset: &Path, reviews: &Path) -> Result<usize> {
    let text = fs::read_to_string(reviews).with_context(|| format!("reading {}", reviews.display()))?;
    let entries: Vec<ReviewEntry> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", reviews.display()))?
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", reviews.display(), i + 1)))
            .collect::<Result<_>>()?
    };
    let path = dataset.join("manifest.json");
    let mut manifest = read_manifest(&path)?;
    let n = apply_reviews(&mut manifest, &entries)?;
    write_file_atomic(&path, manifest_to_json(&manifest).as_bytes())?;
    Ok(n)
}
