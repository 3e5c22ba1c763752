//! Episodes, suites, records and rendering.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aircraft::{Action, AircraftState};
use crate::dqn::select_action_multi;
use crate::env::World;
use crate::error::{Error, Result};
use crate::neuralnet::{io as weights, QNetwork};
use crate::pgm;
use crate::receding_horizon::{RHConfig, RecedingHorizonController};
use crate::rng::{derive_seed, rng_for, stream, SimRng};
use crate::scenario::{Approach, ControllerSpec, Scenario};

/// Chooses one action per aircraft each agent step.
pub trait Controller {
    fn act(&mut self, world: &World, rng: &mut SimRng) -> Result<Vec<Action>>;
}

/// Uniformly random bank commands.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomController;

impl Controller for RandomController {
    fn act(&mut self, world: &World, rng: &mut SimRng) -> Result<Vec<Action>> {
        Ok((0..world.aircraft().len())
            .map(|_| Action::from_index(rng.random_range(0..2)))
            .collect())
    }
}

/// Greedy decentralized policy: each aircraft maximizes its summed pairwise
/// Q-values using the shared network.
#[derive(Clone, Debug)]
pub struct NetController {
    pub approach: Approach,
    pub net: Arc<QNetwork<f32>>,
}

impl Controller for NetController {
    fn act(&mut self, world: &World, _rng: &mut SimRng) -> Result<Vec<Action>> {
        (0..world.aircraft().len())
            .map(|i| {
                let input = world.agent_input(i, self.approach);
                select_action_multi(&self.net, &input.image, &input.pairs).map(Action::from_index)
            })
            .collect()
    }
}

/// Plans each aircraft separately against the current true fire map.
#[derive(Clone, Debug)]
pub struct RecedingHorizonAgent(pub RecedingHorizonController);

impl Controller for RecedingHorizonAgent {
    fn act(&mut self, world: &World, rng: &mut SimRng) -> Result<Vec<Action>> {
        let fleet = world.aircraft();
        Ok((0..fleet.len())
            .map(|i| self.0.rh_step(i, world.grid(), world.sensor(), fleet, rng))
            .collect())
    }
}

/// A controller description that can be instantiated once per episode.
#[derive(Clone, Debug)]
pub enum Policy {
    Random,
    Net { approach: Approach, net: Arc<QNetwork<f32>> },
    RecedingHorizon(RHConfig),
}

impl Policy {
    /// Resolves a scenario's controller, loading and shape-checking weights.
    pub fn from_scenario(scenario: &Scenario) -> Result<Policy> {
        Self::from_spec(&scenario.controller, scenario)
    }

    pub fn from_spec(spec: &ControllerSpec, scenario: &Scenario) -> Result<Policy> {
        let load = |path: &Path, approach: Approach| -> Result<Policy> {
            let net = weights::load(path)?;
            let expected = scenario.image_shape(approach);
            if net.spec().image_shape != expected {
                return Err(Error::config(
                    "controller.weights",
                    format!(
                        "network expects images {:?} but the scenario produces {:?}",
                        net.spec().image_shape,
                        expected
                    ),
                ));
            }
            Ok(Policy::Net { approach, net: Arc::new(net) })
        };
        match spec {
            ControllerSpec::Random => Ok(Policy::Random),
            ControllerSpec::RecedingHorizon => Ok(Policy::RecedingHorizon(scenario.receding_horizon)),
            ControllerSpec::ObservationNet { weights } => load(weights, Approach::Observation),
            ControllerSpec::BeliefNet { weights } => load(weights, Approach::Belief),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Policy::Random => "random",
            Policy::Net { approach: Approach::Observation, .. } => "observation-net",
            Policy::Net { approach: Approach::Belief, .. } => "belief-net",
            Policy::RecedingHorizon(_) => "receding-horizon",
        }
    }

    pub fn instantiate(&self, scenario: &Scenario) -> Result<Box<dyn Controller>> {
        Ok(match self {
            Policy::Random => Box::new(RandomController),
            Policy::Net { approach, net } => Box::new(NetController {
                approach: *approach,
                net: Arc::clone(net),
            }),
            Policy::RecedingHorizon(cfg) => Box::new(RecedingHorizonAgent(RecedingHorizonController::new(
                *cfg,
                scenario.rewards,
                scenario.speed_mps,
                scenario.aircraft_count,
            )?)),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time_s: f64,
    pub aircraft: Vec<AircraftState>,
    pub actions: Vec<usize>,
    pub discovered: usize,
    pub reward: f64,
    pub cumulative: f64,
}

/// Fire and belief rasters at one step, row-major with `y` growing north.
/// Boolean layers are strings of `0`/`1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub burning: String,
    pub belief_fire: String,
    pub belief_time: Vec<u8>,
}

fn bits(v: &[bool]) -> String {
    v.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

impl Snapshot {
    fn capture(world: &World) -> Self {
        Snapshot {
            step: world.step_index(),
            burning: bits(world.grid().burning_slice()),
            belief_fire: bits(world.belief().fire_slice()),
            belief_time: world.belief().time_slice().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub controller: String,
    pub seed: u64,
    pub grid_width: usize,
    pub grid_height: usize,
    pub cell_size_m: f64,
    pub initial_aircraft: Vec<AircraftState>,
    pub steps: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub total_score: f64,
}

impl EpisodeRecord {
    /// One row per step: totals, then `x,y,psi,phi,action` for each aircraft.
    pub fn to_csv(&self) -> String {
        let n = self.initial_aircraft.len();
        let mut out = String::from("step,time_s,discovered,reward,cumulative");
        for i in 0..n {
            let _ = write!(out, ",x{i},y{i},psi{i},phi{i},action{i}");
        }
        out.push('\n');
        for s in &self.steps {
            let _ = write!(out, "{},{},{},{},{}", s.step, s.time_s, s.discovered, s.reward, s.cumulative);
            for (a, act) in s.aircraft.iter().zip(&s.actions) {
                let _ = write!(out, ",{},{},{},{},{}", a.x, a.y, a.psi, a.phi, act);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Runs one episode of the scenario's own controller.
pub fn run_episode(scenario: &Scenario, seed: u64) -> Result<EpisodeRecord> {
    scenario.validate()?;
    let policy = Policy::from_scenario(scenario)?;
    run_episode_with(scenario, &policy, seed)
}

/// Runs one episode of `policy` on the world generated from `seed`.
pub fn run_episode_with(scenario: &Scenario, policy: &Policy, seed: u64) -> Result<EpisodeRecord> {
    let mut world = World::new_unchecked(scenario, seed)?;
    let mut controller = policy.instantiate(scenario)?;
    let mut rng = rng_for(seed, stream::CONTROLLER);
    let interval = scenario.snapshot_interval_steps;
    let mut record = EpisodeRecord {
        controller: policy.label().to_string(),
        seed,
        grid_width: scenario.grid.width,
        grid_height: scenario.grid.height,
        cell_size_m: scenario.grid.cell_size_m,
        initial_aircraft: world.aircraft().to_vec(),
        steps: Vec::with_capacity(world.horizon_steps()),
        snapshots: vec![Snapshot::capture(&world)],
        total_score: 0.0,
    };
    let mut total = 0.0;
    while !world.is_done() {
        let actions = controller.act(&world, &mut rng)?;
        let out = world.step(&actions)?;
        total += out.score;
        record.steps.push(StepRecord {
            step: world.step_index(),
            time_s: world.step_index() as f64 * crate::aircraft::DECISION_PERIOD,
            aircraft: world.aircraft().to_vec(),
            actions: actions.iter().map(|a| a.index()).collect(),
            discovered: out.discovered,
            reward: out.score,
            cumulative: total,
        });
        if (interval > 0 && world.step_index() % interval == 0) || world.is_done() {
            record.snapshots.push(Snapshot::capture(&world));
        }
    }
    record.total_score = total;
    Ok(record)
}

/// Sample mean and standard error (n - 1 denominator; zero for one sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub controller: String,
    pub seeds: Vec<u64>,
    pub scores: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
}

/// Episode seeds derived from a master seed.
pub fn episode_seeds(master: u64, episodes: usize) -> Vec<u64> {
    (0..episodes as u64).map(|k| derive_seed(master, k)).collect()
}

impl Evaluation {
    pub fn from_records(controller: &str, records: &[EpisodeRecord]) -> Self {
        let scores: Vec<f64> = records.iter().map(|r| r.total_score).collect();
        let (mean, stderr) = mean_stderr(&scores);
        Evaluation {
            controller: controller.to_string(),
            seeds: records.iter().map(|r| r.seed).collect(),
            scores,
            mean,
            stderr,
        }
    }
}

/// Full records of `episodes` episodes of `policy`, run in parallel.
pub fn run_episodes(policy: &Policy, scenario: &Scenario, episodes: usize, master_seed: u64) -> Result<Vec<EpisodeRecord>> {
    if episodes == 0 {
        return Err(Error::arg("need at least one episode"));
    }
    episode_seeds(master_seed, episodes)
        .par_iter()
        .map(|&s| run_episode_with(scenario, policy, s))
        .collect()
}

/// Runs `episodes` episodes of `policy` (in parallel) and summarizes their scores.
pub fn evaluate(policy: &Policy, scenario: &Scenario, episodes: usize, master_seed: u64) -> Result<Evaluation> {
    if episodes == 0 {
        return Err(Error::arg("need at least one episode"));
    }
    let seeds = episode_seeds(master_seed, episodes);
    let scores = seeds
        .par_iter()
        .map(|&s| run_episode_with(scenario, policy, s).map(|r| r.total_score))
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = mean_stderr(&scores);
    Ok(Evaluation {
        controller: policy.label().to_string(),
        seeds,
        scores,
        mean,
        stderr,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub master_seed: u64,
    pub episodes: usize,
    pub results: Vec<Evaluation>,
}

impl SuiteSummary {
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("controller,episodes,mean,stderr\n");
        for r in &self.results {
            let _ = writeln!(out, "{},{},{},{}", r.controller, r.scores.len(), r.mean, r.stderr);
        }
        out
    }

    pub fn episodes_csv(&self) -> String {
        let mut out = String::from("controller,episode,seed,score\n");
        for r in &self.results {
            for (k, (seed, score)) in r.seeds.iter().zip(&r.scores).enumerate() {
                let _ = writeln!(out, "{},{k},{seed},{score}", r.controller);
            }
        }
        out
    }
}

/// Evaluates every policy on the same per-episode seeds.
pub fn run_suite(scenario: &Scenario, policies: &[Policy], episodes: usize, master_seed: u64) -> Result<SuiteSummary> {
    if episodes < 2 {
        return Err(Error::arg("a suite needs at least two episodes"));
    }
    let results = policies
        .iter()
        .map(|p| evaluate(p, scenario, episodes, master_seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteSummary {
        master_seed,
        episodes,
        results,
    })
}

/// Writes `<stem>.csv` and `<stem>.json` for an episode.
pub fn write_record(dir: &Path, stem: &str, record: &EpisodeRecord) -> Result<()> {
    std::fs::write(dir.join(format!("{stem}.csv")), record.to_csv())?;
    std::fs::write(dir.join(format!("{stem}.json")), record.to_json())?;
    Ok(())
}

fn layer_pgm(w: usize, h: usize, layer: &[u8], scale: impl Fn(u8) -> u8) -> String {
    pgm::encode(w, h, |x, y| scale(layer[y * w + x]))
}

/// Converts a record into images: for each snapshot the true fire and the
/// belief layers as PGM, plus an SVG of the flown paths over the final fire
/// when the record has any steps. Returns the written paths.
pub fn render_record(record: &EpisodeRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let (w, h) = (record.grid_width, record.grid_height);
    let mut written = Vec::new();
    for snap in &record.snapshots {
        if snap.burning.len() != w * h || snap.belief_fire.len() != w * h || snap.belief_time.len() != w * h {
            return Err(Error::ShapeMismatch {
                expected: vec![w * h],
                actual: vec![snap.burning.len(), snap.belief_fire.len(), snap.belief_time.len()],
            });
        }
        let bool_px = |b: u8| if b == b'1' { 255 } else { 0 };
        let files = [
            ("fire", layer_pgm(w, h, snap.burning.as_bytes(), bool_px)),
            ("belief", layer_pgm(w, h, snap.belief_fire.as_bytes(), bool_px)),
            ("staleness", layer_pgm(w, h, &snap.belief_time, |t| t)),
        ];
        for (name, body) in files {
            let p = dir.join(format!("step{:05}_{name}.pgm", snap.step));
            std::fs::write(&p, body)?;
            written.push(p);
        }
    }
    if !record.steps.is_empty() {
        let p = dir.join("paths.svg");
        std::fs::write(&p, paths_svg(record))?;
        written.push(p);
    }
    Ok(written)
}

const PATH_COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Flown paths over the last fire snapshot, with north up.
pub fn paths_svg(record: &EpisodeRecord) -> String {
    let cs = record.cell_size_m;
    let (w, h) = (record.grid_width, record.grid_height);
    let mut xs: Vec<f64> = vec![0.0, w as f64 * cs];
    let mut ys: Vec<f64> = vec![0.0, h as f64 * cs];
    for a in record.initial_aircraft.iter().chain(record.steps.iter().flat_map(|s| s.aircraft.iter())) {
        xs.push(a.x);
        ys.push(a.y);
    }
    let lo = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min) - cs;
    let hi = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + cs;
    let (x0, x1, y0, y1) = (lo(&xs), hi(&xs), lo(&ys), hi(&ys));
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}">"#,
        x0,
        -y1,
        x1 - x0,
        y1 - y0
    );
    let _ = writeln!(
        out,
        r##"<rect x="0" y="{}" width="{}" height="{}" fill="#f4f1e8" stroke="#888"/>"##,
        -(h as f64 * cs),
        w as f64 * cs,
        h as f64 * cs
    );
    if let Some(snap) = record.snapshots.last() {
        for (k, c) in snap.burning.bytes().enumerate() {
            if c == b'1' {
                let (cx, cy) = ((k % w) as f64 * cs, (k / w) as f64 * cs);
                let _ = writeln!(
                    out,
                    r##"<rect x="{}" y="{}" width="{cs}" height="{cs}" fill="#ff7f0e"/>"##,
                    cx,
                    -(cy + cs)
                );
            }
        }
    }
    for i in 0..record.initial_aircraft.len() {
        let start = record.initial_aircraft[i];
        let mut pts = format!("{},{}", start.x, -start.y);
        for s in &record.steps {
            let _ = write!(pts, " {},{}", s.aircraft[i].x, -s.aircraft[i].y);
        }
        let color = PATH_COLORS[i % PATH_COLORS.len()];
        let _ = writeln!(
            out,
            r#"<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{}"/>"#,
            cs * 0.3
        );
        let _ = writeln!(out, r#"<circle cx="{}" cy="{}" r="{}" fill="{color}"/>"#, start.x, -start.y, cs * 0.6);
    }
    out.push_str("</svg>\n");
    out
}
