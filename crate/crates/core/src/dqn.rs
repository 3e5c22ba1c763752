//! Deep Q-learning: replay, exploration, bootstrapped targets and training.

use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aircraft::Action;
use crate::env::{AgentInput, World};
use crate::error::{Error, Result};
use crate::harness::{evaluate, Evaluation, Policy};
use crate::neuralnet::{AdaMax, QNetwork, Sample, Tensor, ACTIONS, CONTINUOUS_INPUTS};
use crate::rng::{derive_seed, rng_for, stream, SimRng};
use crate::scenario::{Approach, Scenario};

/// One stored experience. Images are shared with neighboring transitions.
#[derive(Clone, Debug)]
pub struct Transition {
    pub image: Arc<Tensor<f32>>,
    pub continuous: [f32; CONTINUOUS_INPUTS],
    pub action: usize,
    pub reward: f32,
    pub next_image: Arc<Tensor<f32>>,
    pub next_continuous: [f32; CONTINUOUS_INPUTS],
    /// When set, the target does not bootstrap from the next state.
    pub terminal: bool,
}

/// Fixed-capacity ring of transitions with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::arg("replay capacity must be positive"));
        }
        Ok(ReplayBuffer {
            capacity,
            items: Vec::new(),
            next: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// Stores a transition, overwriting the oldest once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample_indices(&self, n: usize, rng: &mut SimRng) -> Result<Vec<usize>> {
        if self.items.len() < n || self.items.is_empty() {
            return Err(Error::Precondition(format!(
                "replay holds {} transitions, batch needs {n}",
                self.items.len()
            )));
        }
        Ok((0..n).map(|_| rng.random_range(0..self.items.len())).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub target_update_period: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Iterations over which epsilon decays; half of `total_iterations` when unset.
    pub epsilon_decay_iters: Option<u64>,
    pub prefill: usize,
    pub replay_capacity: usize,
    pub total_iterations: u64,
    pub approach: Approach,
    pub learning_rate: f64,
    /// Iterations between evaluations on the training curve.
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Treat the horizon cut-off as non-terminal.
    pub bootstrap_truncation: bool,
    /// Multiplies every training reward before it is stored.
    pub reward_scale: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            gamma: 0.99,
            batch_size: 64,
            target_update_period: 1000,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_iters: None,
            prefill: 50_000,
            replay_capacity: 500_000,
            total_iterations: 1_000_000,
            approach: Approach::Belief,
            learning_rate: 0.002,
            eval_interval: 10_000,
            eval_episodes: 20,
            bootstrap_truncation: true,
            reward_scale: 1.0,
        }
    }
}

impl TrainingConfig {
    /// Settings sized for a single-core run on the desk scenario. Stored
    /// rewards are scaled down so Q-values stay of order one.
    pub fn desk() -> Self {
        TrainingConfig {
            prefill: 2_000,
            replay_capacity: 50_000,
            total_iterations: 100_000,
            approach: Approach::Observation,
            learning_rate: 0.001,
            eval_interval: 25_000,
            reward_scale: 0.01,
            ..Default::default()
        }
    }

    pub fn decay_iters(&self) -> u64 {
        self.epsilon_decay_iters.unwrap_or(self.total_iterations / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("training.gamma", "need 0 < gamma < 1"));
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.epsilon_start) || !unit.contains(&self.epsilon_end) || self.epsilon_end > self.epsilon_start {
            return Err(Error::config("training.epsilon_end", "need 0 <= epsilon_end <= epsilon_start <= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("training.batch_size", "must be positive"));
        }
        if self.target_update_period == 0 {
            return Err(Error::config("training.target_update_period", "must be positive"));
        }
        if self.prefill < self.batch_size {
            return Err(Error::config("training.prefill", "must be at least batch_size"));
        }
        if self.replay_capacity < self.prefill {
            return Err(Error::config("training.replay_capacity", "must be at least prefill"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("training.learning_rate", "must be positive"));
        }
        if !(self.reward_scale > 0.0) {
            return Err(Error::config("training.reward_scale", "must be positive"));
        }
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return Err(Error::config("training.eval_interval", "evaluation interval and episodes must be positive"));
        }
        Ok(())
    }
}

/// Linear decay from `epsilon_start` to `epsilon_end`, flat afterwards.
pub fn epsilon(iter: u64, cfg: &TrainingConfig) -> f64 {
    let decay = cfg.decay_iters();
    if decay == 0 || iter >= decay {
        return cfg.epsilon_end;
    }
    let frac = iter as f64 / decay as f64;
    cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac
}

/// Index of the larger value; ties and NaNs go to action 0.
pub fn argmax(q: [f64; ACTIONS]) -> usize {
    if q[1] > q[0] {
        1
    } else {
        0
    }
}

/// Epsilon-greedy choice for a single pairing.
pub fn select_action(
    net: &QNetwork<f32>,
    image: &Tensor<f32>,
    continuous: &[f32],
    eps: f64,
    rng: &mut SimRng,
) -> Result<usize> {
    if eps > 0.0 && rng.random::<f64>() < eps {
        return Ok(rng.random_range(0..ACTIONS));
    }
    let q = net.forward(image, continuous)?;
    Ok(argmax([q[0] as f64, q[1] as f64]))
}

/// Greedy choice maximizing the sum of pairwise Q-values.
pub fn select_action_multi(
    net: &QNetwork<f32>,
    image: &Tensor<f32>,
    pairs: &[[f32; CONTINUOUS_INPUTS]],
) -> Result<usize> {
    if pairs.is_empty() {
        return Err(Error::arg("pairwise selection needs at least one other aircraft"));
    }
    let mut sum = [0.0f64; ACTIONS];
    for p in pairs {
        let q = net.forward(image, p)?;
        for a in 0..ACTIONS {
            sum[a] += q[a] as f64;
        }
    }
    Ok(argmax(sum))
}

/// Epsilon-greedy over the pairwise sum.
pub fn select_action_multi_eps(net: &QNetwork<f32>, input: &AgentInput, eps: f64, rng: &mut SimRng) -> Result<usize> {
    if eps > 0.0 && rng.random::<f64>() < eps {
        return Ok(rng.random_range(0..ACTIONS));
    }
    select_action_multi(net, &input.image, &input.pairs)
}

/// `reward + gamma * max_a Q_target(next, a)`, or just `reward` when terminal.
pub fn bellman_target(
    reward: f32,
    next_image: &Tensor<f32>,
    next_continuous: &[f32],
    terminal: bool,
    target: &QNetwork<f32>,
    gamma: f64,
) -> Result<f32> {
    if terminal {
        return Ok(reward);
    }
    let q = target.forward(next_image, next_continuous)?;
    Ok(reward + gamma as f32 * q[0].max(q[1]))
}

/// Online network, frozen target copy and optimizer state.
#[derive(Clone, Debug)]
pub struct Learner {
    pub online: QNetwork<f32>,
    pub target: QNetwork<f32>,
    pub optimizer: AdaMax<f32>,
    pub gamma: f64,
    pub batch_size: usize,
    pub target_update_period: u64,
    steps: u64,
}

impl Learner {
    pub fn new(net: QNetwork<f32>, cfg: &TrainingConfig) -> Self {
        Learner {
            target: net.clone(),
            online: net,
            optimizer: AdaMax::new(cfg.learning_rate, 0.9, 0.999),
            gamma: cfg.gamma,
            batch_size: cfg.batch_size,
            target_update_period: cfg.target_update_period,
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One gradient step on a uniformly sampled batch. Copies the online
    /// network into the target every `target_update_period` steps.
    pub fn train_step(&mut self, buffer: &ReplayBuffer, rng: &mut SimRng) -> Result<f32> {
        let idx = buffer.sample_indices(self.batch_size, rng)?;
        let mut targets = Vec::with_capacity(idx.len());
        for &i in &idx {
            let t = buffer.get(i);
            targets.push(bellman_target(
                t.reward,
                &t.next_image,
                &t.next_continuous,
                t.terminal,
                &self.target,
                self.gamma,
            )?);
        }
        let samples: Vec<Sample<'_, f32>> = idx
            .iter()
            .zip(&targets)
            .map(|(&i, &target)| {
                let t = buffer.get(i);
                Sample {
                    image: &t.image,
                    continuous: &t.continuous,
                    action: t.action,
                    target,
                }
            })
            .collect();
        let (loss, grads) = self.online.loss_and_gradients(&samples)?;
        self.optimizer.step_network(&mut self.online, &grads)?;
        self.steps += 1;
        if self.steps % self.target_update_period == 0 {
            self.target = self.online.clone();
        }
        Ok(loss)
    }
}

/// One point of the training curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: u64,
    pub mean_reward: f64,
    pub stderr: f64,
    pub epsilon: f64,
    /// Mean batch loss since the previous point (0 at iteration 0).
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainingOutcome {
    pub network: QNetwork<f32>,
    pub curve: Vec<CurvePoint>,
}

pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "iteration,mean_reward,stderr,epsilon,loss")?;
    for p in curve {
        writeln!(f, "{},{},{},{},{}", p.iteration, p.mean_reward, p.stderr, p.epsilon, p.loss)?;
    }
    f.flush()?;
    Ok(())
}

/// The network a training run with this seed starts from.
pub fn initial_network(scenario: &Scenario, cfg: &TrainingConfig, seed: u64) -> Result<QNetwork<f32>> {
    QNetwork::new(scenario.network_spec(cfg.approach), &mut rng_for(seed, stream::INIT))
}

/// Seed of the fixed evaluation episodes used for every curve point.
pub fn evaluation_seed(seed: u64) -> u64 {
    derive_seed(seed, u64::MAX)
}

/// Steps the world and records one transition per (aircraft, pairing).
struct Collector {
    world: World,
    inputs: Vec<(Arc<Tensor<f32>>, Vec<[f32; CONTINUOUS_INPUTS]>)>,
    episode: u64,
    seed: u64,
    approach: Approach,
    bootstrap: bool,
    reward_scale: f64,
}

impl Collector {
    fn new(scenario: &Scenario, cfg: &TrainingConfig, seed: u64) -> Result<Self> {
        let world = World::new_unchecked(scenario, derive_seed(seed, 0))?;
        let mut c = Collector {
            inputs: Vec::new(),
            world,
            episode: 0,
            seed,
            approach: cfg.approach,
            bootstrap: cfg.bootstrap_truncation,
            reward_scale: cfg.reward_scale,
        };
        c.inputs = c.snapshot_inputs();
        Ok(c)
    }

    fn snapshot_inputs(&self) -> Vec<(Arc<Tensor<f32>>, Vec<[f32; CONTINUOUS_INPUTS]>)> {
        (0..self.world.aircraft().len())
            .map(|i| {
                let inp = self.world.agent_input(i, self.approach);
                (Arc::new(inp.image), inp.pairs)
            })
            .collect()
    }

    fn step(&mut self, net: &QNetwork<f32>, eps: f64, buffer: &mut ReplayBuffer, rng: &mut SimRng) -> Result<()> {
        let n = self.world.aircraft().len();
        let mut actions = Vec::with_capacity(n);
        for (image, pairs) in &self.inputs {
            let a = if eps > 0.0 && rng.random::<f64>() < eps {
                rng.random_range(0..ACTIONS)
            } else {
                select_action_multi(net, image, pairs)?
            };
            actions.push(Action::from_index(a));
        }
        let out = self.world.step(&actions)?;
        let next = self.snapshot_inputs();
        let terminal = out.done && !self.bootstrap;
        for i in 0..n {
            let rewards = self.world.pair_rewards(i, self.approach, out.discovered);
            let (image, pairs) = &self.inputs[i];
            let (next_image, next_pairs) = &next[i];
            for p in 0..pairs.len() {
                buffer.push(Transition {
                    image: Arc::clone(image),
                    continuous: pairs[p],
                    action: actions[i].index(),
                    reward: (rewards[p] * self.reward_scale) as f32,
                    next_image: Arc::clone(next_image),
                    next_continuous: next_pairs[p],
                    terminal,
                });
            }
        }
        if out.done {
            self.episode += 1;
            self.world = World::new_unchecked(self.world.scenario(), derive_seed(self.seed, self.episode))?;
            self.inputs = self.snapshot_inputs();
        } else {
            self.inputs = next;
        }
        Ok(())
    }
}

/// Trains a network on `scenario`.
///
/// The replay buffer is first filled by a uniformly random policy. Then each
/// iteration takes one epsilon-greedy environment step (both aircraft share
/// the online network) and one gradient step. Evaluations on a fixed set of
/// episodes are recorded at iteration 0, every `eval_interval` iterations and
/// at the end.
pub fn run_training(scenario: &Scenario, cfg: &TrainingConfig, seed: u64) -> Result<TrainingOutcome> {
    scenario.validate()?;
    cfg.validate()?;
    let net = initial_network(scenario, cfg, seed)?;
    if cfg.total_iterations == 0 {
        return Ok(TrainingOutcome { network: net, curve: Vec::new() });
    }
    let mut rng = rng_for(seed, stream::TRAINING);
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity)?;
    let mut collector = Collector::new(scenario, cfg, seed)?;
    while buffer.len() < cfg.prefill {
        collector.step(&net, 1.0, &mut buffer, &mut rng)?;
    }
    let mut learner = Learner::new(net, cfg);
    let eval_seed = evaluation_seed(seed);
    let record = |net: &QNetwork<f32>, iteration: u64, loss: f64| -> Result<CurvePoint> {
        let e = evaluate_policy(net, cfg.approach, scenario, cfg.eval_episodes, eval_seed)?;
        Ok(CurvePoint {
            iteration,
            mean_reward: e.mean,
            stderr: e.stderr,
            epsilon: epsilon(iteration, cfg),
            loss,
        })
    };
    let mut curve = vec![record(&learner.online, 0, 0.0)?];
    let mut loss_sum = 0.0f64;
    let mut loss_count = 0u64;
    for iter in 0..cfg.total_iterations {
        collector.step(&learner.online, epsilon(iter, cfg), &mut buffer, &mut rng)?;
        loss_sum += learner.train_step(&buffer, &mut rng)? as f64;
        loss_count += 1;
        let done = iter + 1;
        if done % cfg.eval_interval == 0 || done == cfg.total_iterations {
            curve.push(record(&learner.online, done, loss_sum / loss_count as f64)?);
            loss_sum = 0.0;
            loss_count = 0;
        }
    }
    Ok(TrainingOutcome {
        network: learner.online,
        curve,
    })
}

/// Greedy rollouts scored by the team discovery reward, whichever approach
/// drives the aircraft.
pub fn evaluate_policy(
    net: &QNetwork<f32>,
    approach: Approach,
    scenario: &Scenario,
    episodes: usize,
    seed: u64,
) -> Result<Evaluation> {
    let policy = Policy::Net {
        approach,
        net: Arc::new(net.clone()),
    };
    evaluate(&policy, scenario, episodes, seed)
}
