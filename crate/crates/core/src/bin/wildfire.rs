use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use wildfire_core::dqn::{run_training, write_curve_csv, TrainingConfig};
use wildfire_core::harness::{
    render_record, run_episodes, run_suite, write_record, EpisodeRecord, Evaluation, Policy, SuiteSummary,
};
use wildfire_core::neuralnet::io as weights;
use wildfire_core::scenario::{Approach, ControllerSpec, Profile, Scenario};

#[derive(Parser)]
#[command(name = "wildfire", version, about = "Wildfire surveillance simulator and learning stack")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON; the profile preset is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ProfileArg::Desk)]
    profile: ProfileArg,
    /// Master seed; defaults to the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train a Q-network and write its weights and training curve.
    Train {
        #[command(flatten)]
        common: Common,
        /// Overrides the number of training iterations.
        #[arg(long)]
        iterations: Option<u64>,
        /// Training configuration JSON; the profile preset is used when omitted.
        #[arg(long)]
        training: Option<PathBuf>,
        #[arg(long, value_enum)]
        approach: Option<ApproachArg>,
    },
    /// Evaluate controllers over seeded episodes and write summaries.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        /// Controllers to compare; defaults to the scenario's controller.
        #[arg(long = "controller", value_enum)]
        controllers: Vec<ControllerArg>,
        /// Weight file for the network controllers.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Run receding-horizon episodes and write their records.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
    },
    /// Turn an episode record into PGM snapshots and an SVG path overlay.
    Render {
        /// Episode record JSON written by `baseline`.
        #[arg(long)]
        record: PathBuf,
        #[arg(long, default_value = "render")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum ApproachArg {
    Observation,
    Belief,
}

impl From<ApproachArg> for Approach {
    fn from(a: ApproachArg) -> Self {
        match a {
            ApproachArg::Observation => Approach::Observation,
            ApproachArg::Belief => Approach::Belief,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ControllerArg {
    ObservationNet,
    BeliefNet,
    RecedingHorizon,
    Random,
}

impl Common {
    fn profile(&self) -> Profile {
        match self.profile {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Full => Profile::Full,
        }
    }

    fn scenario(&self) -> anyhow::Result<Scenario> {
        let s = match &self.config {
            Some(path) => Scenario::load(path)?,
            None => Scenario::preset(self.profile()),
        };
        Ok(s)
    }

    fn seed(&self, scenario: &Scenario) -> u64 {
        self.seed.unwrap_or(scenario.seed)
    }

    fn out_dir(&self) -> anyhow::Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

fn train(common: &Common, iterations: Option<u64>, training: Option<&Path>, approach: Option<ApproachArg>) -> anyhow::Result<()> {
    let mut scenario = common.scenario()?;
    let mut cfg = match training {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => match common.profile() {
            Profile::Desk => TrainingConfig::desk(),
            Profile::Full => TrainingConfig::default(),
        },
    };
    if let Some(n) = iterations {
        cfg.total_iterations = n;
    }
    if let Some(a) = approach {
        cfg.approach = a.into();
    }
    let seed = common.seed(&scenario);
    scenario.controller = ControllerSpec::Random;
    let outcome = run_training(&scenario, &cfg, seed)?;
    let out = common.out_dir()?;
    weights::save(&outcome.network, &out.join("weights.bin"))?;
    write_curve_csv(&out.join("curve.csv"), &outcome.curve)?;
    fs::write(out.join("training.json"), serde_json::to_string_pretty(&cfg)?)?;
    fs::write(out.join("scenario.json"), scenario.to_json())?;
    for p in &outcome.curve {
        println!("iteration {:>8}  score {:>9.2} +/- {:<8.2}  epsilon {:.3}", p.iteration, p.mean_reward, p.stderr, p.epsilon);
    }
    println!("wrote {}", out.join("weights.bin").display());
    Ok(())
}

fn controller_spec(arg: ControllerArg, weights: Option<&Path>) -> anyhow::Result<ControllerSpec> {
    let need = || -> anyhow::Result<PathBuf> {
        match weights {
            Some(p) => Ok(p.to_path_buf()),
            None => bail!("network controllers need --weights"),
        }
    };
    Ok(match arg {
        ControllerArg::ObservationNet => ControllerSpec::ObservationNet { weights: need()? },
        ControllerArg::BeliefNet => ControllerSpec::BeliefNet { weights: need()? },
        ControllerArg::RecedingHorizon => ControllerSpec::RecedingHorizon,
        ControllerArg::Random => ControllerSpec::Random,
    })
}

fn evaluate(common: &Common, episodes: usize, controllers: &[ControllerArg], weights: Option<&Path>) -> anyhow::Result<()> {
    let mut scenario = common.scenario()?;
    let specs = if controllers.is_empty() {
        vec![scenario.controller.clone()]
    } else {
        controllers
            .iter()
            .map(|&c| controller_spec(c, weights))
            .collect::<anyhow::Result<Vec<_>>>()?
    };
    let mut policies = Vec::new();
    for spec in specs {
        scenario.controller = spec;
        scenario.validate()?;
        policies.push(Policy::from_scenario(&scenario)?);
    }
    let seed = common.seed(&scenario);
    let summary = run_suite(&scenario, &policies, episodes, seed)?;
    let out = common.out_dir()?;
    fs::write(out.join("summary.csv"), summary.summary_csv())?;
    fs::write(out.join("episodes.csv"), summary.episodes_csv())?;
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    for r in &summary.results {
        println!("{:<18} {:>9.2} +/- {:.2}", r.controller, r.mean, r.stderr);
    }
    Ok(())
}

fn baseline(common: &Common, episodes: usize) -> anyhow::Result<()> {
    let mut scenario = common.scenario()?;
    scenario.controller = ControllerSpec::RecedingHorizon;
    scenario.validate()?;
    let policy = Policy::from_scenario(&scenario)?;
    let seed = common.seed(&scenario);
    if episodes < 2 {
        bail!("a baseline run needs at least two episodes");
    }
    let records = run_episodes(&policy, &scenario, episodes, seed)?;
    let summary = SuiteSummary {
        master_seed: seed,
        episodes,
        results: vec![Evaluation::from_records(policy.label(), &records)],
    };
    let out = common.out_dir()?;
    for (k, record) in records.iter().enumerate() {
        write_record(out, &format!("episode_{k:03}"), record)?;
    }
    fs::write(out.join("summary.csv"), summary.summary_csv())?;
    fs::write(out.join("episodes.csv"), summary.episodes_csv())?;
    let r = &summary.results[0];
    println!("{:<18} {:>9.2} +/- {:.2}", r.controller, r.mean, r.stderr);
    Ok(())
}

fn render(record: &Path, out: &Path) -> anyhow::Result<()> {
    let text = fs::read_to_string(record).with_context(|| format!("reading {}", record.display()))?;
    let record = EpisodeRecord::from_json(&text)?;
    for p in render_record(&record, out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train { common, iterations, training, approach } => train(common, *iterations, training.as_deref(), *approach),
        Command::Evaluate { common, episodes, controllers, weights } => evaluate(common, *episodes, controllers, weights.as_deref()),
        Command::Baseline { common, episodes } => baseline(common, *episodes),
        Command::Render { record, out } => render(record, out),
    }
}
