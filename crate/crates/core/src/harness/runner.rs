//! The collect/update loop for one `(config, seed)` pair.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{AgentKind, EnvKind, ExperimentConfig};
use super::rng::{RngContract, Stream};
use super::HarnessError;
use crate::agents::{batch_of_one, ppo_update, ActorCritic, DqnAgent, RolloutBuffer};
use crate::analysis::{RunLogWriter, RunRow};
use crate::environments::{CartPoleEnv, Environment, GridEnv, Item};
use crate::exploration::{Exploration, TransitionScores};

/// Outcome of one run, persisted next to the CSV as `seed_<S>.meta.toml`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub config_hash: String,
    pub total_steps: u64,
    pub steps_completed: u64,
    pub policy_updates: u64,
    pub gradient_updates: u64,
    pub green_collected: u64,
    pub red_collected: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

pub fn csv_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.csv"))
}

pub fn meta_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.meta.toml"))
}

/// Runs one seed, writing `seed_<S>.csv` and its metadata into `dir`.
/// On failure the partial log and a metadata file naming the cause remain.
pub fn run(config: &ExperimentConfig, seed: u64, dir: &Path) -> Result<RunSummary, HarnessError> {
    config.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut writer = RunLogWriter::create(&csv_path(dir, seed))?;
    let outcome = run_to_writer(config, seed, &mut writer);
    writer.flush()?;
    let summary = match &outcome {
        Ok(s) => s.clone(),
        Err((s, _)) => s.clone(),
    };
    std::fs::write(meta_path(dir, seed), toml::to_string(&summary).expect("summary serializes"))?;
    outcome.map_err(|(_, e)| e)
}

/// Runs one seed into an arbitrary CSV sink. On failure the partial summary
/// is returned alongside the error.
pub fn run_to_writer<W: Write>(
    config: &ExperimentConfig,
    seed: u64,
    writer: &mut RunLogWriter<W>,
) -> Result<RunSummary, (RunSummary, HarnessError)> {
    let mut summary = RunSummary {
        name: config.name.clone(),
        seed,
        config_hash: config.hash(),
        total_steps: config.total_steps,
        ..Default::default()
    };
    match execute(config, seed, writer, &mut summary) {
        Ok(()) => Ok(summary),
        Err(e) => {
            let err = HarnessError::Aborted {
                step: summary.steps_completed,
                message: e.to_string(),
            };
            summary.aborted = Some(e.to_string());
            Err((summary, err))
        }
    }
}

fn make_env(config: &ExperimentConfig, rngs: &RngContract) -> Result<Box<dyn Environment>, HarnessError> {
    Ok(match config.env.kind {
        EnvKind::Grid => Box::new(GridEnv::new(
            config.env.grid.clone(),
            config.schedule(),
            rngs.seed(Stream::World),
        )?),
        EnvKind::Cartpole => Box::new(CartPoleEnv::new(
            config.env.cartpole.clone(),
            config.schedule(),
            rngs.seed(Stream::EnvInit),
        )?),
    })
}

fn count_item(summary: &mut RunSummary, item: Option<Item>) {
    match item {
        Some(Item::Green) => summary.green_collected += 1,
        Some(Item::Red) => summary.red_collected += 1,
        None => {}
    }
}

fn row_at(scores: &TransitionScores, i: usize, step: u64, extrinsic: f64, mixed: f64) -> RunRow {
    let active = |v: &Option<Vec<f64>>| v.as_ref().map(|v| v[i]);
    let has_obs = scores.forward_loss.is_some();
    let has_rm = scores.reward_model_loss.is_some();
    RunRow {
        step,
        extrinsic_reward: extrinsic,
        mixed_reward: mixed,
        intrinsic_obs: has_obs.then(|| scores.observation_intrinsic[i]),
        intrinsic_reward_model: has_rm.then(|| scores.reward_intrinsic[i]),
        forward_loss: active(&scores.forward_loss),
        inverse_loss: active(&scores.inverse_loss),
        reward_model_loss: active(&scores.reward_model_loss),
        epsilon: None,
    }
}

fn execute<W: Write>(
    config: &ExperimentConfig,
    seed: u64,
    writer: &mut RunLogWriter<W>,
    summary: &mut RunSummary,
) -> Result<(), HarnessError> {
    let rngs = RngContract::new(seed);
    let mut env = make_env(config, &rngs)?;
    match config.agent.kind {
        AgentKind::Ppo => run_ppo(config, &rngs, env.as_mut(), writer, summary),
        AgentKind::Dqn => run_dqn(config, &rngs, env.as_mut(), writer, summary),
        AgentKind::Random => run_random(config, &rngs, env.as_mut(), writer, summary),
    }
}

fn run_random<W: Write>(
    config: &ExperimentConfig,
    rngs: &RngContract,
    env: &mut dyn Environment,
    writer: &mut RunLogWriter<W>,
    summary: &mut RunSummary,
) -> Result<(), HarnessError> {
    let mut rng = rngs.rng(Stream::ActionSampling);
    let n = env.num_actions();
    for t in 0..config.total_steps {
        let step = env.step(rng.gen_range(0..n))?;
        count_item(summary, step.item);
        writer.write(&RunRow {
            step: t,
            extrinsic_reward: step.reward,
            mixed_reward: step.reward,
            ..Default::default()
        })?;
        summary.steps_completed = t + 1;
    }
    Ok(())
}

fn run_ppo<W: Write>(
    config: &ExperimentConfig,
    rngs: &RngContract,
    env: &mut dyn Environment,
    writer: &mut RunLogWriter<W>,
    summary: &mut RunSummary,
) -> Result<(), HarnessError> {
    let hp = &config.agent.ppo;
    let shape = env.observation_shape();
    let actions_n = env.num_actions();
    let mut model = ActorCritic::new(&shape, actions_n, rngs.seed(Stream::PolicyInit))?;
    let mut exploration = Exploration::new(
        config.exploration.clone(),
        &shape,
        actions_n,
        rngs.seed(Stream::ExplorationInit),
    )?;
    let mut action_rng = rngs.rng(Stream::ActionSampling);
    let mut minibatch_rng = rngs.rng(Stream::Minibatch);
    let mut exploration_rng = rngs.rng(Stream::ExplorationMinibatch);
    let mut buffer = RolloutBuffer::new(&shape, hp.rollout_steps);

    let mut t = 0u64;
    while t < config.total_steps {
        let obs = env.observation().clone();
        let (action, value, log_prob) = model.act(&obs, &mut action_rng)?;
        let step = env.step(action)?;
        count_item(summary, step.item);
        buffer.push(&obs, action, step.reward, value, log_prob, &step.observation)?;
        t += 1;
        if !buffer.is_full() && t < config.total_steps {
            continue;
        }

        let observations = buffer.observations();
        let next_observations = buffer.next_observations();
        let extrinsic = buffer.extrinsic_rewards().to_vec();
        let scores = exploration.score(&observations, buffer.actions(), &next_observations, &extrinsic, true)?;
        let mixed = exploration.mix_scores(&scores, &extrinsic);
        let first = t - buffer.len() as u64;
        for (i, m) in mixed.iter().enumerate() {
            writer.write(&row_at(&scores, i, first + i as u64, m.extrinsic, m.combined))?;
        }
        summary.steps_completed = t;

        // A trailing partial rollout is logged but not trained on.
        if buffer.is_full() {
            buffer.set_rewards(mixed.iter().map(|m| m.combined).collect())?;
            let bootstrap = model.value_of(env.observation())?;
            let batch = buffer.finish(bootstrap, hp.gamma, hp.gae_lambda)?;
            ppo_update(&mut model, &batch, hp, &mut minibatch_rng)?;
            exploration.train_rollout(
                &observations,
                buffer.actions(),
                &next_observations,
                &extrinsic,
                &mut exploration_rng,
            )?;
            summary.policy_updates += 1;
        }
        buffer.clear();
    }
    Ok(())
}

fn run_dqn<W: Write>(
    config: &ExperimentConfig,
    rngs: &RngContract,
    env: &mut dyn Environment,
    writer: &mut RunLogWriter<W>,
    summary: &mut RunSummary,
) -> Result<(), HarnessError> {
    let hp = config.agent.dqn.clone();
    let shape = env.observation_shape();
    let actions_n = env.num_actions();
    let mut agent = DqnAgent::new(
        &shape,
        actions_n,
        hp.clone(),
        config.total_steps,
        rngs.seed(Stream::PolicyInit),
    )?;
    let mut exploration = Exploration::new(
        config.exploration.clone(),
        &shape,
        actions_n,
        rngs.seed(Stream::ExplorationInit),
    )?;
    let mut action_rng = rngs.rng(Stream::ActionSampling);
    let mut replay_rng = rngs.rng(Stream::Replay);

    for t in 0..config.total_steps {
        let obs = env.observation().clone();
        let action = agent.act(&obs, t, &mut action_rng)?;
        let step = env.step(action)?;
        count_item(summary, step.item);
        agent.observe(&obs, action, step.reward, &step.observation, t);

        let scores = exploration.score(
            &batch_of_one(&obs)?,
            &[action],
            &batch_of_one(&step.observation)?,
            &[step.reward],
            false,
        )?;
        let mixed = exploration.mix_scores(&scores, &[step.reward])[0];
        let mut row = row_at(&scores, 0, t, step.reward, mixed.combined);
        row.epsilon = Some(if t < hp.learning_starts { 1.0 } else { agent.epsilon(t) });
        writer.write(&row)?;

        let steps_done = t + 1;
        if agent.wants_update(steps_done) {
            for _ in 0..hp.gradient_steps {
                let batch = agent.sample(&mut replay_rng)?;
                let batch_scores = exploration.score(
                    &batch.observations,
                    &batch.actions,
                    &batch.next_observations,
                    &batch.rewards,
                    false,
                )?;
                let rewards: Vec<f64> = exploration
                    .mix_scores(&batch_scores, &batch.rewards)
                    .iter()
                    .map(|m| m.combined)
                    .collect();
                agent.learn(&batch, &rewards)?;
                exploration.update(&batch.observations, &batch.actions, &batch.next_observations, &batch.rewards)?;
            }
        }
        agent.maybe_update_target(steps_done);
        summary.steps_completed = steps_done;
        summary.gradient_updates = agent.gradient_updates();
    }
    Ok(())
}
