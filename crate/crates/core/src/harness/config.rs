use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agents::{DqnHyperparams, PpoHyperparams};
use crate::environments::{CartPoleParams, GridConfig, ShiftComponent, ShiftSchedule};
use crate::exploration::{ExplorationConfig, ExplorationKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    Grid,
    Cartpole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub kind: EnvKind,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub cartpole: CartPoleParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Ppo,
    Dqn,
    /// Uniform random actions, no learning.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub kind: AgentKind,
    #[serde(default)]
    pub ppo: PpoHyperparams,
    #[serde(default)]
    pub dqn: DqnHyperparams,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub total_steps: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub env: EnvSection,
    pub agent: AgentSection,
    #[serde(default)]
    pub exploration: ExplorationConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shift: Vec<ShiftComponent>,
}

impl ExperimentConfig {
    pub fn schedule(&self) -> ShiftSchedule {
        ShiftSchedule::new(self.shift.clone())
    }

    pub fn first_shift_step(&self) -> Option<u64> {
        self.schedule().first_shift_step()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |key: &str, why: &str| Err(HarnessError::Config(format!("{key}: {why}")));
        if self.total_steps == 0 {
            return bad("total_steps", "must be positive");
        }
        if self.seeds.is_empty() {
            return bad("seeds", "must not be empty");
        }
        match self.env.kind {
            EnvKind::Grid => self.env.grid.validate()?,
            EnvKind::Cartpole => self.env.cartpole.validate()?,
        }
        for (i, c) in self.shift.iter().enumerate() {
            if c.interval == 0 {
                return bad(&format!("shift[{i}].interval"), "must be positive");
            }
            let fits = match self.env.kind {
                EnvKind::Grid => !c.kind.is_dynamics(),
                EnvKind::Cartpole => c.kind.is_dynamics(),
            };
            if !fits {
                return bad(
                    &format!("shift[{i}].kind"),
                    &format!("{:?} does not apply to a {:?} environment", c.kind, self.env.kind),
                );
            }
        }
        match self.agent.kind {
            AgentKind::Ppo => self.agent.ppo.validate()?,
            AgentKind::Dqn => self.agent.dqn.validate()?,
            AgentKind::Random => {}
        }
        self.exploration.validate()?;
        let kind = self.exploration.kind;
        if kind.is_rollout_scoped() && self.agent.kind != AgentKind::Ppo {
            return bad("exploration.kind", "ride and noveld require agent.kind = \"ppo\"");
        }
        if self.agent.kind == AgentKind::Random && kind != ExplorationKind::None {
            return bad("exploration.kind", "a random agent takes no exploration module");
        }
        Ok(())
    }

    /// Stable hash of everything that influences a run except the seed list
    /// and output location.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seeds.clear();
        c.out_dir = None;
        let text = toml::to_string(&c).expect("config serializes");
        format!("{:016x}", fnv1a(text.as_bytes()))
    }

    /// One tenth of the run: total steps, shift intervals and the DQN step
    /// counters shrink by 10; a replay buffer at the 1e6 default shrinks to 1e5.
    pub fn desk_scaled(&self) -> Self {
        let mut c = self.clone();
        c.total_steps = (c.total_steps / 10).max(1);
        for s in &mut c.shift {
            s.interval = (s.interval / 10).max(1);
        }
        let d = &mut c.agent.dqn;
        d.learning_starts /= 10;
        d.target_update_interval = (d.target_update_interval / 10).max(1);
        d.informed_interval = d.informed_interval.map(|n| (n / 10).max(1));
        if d.buffer_size == 1_000_000 {
            d.buffer_size = 100_000;
        }
        if !c.name.is_empty() {
            c.name.push_str("-desk");
        }
        c
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Parses and validates a TOML experiment description.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string().trim_end().to_string()))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::ShiftKind;

    const MINIMAL: &str = "total_steps = 4096\n[env]\nkind = \"grid\"\n[agent]\nkind = \"ppo\"\n";

    #[test]
    fn empty_agent_section_uses_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.agent.ppo, PpoHyperparams::default());
        assert_eq!(c.agent.ppo.learning_rate, 3e-4);
        assert_eq!(c.agent.ppo.rollout_steps, 2048);
        assert_eq!(c.agent.ppo.epochs, 10);
        assert_eq!(c.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.exploration.kind, ExplorationKind::None);
        assert_eq!(c.env.grid, GridConfig::default());
    }

    #[test]
    fn weight_constraint_is_named() {
        let text = format!("{MINIMAL}[exploration]\nkind = \"icm\"\nalpha = 0.7\nbeta = 0.5\n");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("exploration.alpha + exploration.beta"), "{err}");
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_config(&format!("{MINIMAL}bogus = 1\n")).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        let err = parse_config(&MINIMAL.replace("kind = \"ppo\"", "kind = \"ppo\"\n[agent.ppo]\nlr = 1")).unwrap_err();
        assert!(err.to_string().contains("lr"), "{err}");
    }

    #[test]
    fn shifts_must_fit_environment() {
        let text = format!("{MINIMAL}[[shift]]\nkind = \"dynamics-abrupt\"\ninterval = 10\n");
        assert!(parse_config(&text).is_err());
        let text = format!("{MINIMAL}[[shift]]\nkind = \"rotation\"\ninterval = 10\n");
        assert_eq!(parse_config(&text).unwrap().shift[0].kind, ShiftKind::Rotation);
    }

    #[test]
    fn rollout_scoped_bonus_needs_ppo() {
        let text = MINIMAL.replace("\"ppo\"", "\"dqn\"") + "[exploration]\nkind = \"ride\"\nalpha = 0.5\n";
        assert!(parse_config(&text).unwrap_err().to_string().contains("exploration.kind"));
    }

    #[test]
    fn desk_scaling() {
        let text = MINIMAL.replace("4096", "2000000").replace("\"ppo\"", "\"dqn\"")
            + "[agent.dqn]\ninformed_interval = 1000000\n[[shift]]\nkind = \"reward-abrupt\"\ninterval = 1000000\n";
        let c = parse_config(&text).unwrap().desk_scaled();
        assert_eq!(c.total_steps, 200_000);
        assert_eq!(c.shift[0].interval, 100_000);
        assert_eq!(c.agent.dqn.informed_interval, Some(100_000));
        assert_eq!(c.agent.dqn.buffer_size, 100_000);
        assert_eq!(c.agent.dqn.learning_starts, 5_000);
        assert_eq!(c.agent.dqn.target_update_interval, 1_000);
        c.validate().unwrap();
    }

    #[test]
    fn hash_ignores_seeds_only() {
        let a = parse_config(MINIMAL).unwrap();
        let mut b = a.clone();
        b.seeds = vec![9];
        assert_eq!(a.hash(), b.hash());
        b.total_steps += 1;
        assert_ne!(a.hash(), b.hash());
    }
}
