//! Named experiment presets shipped as TOML files. Every preset also has a
//! `-desk` variant at one tenth of the scale.

use super::config::{parse_config, ExperimentConfig};
use super::HarnessError;

const FILES: &[(&str, &str)] = &[
    ("cartpole-base", include_str!("../../presets/cartpole-base.toml")),
    ("cartpole-break-base", include_str!("../../presets/cartpole-break-base.toml")),
    ("color-swap-single-icm", include_str!("../../presets/color-swap-single-icm.toml")),
    ("color-swap-single-ppo", include_str!("../../presets/color-swap-single-ppo.toml")),
    ("explore-abrupt-1e6-noveld", include_str!("../../presets/explore-abrupt-1e6-noveld.toml")),
    ("explore-abrupt-1e6-ride", include_str!("../../presets/explore-abrupt-1e6-ride.toml")),
    ("explore-abrupt-1e6-rnd", include_str!("../../presets/explore-abrupt-1e6-rnd.toml")),
    ("explore-color-swap-noveld", include_str!("../../presets/explore-color-swap-noveld.toml")),
    ("explore-color-swap-ride", include_str!("../../presets/explore-color-swap-ride.toml")),
    ("explore-color-swap-rnd", include_str!("../../presets/explore-color-swap-rnd.toml")),
    ("explore-gradual-1e6-noveld", include_str!("../../presets/explore-gradual-1e6-noveld.toml")),
    ("explore-gradual-1e6-ride", include_str!("../../presets/explore-gradual-1e6-ride.toml")),
    ("explore-gradual-1e6-rnd", include_str!("../../presets/explore-gradual-1e6-rnd.toml")),
    ("explore-rotation-noveld", include_str!("../../presets/explore-rotation-noveld.toml")),
    ("explore-rotation-ride", include_str!("../../presets/explore-rotation-ride.toml")),
    ("explore-rotation-rnd", include_str!("../../presets/explore-rotation-rnd.toml")),
    ("fig12-cartpole-abrupt-dqn", include_str!("../../presets/fig12-cartpole-abrupt-dqn.toml")),
    ("fig12-cartpole-abrupt-ppo", include_str!("../../presets/fig12-cartpole-abrupt-ppo.toml")),
    ("fig12-cartpole-break-icm", include_str!("../../presets/fig12-cartpole-break-icm.toml")),
    ("fig12-cartpole-break-ppo", include_str!("../../presets/fig12-cartpole-break-ppo.toml")),
    ("fig12-cartpole-gradual-dqn", include_str!("../../presets/fig12-cartpole-gradual-dqn.toml")),
    ("fig12-cartpole-gradual-ppo", include_str!("../../presets/fig12-cartpole-gradual-ppo.toml")),
    ("fig14-abrupt-1e5-icm", include_str!("../../presets/fig14-abrupt-1e5-icm.toml")),
    ("fig14-abrupt-1e6-icm", include_str!("../../presets/fig14-abrupt-1e6-icm.toml")),
    ("fig14-gradual-1e5-icm", include_str!("../../presets/fig14-gradual-1e5-icm.toml")),
    ("fig14-gradual-1e6-icm", include_str!("../../presets/fig14-gradual-1e6-icm.toml")),
    ("fig3-abrupt-1e5", include_str!("../../presets/fig3-abrupt-1e5.toml")),
    ("fig3-abrupt-1e6", include_str!("../../presets/fig3-abrupt-1e6.toml")),
    ("fig3-dqn-abrupt-1e5", include_str!("../../presets/fig3-dqn-abrupt-1e5.toml")),
    ("fig3-dqn-abrupt-1e6", include_str!("../../presets/fig3-dqn-abrupt-1e6.toml")),
    ("fig3-dqn-gradual-1e5", include_str!("../../presets/fig3-dqn-gradual-1e5.toml")),
    ("fig3-dqn-gradual-1e6", include_str!("../../presets/fig3-dqn-gradual-1e6.toml")),
    ("fig3-gradual-1e5", include_str!("../../presets/fig3-gradual-1e5.toml")),
    ("fig3-gradual-1e6", include_str!("../../presets/fig3-gradual-1e6.toml")),
    ("fig4-color-swap-dqn", include_str!("../../presets/fig4-color-swap-dqn.toml")),
    ("fig4-color-swap-ppo", include_str!("../../presets/fig4-color-swap-ppo.toml")),
    ("fig4-color-swap", include_str!("../../presets/fig4-color-swap.toml")),
    ("fig4-rotation-dqn", include_str!("../../presets/fig4-rotation-dqn.toml")),
    ("fig4-rotation-ppo", include_str!("../../presets/fig4-rotation-ppo.toml")),
    ("fig4-rotation", include_str!("../../presets/fig4-rotation.toml")),
    ("fig5-dqn-buffer-1e5", include_str!("../../presets/fig5-dqn-buffer-1e5.toml")),
    ("fig5-dqn-buffer-5e3", include_str!("../../presets/fig5-dqn-buffer-5e3.toml")),
    ("fig5-dqn-default", include_str!("../../presets/fig5-dqn-default.toml")),
    ("fig5-dqn-informed-5e3", include_str!("../../presets/fig5-dqn-informed-5e3.toml")),
    ("fig6-dqn-per", include_str!("../../presets/fig6-dqn-per.toml")),
    ("fig6-dqn-sql", include_str!("../../presets/fig6-dqn-sql.toml")),
    ("fig6-dqn-stochastic", include_str!("../../presets/fig6-dqn-stochastic.toml")),
    ("fig8-reward-abrupt-5e5", include_str!("../../presets/fig8-reward-abrupt-5e5.toml")),
    ("gw-swap-rotation", include_str!("../../presets/gw-swap-rotation.toml")),
    ("gw-swap", include_str!("../../presets/gw-swap.toml")),
    ("jbw-base-dqn", include_str!("../../presets/jbw-base-dqn.toml")),
    ("jbw-base-random", include_str!("../../presets/jbw-base-random.toml")),
    ("jbw-base", include_str!("../../presets/jbw-base.toml")),
    ("maxent-abrupt-1e6", include_str!("../../presets/maxent-abrupt-1e6.toml")),
    ("maxent-color-swap", include_str!("../../presets/maxent-color-swap.toml")),
    ("maxent-gradual-1e6", include_str!("../../presets/maxent-gradual-1e6.toml")),
    ("maxent-rotation", include_str!("../../presets/maxent-rotation.toml")),
    ("stacked", include_str!("../../presets/stacked.toml")),
];

pub const DESK_SUFFIX: &str = "-desk";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PresetInfo {
    pub name: String,
    pub description: String,
}

/// Full-scale presets followed by their desk variants.
pub fn list_presets() -> Vec<PresetInfo> {
    let mut out = Vec::with_capacity(2 * FILES.len());
    for desk in [false, true] {
        for (name, text) in FILES {
            let c = parse_config(text).expect("shipped presets are valid");
            let (name, description) = if desk {
                (format!("{name}{DESK_SUFFIX}"), format!("{} (one tenth scale)", c.description))
            } else {
                (name.to_string(), c.description)
            };
            out.push(PresetInfo { name, description });
        }
    }
    out
}

/// Source text of a full-scale preset.
pub fn preset_source(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn load_preset(name: &str) -> Result<ExperimentConfig, HarnessError> {
    if let Some(text) = preset_source(name) {
        return parse_config(text);
    }
    if let Some(base) = name.strip_suffix(DESK_SUFFIX).and_then(preset_source) {
        let c = parse_config(base)?.desk_scaled();
        c.validate()?;
        return Ok(c);
    }
    Err(HarnessError::UnknownPreset(name.to_string()))
}
