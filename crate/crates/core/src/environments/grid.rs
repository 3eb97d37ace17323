//! Unbounded item-collection gridworld with an agent-centred image view.
//!
//! The plane is materialised lazily in 16x16 chunks. Item placement is a
//! pure function of the world key and the cell, so a chunk can always be
//! regenerated; collected cells stay empty.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{EnvError, Palette, ShiftSchedule};
use crate::approximator::Tensor;

const CHUNK: i64 = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub vision_radius: usize,
    /// Per-cell spawn probability of each item type.
    pub item_density: f64,
    pub green_reward: f64,
    pub red_reward: f64,
    pub palette: Palette,
    pub swap_palette: Palette,
    pub world_seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            vision_radius: 5,
            item_density: 0.05,
            green_reward: 1.0,
            red_reward: -1.0,
            palette: Palette::default(),
            swap_palette: Palette::swapped(),
            world_seed: 0,
        }
    }
}

impl GridConfig {
    pub fn side(&self) -> usize {
        2 * self.vision_radius + 1
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(0.0..0.5).contains(&self.item_density) {
            return Err(EnvError::Config(format!(
                "item_density must lie in [0, 0.5), got {}",
                self.item_density
            )));
        }
        for p in [&self.palette, &self.swap_palette] {
            if !p.is_distinct() {
                return Err(EnvError::Config("palette colors must be pairwise distinct".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Item {
    Green,
    Red,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Up, Move::Down, Move::Left, Move::Right];

    pub fn from_index(a: usize) -> Option<Move> {
        Self::ALL.get(a).copied()
    }

    fn delta(self) -> (i64, i64) {
        match self {
            Move::Up => (0, -1),
            Move::Down => (0, 1),
            Move::Left => (-1, 0),
            Move::Right => (1, 0),
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Item initially placed at `(x, y)`: one uniform draw per cell, split into
/// equal-probability green and red bands.
pub fn initial_item(world_key: u64, x: i64, y: i64, density: f64) -> Option<Item> {
    let h = splitmix(splitmix(world_key ^ splitmix(x as u64)) ^ (y as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    if u < density {
        Some(Item::Green)
    } else if u < 2.0 * density {
        Some(Item::Red)
    } else {
        None
    }
}

#[derive(Clone, Debug)]
struct Chunk {
    cells: [Option<Item>; (CHUNK * CHUNK) as usize],
}

impl Chunk {
    fn generate(world_key: u64, cx: i64, cy: i64, density: f64) -> Self {
        let mut cells = [None; (CHUNK * CHUNK) as usize];
        for ly in 0..CHUNK {
            for lx in 0..CHUNK {
                cells[(ly * CHUNK + lx) as usize] =
                    initial_item(world_key, cx * CHUNK + lx, cy * CHUNK + ly, density);
            }
        }
        Chunk { cells }
    }
}

fn chunk_of(x: i64, y: i64) -> ((i64, i64), usize) {
    let (cx, cy) = (x.div_euclid(CHUNK), y.div_euclid(CHUNK));
    let (lx, ly) = (x.rem_euclid(CHUNK), y.rem_euclid(CHUNK));
    ((cx, cy), (ly * CHUNK + lx) as usize)
}

#[derive(Clone, Debug)]
pub struct GridState {
    pub position: (i64, i64),
    pub inventory: HashMap<Item, u64>,
    pub t: u64,
    world_key: u64,
    chunks: HashMap<(i64, i64), Chunk>,
}

impl GridState {
    fn cell(&mut self, x: i64, y: i64, density: f64) -> &mut Option<Item> {
        let (key, idx) = chunk_of(x, y);
        let world_key = self.world_key;
        let chunk = self
            .chunks
            .entry(key)
            .or_insert_with(|| Chunk::generate(world_key, key.0, key.1, density));
        &mut chunk.cells[idx]
    }

    pub fn item_at(&mut self, x: i64, y: i64, config: &GridConfig) -> Option<Item> {
        *self.cell(x, y, config.item_density)
    }

    pub fn collected(&self, item: Item) -> u64 {
        self.inventory.get(&item).copied().unwrap_or(0)
    }

    pub fn materialized_chunks(&self) -> usize {
        self.chunks.len()
    }

    /// Untransformed `[H, H, 3]` view centred on the agent.
    pub fn render(&mut self, config: &GridConfig) -> Tensor {
        let side = config.side();
        let r = config.vision_radius as i64;
        let mut data = Vec::with_capacity(side * side * 3);
        let (px, py) = self.position;
        for dy in -r..=r {
            for dx in -r..=r {
                let color = match self.item_at(px + dx, py + dy, config) {
                    Some(Item::Green) => config.palette.green,
                    Some(Item::Red) => config.palette.red,
                    None => config.palette.background,
                };
                data.extend_from_slice(&color);
            }
        }
        Tensor::new(vec![side, side, 3], data).expect("view dimensions")
    }
}

/// World key for a `(config, seed)` pair.
pub fn world_key(config: &GridConfig, seed: u64) -> u64 {
    splitmix(splitmix(config.world_seed) ^ seed)
}

pub fn grid_reset(
    config: &GridConfig,
    seed: u64,
    schedule: &ShiftSchedule,
) -> Result<(GridState, Tensor), EnvError> {
    let mut state = GridState {
        position: (0, 0),
        inventory: HashMap::new(),
        t: 0,
        world_key: world_key(config, seed),
        chunks: HashMap::new(),
    };
    let raw = state.render(config);
    let obs = schedule.transform_observation(&raw, 0, &config.palette, &config.swap_palette)?;
    Ok((state, obs))
}

#[derive(Clone, Debug)]
pub struct GridStep {
    pub observation: Tensor,
    pub reward: f64,
    pub collected: Option<Item>,
}

/// Moves the agent one cell. Collecting an item pays its base reward scaled
/// by the schedule's reward multiplier at the current step.
pub fn grid_step(
    state: &mut GridState,
    action: Move,
    config: &GridConfig,
    schedule: &ShiftSchedule,
) -> Result<GridStep, EnvError> {
    let (dx, dy) = action.delta();
    state.position.0 += dx;
    state.position.1 += dy;
    let (x, y) = state.position;
    let slot = state.cell(x, y, config.item_density);
    let collected = slot.take();
    let reward = match collected {
        Some(item) => {
            *state.inventory.entry(item).or_insert(0) += 1;
            let base = match item {
                Item::Green => config.green_reward,
                Item::Red => config.red_reward,
            };
            base * schedule.reward_multiplier(state.t)
        }
        None => 0.0,
    };
    state.t += 1;
    let raw = state.render(config);
    let observation =
        schedule.transform_observation(&raw, state.t, &config.palette, &config.swap_palette)?;
    Ok(GridStep {
        observation,
        reward,
        collected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{ShiftComponent, ShiftKind};

    fn find_neighbor(config: &GridConfig, seed: u64, want: Item) -> Option<(u64, Move)> {
        for s in seed..seed + 500 {
            let key = world_key(config, s);
            for m in Move::ALL {
                let (dx, dy) = m.delta();
                if initial_item(key, dx, dy, config.item_density) == Some(want) {
                    return Some((s, m));
                }
            }
        }
        None
    }

    #[test]
    fn reset_is_deterministic() {
        let c = GridConfig::default();
        let s = ShiftSchedule::stationary();
        let (_, a) = grid_reset(&c, 7, &s).unwrap();
        let (_, b) = grid_reset(&c, 7, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_density_is_background() {
        let c = GridConfig {
            item_density: 0.0,
            ..GridConfig::default()
        };
        let (_, obs) = grid_reset(&c, 3, &ShiftSchedule::stationary()).unwrap();
        for px in obs.data().chunks(3) {
            assert_eq!(px, c.palette.background);
        }
    }

    #[test]
    fn green_and_red_rewards() {
        let c = GridConfig::default();
        let s = ShiftSchedule::stationary();
        for (item, expected) in [(Item::Green, 1.0), (Item::Red, -1.0)] {
            let (seed, m) = find_neighbor(&c, 0, item).unwrap();
            let (mut st, _) = grid_reset(&c, seed, &s).unwrap();
            let out = grid_step(&mut st, m, &c, &s).unwrap();
            assert_eq!(out.reward, expected);
            assert_eq!(out.collected, Some(item));
            assert_eq!(st.collected(item), 1);
            assert_eq!(st.item_at(st.position.0, st.position.1, &c), None);
        }
    }

    #[test]
    fn empty_cell_pays_nothing() {
        let c = GridConfig {
            item_density: 0.0,
            ..GridConfig::default()
        };
        let s = ShiftSchedule::stationary();
        let (mut st, _) = grid_reset(&c, 0, &s).unwrap();
        let out = grid_step(&mut st, Move::Left, &c, &s).unwrap();
        assert_eq!(out.reward, 0.0);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn inverted_reward_phase() {
        let c = GridConfig::default();
        let s = ShiftSchedule::new(vec![ShiftComponent::new(ShiftKind::RewardAbrupt, 1)]);
        let (seed, m) = find_neighbor(&c, 0, Item::Green).unwrap();
        let (mut st, _) = grid_reset(&c, seed, &s).unwrap();
        st.t = 1;
        assert_eq!(grid_step(&mut st, m, &c, &s).unwrap().reward, -1.0);
    }

    #[test]
    fn chunks_regenerate_identically() {
        let c = GridConfig::default();
        let key = world_key(&c, 11);
        let a = Chunk::generate(key, -3, 5, c.item_density);
        let b = Chunk::generate(key, -3, 5, c.item_density);
        assert_eq!(a.cells, b.cells);
    }

    #[test]
    fn observation_rows_follow_vertical_offset() {
        let c = GridConfig::default();
        let s = ShiftSchedule::stationary();
        let (mut st, obs) = grid_reset(&c, 5, &s).unwrap();
        let r = c.vision_radius as i64;
        let side = c.side();
        for i in 0..side {
            for j in 0..side {
                let expected = match st.item_at(j as i64 - r, i as i64 - r, &c) {
                    Some(Item::Green) => c.palette.green,
                    Some(Item::Red) => c.palette.red,
                    None => c.palette.background,
                };
                let px = &obs.data()[(i * side + j) * 3..(i * side + j) * 3 + 3];
                assert_eq!(px, expected);
            }
        }
    }
}
