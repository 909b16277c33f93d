use super::scenario::{Mode, Scenario, ScenarioError};
use crate::channel::{Position, RadioModel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

pub const MIN_LR_SPACING_M: f64 = 1500.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub side_m: f64,
    pub lg_positions: Vec<Position>,
    pub lr_positions: Vec<Position>,
    pub ed_positions: Vec<Position>,
}

impl Topology {
    /// Places LGs, the LR grid and EDs, then checks the mesh is connected
    /// at the standard profile.
    pub fn build(scenario: &Scenario, radio: &RadioModel<f64>) -> Result<Self, ScenarioError> {
        let side_m = scenario.area_side_km * 1000.0;
        let topo = match &scenario.layout {
            Some(layout) => Topology {
                side_m,
                lg_positions: layout.lgs.clone(),
                lr_positions: if scenario.mode == Mode::Lima { layout.lrs.clone() } else { Vec::new() },
                ed_positions: layout.eds.clone(),
            },
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
                let lg_positions = (0..scenario.n_lg)
                    .map(|k| Position::new((k as f64 + 0.5) / scenario.n_lg as f64 * side_m, side_m))
                    .collect();
                let lr_positions = lr_grid(scenario.lr_count()?, side_m);
                let ed_positions = (0..scenario.ed_count())
                    .map(|_| Position::new(rng.gen_range(0.0..side_m), rng.gen_range(0.0..side_m)))
                    .collect();
                Topology { side_m, lg_positions, lr_positions, ed_positions }
            }
        };
        topo.check_connected(radio, scenario.stp_sf, scenario.stp_power_dbm)?;
        Ok(topo)
    }

    /// BFS from the LGs over links that close at the standard profile.
    pub fn check_connected(&self, radio: &RadioModel<f64>, sf: u8, power_dbm: i8) -> Result<(), ScenarioError> {
        let infra: Vec<Position> = self.lg_positions.iter().chain(&self.lr_positions).copied().collect();
        let mut seen = vec![false; infra.len()];
        let mut queue: VecDeque<usize> = (0..self.lg_positions.len()).collect();
        for &i in &queue {
            seen[i] = true;
        }
        while let Some(i) = queue.pop_front() {
            for j in 0..infra.len() {
                if !seen[j] && radio.link_closes(sf, power_dbm, infra[i].distance(&infra[j])) {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        let unreachable = seen.iter().filter(|s| !**s).count();
        if unreachable > 0 {
            return Err(ScenarioError::DisconnectedMesh { unreachable, total: self.lr_positions.len() });
        }
        Ok(())
    }
}

/// Square grid of `count` LRs centred in the area, spaced at least
/// `MIN_LR_SPACING_M` apart.
pub fn lr_grid(count: usize, side_m: f64) -> Vec<Position> {
    if count == 0 {
        return Vec::new();
    }
    let n = (count as f64).sqrt().round() as usize;
    assert_eq!(n * n, count, "LR count {count} is not a square");
    let spacing = (side_m / n as f64).max(MIN_LR_SPACING_M);
    let centre = side_m / 2.0;
    let offset = |i: usize| centre + (i as f64 - (n as f64 - 1.0) / 2.0) * spacing;
    let mut out = Vec::with_capacity(count);
    for row in 0..n {
        for col in 0..n {
            out.push(Position::new(offset(col), offset(row)));
        }
    }
    out
}
