use super::engine::run;
use super::metrics::Metrics;
use super::scenario::{Mode, Scenario, ScenarioError};
use rayon::prelude::*;

pub const SIZE_SWEEP_KM: [f64; 17] = [2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0, 7.5, 8.0, 8.5, 9.0, 9.5, 10.0];
pub const TRAFFIC_SWEEP_S: [f64; 7] = [7200.0, 3600.0, 1800.0, 900.0, 600.0, 450.0, 300.0];
pub const MODES: [Mode; 2] = [Mode::Lima, Mode::LorawanBaseline];

/// Runs every (scenario, seed) in parallel and pools each scenario over
/// its seeds. Output order follows `scenarios`.
fn run_pooled(scenarios: Vec<Scenario>, seeds: &[u64]) -> Result<Vec<Metrics>, ScenarioError> {
    let jobs: Vec<(usize, Scenario)> = scenarios
        .iter()
        .enumerate()
        .flat_map(|(i, s)| seeds.iter().map(move |&seed| (i, Scenario { seed, ..s.clone() })))
        .collect();
    let results: Vec<(usize, Result<Metrics, ScenarioError>)> = jobs.into_par_iter().map(|(i, s)| (i, run(&s))).collect();
    let mut grouped: Vec<Vec<Metrics>> = vec![Vec::new(); scenarios.len()];
    for (i, r) in results {
        grouped[i].push(r?);
    }
    Ok(grouped.iter().map(|runs| Metrics::pool(runs)).collect())
}

/// Both modes at every area size, rows sorted by (size, mode).
pub fn sweep_variable_size(base: &Scenario, seeds: &[u64]) -> Result<Vec<Metrics>, ScenarioError> {
    let scenarios = SIZE_SWEEP_KM
        .iter()
        .flat_map(|&side| MODES.iter().map(move |&mode| Scenario { area_side_km: side, mode, layout: None, ..base.clone() }))
        .collect();
    run_pooled(scenarios, seeds)
}

/// Both modes at every traffic period on the fixed 6 km topology, rows
/// sorted by (packets per hour, mode).
pub fn sweep_variable_traffic(base: &Scenario, seeds: &[u64]) -> Result<Vec<Metrics>, ScenarioError> {
    let scenarios = TRAFFIC_SWEEP_S
        .iter()
        .flat_map(|&period| {
            MODES.iter().map(move |&mode| Scenario {
                area_side_km: 6.0,
                traffic_period_s: period,
                mode,
                layout: None,
                ..base.clone()
            })
        })
        .collect();
    run_pooled(scenarios, seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_sweep_shape() {
        let base = Scenario { sim_hours: 0.05, ..Scenario::default() };
        let rows = sweep_variable_size(&base, &[1]).unwrap();
        assert_eq!(rows.len(), 34);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.area_side_km, SIZE_SWEEP_KM[i / 2]);
            assert_eq!(r.mode, MODES[i % 2]);
            let expected_eds = (r.area_side_km * r.area_side_km).round() as usize;
            assert_eq!(r.ed_count, expected_eds);
        }
        assert_eq!(rows[0].lr_count, 1);
        assert_eq!(rows[16].lr_count, 9);
        assert_eq!(rows[32].lr_count, 25);
        assert!(rows.iter().filter(|r| r.mode == Mode::LorawanBaseline).all(|r| r.lr_count == 0));
    }

    #[test]
    fn traffic_sweep_shape() {
        let base = Scenario { sim_hours: 0.05, ..Scenario::default() };
        let rows = sweep_variable_traffic(&base, &[1]).unwrap();
        assert_eq!(rows.len(), 14);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.traffic_period_s, TRAFFIC_SWEEP_S[i / 2]);
            assert_eq!(r.packets_per_hour(), 3600.0 / TRAFFIC_SWEEP_S[i / 2]);
            assert_eq!(r.ed_count, 36);
        }
    }
}
