//! One ED, one LR and one LG, with the LR failing part way through.

use lima::adr::{ns_compute_adr, AdrParams};
use lima::channel::Position;
use lima::codec::{DataRate, LimaHeader, Region};
use lima::simulator::{DeviceConfig, Layout, LrOutage, Scenario, Simulation};
use lima::SimTime;

const OUTAGE_S: f64 = 6.0 * 3600.0;
const PERIOD_S: f64 = 300.0;

/// The ED sits 300 m from its LR and `lg_distance_m` from the LG. The mesh
/// runs at SF8 and 30 dBm so that the LR reaches the LG in one hop while no
/// node other than the LR and the LG can hear the ED.
pub fn fixture(lg_distance_m: f64) -> Scenario {
    Scenario {
        area_side_km: 5.0,
        traffic_period_s: PERIOD_S,
        sim_hours: 36.0,
        stp_sf: 8,
        stp_power_dbm: 30,
        device: DeviceConfig { initial_power_dbm: 14, max_power_dbm: 20, ..DeviceConfig::default() },
        layout: Some(Layout {
            lgs: vec![Position::new(0.0, 0.0)],
            lrs: vec![Position::new(lg_distance_m - 300.0, 0.0)],
            eds: vec![Position::new(lg_distance_m, 0.0)],
        }),
        lr_outages: vec![LrOutage { lr: 0, at_s: OUTAGE_S }],
        ..Scenario::default()
    }
}

/// Settings the NS walks the ED through when every uplink is heard at
/// `distance_m`, starting from `start`.
pub fn oracle_walk(s: &Scenario, distance_m: f64, start: (u8, i8)) -> Vec<(u8, i8)> {
    let radio = s.radio.radio_model().unwrap();
    let params = AdrParams {
        region: Region::Eu868,
        min_power_dbm: s.device.min_power_dbm,
        max_power_dbm: s.device.max_power_dbm,
        device_margin_db: s.device.device_margin_db,
    };
    let (mut sf, mut power) = start;
    let mut walk = Vec::new();
    for _ in 0..20 {
        let snr = LimaHeader::quantize_snr(radio.rssi_dbm(power, distance_m) - radio.noise_floor_dbm()) as f64;
        let dr = Region::Eu868.dr_for_sf(sf).unwrap();
        let Some(d) = ns_compute_adr(snr, dr, power, &params) else {
            break;
        };
        sf = Region::Eu868.sf(DataRate(d.new_dr.0)).unwrap();
        power = d.new_power_dbm;
        walk.push((sf, power));
    }
    walk
}

/// Runs the fixture and checks the ED first settles on the LR link, then
/// on the LG link within h + 3 uplinks of the LG hearing it again.
pub fn check_lr_then_lg(lg_distance_m: f64) -> Result<String, String> {
    let s = fixture(lg_distance_m);
    let mut sim = Simulation::new(&s).map_err(|e| e.to_string())?;
    sim.run_until_end();
    let outage = SimTime::from_secs_f64(OUTAGE_S);
    let log = &sim.settings_log[0];
    let before: Vec<(u8, i8)> = log.iter().filter(|(t, ..)| *t < outage).skip(1).map(|&(_, sf, p)| (sf, p)).collect();

    let via_lr = oracle_walk(&s, 300.0, (12, 14));
    ensure!(!via_lr.is_empty() && via_lr.len() <= 3, "oracle walk {via_lr:?}");
    ensure!(before.len() <= 3, "{} ADR changes before the outage: {before:?}", before.len());
    ensure!(before.last() == via_lr.last(), "settings before the outage {before:?}, oracle {via_lr:?}");
    // first uplink the LG hears directly after the LR went away
    let deliveries = &sim.delivery_log[0];
    let Some(&(t0, f0, _)) = deliveries.iter().find(|(t, _, lr)| *t > outage && !lr) else {
        return Err("LG never heard the ED".into());
    };
    let h = s.device.history_depth as u16;
    let settled = log.iter().rev().find(|(t, ..)| *t <= t0).map(|&(_, sf, p)| (sf, p)).unwrap();
    let via_lg = oracle_walk(&s, lg_distance_m, settled);
    let lg_target = via_lg.last().copied().unwrap_or(settled);
    ensure!(via_lr.last() != Some(&lg_target), "LR and LG links call for the same settings {lg_target:?}");
    let after: Vec<(SimTime, u8, i8)> = log.iter().filter(|(t, ..)| *t > t0).copied().collect();
    let reached = if settled == lg_target { Some(t0) } else { after.iter().find(|(_, sf, p)| (*sf, *p) == lg_target).map(|(t, ..)| *t) };
    let Some(reached) = reached else {
        return Err(format!("ED never reached {lg_target:?} after FCnt {f0}; log {log:?}"));
    };
    let uplinks_needed = deliveries.iter().filter(|(t, ..)| *t > t0 && *t <= reached).count() as u16;
    ensure!(uplinks_needed <= h + 3, "took {uplinks_needed} uplinks after FCnt {f0}");
    let last = log.last().map(|&(_, sf, p)| (sf, p)).unwrap();
    ensure!(last == lg_target, "ED drifted to {last:?} away from the LG assignment {lg_target:?}");
    let tail: Vec<_> = deliveries.iter().filter(|(t, ..)| *t >= reached).collect();
    ensure!(tail.len() > 20 && tail.iter().all(|(_, _, lr)| !lr), "tail not direct");
    let sent_after = (sim.eds[0].fcnt - f0) as usize;
    ensure!(tail.len() + 2 >= sent_after - uplinks_needed as usize, "{} of {sent_after} delivered", tail.len());
    Ok(format!(
        "LR link {:?}, LG link {lg_target:?} after {uplinks_needed} uplinks (limit {})",
        via_lr.last().unwrap(),
        h + 3
    ))
}
