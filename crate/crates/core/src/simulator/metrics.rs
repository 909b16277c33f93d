use super::scenario::Mode;
use crate::forwarding::DropReason;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdFinal {
    pub dev_addr: String,
    pub sf: u8,
    pub power_dbm: i8,
}

/// Outcome of one run, or of several runs pooled together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mode: Mode,
    pub area_side_km: f64,
    pub ed_count: usize,
    pub lr_count: usize,
    pub traffic_period_s: f64,
    pub sim_hours: f64,
    pub seeds: Vec<u64>,
    pub sent: u64,
    pub delivered: u64,
    pub in_flight: u64,
    /// Never decoded by any LR or LG.
    pub lost_radio: u64,
    /// Decoded by at least one LR but never reached the LG.
    pub lost_mesh: u64,
    /// Superseded while waiting for duty-cycle clearance.
    pub lost_duty_cycle: u64,
    pub zero_packets: bool,
    pub pdr_percent: f64,
    pub energy_per_ed_j: f64,
    pub latency_ms_mean: f64,
    /// Transmit plus demodulation energy; idle listening excluded.
    pub energy_per_lr_j: f64,
    pub energy_per_lr_total_j: f64,
    pub lr_avg_power_w: f64,
    pub drops: Vec<(DropReason, u64)>,
    pub lima_frames_sent: u64,
    pub downlinks_sent: u64,
    pub ed_final: Vec<EdFinal>,
}

impl Metrics {
    pub fn packets_per_hour(&self) -> f64 {
        3600.0 / self.traffic_period_s
    }

    pub fn drops_of(&self, reason: DropReason) -> u64 {
        self.drops.iter().find(|(r, _)| *r == reason).map_or(0, |(_, n)| *n)
    }

    /// Fills the derived ratios from counts and sums.
    pub(crate) fn finish(&mut self, latency_sum_ms: f64, ed_energy_sum: f64, lr_active_sum: f64, lr_total_sum: f64) {
        self.zero_packets = self.sent == 0;
        self.pdr_percent = if self.sent == 0 { 100.0 } else { 100.0 * self.delivered as f64 / self.sent as f64 };
        self.latency_ms_mean = if self.delivered == 0 { 0.0 } else { latency_sum_ms / self.delivered as f64 };
        self.energy_per_ed_j = if self.ed_count == 0 { 0.0 } else { ed_energy_sum / self.ed_count as f64 };
        let lrs = self.lr_count as f64;
        self.energy_per_lr_j = if self.lr_count == 0 { 0.0 } else { lr_active_sum / lrs };
        self.energy_per_lr_total_j = if self.lr_count == 0 { 0.0 } else { lr_total_sum / lrs };
        self.lr_avg_power_w = self.energy_per_lr_j / (self.sim_hours * 3600.0);
    }

    /// Pools runs of the same configuration over different seeds: counts
    /// are summed and means are weighted by what they average over.
    pub fn pool(runs: &[Metrics]) -> Metrics {
        assert!(!runs.is_empty(), "nothing to pool");
        let first = &runs[0];
        let mut out = Metrics {
            seeds: runs.iter().flat_map(|m| m.seeds.iter().copied()).collect(),
            sent: 0,
            delivered: 0,
            in_flight: 0,
            lost_radio: 0,
            lost_mesh: 0,
            lost_duty_cycle: 0,
            drops: DropReason::ALL.iter().map(|r| (*r, 0)).collect(),
            lima_frames_sent: 0,
            downlinks_sent: 0,
            ed_count: 0,
            lr_count: 0,
            ed_final: Vec::new(),
            ..first.clone()
        };
        let (mut lat, mut ed, mut lr_a, mut lr_t) = (0.0, 0.0, 0.0, 0.0);
        for m in runs {
            out.sent += m.sent;
            out.delivered += m.delivered;
            out.in_flight += m.in_flight;
            out.lost_radio += m.lost_radio;
            out.lost_mesh += m.lost_mesh;
            out.lost_duty_cycle += m.lost_duty_cycle;
            out.lima_frames_sent += m.lima_frames_sent;
            out.downlinks_sent += m.downlinks_sent;
            out.ed_count += m.ed_count;
            out.lr_count += m.lr_count;
            for (slot, (_, n)) in out.drops.iter_mut().zip(&m.drops) {
                slot.1 += n;
            }
            lat += m.latency_ms_mean * m.delivered as f64;
            ed += m.energy_per_ed_j * m.ed_count as f64;
            lr_a += m.energy_per_lr_j * m.lr_count as f64;
            lr_t += m.energy_per_lr_total_j * m.lr_count as f64;
            out.ed_final.extend(m.ed_final.iter().cloned());
        }
        out.finish(lat, ed, lr_a, lr_t);
        out.ed_count /= runs.len();
        out.lr_count /= runs.len();
        out
    }

    pub fn row(&self) -> MetricsRow {
        MetricsRow {
            mode: self.mode.name(),
            area_side_km: self.area_side_km,
            ed_count: self.ed_count,
            lr_count: self.lr_count,
            traffic_period_s: self.traffic_period_s,
            packets_per_hour: self.packets_per_hour(),
            sim_hours: self.sim_hours,
            seeds: self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" "),
            sent: self.sent,
            delivered: self.delivered,
            in_flight: self.in_flight,
            lost_radio: self.lost_radio,
            lost_mesh: self.lost_mesh,
            lost_duty_cycle: self.lost_duty_cycle,
            pdr_percent: self.pdr_percent,
            energy_per_ed_j: self.energy_per_ed_j,
            latency_ms_mean: self.latency_ms_mean,
            energy_per_lr_j: self.energy_per_lr_j,
            energy_per_lr_total_j: self.energy_per_lr_total_j,
            lr_avg_power_w: self.lr_avg_power_w,
            drop_dnof: self.drops_of(DropReason::Dnof),
            drop_not_der: self.drops_of(DropReason::NotDer),
            drop_duplicate: self.drops_of(DropReason::Duplicate),
            drop_no_route: self.drops_of(DropReason::NoRoute),
            drop_stale: self.drops_of(DropReason::Stale),
            drop_too_large: self.drops_of(DropReason::TooLarge),
            lima_frames_sent: self.lima_frames_sent,
            downlinks_sent: self.downlinks_sent,
        }
    }
}

/// Flat CSV view of [`Metrics`].
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub mode: &'static str,
    pub area_side_km: f64,
    pub ed_count: usize,
    pub lr_count: usize,
    pub traffic_period_s: f64,
    pub packets_per_hour: f64,
    pub sim_hours: f64,
    pub seeds: String,
    pub sent: u64,
    pub delivered: u64,
    pub in_flight: u64,
    pub lost_radio: u64,
    pub lost_mesh: u64,
    pub lost_duty_cycle: u64,
    pub pdr_percent: f64,
    pub energy_per_ed_j: f64,
    pub latency_ms_mean: f64,
    pub energy_per_lr_j: f64,
    pub energy_per_lr_total_j: f64,
    pub lr_avg_power_w: f64,
    pub drop_dnof: u64,
    pub drop_not_der: u64,
    pub drop_duplicate: u64,
    pub drop_no_route: u64,
    pub drop_stale: u64,
    pub drop_too_large: u64,
    pub lima_frames_sent: u64,
    pub downlinks_sent: u64,
}

pub const CSV_HEADER: &str = "mode,area_side_km,ed_count,lr_count,traffic_period_s,packets_per_hour,sim_hours,seeds,sent,delivered,in_flight,lost_radio,lost_mesh,lost_duty_cycle,pdr_percent,energy_per_ed_j,latency_ms_mean,energy_per_lr_j,energy_per_lr_total_j,lr_avg_power_w,drop_dnof,drop_not_der,drop_duplicate,drop_no_route,drop_stale,drop_too_large,lima_frames_sent,downlinks_sent";

pub fn write_csv<W: Write>(out: W, rows: &[Metrics]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for m in rows {
        w.serialize(m.row())?;
    }
    w.flush()?;
    Ok(())
}
