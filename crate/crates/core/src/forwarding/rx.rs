use super::state::{EdRxQueue, EdRxState, QueuedDownlink};
use super::{DropReason, ForwardingConfig, ForwardingCounters, Output, RadioTx, RxWindow};
use crate::routing::DownlinkKey;
use crate::time::SimTime;
use std::collections::BTreeMap;

/// Holds downlinks until the ED's next receive window.
#[derive(Debug, Clone)]
pub struct RxScheduler {
    states: BTreeMap<DownlinkKey, EdRxState>,
    queue: EdRxQueue,
    power_dbm: i8,
}

impl RxScheduler {
    pub fn new(cfg: &ForwardingConfig, power_dbm: i8) -> Self {
        RxScheduler { states: BTreeMap::new(), queue: EdRxQueue::new(cfg.queue_ttl), power_dbm }
    }

    pub fn state(&self, ed: &DownlinkKey) -> Option<&EdRxState> {
        self.states.get(ed)
    }

    pub fn queued(&self, ed: &DownlinkKey) -> usize {
        self.queue.len(ed)
    }

    /// Records the windows opened by an uplink that ended at `uplink_end`.
    pub fn on_uplink(&mut self, cfg: &ForwardingConfig, ed: DownlinkKey, channel: u8, sf: u8, uplink_end: SimTime) -> Vec<Output> {
        let st = EdRxState {
            rx1_time: uplink_end + cfg.receive_delay1,
            rx2_time: uplink_end + cfg.receive_delay2,
            uplink_channel: channel,
            uplink_sf: sf,
            rx2_timer_active: true,
            rx1_scheduled: false,
            rx2_scheduled: false,
        };
        self.states.insert(ed, st);
        if self.queue.len(&ed) > 0 {
            self.schedule(ed, uplink_end)
        } else {
            Vec::new()
        }
    }

    pub fn enqueue(&mut self, ed: DownlinkKey, bytes: Vec<u8>, rx1_sf: Option<u8>, now: SimTime) -> Vec<Output> {
        self.queue.push(ed, QueuedDownlink { bytes, enqueued_at: now, rx1_sf });
        self.schedule(ed, now)
    }

    fn schedule(&mut self, ed: DownlinkKey, now: SimTime) -> Vec<Output> {
        let Some(st) = self.states.get_mut(&ed) else {
            return Vec::new();
        };
        if now <= st.rx1_time && st.rx2_timer_active {
            if !st.rx1_scheduled {
                st.rx1_scheduled = true;
                return vec![Output::RxWindowTimer { ed, window: RxWindow::Rx1, at: st.rx1_time }];
            }
        } else if now <= st.rx2_time && st.rx2_timer_active && !st.rx2_scheduled {
            st.rx2_scheduled = true;
            return vec![Output::RxWindowTimer { ed, window: RxWindow::Rx2, at: st.rx2_time }];
        }
        Vec::new()
    }

    pub fn on_window(&mut self, cfg: &ForwardingConfig, counters: &mut ForwardingCounters, ed: DownlinkKey, window: RxWindow, now: SimTime) -> Vec<Output> {
        let mut out = Vec::new();
        let Some(st) = self.states.get(&ed).copied() else {
            return out;
        };
        let (due, scheduled) = match window {
            RxWindow::Rx1 => (st.rx1_time, st.rx1_scheduled),
            RxWindow::Rx2 => (st.rx2_time, st.rx2_scheduled),
        };
        // timer from an older uplink
        if due != now || !scheduled {
            return out;
        }
        let st_mut = self.states.get_mut(&ed).expect("present");
        match window {
            RxWindow::Rx1 => st_mut.rx1_scheduled = false,
            RxWindow::Rx2 => st_mut.rx2_scheduled = false,
        }
        if !st.rx2_timer_active {
            return out;
        }
        let (item, stale) = self.queue.pop_fresh(&ed, now);
        for _ in 0..stale {
            out.push(counters.drop(DropReason::Stale));
        }
        let Some(item) = item else {
            return out;
        };
        let tx = match window {
            RxWindow::Rx1 => RadioTx {
                bytes: item.bytes,
                sf: item.rx1_sf.unwrap_or(st.uplink_sf),
                power_dbm: self.power_dbm,
                channel: cfg.rx1_channel_base + st.uplink_channel % 8,
            },
            RxWindow::Rx2 => RadioTx { bytes: item.bytes, sf: cfg.rx2_sf, power_dbm: self.power_dbm, channel: cfg.rx2_channel },
        };
        self.states.get_mut(&ed).expect("present").rx2_timer_active = false;
        counters.ed_downlinks += 1;
        out.push(Output::TransmitExact { at: now, tx });
        out
    }
}
