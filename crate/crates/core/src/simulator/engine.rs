//! Event loop tying the radio channel to the ED, LR, LG and NS models.

use super::ed::EndDevice;
use super::events::EventQueue;
use super::metrics::{EdFinal, Metrics};
use super::ns::NetworkServer;
use super::scenario::{Mode, Scenario, ScenarioError};
use super::topology::Topology;
use crate::adr::AdrParams;
use crate::channel::{
    airtime_duration, DutyCycle, DutyCyclePolicy, DutyDecision, EnergyLedger, EnergyModel, LoraTxParams, Position, RadioModel,
    RadioPhase, Reception, TransmissionEvent,
};
use crate::codec::{decode, Decoded, DevAddr, LimaNodeId, LorawanFrameView, Region, TransmissionProfile};
use crate::forwarding::{
    DropReason, ForwardingConfig, ForwardingCounters, LimaGateway, LimaRouter, Output, RadioTx, RxWindow, UplinkKey,
};
use crate::routing::{DownlinkKey, RoutingConfig};
use crate::time::{SimDuration, SimTime};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

/// Symbols an ED listens for a preamble before closing an empty window.
const RX_TIMEOUT_SYMBOLS: f64 = 8.0;
/// How long ended frames stay around for overlap checks.
const AIR_HISTORY: SimDuration = SimDuration::from_secs(15);
const TICK_PERIOD: SimDuration = SimDuration::from_secs(60);
/// Undelivered packets generated this close to the end count as in flight.
const IN_FLIGHT_HORIZON: SimDuration = SimDuration::from_secs(30);

pub fn lg_id(k: usize) -> LimaNodeId {
    LimaNodeId(0x0001 + k as u16)
}

pub fn lr_id(k: usize) -> LimaNodeId {
    LimaNodeId(0x0100 + k as u16)
}

pub fn ed_addr(k: usize) -> DevAddr {
    DevAddr(0x2600_0000 + k as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Lg(usize),
    Lr(usize),
    Ed(usize),
}

#[derive(Debug, Clone)]
enum Event {
    EdGenerate(usize),
    EdAttempt(usize),
    EdWindowClose { ed: usize, second: bool },
    TxEnd(u64),
    InfraTransmit { node: usize, tx: RadioTx, exact: bool },
    Stagger { node: usize, key: UplinkKey },
    Rem { node: usize, source: LimaNodeId, seq: u8 },
    RxWindow { node: usize, ed: DownlinkKey, window: RxWindow },
    RemOriginate(usize),
    Tick(usize),
    Outage(usize),
}

#[derive(Debug, Clone)]
enum FrameKind {
    Uplink { ed: usize, fcnt: u16 },
    Infra,
}

#[derive(Debug, Clone)]
struct AirFrame {
    ev: TransmissionEvent,
    bytes: Vec<u8>,
    kind: FrameKind,
    /// EDs whose receive window this frame hit.
    locked: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
struct PacketFate {
    generated_at: SimTime,
    tx_start: Option<SimTime>,
    heard: bool,
    delivered: bool,
    superseded: bool,
}

struct Infra {
    position: Position,
    alive: bool,
    duty: DutyCycle,
    tx_log: VecDeque<(SimTime, SimTime)>,
    tx_secs: f64,
    rx_secs: f64,
    energy: EnergyLedger<f64>,
}

impl Infra {
    fn new(position: Position) -> Self {
        Infra {
            position,
            alive: true,
            duty: DutyCycle::new(),
            tx_log: VecDeque::new(),
            tx_secs: 0.0,
            rx_secs: 0.0,
            energy: EnergyLedger::new(),
        }
    }

    fn transmitting_during(&self, start: SimTime, end: SimTime) -> bool {
        self.tx_log.iter().any(|&(s, e)| s < end && start < e)
    }

    fn busy_until(&self, now: SimTime) -> Option<SimTime> {
        self.tx_log.iter().filter(|&&(s, e)| s <= now && now < e).map(|&(_, e)| e).max()
    }
}

/// One simulation run. Build with [`Simulation::new`], drive with
/// [`Simulation::run`].
pub struct Simulation {
    scenario: Scenario,
    pub topology: Topology,
    radio: RadioModel<f64>,
    energy: EnergyModel<f64>,
    fwd: ForwardingConfig,
    queue: EventQueue<Event>,
    now: SimTime,
    end: SimTime,
    rng: ChaCha8Rng,
    lgs: Vec<LimaGateway>,
    lrs: Vec<LimaRouter>,
    pub eds: Vec<EndDevice>,
    infra: Vec<Infra>,
    ns: NetworkServer,
    air: Vec<AirFrame>,
    next_tx_id: u64,
    fates: BTreeMap<(usize, u16), PacketFate>,
    ed_busy_secs: Vec<f64>,
    ed_pending_since: Vec<SimTime>,
    latency_sum_ms: f64,
    delivered: u64,
    lima_frames_sent: u64,
    downlinks_sent: u64,
    trace: Option<Box<dyn Write + Send>>,
    /// Per-ED (time, sf, power) after every change, for fixtures.
    pub settings_log: Vec<Vec<(SimTime, u8, i8)>>,
    /// Per-ED (time, via LR?) of every fresh NS delivery.
    pub delivery_log: Vec<Vec<(SimTime, u16, bool)>>,
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let radio = scenario.radio.radio_model()?;
        let topology = Topology::build(scenario, &radio)?;
        let mut fwd = ForwardingConfig {
            stp: scenario.stp(),
            der_enabled: scenario.der_enabled,
            dnof_enabled: scenario.dnof_enabled,
            ..ForwardingConfig::default()
        };
        fwd.queue_ttl = fwd.queue_ttl.max(SimDuration::from_secs_f64(2.0 * scenario.traffic_period_s));
        let routing = RoutingConfig::with_rem_period(SimDuration::from_secs_f64(scenario.rem_period_s));
        let lima = scenario.mode == Mode::Lima;
        let dev = &scenario.device;
        let lgs = (0..topology.lg_positions.len())
            .map(|k| LimaGateway::new(lg_id(k), fwd, routing, dev.history_depth, scenario.stp_power_dbm, lima))
            .collect();
        let lrs = (0..topology.lr_positions.len()).map(|k| LimaRouter::new(lr_id(k), fwd, routing)).collect();
        let eds: Vec<EndDevice> = topology
            .ed_positions
            .iter()
            .enumerate()
            .map(|(k, p)| EndDevice::new(ed_addr(k), *p, dev.clone(), Region::Eu868))
            .collect();
        let infra = topology.lg_positions.iter().chain(&topology.lr_positions).map(|p| Infra::new(*p)).collect();
        let params = AdrParams {
            region: Region::Eu868,
            min_power_dbm: dev.min_power_dbm,
            max_power_dbm: dev.max_power_dbm,
            device_margin_db: dev.device_margin_db,
        };
        let ns = NetworkServer::new(params, dev.history_depth, scenario.adr_enabled, dev.initial_power_dbm);
        let n_ed = eds.len();
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        rng.set_stream(1);
        let mut sim = Simulation {
            scenario: scenario.clone(),
            topology,
            radio,
            energy: scenario.radio.energy_model(),
            fwd,
            queue: EventQueue::new(),
            now: SimTime::ZERO,
            end: SimTime::from_secs_f64(scenario.sim_hours * 3600.0),
            rng,
            lgs,
            lrs,
            settings_log: eds.iter().map(|e| vec![(SimTime::ZERO, e.sf, e.power_dbm)]).collect(),
            delivery_log: vec![Vec::new(); n_ed],
            eds,
            infra,
            ns,
            air: Vec::new(),
            next_tx_id: 0,
            fates: BTreeMap::new(),
            ed_busy_secs: vec![0.0; n_ed],
            ed_pending_since: vec![SimTime::ZERO; n_ed],
            latency_sum_ms: 0.0,
            delivered: 0,
            lima_frames_sent: 0,
            downlinks_sent: 0,
            trace: None,
        };
        sim.schedule_initial();
        Ok(sim)
    }

    pub fn with_trace(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.trace = Some(sink);
        self
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn lr_count(&self) -> usize {
        self.lrs.len()
    }

    pub fn lg_count(&self) -> usize {
        self.lgs.len()
    }

    pub fn router(&self, k: usize) -> &LimaRouter {
        &self.lrs[k]
    }

    pub fn gateway(&self, k: usize) -> &LimaGateway {
        &self.lgs[k]
    }

    fn schedule_initial(&mut self) {
        // Phases come from their own stream so both modes see the same traffic.
        let mut phase_rng = ChaCha8Rng::seed_from_u64(self.scenario.seed);
        phase_rng.set_stream(2);
        let period = self.scenario.traffic_period_s;
        let warmup = SimTime::from_secs_f64(self.scenario.warmup_s);
        for k in 0..self.eds.len() {
            let phase = SimDuration::from_secs_f64(phase_rng.gen_range(0.0..period));
            self.queue.push(warmup + phase, Event::EdGenerate(k));
        }
        if self.scenario.mode == Mode::Lima {
            for k in 0..self.lgs.len() {
                self.queue.push(SimTime::from_secs(1), Event::RemOriginate(k));
            }
        }
        for node in 0..self.infra.len() {
            self.queue.push(SimTime::ZERO + TICK_PERIOD, Event::Tick(node));
        }
        for o in self.scenario.lr_outages.clone() {
            self.queue.push(SimTime::from_secs_f64(o.at_s), Event::Outage(self.lgs.len() + o.lr));
        }
    }

    fn role(&self, node: usize) -> Role {
        let n_lg = self.lgs.len();
        let n_infra = self.infra.len();
        if node < n_lg {
            Role::Lg(node)
        } else if node < n_infra {
            Role::Lr(node - n_lg)
        } else {
            Role::Ed(node - n_infra)
        }
    }

    fn ed_node(&self, ed: usize) -> usize {
        self.infra.len() + ed
    }

    pub fn run(mut self) -> Metrics {
        self.run_until_end();
        self.finish()
    }

    /// Processes every event up to the end of the run.
    pub fn run_until_end(&mut self) {
        while let Some(t) = self.queue.peek_time() {
            if t > self.end {
                break;
            }
            let (t, ev) = self.queue.pop().expect("peeked");
            self.now = t;
            self.handle(ev);
        }
        self.now = self.end;
    }

    fn handle(&mut self, ev: Event) {
        match ev {
            Event::EdGenerate(ed) => self.ed_generate(ed),
            Event::EdAttempt(ed) => self.ed_attempt(ed),
            Event::EdWindowClose { ed, second } => self.ed_window_close(ed, second),
            Event::TxEnd(id) => self.tx_end(id),
            Event::InfraTransmit { node, tx, exact } => self.infra_transmit(node, tx, exact),
            Event::Stagger { node, key } => self.stagger(node, key),
            Event::Rem { node, source, seq } => {
                if let Role::Lr(k) = self.role(node) {
                    if self.infra[node].alive {
                        let out = self.lrs[k].on_rem_timer(source, seq, self.now);
                        self.dispatch(node, out);
                    }
                }
            }
            Event::RxWindow { node, ed, window } => {
                if !self.infra[node].alive {
                    return;
                }
                let out = match self.role(node) {
                    Role::Lg(k) => self.lgs[k].on_rx_window(ed, window, self.now),
                    Role::Lr(k) => self.lrs[k].on_rx_window(ed, window, self.now),
                    Role::Ed(_) => Vec::new(),
                };
                self.dispatch(node, out);
            }
            Event::RemOriginate(k) => {
                let out = self.lgs[k].originate_rem(self.now);
                self.dispatch(k, out);
                let period = SimDuration::from_secs_f64(self.scenario.rem_period_s);
                self.queue.push(self.now + period, Event::RemOriginate(k));
            }
            Event::Tick(node) => {
                match self.role(node) {
                    Role::Lg(k) => self.lgs[k].tick(self.now),
                    Role::Lr(k) => self.lrs[k].tick(self.now),
                    Role::Ed(_) => {}
                }
                self.queue.push(self.now + TICK_PERIOD, Event::Tick(node));
            }
            Event::Outage(node) => {
                self.infra[node].alive = false;
                self.trace_line(format!(r#"{{"t":{},"ev":"outage","node":{node}}}"#, self.now.as_micros()));
            }
        }
    }

    // ---- end devices ----

    fn ed_generate(&mut self, ed: usize) {
        let period = SimDuration::from_secs_f64(self.scenario.traffic_period_s);
        self.queue.push(self.now + period, Event::EdGenerate(ed));
        if let Some(old) = self.eds[ed].waiting.take() {
            if let Some(f) = self.fates.get_mut(&(ed, old)) {
                f.superseded = true;
            }
        }
        let fcnt = self.eds[ed].next_fcnt();
        self.fates.insert((ed, fcnt), PacketFate { generated_at: self.now, ..PacketFate::default() });
        self.eds[ed].waiting = Some(fcnt);
        self.ed_attempt(ed);
    }

    fn ed_attempt(&mut self, ed: usize) {
        let Some(fcnt) = self.eds[ed].waiting else {
            return;
        };
        // Class A: no new uplink until both receive windows have passed.
        if self.ed_pending_since[ed] > self.now {
            self.queue.push(self.ed_pending_since[ed], Event::EdAttempt(ed));
            return;
        }
        let d = &self.eds[ed];
        let probe = LoraTxParams::standard(d.sf, d.power_dbm, 0);
        let len = self.uplink_len();
        let airtime = airtime_duration(&probe, len);
        let policy = &self.scenario.radio.ed_duty_cycle;
        let mut open = Vec::new();
        let mut earliest: Option<SimTime> = None;
        for ch in 0..8u8 {
            match d.duty.check(policy, ch, airtime, self.now) {
                DutyDecision::Allowed => open.push(ch),
                DutyDecision::Deferred(t) => earliest = Some(earliest.map_or(t, |e: SimTime| e.min(t))),
                DutyDecision::Disallowed => {}
            }
        }
        if open.is_empty() {
            if let Some(t) = earliest {
                self.queue.push(t, Event::EdAttempt(ed));
            }
            return;
        }
        let ch = open[self.rng.gen_range(0..open.len())];
        let adr = self.scenario.adr_enabled;
        let app = self.scenario.packet_app_bytes;
        let d = &mut self.eds[ed];
        d.waiting = None;
        let before = (d.sf, d.power_dbm);
        let bytes = d.build_uplink(fcnt, app, adr);
        let after = (d.sf, d.power_dbm);
        if before != after {
            self.settings_log[ed].push((self.now, after.0, after.1));
        }
        let d = &mut self.eds[ed];
        let params = LoraTxParams::standard(before.0, before.1, ch);
        d.duty.record(policy, ch, airtime_duration(&params, bytes.len()), self.now);
        let position = d.position;
        if let Some(f) = self.fates.get_mut(&(ed, fcnt)) {
            f.tx_start = Some(self.now);
        }
        let node = self.ed_node(ed);
        let id = self.start_frame(node, params, position, bytes, FrameKind::Uplink { ed, fcnt });
        let frame_end = self.air.iter().find(|a| a.ev.id == id).map(|a| a.ev.end()).expect("frame on air");
        let secs = (frame_end - self.now).as_secs_f64();
        let e = &mut self.eds[ed];
        e.energy.account(&self.energy, RadioPhase::Tx(params.tx_power_dbm), secs);
        self.ed_busy_secs[ed] += secs;
        self.ed_pending_since[ed] = frame_end + self.fwd.receive_delay2 + SimDuration::from_secs(1);
    }

    fn uplink_len(&self) -> usize {
        crate::codec::ED_FRAME_OVERHEAD + 1 + self.scenario.packet_app_bytes
    }

    fn ed_window_close(&mut self, ed: usize, second: bool) {
        let d = &self.eds[ed];
        let slot = if second { d.rx2 } else { d.rx1 };
        let Some(slot) = slot else {
            return;
        };
        if slot.locked || (second && d.rx1.is_some_and(|s| s.locked)) {
            return;
        }
        let tsym = LoraTxParams::standard(slot.sf, 0, slot.channel).symbol_time::<f64>();
        let secs = RX_TIMEOUT_SYMBOLS * tsym;
        let e = &mut self.eds[ed];
        e.energy.account(&self.energy, RadioPhase::RxListen, secs);
        self.ed_busy_secs[ed] += secs;
    }

    // ---- radio ----

    fn start_frame(&mut self, node: usize, params: LoraTxParams, position: Position, bytes: Vec<u8>, kind: FrameKind) -> u64 {
        let id = self.next_tx_id;
        self.next_tx_id += 1;
        let ev = TransmissionEvent::new(id, node, params, self.now, bytes.len(), position);
        if matches!(decode(&bytes), Ok(Decoded::LimaFrame { .. })) {
            self.lima_frames_sent += 1;
        }
        let mut locked = Vec::new();
        if (self.fwd.rx1_channel_base..=self.fwd.rx2_channel).contains(&params.channel) {
            self.downlinks_sent += 1;
            let addr = LorawanFrameView::parse(&bytes).ok().and_then(|f| f.dev_addr);
            for (k, d) in self.eds.iter_mut().enumerate() {
                if Some(d.dev_addr) == addr && d.try_lock(self.now, params.channel, params.sf) {
                    locked.push(k);
                }
            }
        }
        self.trace_line(format!(
            r#"{{"t":{},"ev":"tx","node":{node},"ch":{},"sf":{},"dbm":{},"len":{},"end":{}}}"#,
            self.now.as_micros(),
            params.channel,
            params.sf,
            params.tx_power_dbm,
            bytes.len(),
            ev.end().as_micros()
        ));
        self.queue.push(ev.end(), Event::TxEnd(id));
        self.air.push(AirFrame { ev, bytes, kind, locked });
        id
    }

    fn rssi_at(&mut self, ev: &TransmissionEvent, at: Position) -> f64 {
        let d = ev.position.distance(&at);
        let loss = self.radio.path_loss.sample_loss_db(d, &mut self.rng);
        ev.params.tx_power_dbm as f64 - loss
    }

    fn interferers_at(&mut self, idx: usize, at: Position) -> Vec<f64> {
        let ev = self.air[idx].ev.clone();
        let others: Vec<TransmissionEvent> =
            self.air.iter().filter(|o| ev.interferes_with(&o.ev)).map(|o| o.ev.clone()).collect();
        others.iter().map(|o| self.rssi_at(o, at)).collect()
    }

    /// Whether `node` currently hears a frame on (channel, sf); returns the
    /// latest end among those frames.
    fn channel_busy(&mut self, node: usize, channel: u8, sf: u8) -> Option<SimTime> {
        let pos = self.infra[node].position;
        let now = self.now;
        let sens = self.radio.sensitivity_dbm(sf);
        let mut busy = self.infra[node].busy_until(now);
        let ongoing: Vec<TransmissionEvent> = self
            .air
            .iter()
            .filter(|a| a.ev.params.channel == channel && a.ev.params.sf == sf && a.ev.start <= now && now < a.ev.end())
            .filter(|a| a.ev.tx_node != node)
            .map(|a| a.ev.clone())
            .collect();
        for ev in ongoing {
            if self.radio.rssi_dbm(ev.params.tx_power_dbm, ev.position.distance(&pos)) >= sens {
                busy = Some(busy.map_or(ev.end(), |b| b.max(ev.end())));
            }
        }
        busy
    }

    fn tx_end(&mut self, id: u64) {
        let Some(idx) = self.air.iter().position(|a| a.ev.id == id) else {
            return;
        };
        let frame = self.air[idx].clone();
        let ev = &frame.ev;
        let ch = ev.params.channel;
        let downlink_channel = (self.fwd.rx1_channel_base..=self.fwd.rx2_channel).contains(&ch);
        if let FrameKind::Uplink { ed, .. } = frame.kind {
            let d = &mut self.eds[ed];
            d.open_windows(ev.end(), ch, self.fwd.receive_delay1, self.fwd.receive_delay2, self.fwd.rx1_channel_base, self.fwd.rx2_channel, self.fwd.rx2_sf);
            let (r1, r2) = (d.rx1.unwrap().at, d.rx2.unwrap().at);
            self.queue.push(r1 + SimDuration::from_micros(1), Event::EdWindowClose { ed, second: false });
            self.queue.push(r2 + SimDuration::from_micros(1), Event::EdWindowClose { ed, second: true });
        }
        if downlink_channel {
            for &k in &frame.locked {
                self.ed_receive(idx, k);
            }
        } else {
            for node in 0..self.infra.len() {
                if node != ev.tx_node && self.infra[node].alive {
                    self.infra_receive(idx, node);
                }
            }
        }
        let horizon = self.now;
        self.air.retain(|a| a.ev.end() + AIR_HISTORY > horizon);
    }

    fn ed_receive(&mut self, idx: usize, ed: usize) {
        let ev = self.air[idx].ev.clone();
        let pos = self.eds[ed].position;
        let rssi = self.rssi_at(&ev, pos);
        let interf = self.interferers_at(idx, pos);
        let secs = ev.duration.as_secs_f64();
        self.eds[ed].energy.account(&self.energy, RadioPhase::RxActive, secs);
        self.ed_busy_secs[ed] += secs;
        if let Reception::Received { .. } = self.radio.outcome(ev.params.sf, rssi, &interf) {
            let bytes = self.air[idx].bytes.clone();
            let before = (self.eds[ed].sf, self.eds[ed].power_dbm);
            if self.eds[ed].on_downlink(&bytes) {
                let after = (self.eds[ed].sf, self.eds[ed].power_dbm);
                if before != after {
                    self.settings_log[ed].push((self.now, after.0, after.1));
                }
                self.trace_line(format!(r#"{{"t":{},"ev":"ed_downlink","ed":{ed},"sf":{},"dbm":{}}}"#, self.now.as_micros(), after.0, after.1));
            }
        }
    }

    fn infra_receive(&mut self, idx: usize, node: usize) {
        let ev = self.air[idx].ev.clone();
        let pos = self.infra[node].position;
        let rssi = self.rssi_at(&ev, pos);
        if rssi < self.radio.sensitivity_dbm(ev.params.sf) {
            return;
        }
        if self.infra[node].transmitting_during(ev.start, ev.end()) {
            return;
        }
        let secs = ev.duration.as_secs_f64();
        let inf = &mut self.infra[node];
        inf.rx_secs += secs;
        inf.energy.account(&self.energy, RadioPhase::RxActive, secs);
        let interf = self.interferers_at(idx, pos);
        let Reception::Received { snr_db, .. } = self.radio.outcome(ev.params.sf, rssi, &interf) else {
            return;
        };
        let bytes = self.air[idx].bytes.clone();
        let kind = self.air[idx].kind.clone();
        let ch = ev.params.channel;
        let sf = ev.params.sf;
        let now = self.now;
        let out = match (&kind, self.role(node)) {
            (FrameKind::Uplink { ed, fcnt }, role) => {
                if let Some(f) = self.fates.get_mut(&(*ed, *fcnt)) {
                    f.heard = true;
                }
                match role {
                    Role::Lr(k) => self.lrs[k].on_ed_uplink(&bytes, snr_db, ch, sf, now, &mut self.rng),
                    Role::Lg(k) => {
                        let tp = TransmissionProfile::new(sf, ev.params.tx_power_dbm);
                        self.lgs[k].on_ed_uplink(&bytes, snr_db, ch, tp, now)
                    }
                    Role::Ed(_) => Vec::new(),
                }
            }
            (FrameKind::Infra, Role::Lr(k)) if ch == self.fwd.mesh_channel => {
                self.lrs[k].on_lima_frame(&bytes, rssi, now, &mut self.rng)
            }
            (FrameKind::Infra, Role::Lg(k)) if ch == self.fwd.mesh_channel => self.lgs[k].on_lima_frame(&bytes, now),
            _ => Vec::new(),
        };
        self.dispatch(node, out);
    }

    // ---- infrastructure ----

    fn dispatch(&mut self, node: usize, outputs: Vec<Output>) {
        for o in outputs {
            match o {
                Output::Transmit { at, tx } => self.queue.push(at, Event::InfraTransmit { node, tx, exact: false }),
                Output::TransmitExact { at, tx } => self.queue.push(at, Event::InfraTransmit { node, tx, exact: true }),
                Output::StaggerTimer { key, at } => self.queue.push(at, Event::Stagger { node, key }),
                Output::RemTimer { source, seq, at } => self.queue.push(at, Event::Rem { node, source, seq }),
                Output::RxWindowTimer { ed, window, at } => self.queue.push(at, Event::RxWindow { node, ed, window }),
                Output::Deliver(d) => self.ns_deliver(node, d),
                Output::Drop(reason) => {
                    self.trace_line(format!(r#"{{"t":{},"ev":"drop","node":{node},"reason":"{}"}}"#, self.now.as_micros(), reason.name()));
                }
            }
        }
    }

    fn ns_deliver(&mut self, node: usize, d: crate::forwarding::NsDelivery) {
        let outcome = self.ns.on_uplink(&d);
        if !outcome.fresh {
            return;
        }
        let ed = d.key.dev_addr().map(|a| (a.0 - ed_addr(0).0) as usize);
        if let (Some(ed), fcnt) = (ed, d.key.fcnt) {
            if let Some(f) = self.fates.get_mut(&(ed, fcnt)) {
                if !f.delivered {
                    f.delivered = true;
                    self.delivered += 1;
                    let start = f.tx_start.unwrap_or(f.generated_at);
                    self.latency_sum_ms += (self.now - start).as_secs_f64() * 1000.0;
                    let via_lr = matches!(d.via, crate::adr::ReceivedVia::Lr(_));
                    self.delivery_log[ed].push((self.now, fcnt, via_lr));
                    self.trace_line(format!(r#"{{"t":{},"ev":"deliver","ed":{ed},"fcnt":{fcnt},"via_lr":{via_lr}}}"#, self.now.as_micros()));
                }
            }
        }
        if let (Some(dl), Role::Lg(k)) = (outcome.downlink, self.role(node)) {
            let out = self.lgs[k].handle_ns_downlink(dl.bytes, dl.key, Some(dl.rx1_sf), self.now);
            self.dispatch(node, out);
        }
    }

    fn stagger(&mut self, node: usize, key: UplinkKey) {
        let Role::Lr(k) = self.role(node) else {
            return;
        };
        if !self.infra[node].alive {
            return;
        }
        if let Some(busy) = self.channel_busy(node, self.fwd.mesh_channel, self.fwd.stp.sf) {
            let backoff = self.lbt_backoff();
            self.queue.push(busy + backoff, Event::Stagger { node, key });
            return;
        }
        let out = self.lrs[k].on_stagger_timer(key, self.now, &mut self.rng);
        self.dispatch(node, out);
    }

    // Random wait after a busy channel, up to one stagger window.
    fn lbt_backoff(&mut self) -> SimDuration {
        SimDuration::from_micros(self.rng.gen_range(0..=self.fwd.stagger_window.as_micros()))
    }

    fn infra_transmit(&mut self, node: usize, tx: RadioTx, exact: bool) {
        if !self.infra[node].alive {
            return;
        }
        let params = LoraTxParams::standard(tx.sf, tx.power_dbm, tx.channel);
        let airtime = airtime_duration(&params, tx.bytes.len());
        if exact {
            if self.infra[node].busy_until(self.now).is_some() {
                return;
            }
        } else if let Some(busy) = self.channel_busy(node, tx.channel, tx.sf) {
            let backoff = self.lbt_backoff();
            self.queue.push(busy + backoff, Event::InfraTransmit { node, tx, exact });
            return;
        }
        let policy: DutyCyclePolicy = self.scenario.radio.infra_duty_cycle.clone();
        match self.infra[node].duty.check(&policy, tx.channel, airtime, self.now) {
            DutyDecision::Allowed => {}
            DutyDecision::Deferred(t) if !exact => {
                self.queue.push(t, Event::InfraTransmit { node, tx, exact });
                return;
            }
            _ => return,
        }
        let inf = &mut self.infra[node];
        inf.duty.record(&policy, tx.channel, airtime, self.now);
        inf.tx_log.push_back((self.now, self.now + airtime));
        while inf.tx_log.len() > 8 {
            inf.tx_log.pop_front();
        }
        inf.tx_secs += airtime.as_secs_f64();
        inf.energy.account(&self.energy, RadioPhase::Tx(tx.power_dbm), airtime.as_secs_f64());
        let pos = inf.position;
        self.start_frame(node, params, pos, tx.bytes, FrameKind::Infra);
    }

    fn trace_line(&mut self, line: String) {
        if let Some(t) = self.trace.as_mut() {
            let _ = writeln!(t, "{line}");
        }
    }

    // ---- results ----

    fn counters(&self) -> ForwardingCounters {
        let mut c = ForwardingCounters::default();
        for r in &self.lrs {
            c.merge(&r.counters);
        }
        for g in &self.lgs {
            c.merge(&g.counters);
        }
        c
    }

    pub fn finish(mut self) -> Metrics {
        if let Some(t) = self.trace.as_mut() {
            let _ = t.flush();
        }
        let total = self.end.as_secs_f64();
        let mut ed_energy = 0.0;
        for (k, d) in self.eds.iter_mut().enumerate() {
            let sleep = (total - self.ed_busy_secs[k]).max(0.0);
            d.energy.account(&self.energy, RadioPhase::Sleep, sleep);
            ed_energy += d.energy.total();
        }
        let n_lg = self.lgs.len();
        let (mut lr_active, mut lr_total) = (0.0, 0.0);
        for inf in self.infra.iter_mut().skip(n_lg) {
            let idle = (total - inf.tx_secs - inf.rx_secs).max(0.0);
            inf.energy.account(&self.energy, RadioPhase::RxListen, idle);
            lr_active += inf.energy.active();
            lr_total += inf.energy.total();
        }
        let horizon = self.end.since(SimTime::ZERO).as_micros().saturating_sub(IN_FLIGHT_HORIZON.as_micros());
        let (mut in_flight, mut lost_radio, mut lost_mesh, mut lost_duty) = (0, 0, 0, 0);
        for ((ed, fcnt), f) in &self.fates {
            if f.delivered {
                continue;
            }
            let waiting = self.eds[*ed].waiting == Some(*fcnt);
            if f.superseded {
                lost_duty += 1;
            } else if waiting || f.generated_at.as_micros() >= horizon {
                in_flight += 1;
            } else if f.heard {
                lost_mesh += 1;
            } else {
                lost_radio += 1;
            }
        }
        let counters = self.counters();
        let mut m = Metrics {
            mode: self.scenario.mode,
            area_side_km: self.scenario.area_side_km,
            ed_count: self.eds.len(),
            lr_count: self.lrs.len(),
            traffic_period_s: self.scenario.traffic_period_s,
            sim_hours: self.scenario.sim_hours,
            seeds: vec![self.scenario.seed],
            sent: self.fates.len() as u64,
            delivered: self.delivered,
            in_flight,
            lost_radio,
            lost_mesh,
            lost_duty_cycle: lost_duty,
            zero_packets: false,
            pdr_percent: 0.0,
            energy_per_ed_j: 0.0,
            latency_ms_mean: 0.0,
            energy_per_lr_j: 0.0,
            energy_per_lr_total_j: 0.0,
            lr_avg_power_w: 0.0,
            drops: DropReason::ALL.iter().map(|r| (*r, counters.drops_of(*r))).collect(),
            lima_frames_sent: self.lima_frames_sent,
            downlinks_sent: self.downlinks_sent,
            ed_final: self
                .eds
                .iter()
                .map(|d| EdFinal { dev_addr: d.dev_addr.to_string(), sf: d.sf, power_dbm: d.power_dbm })
                .collect(),
        };
        m.finish(self.latency_sum_ms, ed_energy, lr_active, lr_total);
        m
    }
}

/// Builds and runs one scenario.
pub fn run(scenario: &Scenario) -> Result<Metrics, ScenarioError> {
    Ok(Simulation::new(scenario)?.run())
}
