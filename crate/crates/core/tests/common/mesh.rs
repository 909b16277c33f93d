//! Link-level mesh that wires real router and gateway engines together
//! without a radio model. Every transmission reaches every linked node
//! after its airtime; nothing collides.

use lima::channel::{airtime_duration, LoraTxParams};
use lima::codec::{decode, Decoded, DevAddr, FrameBuilder, HeaderKind, MType, TransmissionProfile};
use lima::forwarding::{DropReason, ForwardingConfig, LimaGateway, LimaRouter, NsDelivery, Output, RadioTx, RxWindow, UplinkKey};
use lima::routing::{DownlinkKey, RoutingConfig};
use lima::simulator::{lg_id, lr_id, EventQueue};
use lima::{SimDuration, SimTime};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
enum Ev {
    Arrive { node: usize, bytes: Vec<u8>, rssi: f64 },
    Transmit { node: usize, tx: RadioTx, exact: bool },
    Stagger { node: usize, key: UplinkKey },
    Rem { node: usize, source: lima::codec::LimaNodeId, seq: u8 },
    Window { node: usize, ed: DownlinkKey, window: RxWindow },
}

/// One recorded transmission.
#[derive(Debug, Clone)]
pub struct Sent {
    pub at: SimTime,
    pub node: usize,
    pub tx: RadioTx,
    pub exact: bool,
}

pub struct Mesh {
    pub lgs: Vec<LimaGateway>,
    pub lrs: Vec<LimaRouter>,
    /// RSSI between infrastructure nodes; gateways first.
    pub links: Vec<Vec<Option<f64>>>,
    pub now: SimTime,
    pub sent: Vec<Sent>,
    pub deliveries: Vec<NsDelivery>,
    pub drops: Vec<(usize, DropReason)>,
    queue: EventQueue<Ev>,
    rng: ChaCha8Rng,
}

impl Mesh {
    pub fn new(n_lg: usize, n_lr: usize, links: Vec<Vec<Option<f64>>>, fwd: ForwardingConfig, routing: RoutingConfig, seed: u64) -> Mesh {
        assert_eq!(links.len(), n_lg + n_lr);
        Mesh {
            lgs: (0..n_lg).map(|k| LimaGateway::new(lg_id(k), fwd, routing, 5, fwd.stp.tx_power_dbm, true)).collect(),
            lrs: (0..n_lr).map(|k| LimaRouter::new(lr_id(k), fwd, routing)).collect(),
            links,
            now: SimTime::ZERO,
            sent: Vec::new(),
            deliveries: Vec::new(),
            drops: Vec::new(),
            queue: EventQueue::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn n_lg(&self) -> usize {
        self.lgs.len()
    }

    pub fn node_of_lr(&self, k: usize) -> usize {
        self.lgs.len() + k
    }

    pub fn node_of_id(&self, id: lima::codec::LimaNodeId) -> Option<usize> {
        if let Some(k) = self.lgs.iter().position(|g| g.id == id) {
            return Some(k);
        }
        self.lrs.iter().position(|r| r.id == id).map(|k| k + self.lgs.len())
    }

    /// Every gateway floods one REM at the current time.
    pub fn originate_rems(&mut self) {
        for k in 0..self.lgs.len() {
            let out = self.lgs[k].originate_rem(self.now);
            self.dispatch(k, out);
        }
    }

    /// An ED frame that ended at `self.now`, heard by `(node, snr)` pairs.
    pub fn ed_uplink(&mut self, raw: &[u8], hearers: &[(usize, f64)], channel: u8, sf: u8, power_dbm: i8) {
        for &(node, snr) in hearers {
            let now = self.now;
            let out = if node < self.lgs.len() {
                self.lgs[node].on_ed_uplink(raw, snr, channel, TransmissionProfile::new(sf, power_dbm), now)
            } else {
                let k = node - self.lgs.len();
                self.lrs[k].on_ed_uplink(raw, snr, channel, sf, now, &mut self.rng)
            };
            self.dispatch(node, out);
        }
    }

    /// Hands a NS downlink to gateway `k` at the current time.
    pub fn ns_downlink(&mut self, k: usize, bytes: Vec<u8>, ed: DownlinkKey, rx1_sf: u8) {
        let out = self.lgs[k].handle_ns_downlink(bytes, ed, Some(rx1_sf), self.now);
        self.dispatch(k, out);
    }

    /// Processes events up to and including `until`.
    pub fn run_until(&mut self, until: SimTime) {
        while let Some(t) = self.queue.peek_time() {
            if t > until {
                break;
            }
            let (t, ev) = self.queue.pop().unwrap();
            self.now = t;
            self.handle(ev);
        }
        self.now = until;
    }

    pub fn advance(&mut self, by: SimDuration) {
        let until = self.now + by;
        self.run_until(until);
    }

    fn handle(&mut self, ev: Ev) {
        let now = self.now;
        match ev {
            Ev::Arrive { node, bytes, rssi } => {
                let out = if node < self.lgs.len() {
                    self.lgs[node].on_lima_frame(&bytes, now)
                } else {
                    let k = node - self.lgs.len();
                    self.lrs[k].on_lima_frame(&bytes, rssi, now, &mut self.rng)
                };
                self.dispatch(node, out);
            }
            Ev::Transmit { node, tx, exact } => {
                let air = airtime_duration(&LoraTxParams::standard(tx.sf, tx.power_dbm, tx.channel), tx.bytes.len());
                if tx.channel == self.lrs.first().map_or(17, |r| r.cfg.mesh_channel) {
                    for (other, link) in self.links[node].iter().enumerate() {
                        if let Some(rssi) = *link {
                            if other != node {
                                self.queue.push(now + air, Ev::Arrive { node: other, bytes: tx.bytes.clone(), rssi });
                            }
                        }
                    }
                }
                self.sent.push(Sent { at: now, node, tx, exact });
            }
            Ev::Stagger { node, key } => {
                let k = node - self.lgs.len();
                let out = self.lrs[k].on_stagger_timer(key, now, &mut self.rng);
                self.dispatch(node, out);
            }
            Ev::Rem { node, source, seq } => {
                let k = node - self.lgs.len();
                let out = self.lrs[k].on_rem_timer(source, seq, now);
                self.dispatch(node, out);
            }
            Ev::Window { node, ed, window } => {
                let out = if node < self.lgs.len() {
                    self.lgs[node].on_rx_window(ed, window, now)
                } else {
                    self.lrs[node - self.lgs.len()].on_rx_window(ed, window, now)
                };
                self.dispatch(node, out);
            }
        }
    }

    fn dispatch(&mut self, node: usize, outputs: Vec<Output>) {
        for o in outputs {
            match o {
                Output::Transmit { at, tx } => self.queue.push(at, Ev::Transmit { node, tx, exact: false }),
                Output::TransmitExact { at, tx } => self.queue.push(at, Ev::Transmit { node, tx, exact: true }),
                Output::StaggerTimer { key, at } => self.queue.push(at, Ev::Stagger { node, key }),
                Output::RemTimer { source, seq, at } => self.queue.push(at, Ev::Rem { node, source, seq }),
                Output::RxWindowTimer { ed, window, at } => self.queue.push(at, Ev::Window { node, ed, window }),
                Output::Deliver(d) => self.deliveries.push(d),
                Output::Drop(r) => self.drops.push((node, r)),
            }
        }
    }

    /// Nodes that sent a tunneled uplink carrying `fcnt`, in send order.
    pub fn uplink_path(&self, fcnt: u16) -> Vec<usize> {
        self.sent
            .iter()
            .filter(|s| match decode(&s.tx.bytes) {
                Ok(Decoded::LimaFrame { header, inner }) => {
                    matches!(header.kind, HeaderKind::UplinkData { .. })
                        && lima::codec::LorawanFrameView::parse(&inner).ok().and_then(|f| f.fcnt) == Some(fcnt)
                }
                _ => false,
            })
            .map(|s| s.node)
            .collect()
    }

    /// Nodes that sent a tunneled downlink, in send order.
    pub fn downlink_path(&self) -> Vec<usize> {
        self.sent
            .iter()
            .filter(|s| matches!(decode(&s.tx.bytes), Ok(Decoded::LimaFrame { header, .. }) if matches!(header.kind, HeaderKind::DownlinkData { .. })))
            .map(|s| s.node)
            .collect()
    }

    /// Plain LoRaWAN downlinks sent towards EDs.
    pub fn ed_downlinks(&self) -> Vec<&Sent> {
        self.sent.iter().filter(|s| s.exact).collect()
    }
}

pub fn uplink(addr: DevAddr, fcnt: u16, app: usize) -> Vec<u8> {
    FrameBuilder::data(MType::UnconfirmedDataUp, addr, fcnt).payload(1, vec![0x5A; app]).build((addr.0 ^ fcnt as u32).to_le_bytes())
}

pub fn downlink(addr: DevAddr, fcnt: u16, app: usize) -> Vec<u8> {
    FrameBuilder::data(MType::UnconfirmedDataDown, addr, fcnt).payload(1, vec![0xC3; app]).build([0; 4])
}

/// Symmetric link matrix from an edge list.
pub fn links_from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<Option<f64>>> {
    let mut m = vec![vec![None; n]; n];
    for &(a, b, rssi) in edges {
        m[a][b] = Some(rssi);
        m[b][a] = Some(rssi);
    }
    m
}
