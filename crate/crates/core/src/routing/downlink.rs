use crate::codec::{DevAddr, DevEui, LimaNodeId, LorawanFrameView, MType};
use crate::time::{SimDuration, SimTime};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DownlinkKey {
    DevAddr(DevAddr),
    DevEui(DevEui),
}

impl DownlinkKey {
    /// DevEUI for join requests, DevAddr for data frames.
    pub fn for_frame(frame: &LorawanFrameView) -> Option<DownlinkKey> {
        if frame.mtype == MType::JoinRequest {
            frame.dev_eui.map(DownlinkKey::DevEui)
        } else {
            frame.dev_addr.map(DownlinkKey::DevAddr)
        }
    }
}

impl fmt::Display for DownlinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DownlinkKey::DevAddr(a) => write!(f, "{a}"),
            DownlinkKey::DevEui(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DownlinkNextHop {
    Lr(LimaNodeId),
    /// The ED itself is in radio range.
    EdDirect,
}

impl fmt::Display for DownlinkNextHop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DownlinkNextHop::Lr(id) => write!(f, "{id}"),
            DownlinkNextHop::EdDirect => f.write_str("ed"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownlinkRouteEntry {
    pub next_hop: DownlinkNextHop,
    pub learned_at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DownlinkRouteTable {
    routes: BTreeMap<DownlinkKey, DownlinkRouteEntry>,
    ttl: SimDuration,
}

impl DownlinkRouteTable {
    pub fn new(ttl: SimDuration) -> Self {
        DownlinkRouteTable { routes: BTreeMap::new(), ttl }
    }

    /// Records the reverse path of an uplink frame. Frames that are neither
    /// data uplinks nor join requests are ignored.
    pub fn learn(&mut self, frame: &LorawanFrameView, sender: DownlinkNextHop, now: SimTime) -> Option<DownlinkKey> {
        if !(frame.mtype.is_uplink() && (frame.mtype.is_data() || frame.mtype == MType::JoinRequest)) {
            return None;
        }
        let key = DownlinkKey::for_frame(frame)?;
        self.insert(key, sender, now);
        Some(key)
    }

    pub fn insert(&mut self, key: DownlinkKey, next_hop: DownlinkNextHop, now: SimTime) {
        self.routes.insert(key, DownlinkRouteEntry { next_hop, learned_at: now });
    }

    pub fn lookup(&self, key: &DownlinkKey, now: SimTime) -> Option<DownlinkNextHop> {
        self.routes
            .get(key)
            .filter(|e| now.since(e.learned_at) <= self.ttl)
            .map(|e| e.next_hop)
    }

    pub fn remove(&mut self, key: &DownlinkKey) -> Option<DownlinkRouteEntry> {
        self.routes.remove(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DownlinkKey, &DownlinkRouteEntry)> {
        self.routes.iter()
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn expire(&mut self, now: SimTime) {
        let ttl = self.ttl;
        self.routes.retain(|_, e| now.since(e.learned_at) <= ttl);
    }
}
