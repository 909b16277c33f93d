//! Downlink timing through a chain of LRs.

use super::{downlink, links_from_edges, uplink, Mesh};
use lima::codec::DevAddr;
use lima::forwarding::ForwardingConfig;
use lima::routing::{DownlinkKey, RoutingConfig};
use lima::{SimDuration, SimTime};

const ED: DevAddr = DevAddr(0x2600_0007);
pub const UPLINK_CHANNEL: u8 = 3;
pub const UPLINK_SF: u8 = 7;

/// LG at node 0, LRs at nodes 1..=depth in a line; the ED sits at the far
/// end so the downlink crosses `depth` mesh hops. Returns the exit LR's
/// transmission time relative to the end of the triggering uplink, and
/// its channel and SF.
pub fn exit_transmission(depth: usize) -> Result<(SimDuration, u8, u8), String> {
    let edges: Vec<(usize, usize, f64)> = (0..depth).map(|i| (i, i + 1, -90.0)).collect();
    let mut mesh = Mesh::new(1, depth, links_from_edges(depth + 1, &edges), ForwardingConfig::default(), RoutingConfig::default(), depth as u64);
    mesh.originate_rems();
    mesh.advance(SimDuration::from_secs(20));
    mesh.ed_uplink(&uplink(ED, 0, 25), &[(depth, 5.0)], UPLINK_CHANNEL, UPLINK_SF, 14);
    mesh.advance(SimDuration::from_secs(20));
    ensure!(mesh.deliveries.len() == 1, "route learning uplink lost at depth {depth}");

    let end: SimTime = mesh.now;
    mesh.ed_uplink(&uplink(ED, 1, 25), &[(depth, 5.0)], UPLINK_CHANNEL, UPLINK_SF, 14);
    mesh.ns_downlink(0, downlink(ED, 0, 25), DownlinkKey::DevAddr(ED), UPLINK_SF);
    mesh.advance(SimDuration::from_secs(10));
    ensure!(mesh.downlink_path().len() == depth, "depth {depth}: {} mesh hops", mesh.downlink_path().len());
    let sent = mesh.ed_downlinks();
    ensure!(sent.len() == 1, "depth {depth}: {} ED downlinks", sent.len());
    ensure!(sent[0].node == depth, "depth {depth}: exit node {}", sent[0].node);
    Ok((sent[0].at - end, sent[0].tx.channel, sent[0].tx.sf))
}

/// Depths 1..=8 must land on RX1 and 9..=16 on RX2, both exactly.
pub fn check_depth(depth: usize) -> Result<(), String> {
    let (offset, channel, sf) = exit_transmission(depth)?;
    let want = if depth <= 8 {
        (SimDuration::from_secs(1), 8 + UPLINK_CHANNEL, UPLINK_SF)
    } else {
        (SimDuration::from_secs(2), 16, 12)
    };
    ensure!((offset, channel, sf) == want, "depth {depth}: got {:?}, want {want:?}", (offset, channel, sf));
    Ok(())
}
