//! DER election fixtures.

use super::{links_from_edges, uplink, Mesh};
use lima::codec::DevAddr;
use lima::forwarding::ForwardingConfig;
use lima::routing::{DownlinkKey, RoutingConfig};
use lima::SimDuration;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub const ED: DevAddr = DevAddr(0x2600_0042);

fn with_routes(n_lr: usize, edges: &[(usize, usize, f64)], seed: u64) -> Mesh {
    let mut mesh = Mesh::new(1, n_lr, links_from_edges(n_lr + 1, edges), ForwardingConfig::default(), RoutingConfig::default(), seed);
    mesh.originate_rems();
    mesh.advance(SimDuration::from_secs(10));
    mesh
}

pub fn ders(mesh: &Mesh) -> Vec<usize> {
    let key = DownlinkKey::DevAddr(ED);
    (0..mesh.lrs.len()).filter(|&k| mesh.lrs[k].is_der(&key, mesh.now)).collect()
}

/// Four mutually audible LRs hear the ED at shuffled SNRs; after two
/// uplinks only the strongest may remain DER.
pub fn clique_trial(seed: u64) -> Result<(), String> {
    let mut edges = Vec::new();
    for a in 0..5 {
        for b in a + 1..5 {
            edges.push((a, b, -80.0));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut snrs = vec![-9.0, -2.0, 3.0, 8.0];
    snrs.shuffle(&mut rng);
    let best = (0..4).max_by(|&a, &b| snrs[a].partial_cmp(&snrs[b]).unwrap()).unwrap();
    let mut mesh = with_routes(4, &edges, seed);
    let hearers: Vec<(usize, f64)> = (0..4).map(|k| (k + 1, snrs[k])).collect();
    for fcnt in 0..2 {
        mesh.ed_uplink(&uplink(ED, fcnt, 20), &hearers, 0, 10, 14);
        mesh.advance(SimDuration::from_secs(60));
    }
    let got = ders(&mesh);
    ensure!(got == vec![best], "seed {seed}, snrs {snrs:?}: DERs {got:?}");
    Ok(())
}

/// Two LRs that reach the LG but not each other both stay DER, and the
/// NS still sees every uplink exactly once.
pub fn hidden_pair_trial(seed: u64) -> Result<(), String> {
    let edges = [(0, 1, -95.0), (0, 2, -97.0)];
    let mut mesh = with_routes(2, &edges, seed);
    for fcnt in 0..6 {
        mesh.ed_uplink(&uplink(ED, fcnt, 20), &[(1, 4.0), (2, 6.0)], 0, 10, 14);
        mesh.advance(SimDuration::from_secs(60));
    }
    let got = ders(&mesh);
    ensure!(got == vec![0, 1], "seed {seed}: DERs {got:?}");
    let mut per_fcnt: BTreeMap<u16, usize> = BTreeMap::new();
    for d in &mesh.deliveries {
        ensure!(d.bytes == uplink(ED, d.key.fcnt, 20), "seed {seed}: FCnt {} corrupted", d.key.fcnt);
        *per_fcnt.entry(d.key.fcnt).or_default() += 1;
    }
    let want: BTreeMap<u16, usize> = (0..6).map(|f| (f, 1)).collect();
    ensure!(per_fcnt == want, "seed {seed}: deliveries {per_fcnt:?}");
    Ok(())
}
