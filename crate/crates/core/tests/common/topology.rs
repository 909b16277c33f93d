//! Random connected topologies and a shortest-path oracle.

use super::{downlink, links_from_edges, uplink, Mesh};
use lima::codec::DevAddr;
use lima::forwarding::ForwardingConfig;
use lima::routing::{DownlinkKey, RoutingConfig};
use lima::{SimDuration, SimTime};
use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use petgraph::visit::EdgeRef;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Topo {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

/// Connected graph on `n` nodes (node 0 is the LG): a random spanning tree
/// plus extra edges, integer RSSIs so the per-hop cost is exact.
pub fn random_topology(rng: &mut ChaCha8Rng) -> Topo {
    let n = rng.gen_range(2..=12);
    let mut edges = Vec::new();
    let mut present = vec![vec![false; n]; n];
    for v in 1..n {
        let u = rng.gen_range(0..v);
        present[u][v] = true;
        edges.push((u, v, -(rng.gen_range(60..=120) as f64)));
    }
    let extra_p = rng.gen_range(0.0..0.5);
    for u in 0..n {
        for v in u + 1..n {
            if !present[u][v] && rng.gen_bool(extra_p) {
                edges.push((u, v, -(rng.gen_range(60..=120) as f64)));
            }
        }
    }
    Topo { n, edges }
}

pub struct Oracle {
    pub dist: Vec<u64>,
    pub paths: Vec<u64>,
    graph: UnGraph<(), u64>,
}

pub fn oracle(t: &Topo) -> Oracle {
    let mut g = UnGraph::<(), u64>::new_undirected();
    let nodes: Vec<NodeIndex> = (0..t.n).map(|_| g.add_node(())).collect();
    for &(a, b, rssi) in &t.edges {
        g.add_edge(nodes[a], nodes[b], (-rssi) as u64);
    }
    let d = dijkstra(&g, nodes[0], None, |e| *e.weight());
    let dist: Vec<u64> = (0..t.n).map(|i| d[&nodes[i]]).collect();
    let mut order: Vec<usize> = (0..t.n).collect();
    order.sort_by_key(|&i| dist[i]);
    let mut paths = vec![0u64; t.n];
    paths[0] = 1;
    for &v in order.iter().skip(1) {
        for e in g.edges(nodes[v]) {
            let u = if e.source() == nodes[v] { e.target() } else { e.source() }.index();
            if dist[u] + e.weight() == dist[v] {
                paths[v] += paths[u];
            }
        }
    }
    Oracle { dist, paths, graph: g }
}

impl Oracle {
    pub fn next_hop(&self, v: usize) -> usize {
        self.graph
            .edges(NodeIndex::new(v))
            .map(|e| if e.source().index() == v { e.target().index() } else { e.source().index() })
            .find(|&u| {
                let w = self.graph.edges_connecting(NodeIndex::new(u), NodeIndex::new(v)).next().unwrap().weight();
                self.dist[u] + w == self.dist[v]
            })
            .unwrap()
    }
}

pub fn converged_mesh(t: &Topo, seed: u64) -> Mesh {
    let routing = RoutingConfig::default();
    let mut mesh = Mesh::new(1, t.n - 1, links_from_edges(t.n, &t.edges), ForwardingConfig::default(), routing, seed);
    for round in 0..12u64 {
        mesh.run_until(SimTime::ZERO + routing.rem_period.saturating_mul(round));
        mesh.originate_rems();
    }
    mesh.advance(SimDuration::from_secs(30));
    mesh
}

/// Compares every converged uplink choice with the oracle. Returns the
/// number of nodes whose next hop was checked.
pub fn check_next_hops(seed: u64, cases: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for case in 0..cases {
        let t = random_topology(&mut rng);
        let o = oracle(&t);
        let mesh = converged_mesh(&t, case);
        let now = mesh.now;
        for v in 1..t.n {
            let choice = mesh.lrs[v - 1].routing.select_uplink(now, &mut ChaCha8Rng::seed_from_u64(0));
            let Ok(choice) = choice else {
                return Err(format!("case {case} node {v}: no route after convergence"));
            };
            ensure!(choice.cost as u64 == o.dist[v], "case {case} node {v}: cost {} vs {}", choice.cost, o.dist[v]);
            if o.paths[v] == 1 {
                let hop = mesh.node_of_id(choice.next_hop);
                ensure!(hop == Some(o.next_hop(v)), "case {case} node {v}: next hop {hop:?} vs {}", o.next_hop(v));
                checked += 1;
            }
        }
    }
    Ok(checked)
}

/// Sends one uplink from every LR's ED, then a downlink, and checks the
/// downlink walks the uplink path backwards. Returns delivered uplinks.
pub fn check_downlink_retrace(seed: u64, cases: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut delivered = 0;
    for case in 0..cases {
        let t = random_topology(&mut rng);
        let mut mesh = converged_mesh(&t, 1000 + case);
        for v in 1..t.n {
            let addr = DevAddr(0x2600_1000 + v as u32);
            mesh.sent.clear();
            let before = mesh.deliveries.len();
            mesh.ed_uplink(&uplink(addr, 0, 20), &[(v, 5.0)], 0, 9, 14);
            mesh.advance(SimDuration::from_secs(5));
            if mesh.deliveries.len() == before {
                continue;
            }
            delivered += 1;
            let mut up = mesh.uplink_path(0);
            up.push(0);
            mesh.sent.clear();
            // the exit LR keeps the window state of the uplink; use the next one
            mesh.ed_uplink(&uplink(addr, 1, 20), &[(v, 5.0)], 0, 9, 14);
            mesh.ns_downlink(0, downlink(addr, 0, 4), DownlinkKey::DevAddr(addr), 9);
            mesh.advance(SimDuration::from_secs(5));
            let mut down = mesh.downlink_path();
            let exits: Vec<usize> = mesh.ed_downlinks().iter().map(|s| s.node).collect();
            ensure!(exits == vec![v], "case {case} node {v}: exits {exits:?}");
            down.extend(exits);
            up.reverse();
            ensure!(down == up, "case {case} node {v}: down {down:?} up {up:?}");
        }
    }
    Ok(delivered)
}
