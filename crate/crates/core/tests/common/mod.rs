#![allow(dead_code)]

use std::time::Duration;

use dsfm::data::{generate_synthetic, MultiDomainDataset, SyntheticConfig};
use dsfm::sensitivity::DiscreteMeasure;

/// Exact optimal transport cost between two discrete measures with
/// |x - y| ground cost, by successive shortest paths on the bipartite
/// transport network. Knows nothing about sorting or CDFs.
pub fn ot_oracle(p: &DiscreteMeasure, q: &DiscreteMeasure) -> f64 {
    let n = p.locations.len();
    let m = q.locations.len();
    // nodes: source, n supplies, m demands, sink
    let source = 0;
    let sink = n + m + 1;
    let mut g = FlowGraph::new(n + m + 2);
    for i in 0..n {
        g.add_edge(source, 1 + i, p.weights[i], 0.0);
        for j in 0..m {
            g.add_edge(1 + i, 1 + n + j, f64::INFINITY, (p.locations[i] - q.locations[j]).abs());
        }
    }
    for j in 0..m {
        g.add_edge(1 + n + j, sink, q.weights[j], 0.0);
    }
    g.min_cost_max_flow(source, sink)
}

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
}

struct FlowGraph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

const CAP_EPS: f64 = 1e-13;
const COST_EPS: f64 = 1e-12;

impl FlowGraph {
    fn new(n: usize) -> Self {
        FlowGraph {
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, cost });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0, cost: -cost });
    }

    fn min_cost_max_flow(&mut self, s: usize, t: usize) -> f64 {
        let n = self.adj.len();
        let mut total = 0.0;
        // both sides carry unit mass
        let mut remaining = 1.0;
        while remaining > CAP_EPS {
            // Bellman-Ford handles the negative residual costs.
            let mut dist = vec![f64::INFINITY; n];
            let mut via = vec![usize::MAX; n];
            dist[s] = 0.0;
            for _ in 0..n {
                let mut changed = false;
                for u in 0..n {
                    if dist[u].is_infinite() {
                        continue;
                    }
                    for &e in &self.adj[u] {
                        let edge = &self.edges[e];
                        if edge.cap > CAP_EPS && dist[u] + edge.cost < dist[edge.to] - COST_EPS {
                            dist[edge.to] = dist[u] + edge.cost;
                            via[edge.to] = e;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if dist[t].is_infinite() {
                return total;
            }
            let mut push: f64 = remaining;
            let mut v = t;
            while v != s {
                let e = via[v];
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let e = via[v];
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                v = self.edges[e ^ 1].to;
            }
            total += push * dist[t];
            remaining -= push;
        }
        total
    }
}

pub fn small_dataset(n: usize, seed: u64) -> MultiDomainDataset {
    generate_synthetic(&SyntheticConfig::planted_benchmark(n, seed)).expect("synthetic data")
}

/// One line per criterion, greppable in the test log.
pub fn report(id: u32, title: &str, pass: bool, detail: &str, elapsed: Duration) {
    println!(
        "criterion {id:>2} {} {title}: {detail} ({:.2}s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
}
