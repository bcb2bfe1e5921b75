use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use super::field::DistanceField;
use super::mesh::{GridMesh, Layout};
use crate::error::{Error, Result};
use crate::geometry::{polar_to_unit, sphere_arc, torus_segment, MetricSpec, Point};
use crate::par::{self, Execution};

pub const DEFAULT_SIMPSON_NODES: usize = 8;
/// Minimum Simpson intervals on edges near a bump support.
pub const BUMP_SIMPSON_NODES: usize = 32;

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    d: f64,
    node: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties broken by node index
        other.d.total_cmp(&self.d).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Stencil shortest-path solver for one `(spec, mesh)` pair.
///
/// Edge weights are integrated once at construction; each solve then runs a
/// sequential Dijkstra over the implicit lattice.
#[derive(Clone, Debug)]
pub struct Solver {
    spec: Arc<MetricSpec>,
    mesh: Arc<GridMesh>,
    simpson_nodes: usize,
    /// Torus: `weights[u * H + o]` is the edge `u → u + offset[o]`.
    /// Sphere: indexed by edge id.
    weights: Vec<f64>,
}

impl Solver {
    pub fn new(spec: &MetricSpec, mesh: &GridMesh, simpson_nodes: usize) -> Result<Self> {
        Self::with_execution(spec, mesh, simpson_nodes, Execution::default())
    }

    pub fn with_execution(spec: &MetricSpec, mesh: &GridMesh, simpson_nodes: usize, exec: Execution) -> Result<Self> {
        if mesh.background() != &spec.background {
            return Err(Error::Mismatch("mesh background differs from the spec background".into()));
        }
        if simpson_nodes == 0 {
            return Err(Error::param("simpson_nodes", "must be >= 1"));
        }
        let weights = edge_weights(spec, mesh, simpson_nodes, exec);
        if let Some(bad) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidMetric(format!("edge {bad} has nonpositive weight {}", weights[bad])));
        }
        Ok(Solver {
            spec: Arc::new(spec.clone()),
            mesh: Arc::new(mesh.clone()),
            simpson_nodes,
            weights,
        })
    }

    pub fn spec(&self) -> &MetricSpec {
        &self.spec
    }

    pub fn mesh(&self) -> &GridMesh {
        &self.mesh
    }

    pub fn simpson_nodes(&self) -> usize {
        self.simpson_nodes
    }

    /// Distances from `source` (snapped to its nearest node) to every node.
    pub fn solve(&self, source: &Point) -> Result<DistanceField> {
        let node = self.mesh.nearest_node(source)?;
        Ok(DistanceField::new(
            Arc::clone(&self.mesh),
            &self.spec,
            source.clone(),
            node,
            self.solve_node(node),
        ))
    }

    /// One field per source, solved concurrently; output order matches input.
    pub fn solve_many(&self, sources: &[Point], exec: Execution) -> Result<Vec<DistanceField>> {
        par::try_map_slice(exec, sources, |s| self.solve(s))
    }

    pub fn solve_node(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.mesh.node_count()];
        self.run(source, &mut dist, |_| false);
        dist
    }

    /// Node-snapped distance between two points; stops once `q` is settled.
    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        let a = self.mesh.nearest_node(p)?;
        let b = self.mesh.nearest_node(q)?;
        Ok(self.node_distance(a, b))
    }

    pub fn node_distance(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        let mut dist = vec![f64::INFINITY; self.mesh.node_count()];
        self.run(a, &mut dist, |u| u == b);
        dist[b]
    }

    /// Distances from `source` to each of `targets`, stopping once all are settled.
    pub fn node_distances(&self, source: usize, targets: &[usize]) -> Vec<f64> {
        let mut want = vec![false; self.mesh.node_count()];
        let mut remaining = 0usize;
        for &t in targets {
            if !want[t] {
                want[t] = true;
                remaining += 1;
            }
        }
        let mut dist = vec![f64::INFINITY; self.mesh.node_count()];
        self.run(source, &mut dist, |u| {
            if want[u] {
                remaining -= 1;
            }
            remaining == 0
        });
        targets.iter().map(|&t| dist[t]).collect()
    }

    /// Dijkstra from `source`; `settled` returns true to stop early.
    fn run(&self, source: usize, dist: &mut [f64], mut settled: impl FnMut(usize) -> bool) {
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry { d: 0.0, node: source as u32 });
        let relax = |heap: &mut BinaryHeap<Entry>, dist: &mut [f64], v: usize, nd: f64| {
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry { d: nd, node: v as u32 });
            }
        };
        while let Some(Entry { d, node }) = heap.pop() {
            let u = node as usize;
            if d > dist[u] {
                continue;
            }
            if settled(u) {
                return;
            }
            match &self.mesh.layout {
                Layout::Torus { .. } => {
                    let n = self.mesh.n() as i64;
                    let offsets = self.mesh.half_offsets();
                    let hl = offsets.len();
                    let (a, b) = ((u as i64) / n, (u as i64) % n);
                    for (o, &(da, db)) in offsets.iter().enumerate() {
                        let fwd = ((a + da).rem_euclid(n) * n + (b + db).rem_euclid(n)) as usize;
                        relax(&mut heap, dist, fwd, d + self.weights[u * hl + o]);
                        let back = ((a - da).rem_euclid(n) * n + (b - db).rem_euclid(n)) as usize;
                        relax(&mut heap, dist, back, d + self.weights[back * hl + o]);
                    }
                }
                Layout::Sphere(s) => {
                    let lo = s.adj_start[u] as usize;
                    let hi = s.adj_start[u + 1] as usize;
                    for &(v, e) in &s.adj[lo..hi] {
                        relax(&mut heap, dist, v as usize, d + self.weights[e as usize]);
                    }
                }
            }
        }
    }
}

/// Integration intervals for an edge from `x` of background length `len`.
fn intervals_for(spec: &MetricSpec, support: &Option<(Vec<Point>, f64)>, x: &[f64], len: f64, base: usize) -> usize {
    match support {
        Some((centers, radius)) => {
            let near = centers
                .iter()
                .any(|c| spec.background.distance_raw(&c.coords, x) <= radius + len);
            if near {
                base.max(BUMP_SIMPSON_NODES)
            } else {
                base
            }
        }
        None => base,
    }
}

fn edge_weights(spec: &MetricSpec, mesh: &GridMesh, simpson_nodes: usize, exec: Execution) -> Vec<f64> {
    let support = spec.factor.bump_support();
    match &mesh.layout {
        Layout::Torus { h } => {
            let offsets = mesh.half_offsets();
            let hl = offsets.len();
            par::map_range(exec, mesh.node_count() * hl, |idx| {
                let (u, o) = (idx / hl, idx % hl);
                let x = mesh.node_coords(u);
                let disp = [offsets[o].0 as f64 * h, offsets[o].1 as f64 * h];
                let len = disp[0].hypot(disp[1]);
                let k = intervals_for(spec, &support, &x, len, simpson_nodes);
                torus_segment(spec, &x, &disp, k)
            })
        }
        Layout::Sphere(s) => par::map_slice(exec, &s.edges, |&(a, b)| {
            let pa = mesh.node_coords(a as usize);
            let pb = mesh.node_coords(b as usize);
            let (u, v) = (polar_to_unit(pa[0], pa[1]), polar_to_unit(pb[0], pb[1]));
            let len = spec.background.distance_raw(&pa, &pb);
            let k = intervals_for(spec, &support, &pa, len, simpson_nodes);
            sphere_arc(spec, u, v, k)
        }),
    }
}
