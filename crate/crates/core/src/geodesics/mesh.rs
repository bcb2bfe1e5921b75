use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Background, BackgroundKind, Point};

/// Half of the symmetric stencil: `o` is listed iff `−o` is not.
const HALF_STENCIL: [(i64, i64); 8] = [(1, 0), (0, 1), (1, 1), (1, -1), (1, 2), (2, 1), (1, -2), (2, -1)];

/// Number of half-stencil offsets for stencil order 1, 2, 3 (4-, 8-, 16-neighbour).
fn half_len(order: u8) -> usize {
    match order {
        1 => 2,
        2 => 4,
        _ => 8,
    }
}

/// Worst-case ratio between the stencil path length and the Euclidean length
/// for `f ≡ 1`: `1 / cos(θ/2)` with `θ` the largest angle between adjacent
/// stencil directions.
pub fn metrication_factor(stencil_order: u8) -> f64 {
    match stencil_order {
        1 => 2f64.sqrt(),
        2 => 1.0 / (PI / 8.0).cos(),
        _ => 1.0 / (0.5f64.atan() / 2.0).cos(),
    }
}

#[derive(Clone, Debug)]
pub(crate) struct SphereLayout {
    pub nphi: usize,
    pub dr: f64,
    pub dphi: f64,
    /// Undirected edges, each listed once with `a < b`.
    pub edges: Vec<(u32, u32)>,
    /// CSR offsets into `adj`.
    pub adj_start: Vec<u32>,
    /// `(neighbour, edge id)`.
    pub adj: Vec<(u32, u32)>,
}

#[derive(Clone, Debug)]
pub(crate) enum Layout {
    Torus { h: f64 },
    Sphere(SphereLayout),
}

/// A periodic lattice on a flat 2-torus, or an `(r, φ)` lattice on the round
/// 2-sphere with pole nodes, together with its neighbour stencil.
#[derive(Clone, Debug)]
pub struct GridMesh {
    background: Background,
    n: usize,
    stencil_order: u8,
    pub(crate) layout: Layout,
}

impl PartialEq for GridMesh {
    fn eq(&self, other: &Self) -> bool {
        self.background == other.background && self.n == other.n && self.stencil_order == other.stencil_order
    }
}

/// Builds a mesh with `n` nodes per period (torus) or `n` polar intervals
/// (sphere, `2n` azimuthal nodes per ring).
pub fn build_mesh(bg: &Background, n: usize, stencil_order: u8) -> Result<GridMesh> {
    bg.validate()?;
    if n < 16 {
        return Err(Error::param("n", format!("must be >= 16, got {n}")));
    }
    if !(1..=3).contains(&stencil_order) {
        return Err(Error::param("stencil_order", format!("must be 1, 2 or 3, got {stencil_order}")));
    }
    if bg.dim != 2 {
        return Err(Error::Unsupported(format!("meshes are two-dimensional; got dim {}", bg.dim)));
    }
    let layout = match bg.kind {
        BackgroundKind::FlatTorus => Layout::Torus { h: bg.side / n as f64 },
        BackgroundKind::RoundSphere => Layout::Sphere(sphere_layout(n, stencil_order)),
    };
    Ok(GridMesh {
        background: *bg,
        n,
        stencil_order,
        layout,
    })
}

fn sphere_layout(n: usize, order: u8) -> SphereLayout {
    let nphi = 2 * n;
    let nodes = 2 + (n - 1) * nphi;
    let south = (nodes - 1) as u32;
    let ring_node = |i: usize, k: i64| -> u32 { (1 + (i - 1) * nphi + k.rem_euclid(nphi as i64) as usize) as u32 };
    let mut edges = Vec::new();
    for i in 1..n {
        for k in 0..nphi as i64 {
            let u = ring_node(i, k);
            for &(a, b) in &HALF_STENCIL[..half_len(order)] {
                for (di, dk) in [(a, b), (-a, -b)] {
                    let t = i as i64 + di;
                    let v = if t == 0 {
                        0
                    } else if t == n as i64 {
                        south
                    } else if t > 0 && t < n as i64 {
                        ring_node(t as usize, k + dk)
                    } else {
                        continue;
                    };
                    edges.push((u.min(v), u.max(v)));
                }
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let mut degree = vec![0u32; nodes];
    for &(a, b) in &edges {
        degree[a as usize] += 1;
        degree[b as usize] += 1;
    }
    let mut adj_start = Vec::with_capacity(nodes + 1);
    let mut acc = 0u32;
    adj_start.push(0);
    for d in &degree {
        acc += d;
        adj_start.push(acc);
    }
    let mut fill = adj_start.clone();
    let mut adj = vec![(0u32, 0u32); acc as usize];
    for (id, &(a, b)) in edges.iter().enumerate() {
        adj[fill[a as usize] as usize] = (b, id as u32);
        fill[a as usize] += 1;
        adj[fill[b as usize] as usize] = (a, id as u32);
        fill[b as usize] += 1;
    }
    SphereLayout {
        nphi,
        dr: PI / n as f64,
        dphi: 2.0 * PI / nphi as f64,
        edges,
        adj_start,
        adj,
    }
}

impl GridMesh {
    pub fn background(&self) -> &Background {
        &self.background
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stencil_order(&self) -> u8 {
        self.stencil_order
    }

    pub fn node_count(&self) -> usize {
        match &self.layout {
            Layout::Torus { .. } => self.n * self.n,
            Layout::Sphere(s) => 2 + (self.n - 1) * s.nphi,
        }
    }

    /// Node count a mesh of this size would have, without building it.
    pub fn planned_nodes(bg: &Background, n: usize) -> usize {
        match bg.kind {
            BackgroundKind::FlatTorus => n * n,
            BackgroundKind::RoundSphere => 2 + (n.saturating_sub(1)) * 2 * n,
        }
    }

    /// Node spacing `h` (torus) or polar spacing `Δr` (sphere).
    pub fn spacing(&self) -> f64 {
        match &self.layout {
            Layout::Torus { h } => *h,
            Layout::Sphere(s) => s.dr,
        }
    }

    pub fn metrication_factor(&self) -> f64 {
        metrication_factor(self.stencil_order)
    }

    pub(crate) fn half_offsets(&self) -> &'static [(i64, i64)] {
        &HALF_STENCIL[..half_len(self.stencil_order)]
    }

    pub fn node_coords(&self, i: usize) -> [f64; 2] {
        match &self.layout {
            Layout::Torus { h } => [(i / self.n) as f64 * h, (i % self.n) as f64 * h],
            Layout::Sphere(s) => {
                let last = self.node_count() - 1;
                if i == 0 {
                    [0.0, 0.0]
                } else if i == last {
                    [PI, 0.0]
                } else {
                    let ring = (i - 1) / s.nphi + 1;
                    let k = (i - 1) % s.nphi;
                    [ring as f64 * s.dr, k as f64 * s.dphi]
                }
            }
        }
    }

    pub fn node_point(&self, i: usize) -> Point {
        Point::new(self.node_coords(i).to_vec())
    }

    /// `g₀`-area of the cell owned by node `i`.
    pub fn cell_area(&self, i: usize) -> f64 {
        match &self.layout {
            Layout::Torus { h } => h * h,
            Layout::Sphere(s) => {
                let last = self.node_count() - 1;
                if i == 0 || i == last {
                    2.0 * PI * (1.0 - (s.dr / 2.0).cos())
                } else {
                    let r = self.node_coords(i)[0];
                    s.dphi * ((r - s.dr / 2.0).cos() - (r + s.dr / 2.0).cos())
                }
            }
        }
    }

    pub fn total_area(&self) -> f64 {
        (0..self.node_count()).map(|i| self.cell_area(i)).sum()
    }

    /// Index of the mesh node closest to `p` (ties go to the lower index).
    pub fn nearest_node(&self, p: &Point) -> Result<usize> {
        self.background.check(p)?;
        let c = &p.coords;
        Ok(match &self.layout {
            Layout::Torus { h } => {
                let a = (c[0] / h).round() as usize % self.n;
                let b = (c[1] / h).round() as usize % self.n;
                a * self.n + b
            }
            Layout::Sphere(s) => {
                let ring = (c[0] / s.dr).round() as usize;
                if ring == 0 {
                    0
                } else if ring >= self.n {
                    self.node_count() - 1
                } else {
                    let k = (c[1] / s.dphi).round() as usize % s.nphi;
                    1 + (ring - 1) * s.nphi + k
                }
            }
        })
    }

    /// Neighbours of node `i` (used by tests and diagnostics; the solver
    /// walks the stencil directly).
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        match &self.layout {
            Layout::Torus { .. } => {
                let n = self.n as i64;
                let (a, b) = ((i / self.n) as i64, (i % self.n) as i64);
                let mut out = Vec::new();
                for &(da, db) in self.half_offsets() {
                    for s in [1, -1] {
                        let x = (a + s * da).rem_euclid(n);
                        let y = (b + s * db).rem_euclid(n);
                        out.push((x * n + y) as usize);
                    }
                }
                out
            }
            Layout::Sphere(s) => {
                let lo = s.adj_start[i] as usize;
                let hi = s.adj_start[i + 1] as usize;
                s.adj[lo..hi].iter().map(|&(v, _)| v as usize).collect()
            }
        }
    }
}
