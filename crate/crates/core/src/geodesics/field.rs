use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::mesh::{build_mesh, GridMesh};
use crate::error::{Error, Result};
use crate::geometry::{BackgroundKind, MetricSpec, Point};

const MAGIC: &[u8; 4] = b"CDF1";
/// Largest node count written by [`DistanceField::write_csv`].
pub const CSV_NODE_LIMIT: usize = 1 << 16;

/// Discrete distances `d_j(source, ·)` on every node of a mesh.
#[derive(Clone, Debug)]
pub struct DistanceField {
    mesh: Arc<GridMesh>,
    spec_hash: [u8; 32],
    spec_label: String,
    source: Point,
    source_node: usize,
    values: Vec<f64>,
}

/// Header of the binary export.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldHeader {
    pub kind: BackgroundKind,
    pub n: u64,
    pub stencil_order: u8,
    pub side: f64,
    pub spec_hash: [u8; 32],
    pub source_node: u64,
}

impl DistanceField {
    pub(crate) fn new(mesh: Arc<GridMesh>, spec: &MetricSpec, source: Point, source_node: usize, values: Vec<f64>) -> Self {
        DistanceField {
            mesh,
            spec_hash: spec.hash(),
            spec_label: spec.label.clone(),
            source,
            source_node,
            values,
        }
    }

    pub fn mesh(&self) -> &GridMesh {
        &self.mesh
    }

    pub fn spec_hash(&self) -> [u8; 32] {
        self.spec_hash
    }

    pub fn spec_label(&self) -> &str {
        &self.spec_label
    }

    pub fn source(&self) -> &Point {
        &self.source
    }

    pub fn source_node(&self) -> usize {
        self.source_node
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at the node nearest to `p`.
    pub fn at(&self, p: &Point) -> Result<f64> {
        Ok(self.values[self.mesh.nearest_node(p)?])
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn header(&self) -> FieldHeader {
        let bg = self.mesh.background();
        FieldHeader {
            kind: bg.kind,
            n: self.mesh.n() as u64,
            stencil_order: self.mesh.stencil_order(),
            side: bg.side,
            spec_hash: self.spec_hash,
            source_node: self.source_node as u64,
        }
    }

    /// Flat little-endian binary: magic, kind, k, n, L, spec hash, source
    /// node, value count, then the values in node (row-major) order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = self.header();
        let mut out = Vec::with_capacity(72 + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.push(match h.kind {
            BackgroundKind::FlatTorus => 0,
            BackgroundKind::RoundSphere => 1,
        });
        out.push(h.stencil_order);
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&h.n.to_le_bytes());
        out.extend_from_slice(&h.side.to_le_bytes());
        out.extend_from_slice(&h.spec_hash);
        out.extend_from_slice(&h.source_node.to_le_bytes());
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Parses a binary export back into its header and values.
    pub fn read_binary(path: &Path) -> Result<(FieldHeader, Vec<f64>)> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::parse_bytes(&bytes)
    }

    pub fn parse_bytes(bytes: &[u8]) -> Result<(FieldHeader, Vec<f64>)> {
        let bad = |why: &str| Error::Serialization(format!("distance field: {why}"));
        if bytes.len() < 72 || &bytes[..4] != MAGIC {
            return Err(bad("missing header"));
        }
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let kind = match bytes[4] {
            0 => BackgroundKind::FlatTorus,
            1 => BackgroundKind::RoundSphere,
            _ => return Err(bad("unknown background kind")),
        };
        let mut spec_hash = [0u8; 32];
        spec_hash.copy_from_slice(&bytes[24..56]);
        let header = FieldHeader {
            kind,
            stencil_order: bytes[5],
            n: u64_at(8),
            side: f64::from_bits(u64_at(16)),
            spec_hash,
            source_node: u64_at(56),
        };
        let count = u64_at(64) as usize;
        let payload = &bytes[72..];
        if payload.len() != 8 * count {
            return Err(bad("payload length does not match header"));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((header, values))
    }

    /// Rebuilds the mesh described by a header.
    pub fn mesh_from_header(h: &FieldHeader) -> Result<GridMesh> {
        let bg = match h.kind {
            BackgroundKind::FlatTorus => crate::geometry::Background::flat_torus(2, h.side)?,
            BackgroundKind::RoundSphere => crate::geometry::Background::round_sphere(2)?,
        };
        build_mesh(&bg, h.n as usize, h.stencil_order)
    }

    /// `node,x,y,distance` rows; refused above [`CSV_NODE_LIMIT`] nodes.
    pub fn to_csv(&self) -> Result<String> {
        if self.values.len() > CSV_NODE_LIMIT {
            return Err(Error::param(
                "mesh",
                format!("{} nodes exceed the CSV export limit {CSV_NODE_LIMIT}", self.values.len()),
            ));
        }
        let mut s = String::from("node,x,y,distance\n");
        for (i, v) in self.values.iter().enumerate() {
            let [x, y] = self.mesh.node_coords(i);
            writeln!(s, "{i},{x:.17e},{y:.17e},{v:.17e}").unwrap();
        }
        Ok(s)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let text = self.to_csv()?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesics::Solver;
    use crate::geometry::Background;

    fn field() -> DistanceField {
        let bg = Background::standard_torus(2);
        let mesh = build_mesh(&bg, 16, 2).unwrap();
        let spec = MetricSpec::background_metric(bg);
        Solver::new(&spec, &mesh, 8).unwrap().solve(&bg.point(&[1.0, 2.0]).unwrap()).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let f = field();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        f.write_binary(&path).unwrap();
        let (h, values) = DistanceField::read_binary(&path).unwrap();
        assert_eq!(h, f.header());
        assert_eq!(values, f.values());
        assert_eq!(DistanceField::mesh_from_header(&h).unwrap(), *f.mesh());
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 72 + 8 * 256);
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let bytes = field().to_bytes();
        assert!(DistanceField::parse_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(DistanceField::parse_bytes(b"nope").is_err());
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let f = field();
        let text = f.to_csv().unwrap();
        assert_eq!(text.lines().count(), 257);
        assert!(text.starts_with("node,x,y,distance\n0,"));
        assert_eq!(f.values()[f.source_node()], 0.0);
    }
}
