use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{Point, TetMesh};
use crate::error::{Error, Result};

/// Writes the ASCII mesh format.
///
/// Floats use the shortest representation that round-trips, so
/// `read_mesh(write_mesh(m))` reproduces every coordinate bit for bit.
pub fn write_mesh<W: Write>(mesh: &TetMesh, mut out: W) -> Result<()> {
    out.write_all(mesh_to_string(mesh).as_bytes())?;
    Ok(())
}

pub(crate) fn mesh_to_string(mesh: &TetMesh) -> String {
    let mut s = String::with_capacity(40 * (mesh.n_vertices() + mesh.n_tets()));
    let _ = writeln!(s, "tetmesh {} {}", mesh.n_vertices(), mesh.n_tets());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?} {:?}", v[0], v[1], v[2]);
    }
    for t in mesh.tets() {
        let _ = writeln!(s, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    s
}

/// SHA-256 of the serialized mesh, as lowercase hex.
pub fn mesh_hash(mesh: &TetMesh) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(mesh_to_string(mesh).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_mesh<R: BufRead>(input: R) -> Result<TetMesh> {
    let mut lines = input.lines().filter(|l| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
    let header = lines.next().ok_or_else(|| Error::Parse("empty mesh file".into()))??;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("tetmesh") {
        return Err(Error::Parse(format!("bad mesh header `{header}`")));
    }
    let mut count = || -> Result<usize> {
        fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad mesh header `{header}`")))
    };
    let (nv, nt) = (count()?, count()?);
    let mut vertices: Vec<Point> = Vec::with_capacity(nv);
    for i in 0..nv {
        let line = lines.next().ok_or_else(|| Error::Parse(format!("missing vertex {i}")))??;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("vertex {i}: {e}"))))
            .collect::<Result<_>>()?;
        if v.len() != 3 {
            return Err(Error::Parse(format!("vertex {i}: expected 3 coordinates")));
        }
        vertices.push([v[0], v[1], v[2]]);
    }
    let mut tets = Vec::with_capacity(nt);
    for i in 0..nt {
        let line = lines.next().ok_or_else(|| Error::Parse(format!("missing tet {i}")))??;
        let t: Vec<usize> = line
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|e| Error::Parse(format!("tet {i}: {e}"))))
            .collect::<Result<_>>()?;
        if t.len() != 4 {
            return Err(Error::Parse(format!("tet {i}: expected 4 indices")));
        }
        tets.push([t[0], t[1], t[2], t[3]]);
    }
    TetMesh::from_parts(vertices, tets)
}
