//! Structured tensor-product meshes of the plate box and its cross-section.
//!
//! Both meshes share the in-plane numbering `p = j (nx + 1) + i`; a 3D node
//! is `p (nz + 1) + k`, so the nodes of one fiber are contiguous.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Node on the clamped lateral boundary `∂ω × (-t, t)`.
    LateralDirichlet,
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh3D {
    pub ell: f64,
    pub half_thickness: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub nodes: Vec<[f64; 3]>,
    /// Bottom face counter-clockwise, then top face.
    pub cells: Vec<[usize; 8]>,
    pub tags: Vec<BoundaryTag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    pub ell: f64,
    pub nx: usize,
    pub ny: usize,
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise corners.
    pub cells: Vec<[usize; 4]>,
    pub tags: Vec<BoundaryTag>,
}

fn check_counts(counts: &[(&str, usize)]) -> Result<()> {
    for &(name, n) in counts {
        if n == 0 {
            return Err(Error::InvalidMesh(format!("{name} must be at least 1")));
        }
    }
    Ok(())
}

fn check_length(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidMesh(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn grid(ell: f64, n: usize, i: usize) -> f64 {
    // endpoints are hit exactly
    if i == n {
        ell
    } else {
        -ell + 2.0 * ell * (i as f64) / (n as f64)
    }
}

fn thickness_grid(t: f64, nz: usize, k: usize) -> f64 {
    if k == nz {
        t
    } else {
        -t + 2.0 * t * (k as f64) / (nz as f64)
    }
}

/// Uniform grid on `(-ell, ell)^2 x (-half_thickness, half_thickness)`.
pub fn build_plate_mesh(ell: f64, half_thickness: f64, nx: usize, ny: usize, nz: usize) -> Result<Mesh3D> {
    check_counts(&[("nx", nx), ("ny", ny), ("nz", nz)])?;
    check_length("ell", ell)?;
    check_length("half_thickness", half_thickness)?;

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    let mut tags = Vec::with_capacity(nodes.capacity());
    for j in 0..=ny {
        for i in 0..=nx {
            let lateral = i == 0 || i == nx || j == 0 || j == ny;
            for k in 0..=nz {
                nodes.push([
                    grid(ell, nx, i),
                    grid(ell, ny, j),
                    thickness_grid(half_thickness, nz, k),
                ]);
                tags.push(if lateral {
                    BoundaryTag::LateralDirichlet
                } else {
                    BoundaryTag::Free
                });
            }
        }
    }

    let node = |i: usize, j: usize, k: usize| (j * (nx + 1) + i) * (nz + 1) + k;
    let mut cells = Vec::with_capacity(nx * ny * nz);
    for j in 0..ny {
        for i in 0..nx {
            for k in 0..nz {
                cells.push([
                    node(i, j, k),
                    node(i + 1, j, k),
                    node(i + 1, j + 1, k),
                    node(i, j + 1, k),
                    node(i, j, k + 1),
                    node(i + 1, j, k + 1),
                    node(i + 1, j + 1, k + 1),
                    node(i, j + 1, k + 1),
                ]);
            }
        }
    }

    Ok(Mesh3D {
        ell,
        half_thickness,
        nx,
        ny,
        nz,
        nodes,
        cells,
        tags,
    })
}

/// Uniform grid on `(-ell, ell)^2`; all perimeter nodes are tagged.
pub fn build_section_mesh(ell: f64, nx: usize, ny: usize) -> Result<Mesh2D> {
    check_counts(&[("nx", nx), ("ny", ny)])?;
    check_length("ell", ell)?;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut tags = Vec::with_capacity(nodes.capacity());
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([grid(ell, nx, i), grid(ell, ny, j)]);
            tags.push(if i == 0 || i == nx || j == 0 || j == ny {
                BoundaryTag::LateralDirichlet
            } else {
                BoundaryTag::Free
            });
        }
    }
    let node = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push([node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]);
        }
    }
    Ok(Mesh2D {
        ell,
        nx,
        ny,
        nodes,
        cells,
        tags,
    })
}

impl Mesh3D {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn inplane_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn layers(&self) -> usize {
        self.nz + 1
    }

    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        (j * (self.nx + 1) + i) * (self.nz + 1) + k
    }

    /// 3D node at in-plane node `p` and layer `k`.
    pub fn fiber_node(&self, p: usize, k: usize) -> usize {
        p * (self.nz + 1) + k
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.ell / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        2.0 * self.ell / self.ny as f64
    }

    pub fn dz(&self) -> f64 {
        2.0 * self.half_thickness / self.nz as f64
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        let cell = &self.cells[c];
        let a = self.nodes[cell[0]];
        let b = self.nodes[cell[6]];
        (b[0] - a[0]) * (b[1] - a[1]) * (b[2] - a[2])
    }

    pub fn is_clamped(&self, node: usize) -> bool {
        self.tags[node] == BoundaryTag::LateralDirichlet
    }

    /// Same grid, different thickness. Node order and tags are preserved.
    pub fn with_half_thickness(&self, half_thickness: f64) -> Result<Mesh3D> {
        build_plate_mesh(self.ell, half_thickness, self.nx, self.ny, self.nz)
    }

    /// The cross-section grid underlying this mesh.
    pub fn section(&self) -> Mesh2D {
        build_section_mesh(self.ell, self.nx, self.ny).expect("valid 3D mesh has a valid section")
    }

    /// Same in-plane grid (extent and subdivisions).
    pub fn same_section(&self, other: &Mesh3D) -> bool {
        self.ell == other.ell && self.nx == other.nx && self.ny == other.ny
    }
}

impl Mesh2D {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.ell / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        2.0 * self.ell / self.ny as f64
    }

    pub fn is_clamped(&self, node: usize) -> bool {
        self.tags[node] == BoundaryTag::LateralDirichlet
    }

    pub fn matches(&self, mesh3d: &Mesh3D) -> bool {
        self.ell == mesh3d.ell && self.nx == mesh3d.nx && self.ny == mesh3d.ny
    }

    /// Trapezoidal quadrature weight attached to each node.
    pub fn nodal_weights(&self) -> Vec<f64> {
        let (hx, hy) = (self.dx(), self.dy());
        let mut w = Vec::with_capacity(self.node_count());
        for j in 0..=self.ny {
            let wy = if j == 0 || j == self.ny { 0.5 } else { 1.0 };
            for i in 0..=self.nx {
                let wx = if i == 0 || i == self.nx { 0.5 } else { 1.0 };
                w.push(wx * wy * hx * hy);
            }
        }
        w
    }
}
