//! Labeled regular hexahedral meshes and their element/face/vertex topology.
//!
//! Cells carry a compartment label; label 0 is reserved for exterior/air and
//! is excluded from the computational domain. Faces are enumerated
//! deterministically (by axis, then cell index) with normals fixed along the
//! positive grid axes, so downstream matrix signs are reproducible.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const NO_ELEMENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub fn all() -> [Axis; 3] {
        [Axis::X, Axis::Y, Axis::Z]
    }

    pub fn unit(self) -> [f64; 3] {
        let mut n = [0.0; 3];
        n[self as usize] = 1.0;
        n
    }
}

/// One grid face. The normal points along the positive `axis` direction,
/// from `minus` to `plus`. Boundary faces have exactly one incident element.
#[derive(Debug, Clone, Copy)]
pub struct Face {
    pub axis: Axis,
    /// Element on the negative side of the face, or `NO_ELEMENT`.
    pub minus: u32,
    /// Element on the positive side of the face, or `NO_ELEMENT`.
    pub plus: u32,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        self.minus != NO_ELEMENT && self.plus != NO_ELEMENT
    }
}

/// Compartment label table: label -> (name, conductivity in S/m).
#[derive(Debug, Clone)]
pub struct CompartmentTable {
    entries: Vec<(u8, String, f64)>,
}

impl CompartmentTable {
    pub fn new(entries: Vec<(u8, String, f64)>) -> Result<Self> {
        for (label, name, sigma) in &entries {
            if *label == 0 {
                return Err(Error::Validation("label 0 is reserved for exterior".into()));
            }
            if *sigma <= 0.0 {
                return Err(Error::Validation(format!(
                    "conductivity for '{name}' must be positive, got {sigma}"
                )));
            }
        }
        let mut labels: Vec<u8> = entries.iter().map(|e| e.0).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("duplicate compartment labels".into()));
        }
        Ok(CompartmentTable { entries })
    }

    /// Brain/CSF/skull/skin table of the four-layer sphere studies.
    pub fn standard_four_layer() -> Self {
        CompartmentTable::new(vec![
            (1, "brain".into(), 0.33),
            (2, "csf".into(), 1.79),
            (3, "skull".into(), 0.01),
            (4, "skin".into(), 0.43),
        ])
        .unwrap()
    }

    pub fn sigma(&self, label: u8) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == label).map(|e| e.2)
    }

    pub fn name(&self, label: u8) -> Option<&str> {
        self.entries.iter().find(|e| e.0 == label).map(|e| e.1.as_str())
    }

    pub fn labels(&self) -> impl Iterator<Item = u8> + '_ {
        self.entries.iter().map(|e| e.0)
    }
}

/// Placement of the sphere center relative to the grid.
///
/// Leak counts of thin-skull models depend on this choice; `CellCorner`
/// reproduces the reference sphere-model element/face/leak counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Centering {
    #[default]
    CellCorner,
    CellCenter,
}

/// Concentric-sphere mesh specification.
#[derive(Debug, Clone)]
pub struct SphereSpec {
    /// Layer outer radii in mm, strictly increasing, outermost last.
    pub radii: Vec<f64>,
    /// Label per layer, innermost first.
    pub labels: Vec<u8>,
    /// Edge length h in mm.
    pub spacing: f64,
    pub centering: Centering,
}

impl SphereSpec {
    /// Four-layer model: brain 78 / CSF 80 / skull 86 / skin 92 mm.
    pub fn standard_four_layer(spacing: f64) -> Self {
        SphereSpec {
            radii: vec![78.0, 80.0, 86.0, 92.0],
            labels: vec![1, 2, 3, 4],
            spacing,
            centering: Centering::CellCorner,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.spacing <= 0.0 {
            return Err(Error::Validation("spacing must be positive".into()));
        }
        if self.radii.is_empty() || self.radii.len() != self.labels.len() {
            return Err(Error::Validation("radii/labels length mismatch".into()));
        }
        if self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("radii must be strictly increasing".into()));
        }
        if self.radii[0] <= 0.0 {
            return Err(Error::Validation("radii must be positive".into()));
        }
        if self.labels.contains(&0) {
            return Err(Error::Validation("layer label 0 is reserved for exterior".into()));
        }
        Ok(())
    }
}

/// Regular hexahedral mesh with per-cell labels and precomputed topology.
#[derive(Debug, Clone)]
pub struct HexMesh {
    dims: [usize; 3],
    spacing: f64,
    origin: [f64; 3],
    labels: Vec<u8>,
    /// element -> cell index
    element_cells: Vec<u32>,
    /// cell -> element index or NO_ELEMENT
    cell_elements: Vec<u32>,
    faces: Vec<Face>,
    /// element -> face ids in order [x-,x+,y-,y+,z-,z+]
    element_faces: Vec<[u32; 6]>,
    n_interior_faces: usize,
}

impl HexMesh {
    /// Build a mesh from raw grid data. Labels are in x-fastest order.
    pub fn from_labels(
        dims: [usize; 3],
        spacing: f64,
        origin: [f64; 3],
        labels: Vec<u8>,
    ) -> Result<Self> {
        if spacing <= 0.0 {
            return Err(Error::Validation("spacing must be positive".into()));
        }
        if dims.iter().any(|&d| d < 1) {
            return Err(Error::Dimension("all grid dimensions must be >= 1".into()));
        }
        let ncells = dims[0] * dims[1] * dims[2];
        if labels.len() != ncells {
            return Err(Error::Dimension(format!(
                "label payload has {} entries, grid has {} cells",
                labels.len(),
                ncells
            )));
        }
        if labels.iter().all(|&l| l == 0) {
            return Err(Error::Validation("empty domain: all cells labeled exterior".into()));
        }

        let mut element_cells = Vec::new();
        let mut cell_elements = vec![NO_ELEMENT; ncells];
        for (cell, &label) in labels.iter().enumerate() {
            if label != 0 {
                cell_elements[cell] = element_cells.len() as u32;
                element_cells.push(cell as u32);
            }
        }

        let mut mesh = HexMesh {
            dims,
            spacing,
            origin,
            labels,
            element_cells,
            cell_elements,
            faces: Vec::new(),
            element_faces: Vec::new(),
            n_interior_faces: 0,
        };
        mesh.build_faces();
        Ok(mesh)
    }

    // Face enumeration: by axis, then cell index; within a cell the minus-side
    // boundary face (if any) precedes the plus-side face. Interior faces are
    // owned by their minus-side cell.
    fn build_faces(&mut self) {
        let ne = self.element_cells.len();
        let mut faces = Vec::new();
        let mut element_faces = vec![[NO_ELEMENT; 6]; ne];
        let mut interior = 0usize;
        for axis in Axis::all() {
            let a = axis as usize;
            for cell in 0..self.labels.len() {
                if self.labels[cell] == 0 {
                    continue;
                }
                let e = self.cell_elements[cell];
                let ijk = self.cell_ijk(cell);
                // minus-side neighbor
                let minus_elem = if ijk[a] > 0 {
                    let mut n = ijk;
                    n[a] -= 1;
                    self.cell_elements[self.cell_index(n)]
                } else {
                    NO_ELEMENT
                };
                if minus_elem == NO_ELEMENT {
                    let fid = faces.len() as u32;
                    faces.push(Face { axis, minus: NO_ELEMENT, plus: e });
                    element_faces[e as usize][2 * a] = fid;
                }
                // plus-side neighbor
                let plus_elem = if ijk[a] + 1 < self.dims[a] {
                    let mut n = ijk;
                    n[a] += 1;
                    self.cell_elements[self.cell_index(n)]
                } else {
                    NO_ELEMENT
                };
                let fid = faces.len() as u32;
                faces.push(Face { axis, minus: e, plus: plus_elem });
                element_faces[e as usize][2 * a + 1] = fid;
                if plus_elem != NO_ELEMENT {
                    element_faces[plus_elem as usize][2 * a] = fid;
                    interior += 1;
                }
            }
        }
        self.faces = faces;
        self.element_faces = element_faces;
        self.n_interior_faces = interior;
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n_elements(&self) -> usize {
        self.element_cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_interior_faces(&self) -> usize {
        self.n_interior_faces
    }

    pub fn n_boundary_faces(&self) -> usize {
        self.faces.len() - self.n_interior_faces
    }

    pub fn face(&self, f: u32) -> &Face {
        &self.faces[f as usize]
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn element_faces(&self, e: u32) -> [u32; 6] {
        self.element_faces[e as usize]
    }

    pub fn element_cell(&self, e: u32) -> usize {
        self.element_cells[e as usize] as usize
    }

    pub fn element_label(&self, e: u32) -> u8 {
        self.labels[self.element_cell(e)]
    }

    pub fn cell_index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.dims[0] * (ijk[1] + self.dims[1] * ijk[2])
    }

    pub fn cell_ijk(&self, cell: usize) -> [usize; 3] {
        let i = cell % self.dims[0];
        let j = (cell / self.dims[0]) % self.dims[1];
        let k = cell / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn element_centroid(&self, e: u32) -> [f64; 3] {
        let ijk = self.cell_ijk(self.element_cell(e));
        [
            self.origin[0] + (ijk[0] as f64 + 0.5) * self.spacing,
            self.origin[1] + (ijk[1] as f64 + 0.5) * self.spacing,
            self.origin[2] + (ijk[2] as f64 + 0.5) * self.spacing,
        ]
    }

    /// Corner of the element with the smallest coordinates.
    pub fn element_min_corner(&self, e: u32) -> [f64; 3] {
        let ijk = self.cell_ijk(self.element_cell(e));
        [
            self.origin[0] + ijk[0] as f64 * self.spacing,
            self.origin[1] + ijk[1] as f64 * self.spacing,
            self.origin[2] + ijk[2] as f64 * self.spacing,
        ]
    }

    pub fn face_centroid(&self, f: u32) -> [f64; 3] {
        let face = self.faces[f as usize];
        let a = face.axis as usize;
        if face.minus != NO_ELEMENT {
            let mut c = self.element_centroid(face.minus);
            c[a] += 0.5 * self.spacing;
            c
        } else {
            let mut c = self.element_centroid(face.plus);
            c[a] -= 0.5 * self.spacing;
            c
        }
    }

    /// Element containing a point, if any. Points exactly on a face plane are
    /// assigned to the minus-side cell (deterministic tie-break).
    pub fn locate(&self, p: [f64; 3]) -> Option<u32> {
        let mut ijk = [0usize; 3];
        for a in 0..3 {
            let t = (p[a] - self.origin[a]) / self.spacing;
            if t <= 0.0 || t >= self.dims[a] as f64 {
                return None;
            }
            let f = t.floor();
            let idx = if t == f { f as usize - 1 } else { f as usize };
            ijk[a] = idx;
        }
        let e = self.cell_elements[self.cell_index(ijk)];
        if e == NO_ELEMENT {
            None
        } else {
            Some(e)
        }
    }

    /// Count vertices whose incident elements include both labels.
    /// Symmetric in its arguments.
    pub fn count_leaks(&self, label_a: u8, label_b: u8) -> Result<usize> {
        for l in [label_a, label_b] {
            if !self.labels.contains(&l) {
                return Err(Error::Validation(format!("label {l} not present in mesh")));
            }
        }
        let [nx, ny, nz] = self.dims;
        let mut count = 0usize;
        for vk in 0..=nz {
            for vj in 0..=ny {
                for vi in 0..=nx {
                    let mut has_a = false;
                    let mut has_b = false;
                    for dk in 0..2usize {
                        for dj in 0..2usize {
                            for di in 0..2usize {
                                if vi < di || vj < dj || vk < dk {
                                    continue;
                                }
                                let (ci, cj, ck) = (vi - di, vj - dj, vk - dk);
                                if ci >= nx || cj >= ny || ck >= nz {
                                    continue;
                                }
                                let l = self.labels[self.cell_index([ci, cj, ck])];
                                has_a |= l == label_a;
                                has_b |= l == label_b;
                            }
                        }
                    }
                    if has_a && has_b {
                        count += 1;
                    }
                }
            }
        }
        Ok(count)
    }

    /// Write the `HXM1` labeled-voxel format: one ASCII header line
    /// `HXM1 nx ny nz spacing_mm ox oy oz` followed by raw u8 labels in
    /// x-fastest order.
    pub fn write_hxm(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(
            w,
            "HXM1 {} {} {} {:.16e} {:.16e} {:.16e} {:.16e}",
            self.dims[0], self.dims[1], self.dims[2], self.spacing, self.origin[0],
            self.origin[1], self.origin[2]
        )?;
        w.write_all(&self.labels)?;
        Ok(())
    }
}

/// Generate a concentric-sphere mesh. Each cell is labeled by the innermost
/// layer whose radius is at least the distance from the cell centroid to the
/// sphere center; cells beyond the outermost radius get label 0. The grid is
/// sized to hold the outermost sphere plus one cell of air padding.
pub fn generate_sphere_mesh(spec: &SphereSpec) -> Result<HexMesh> {
    spec.validate()?;
    let h = spec.spacing;
    let r_out = *spec.radii.last().unwrap();
    let n_half = (r_out / h).ceil() as usize + 1;
    let (dims, origin) = match spec.centering {
        Centering::CellCorner => {
            let n = 2 * n_half;
            (n, -(n_half as f64) * h)
        }
        Centering::CellCenter => {
            let n = 2 * n_half + 1;
            (n, -(n_half as f64 + 0.5) * h)
        }
    };
    let dims = [dims; 3];
    let origin = [origin; 3];
    let mut labels = vec![0u8; dims[0] * dims[1] * dims[2]];
    let mut idx = 0;
    for k in 0..dims[2] {
        let z = origin[2] + (k as f64 + 0.5) * h;
        for j in 0..dims[1] {
            let y = origin[1] + (j as f64 + 0.5) * h;
            for i in 0..dims[0] {
                let x = origin[0] + (i as f64 + 0.5) * h;
                let d = (x * x + y * y + z * z).sqrt();
                for (layer, &r) in spec.radii.iter().enumerate() {
                    if d <= r {
                        labels[idx] = spec.labels[layer];
                        break;
                    }
                }
                idx += 1;
            }
        }
    }
    HexMesh::from_labels(dims, h, origin, labels)
}

/// Sphere mesh with the skull outer radius overridden, producing the
/// thin-skull "leaky" model family.
pub fn generate_leaky_sphere(spec: &SphereSpec, skull_outer_radius: f64) -> Result<HexMesh> {
    spec.validate()?;
    let n = spec.radii.len();
    if n < 3 {
        return Err(Error::Validation("leaky variant needs at least three layers".into()));
    }
    let csf_r = spec.radii[n - 3];
    let skin_r = spec.radii[n - 1];
    if skull_outer_radius <= csf_r || skull_outer_radius >= skin_r {
        return Err(Error::Validation(format!(
            "skull outer radius {skull_outer_radius} must lie strictly between {csf_r} and {skin_r}"
        )));
    }
    let mut leaky = spec.clone();
    leaky.radii[n - 2] = skull_outer_radius;
    generate_sphere_mesh(&leaky)
}

/// Read a `HXM1` labeled-voxel file, rejecting labels missing from the table.
pub fn load_labeled_voxels(path: &Path, table: &CompartmentTable) -> Result<HexMesh> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 8 || parts[0] != "HXM1" {
        return Err(Error::Validation(format!("malformed HXM1 header: {}", header.trim())));
    }
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Validation(format!("bad dimension in header: {s}")))
    };
    let parse_f = |s: &str| {
        s.parse::<f64>().map_err(|_| Error::Validation(format!("bad number in header: {s}")))
    };
    let dims = [parse_dim(parts[1])?, parse_dim(parts[2])?, parse_dim(parts[3])?];
    let spacing = parse_f(parts[4])?;
    let origin = [parse_f(parts[5])?, parse_f(parts[6])?, parse_f(parts[7])?];
    let ncells = dims[0] * dims[1] * dims[2];
    let mut labels = vec![0u8; ncells];
    r.read_exact(&mut labels)
        .map_err(|_| Error::Validation("label payload shorter than header dims".into()))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Validation("label payload longer than header dims".into()));
    }
    for &l in &labels {
        if l != 0 && table.sigma(l).is_none() {
            return Err(Error::Validation(format!("label {l} not in compartment table")));
        }
    }
    HexMesh::from_labels(dims, spacing, origin, labels)
}
