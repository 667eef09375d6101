//! Tetrahedral meshes with conforming tagged bisection.
//!
//! A [`Mesh`] stores vertices and tetrahedra together with derived edge and
//! face tables, incidence maps, and boundary flags. Refinement is recursive
//! tagged bisection: every tet carries an ordered vertex list and a type tag
//! that together determine its refinement edge (always between the first and
//! last vertex of the list) and the tags of its children. Kuhn-decomposed
//! box meshes come pre-tagged so that the closure recursion terminates and
//! every refinement is conforming.
//!
//! Tets also carry lineage data (`root`, `path`, `gen`) so that nested
//! meshes produced by successive [`Mesh::refine`] calls can be related:
//! ancestor lookup is a path-prefix test, no geometry involved.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::Real;

/// Local edge numbering of a tet: edge k connects `verts[LOCAL_EDGES[k][0]]`
/// and `verts[LOCAL_EDGES[k][1]]`.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local face numbering: face k is opposite vertex k.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

/// Hard bound on the recursion depth of the bisection closure. Compatible
/// initial tags never get anywhere near it; hitting it signals a tagging bug.
pub const MAX_CLOSURE_DEPTH: usize = 64;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("tet {tet} references vertex {vertex}, but the mesh has {n_vertices} vertices")]
    VertexOutOfRange {
        tet: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("tet {tet} has repeated vertices")]
    RepeatedVertex { tet: usize },
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFiniteCoordinate { vertex: usize },
    #[error("tet {tet} is degenerate (volume {volume:e})")]
    DegenerateTet { tet: usize, volume: f64 },
    #[error("face {face:?} is shared by more than two tets")]
    NonConformingInput { face: [usize; 3] },
    #[error("marked tet id {tet} out of range ({n_tets} tets)")]
    MarkedOutOfRange { tet: usize, n_tets: usize },
    #[error("bisection closure exceeded the depth bound {bound}; initial tagging is incompatible")]
    ClosureDepthExceeded { bound: usize },
    #[error("meshes are not nested: fine tet {tet} has no ancestor in the coarse mesh")]
    NotNested { tet: usize },
    #[error("bisection generation exceeds the lineage capacity of 64")]
    LineageOverflow,
}

/// Mesh vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex<T> {
    pub coords: [T; 3],
}

/// Lineage key of a tet: root tet of the generator mesh plus the sequence of
/// bisection choices encoded as path bits. Two tets from nested meshes are
/// ancestor/descendant iff one key is a prefix of the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TetKey {
    pub root: usize,
    pub gen: u32,
    pub path: u64,
}

impl TetKey {
    /// Key of the generation-`g` ancestor (`g <= self.gen`).
    pub fn ancestor(&self, g: u32) -> TetKey {
        TetKey {
            root: self.root,
            gen: g,
            path: self.path >> (self.gen - g),
        }
    }
}

/// Tetrahedron in bisection-canonical vertex order.
///
/// The refinement edge is always between `verts[0]` and `verts[3]`; `tag` is
/// the bisection type in {0, 1, 2} that cycles through the generations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tet {
    pub verts: [usize; 4],
    pub tag: u8,
    pub gen: u32,
    /// Index, in the mesh this mesh was refined from, of the tet this one
    /// was created from (itself if it survived unchanged). `None` for
    /// generator output.
    pub parent: Option<usize>,
    pub root: usize,
    pub path: u64,
}

impl Tet {
    pub fn key(&self) -> TetKey {
        TetKey {
            root: self.root,
            gen: self.gen,
            path: self.path,
        }
    }

    /// Refinement edge as a canonical (ascending) vertex pair.
    pub fn refinement_edge(&self) -> [usize; 2] {
        canon_edge(self.verts[0], self.verts[3])
    }
}

fn canon_edge(a: usize, b: usize) -> [usize; 2] {
    if a < b { [a, b] } else { [b, a] }
}

fn canon_face(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

/// Per-tet affine geometry: barycentric coordinate functions
/// `lambda_i(x) = offsets[i] + grads[i] . x` plus the (unsigned) volume.
#[derive(Debug, Clone, Copy)]
pub struct TetGeometry<T> {
    pub grads: [[T; 3]; 4],
    pub offsets: [T; 4],
    pub volume: T,
    pub signed_volume: T,
}

/// Conforming tetrahedral mesh with derived topology tables.
#[derive(Debug, Clone)]
pub struct Mesh<T> {
    pub vertices: Vec<Vertex<T>>,
    pub tets: Vec<Tet>,
    /// Canonical (ascending) vertex pairs, sorted lexicographically.
    pub edges: Vec<[usize; 2]>,
    /// Canonical (ascending) vertex triples, sorted lexicographically.
    pub faces: Vec<[usize; 3]>,
    /// Edge ids of each tet in [`LOCAL_EDGES`] order.
    pub tet_edges: Vec<[usize; 6]>,
    /// Face ids of each tet in [`LOCAL_FACES`] order.
    pub tet_faces: Vec<[usize; 4]>,
    /// The one or two tets incident to each face.
    pub face_tets: Vec<[Option<usize>; 2]>,
    pub boundary_face: Vec<bool>,
    pub boundary_edge: Vec<bool>,
    pub boundary_vertex: Vec<bool>,
    /// Refinement level: 0 for generator output, +1 per `refine`/`bisect`.
    pub level: u32,
}

impl<T: Real> Mesh<T> {
    /// Derive edge/face/incidence tables from a tet list and check the
    /// face-incidence invariant (every face in at most two tets).
    pub fn build_topology(
        vertices: Vec<Vertex<T>>,
        tets: Vec<Tet>,
        level: u32,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        for (vi, v) in vertices.iter().enumerate() {
            if v.coords.iter().any(|c| !c.is_finite()) {
                return Err(MeshError::NonFiniteCoordinate { vertex: vi });
            }
        }
        for (ti, t) in tets.iter().enumerate() {
            for &v in &t.verts {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange {
                        tet: ti,
                        vertex: v,
                        n_vertices: nv,
                    });
                }
            }
            let mut vs = t.verts;
            vs.sort_unstable();
            if vs.windows(2).any(|w| w[0] == w[1]) {
                return Err(MeshError::RepeatedVertex { tet: ti });
            }
        }

        let mut edges: Vec<[usize; 2]> = Vec::with_capacity(tets.len() * 6);
        let mut faces: Vec<[usize; 3]> = Vec::with_capacity(tets.len() * 4);
        for t in &tets {
            for le in LOCAL_EDGES {
                edges.push(canon_edge(t.verts[le[0]], t.verts[le[1]]));
            }
            for lf in LOCAL_FACES {
                faces.push(canon_face([t.verts[lf[0]], t.verts[lf[1]], t.verts[lf[2]]]));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        faces.sort_unstable();
        faces.dedup();

        let mut tet_edges = Vec::with_capacity(tets.len());
        let mut tet_faces = Vec::with_capacity(tets.len());
        let mut face_tets: Vec<[Option<usize>; 2]> = vec![[None, None]; faces.len()];
        for (ti, t) in tets.iter().enumerate() {
            let mut te = [0usize; 6];
            for (k, le) in LOCAL_EDGES.iter().enumerate() {
                let e = canon_edge(t.verts[le[0]], t.verts[le[1]]);
                te[k] = edges.binary_search(&e).expect("edge was inserted");
            }
            tet_edges.push(te);
            let mut tf = [0usize; 4];
            for (k, lf) in LOCAL_FACES.iter().enumerate() {
                let f = canon_face([t.verts[lf[0]], t.verts[lf[1]], t.verts[lf[2]]]);
                let fi = faces.binary_search(&f).expect("face was inserted");
                tf[k] = fi;
                match face_tets[fi] {
                    [None, _] => face_tets[fi][0] = Some(ti),
                    [Some(_), None] => face_tets[fi][1] = Some(ti),
                    [Some(_), Some(_)] => {
                        return Err(MeshError::NonConformingInput { face: faces[fi] });
                    }
                }
            }
            tet_faces.push(tf);
        }

        let boundary_face: Vec<bool> = face_tets.iter().map(|ft| ft[1].is_none()).collect();
        let mut boundary_edge = vec![false; edges.len()];
        let mut boundary_vertex = vec![false; nv];
        for (fi, f) in faces.iter().enumerate() {
            if boundary_face[fi] {
                for pair in [[f[0], f[1]], [f[0], f[2]], [f[1], f[2]]] {
                    let ei = edges.binary_search(&pair).expect("face edge exists");
                    boundary_edge[ei] = true;
                }
                for &v in f {
                    boundary_vertex[v] = true;
                }
            }
        }

        let mesh = Mesh {
            vertices,
            tets,
            edges,
            faces,
            tet_edges,
            tet_faces,
            face_tets,
            boundary_face,
            boundary_edge,
            boundary_vertex,
            level,
        };
        // volume check needs coordinates in place
        for ti in 0..mesh.tets.len() {
            let vol = mesh.tet_signed_volume(ti);
            let h = mesh.tet_diameter(ti);
            let tol = h * h * h * T::epsilon() * T::of(1e4);
            if vol.abs() <= tol {
                return Err(MeshError::DegenerateTet {
                    tet: ti,
                    volume: vol.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn coords(&self, v: usize) -> [T; 3] {
        self.vertices[v].coords
    }

    /// Edge id of the canonical pair (a, b), if present.
    pub fn edge_lookup(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&canon_edge(a, b)).ok()
    }

    pub fn tet_signed_volume(&self, ti: usize) -> T {
        let t = &self.tets[ti];
        let p0 = self.coords(t.verts[0]);
        let a = sub3(self.coords(t.verts[1]), p0);
        let b = sub3(self.coords(t.verts[2]), p0);
        let c = sub3(self.coords(t.verts[3]), p0);
        dot3(a, cross3(b, c)) / T::of(6.0)
    }

    pub fn tet_volume(&self, ti: usize) -> T {
        self.tet_signed_volume(ti).abs()
    }

    /// Element diameter h_K: the longest edge.
    pub fn tet_diameter(&self, ti: usize) -> T {
        let t = &self.tets[ti];
        let mut h = T::zero();
        for le in LOCAL_EDGES {
            let d = norm3(sub3(self.coords(t.verts[le[0]]), self.coords(t.verts[le[1]])));
            if d > h {
                h = d;
            }
        }
        h
    }

    /// Face diameter h_F: the longest face edge.
    pub fn face_diameter(&self, fi: usize) -> T {
        let f = self.faces[fi];
        let mut h = T::zero();
        for pair in [[f[0], f[1]], [f[0], f[2]], [f[1], f[2]]] {
            let d = norm3(sub3(self.coords(pair[0]), self.coords(pair[1])));
            if d > h {
                h = d;
            }
        }
        h
    }

    pub fn face_area(&self, fi: usize) -> T {
        let f = self.faces[fi];
        let a = sub3(self.coords(f[1]), self.coords(f[0]));
        let b = sub3(self.coords(f[2]), self.coords(f[0]));
        norm3(cross3(a, b)) * T::of(0.5)
    }

    /// Unit normal of a face (orientation arbitrary but fixed).
    pub fn face_unit_normal(&self, fi: usize) -> [T; 3] {
        let f = self.faces[fi];
        let a = sub3(self.coords(f[1]), self.coords(f[0]));
        let b = sub3(self.coords(f[2]), self.coords(f[0]));
        let n = cross3(a, b);
        let len = norm3(n);
        scale3(n, T::one() / len)
    }

    /// Shape quality 3 r_in / R_circ in (0, 1], 1 for the regular tet.
    pub fn tet_quality(&self, ti: usize) -> T {
        let vol = self.tet_volume(ti);
        let mut area_sum = T::zero();
        for &fi in &self.tet_faces[ti] {
            area_sum += self.face_area(fi);
        }
        let r_in = T::of(3.0) * vol / area_sum;
        let t = &self.tets[ti];
        let p0 = self.coords(t.verts[0]);
        // circumcenter: 2 (v_i - v_0) . x = |v_i|^2 - |v_0|^2
        let mut m = [[T::zero(); 3]; 3];
        let mut rhs = [T::zero(); 3];
        for i in 0..3 {
            let vi = self.coords(t.verts[i + 1]);
            let d = sub3(vi, p0);
            for j in 0..3 {
                m[i][j] = T::of(2.0) * d[j];
            }
            rhs[i] = dot3(vi, vi) - dot3(p0, p0);
        }
        let inv = invert3(&m).expect("non-degenerate tet");
        let center = matvec3(&inv, rhs);
        let r_circ = norm3(sub3(center, p0));
        T::of(3.0) * r_in / r_circ
    }

    /// Barycentric coordinate functions and volume of a tet.
    pub fn tet_geometry(&self, ti: usize) -> TetGeometry<T> {
        let t = &self.tets[ti];
        let p0 = self.coords(t.verts[0]);
        let mut jac = [[T::zero(); 3]; 3];
        for i in 0..3 {
            let d = sub3(self.coords(t.verts[i + 1]), p0);
            for j in 0..3 {
                jac[j][i] = d[j]; // column i = v_{i+1} - v_0
            }
        }
        let inv = invert3(&jac).expect("non-degenerate tet");
        let mut grads = [[T::zero(); 3]; 4];
        for i in 0..3 {
            grads[i + 1] = [inv[i][0], inv[i][1], inv[i][2]];
        }
        for j in 0..3 {
            grads[0][j] = -(grads[1][j] + grads[2][j] + grads[3][j]);
        }
        let mut offsets = [T::zero(); 4];
        for i in 1..4 {
            offsets[i] = -dot3(grads[i], p0);
        }
        offsets[0] = T::one() - offsets[1] - offsets[2] - offsets[3];
        let signed = self.tet_signed_volume(ti);
        TetGeometry {
            grads,
            offsets,
            volume: signed.abs(),
            signed_volume: signed,
        }
    }

    /// Barycentric coordinates of a point with respect to a tet.
    pub fn barycentric(&self, ti: usize, x: [T; 3]) -> [T; 4] {
        let g = self.tet_geometry(ti);
        let mut lam = [T::zero(); 4];
        for i in 0..4 {
            lam[i] = g.offsets[i] + dot3(g.grads[i], x);
        }
        lam
    }

    /// Lineage keys of all tets, for ancestor lookups across nested meshes.
    pub fn key_map(&self) -> HashMap<TetKey, usize> {
        self.tets
            .iter()
            .enumerate()
            .map(|(i, t)| (t.key(), i))
            .collect()
    }

    /// Index in this (coarse) mesh of the ancestor of `fine_tet`, given this
    /// mesh's [`Mesh::key_map`]. Returns `None` if not nested.
    pub fn ancestor_of(key_map: &HashMap<TetKey, usize>, fine_tet: &Tet) -> Option<usize> {
        let key = fine_tet.key();
        for g in (0..=key.gen).rev() {
            if let Some(&i) = key_map.get(&key.ancestor(g)) {
                return Some(i);
            }
        }
        None
    }

    /// The coarse tets of `self` that were refined on the way to `fine`
    /// (T_H \ T_h). Errors if `fine` is not a refinement of `self`.
    pub fn ancestors_not_in(&self, fine: &Mesh<T>) -> Result<Vec<usize>, MeshError> {
        let coarse_keys = self.key_map();
        for (ti, t) in fine.tets.iter().enumerate() {
            if Mesh::<T>::ancestor_of(&coarse_keys, t).is_none() {
                return Err(MeshError::NotNested { tet: ti });
            }
        }
        let fine_keys: HashSet<TetKey> = fine.tets.iter().map(|t| t.key()).collect();
        Ok(self
            .tets
            .iter()
            .enumerate()
            .filter(|(_, t)| !fine_keys.contains(&t.key()))
            .map(|(i, _)| i)
            .collect())
    }

    /// Bisect a single tet at its refinement edge, without conformity
    /// closure. The result is conforming only when no other tet shares the
    /// refinement edge (e.g. single-tet meshes); [`Mesh::refine`] is the
    /// conforming entry point.
    pub fn bisect(&self, tet_id: usize) -> Result<Mesh<T>, MeshError> {
        if tet_id >= self.tets.len() {
            return Err(MeshError::MarkedOutOfRange {
                tet: tet_id,
                n_tets: self.tets.len(),
            });
        }
        let mut verts = self.vertices.clone();
        let t = self.tets[tet_id];
        if t.gen >= 64 {
            return Err(MeshError::LineageOverflow);
        }
        let mid = midpoint(self.coords(t.verts[0]), self.coords(t.verts[3]));
        let z = verts.len();
        verts.push(Vertex { coords: mid });
        let (c1, c2) = bisect_children(&t, z, tet_id);
        let mut tets: Vec<Tet> = Vec::with_capacity(self.tets.len() + 1);
        for (i, s) in self.tets.iter().enumerate() {
            if i != tet_id {
                let mut s = *s;
                s.parent = Some(i);
                tets.push(s);
            }
        }
        tets.push(c1);
        tets.push(c2);
        Mesh::build_topology(verts, tets, self.level + 1)
    }

    /// Smallest admissible conforming refinement in which every marked tet
    /// has been bisected at least once.
    pub fn refine(&self, marked: &[usize]) -> Result<Mesh<T>, MeshError> {
        for &m in marked {
            if m >= self.tets.len() {
                return Err(MeshError::MarkedOutOfRange {
                    tet: m,
                    n_tets: self.tets.len(),
                });
            }
        }
        let mut work = RefineState::new(self);
        let mut order: Vec<usize> = marked.to_vec();
        order.sort_unstable();
        order.dedup();
        for m in order {
            if work.alive[m] {
                work.bisect_compatible(m, 0)?;
            }
        }
        let tets: Vec<Tet> = work
            .tets
            .iter()
            .zip(work.alive.iter())
            .filter(|(_, &a)| a)
            .map(|(t, _)| *t)
            .collect();
        Mesh::build_topology(work.verts, tets, self.level + 1)
    }
}

/// Children of a tagged tet bisected at the new vertex `z`.
///
/// Type cycling with reflected ordering: both children start with the kept
/// endpoint of the refinement edge followed by `z`; for tag 0 the second
/// child reverses the remaining pair.
fn bisect_children(t: &Tet, z: usize, parent_id: usize) -> (Tet, Tet) {
    let [x0, x1, x2, x3] = t.verts;
    let v1 = [x0, z, x1, x2];
    let v2 = if t.tag == 0 {
        [x3, z, x2, x1]
    } else {
        [x3, z, x1, x2]
    };
    let tag = (t.tag + 1) % 3;
    let base = Tet {
        verts: v1,
        tag,
        gen: t.gen + 1,
        parent: Some(parent_id),
        root: t.root,
        path: t.path << 1,
    };
    let second = Tet {
        verts: v2,
        path: (t.path << 1) | 1,
        ..base
    };
    (base, second)
}

struct RefineState<T> {
    verts: Vec<Vertex<T>>,
    tets: Vec<Tet>,
    alive: Vec<bool>,
    /// Live tets registered under each of their six edges. Entries can be
    /// stale (dead tets are filtered on lookup).
    patches: HashMap<[usize; 2], Vec<usize>>,
    /// For children of input tets: the input tet they descend from.
    input_ancestor: Vec<usize>,
}

impl<T: Real> RefineState<T> {
    fn new(mesh: &Mesh<T>) -> Self {
        let mut patches: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
        for (ti, t) in mesh.tets.iter().enumerate() {
            for le in LOCAL_EDGES {
                patches
                    .entry(canon_edge(t.verts[le[0]], t.verts[le[1]]))
                    .or_default()
                    .push(ti);
            }
        }
        RefineState {
            verts: mesh.vertices.clone(),
            tets: mesh.tets.clone(),
            alive: vec![true; mesh.tets.len()],
            patches,
            input_ancestor: (0..mesh.tets.len()).collect(),
        }
    }

    /// Make the patch of `t`'s refinement edge compatible (all members have
    /// the same refinement edge), then bisect the whole patch at once.
    fn bisect_compatible(&mut self, t: usize, depth: usize) -> Result<(), MeshError> {
        if depth > MAX_CLOSURE_DEPTH {
            return Err(MeshError::ClosureDepthExceeded {
                bound: MAX_CLOSURE_DEPTH,
            });
        }
        for _ in 0..MAX_CLOSURE_DEPTH {
            if !self.alive[t] {
                // someone else's closure bisected it
                return Ok(());
            }
            let e = self.tets[t].refinement_edge();
            let patch: Vec<usize> = self.patches[&e]
                .iter()
                .copied()
                .filter(|&s| self.alive[s])
                .collect();
            debug_assert!(patch.contains(&t));
            match patch
                .iter()
                .copied()
                .find(|&s| self.tets[s].refinement_edge() != e)
            {
                Some(bad) => self.bisect_compatible(bad, depth + 1)?,
                None => {
                    self.bisect_patch(e, &patch)?;
                    return Ok(());
                }
            }
        }
        Err(MeshError::ClosureDepthExceeded {
            bound: MAX_CLOSURE_DEPTH,
        })
    }

    fn bisect_patch(&mut self, e: [usize; 2], patch: &[usize]) -> Result<(), MeshError> {
        let z = self.verts.len();
        self.verts.push(Vertex {
            coords: midpoint(self.verts[e[0]].coords, self.verts[e[1]].coords),
        });
        for &ti in patch {
            let t = self.tets[ti];
            if t.gen >= 64 {
                return Err(MeshError::LineageOverflow);
            }
            let ancestor = self.input_ancestor[ti];
            let (c1, c2) = bisect_children(&t, z, ancestor);
            self.alive[ti] = false;
            for c in [c1, c2] {
                let ci = self.tets.len();
                self.tets.push(c);
                self.alive.push(true);
                self.input_ancestor.push(ancestor);
                for le in LOCAL_EDGES {
                    self.patches
                        .entry(canon_edge(c.verts[le[0]], c.verts[le[1]]))
                        .or_default()
                        .push(ci);
                }
            }
        }
        Ok(())
    }
}

fn midpoint<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    let h = T::of(0.5);
    [(a[0] + b[0]) * h, (a[1] + b[1]) * h, (a[2] + b[2]) * h]
}

/// Kuhn tetrahedralization of the unit cube (0,1)^3 with n subdivisions per
/// axis: 6 n^3 tets, all tagged for compatible bisection.
pub fn generate_cube<T: Real>(n: usize) -> Mesh<T> {
    assert!(n >= 1, "need at least one subdivision per axis");
    kuhn_grid([0.0, 0.0, 0.0], 1.0 / n as f64, [n, n, n], |_, _, _| true)
}

/// Fichera corner (-1,1)^3 minus the closed positive octant, with n
/// subdivisions per unit: 42 n^3 tets.
pub fn generate_fichera<T: Real>(n: usize) -> Mesh<T> {
    assert!(n >= 1, "need at least one subdivision per unit");
    let m = 2 * n;
    kuhn_grid([-1.0, -1.0, -1.0], 1.0 / n as f64, [m, m, m], |i, j, k| {
        !(i >= n && j >= n && k >= n)
    })
}

/// All six permutations of the axes, fixed order for determinism.
const AXIS_PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn kuhn_grid<T: Real>(
    origin: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    keep: impl Fn(usize, usize, usize) -> bool,
) -> Mesh<T> {
    let stride = [1usize, dims[0] + 1, (dims[0] + 1) * (dims[1] + 1)];
    let grid_id = |i: usize, j: usize, k: usize| i * stride[0] + j * stride[1] + k * stride[2];

    let mut tets_grid: Vec<[usize; 4]> = Vec::new();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                if !keep(i, j, k) {
                    continue;
                }
                let low = [i, j, k];
                for perm in AXIS_PERMS {
                    let mut p = low;
                    let v0 = grid_id(p[0], p[1], p[2]);
                    p[perm[0]] += 1;
                    let v1 = grid_id(p[0], p[1], p[2]);
                    p[perm[1]] += 1;
                    let v2 = grid_id(p[0], p[1], p[2]);
                    p[perm[2]] += 1;
                    let v3 = grid_id(p[0], p[1], p[2]);
                    tets_grid.push([v0, v1, v2, v3]);
                }
            }
        }
    }

    // compact the vertex numbering to the vertices actually used
    let mut used: Vec<usize> = tets_grid.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let mut remap: HashMap<usize, usize> = HashMap::with_capacity(used.len());
    let mut vertices = Vec::with_capacity(used.len());
    for (new_id, &g) in used.iter().enumerate() {
        remap.insert(g, new_id);
        let i = g % (dims[0] + 1);
        let j = (g / (dims[0] + 1)) % (dims[1] + 1);
        let k = g / ((dims[0] + 1) * (dims[1] + 1));
        vertices.push(Vertex {
            coords: [
                T::of(origin[0] + cell * i as f64),
                T::of(origin[1] + cell * j as f64),
                T::of(origin[2] + cell * k as f64),
            ],
        });
    }
    let tets: Vec<Tet> = tets_grid
        .iter()
        .enumerate()
        .map(|(ti, vs)| Tet {
            verts: [remap[&vs[0]], remap[&vs[1]], remap[&vs[2]], remap[&vs[3]]],
            tag: 0,
            gen: 0,
            parent: None,
            root: ti,
            path: 0,
        })
        .collect();
    Mesh::build_topology(vertices, tets, 0).expect("generator meshes are conforming")
}

// --- small vector helpers -------------------------------------------------

pub(crate) fn dot3<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn sub3<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add3<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn scale3<T: Real>(a: [T; 3], s: T) -> [T; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn norm3<T: Real>(a: [T; 3]) -> T {
    dot3(a, a).sqrt()
}

fn matvec3<T: Real>(m: &[[T; 3]; 3], x: [T; 3]) -> [T; 3] {
    [dot3(m[0], x), dot3(m[1], x), dot3(m[2], x)]
}

fn invert3<T: Real>(m: &[[T; 3]; 3]) -> Option<[[T; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det == T::zero() {
        return None;
    }
    let inv_det = T::one() / det;
    let mut inv = [[T::zero(); 3]; 3];
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn reference_tet() -> Mesh<f64> {
        let vertices = vec![
            Vertex { coords: [0.0, 0.0, 0.0] },
            Vertex { coords: [1.0, 0.0, 0.0] },
            Vertex { coords: [0.0, 1.0, 0.0] },
            Vertex { coords: [0.0, 0.0, 1.0] },
        ];
        let tets = vec![Tet {
            verts: [0, 1, 2, 3],
            tag: 0,
            gen: 0,
            parent: None,
            root: 0,
            path: 0,
        }];
        Mesh::build_topology(vertices, tets, 0).unwrap()
    }

    #[test]
    fn reference_tet_topology() {
        let m = reference_tet();
        assert_eq!(m.n_edges(), 6);
        assert_eq!(m.n_faces(), 4);
        assert!(m.boundary_face.iter().all(|&b| b));
        assert!(m.boundary_edge.iter().all(|&b| b));
        assert!(m.boundary_vertex.iter().all(|&b| b));
        assert!((m.tet_volume(0) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn two_glued_tets_topology() {
        let vertices = vec![
            Vertex { coords: [0.0, 0.0, 0.0] },
            Vertex { coords: [1.0, 0.0, 0.0] },
            Vertex { coords: [0.0, 1.0, 0.0] },
            Vertex { coords: [0.0, 0.0, 1.0] },
            Vertex { coords: [1.0, 1.0, 1.0] },
        ];
        let mk = |verts| Tet {
            verts,
            tag: 0,
            gen: 0,
            parent: None,
            root: 0,
            path: 0,
        };
        let m = Mesh::build_topology(vertices, vec![mk([0, 1, 2, 3]), mk([1, 2, 3, 4])], 0).unwrap();
        assert_eq!(m.n_edges(), 9);
        assert_eq!(m.n_faces(), 7);
        assert_eq!(m.boundary_face.iter().filter(|&&b| !b).count(), 1);
    }

    #[test]
    fn kuhn_cube_counts_and_entity_oracle() {
        let m: Mesh<f64> = generate_cube(1);
        assert_eq!(m.n_tets(), 6);
        assert_eq!(m.n_vertices(), 8);
        // brute-force entity enumeration straight from the tet vertex lists
        let mut edge_set = BTreeSet::new();
        let mut face_set = BTreeSet::new();
        for t in &m.tets {
            for le in LOCAL_EDGES {
                edge_set.insert(canon_edge(t.verts[le[0]], t.verts[le[1]]));
            }
            for lf in LOCAL_FACES {
                face_set.insert(canon_face([t.verts[lf[0]], t.verts[lf[1]], t.verts[lf[2]]]));
            }
        }
        assert_eq!(edge_set.len(), 19);
        assert_eq!(face_set.len(), 18);
        assert_eq!(m.n_edges(), 19);
        assert_eq!(m.n_faces(), 18);

        let m2: Mesh<f64> = generate_cube(2);
        assert_eq!(m2.n_tets(), 48);
        assert_eq!(m2.n_vertices(), 27);
    }

    #[test]
    fn fichera_counts() {
        let m: Mesh<f64> = generate_fichera(1);
        assert_eq!(m.n_tets(), 42);
        assert_eq!(m.n_vertices(), 26); // the (1,1,1) grid corner is unused
        // total volume is 7 unit cubes
        let vol: f64 = (0..m.n_tets()).map(|t| m.tet_volume(t)).sum();
        assert!((vol - 7.0).abs() < 1e-12);
    }

    #[test]
    fn bisect_splits_volume_exactly() {
        let m = reference_tet();
        let b = m.bisect(0).unwrap();
        assert_eq!(b.n_tets(), 2);
        assert_eq!(b.n_vertices(), 5);
        let parent = m.tet_volume(0);
        let children: f64 = (0..2).map(|t| b.tet_volume(t)).sum();
        assert!((children - parent).abs() <= 1e-14 * parent);
    }

    #[test]
    fn three_generations_double_each_time() {
        let mut m = reference_tet();
        for gen in 1..=3u32 {
            let all: Vec<usize> = (0..m.n_tets()).collect();
            m = m.refine(&all).unwrap();
            assert_eq!(m.n_tets(), 2usize.pow(gen));
            assert!(m.tets.iter().all(|t| t.gen == gen));
        }
    }

    /// Sorted edge-length multiset, scaled so similarity classes compare.
    fn shape_signature(m: &Mesh<f64>, ti: usize) -> Vec<i64> {
        let t = &m.tets[ti];
        let mut lens: Vec<f64> = LOCAL_EDGES
            .iter()
            .map(|le| norm3(sub3(m.coords(t.verts[le[0]]), m.coords(t.verts[le[1]]))))
            .collect();
        lens.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = lens[5];
        lens.iter().map(|l| (l / scale * 1e12).round() as i64).collect()
    }

    #[test]
    fn kuhn_tet_reproduces_itself_after_three_generations() {
        // On Kuhn meshes three uniform bisections halve every tet into
        // similar copies; the similarity classes must not drift.
        let mut m: Mesh<f64> = generate_cube(1);
        let sig0 = shape_signature(&m, 0);
        for _ in 0..3 {
            let all: Vec<usize> = (0..m.n_tets()).collect();
            m = m.refine(&all).unwrap();
        }
        assert_eq!(m.n_tets(), 48);
        for ti in 0..m.n_tets() {
            assert_eq!(shape_signature(&m, ti), sig0, "tet {ti} left the Kuhn class");
        }
        let h_max = (0..m.n_tets()).map(|t| m.tet_diameter(t)).fold(0.0, f64::max);
        assert!((h_max - 3f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn refine_empty_is_identity() {
        let m: Mesh<f64> = generate_cube(1);
        let r = m.refine(&[]).unwrap();
        assert_eq!(r.n_tets(), m.n_tets());
        for (a, b) in m.tets.iter().zip(r.tets.iter()) {
            assert_eq!(a.verts, b.verts);
        }
    }

    #[test]
    fn refine_all_bisects_every_tet_once() {
        let m: Mesh<f64> = generate_cube(2);
        let all: Vec<usize> = (0..m.n_tets()).collect();
        let r = m.refine(&all).unwrap();
        assert_eq!(r.n_tets(), 2 * m.n_tets());
        let refined = m.ancestors_not_in(&r).unwrap();
        assert_eq!(refined.len(), m.n_tets());
    }

    #[test]
    fn refine_one_tet_in_cube_conforms_and_eliminates_it() {
        let m: Mesh<f64> = generate_cube(1);
        let r = m.refine(&[2]).unwrap();
        assert!(r.n_tets() >= m.n_tets() + 2);
        let key = m.tets[2].key();
        assert!(r.tets.iter().all(|t| t.key() != key));
        // conformity oracle: every face has 1 or 2 incident tets, counted
        // from scratch
        let mut counts: HashMap<[usize; 3], usize> = HashMap::new();
        for t in &r.tets {
            for lf in LOCAL_FACES {
                *counts
                    .entry(canon_face([t.verts[lf[0]], t.verts[lf[1]], t.verts[lf[2]]]))
                    .or_insert(0) += 1;
            }
        }
        assert!(counts.values().all(|&c| c <= 2));
        // volume conserved
        let v0: f64 = (0..m.n_tets()).map(|t| m.tet_volume(t)).sum();
        let v1: f64 = (0..r.n_tets()).map(|t| r.tet_volume(t)).sum();
        assert!((v0 - v1).abs() < 1e-13);
    }

    #[test]
    fn ancestors_not_in_basics() {
        let m: Mesh<f64> = generate_cube(1);
        assert!(m.ancestors_not_in(&m).unwrap().is_empty());
        let r = m.refine(&[0]).unwrap();
        let gone = m.ancestors_not_in(&r).unwrap();
        // tet 0 is gone, and so are the other tets sharing its refinement
        // edge (the cube diagonal patch)
        assert!(gone.contains(&0));
        let all: Vec<usize> = (0..m.n_tets()).collect();
        let u = m.refine(&all).unwrap();
        assert_eq!(m.ancestors_not_in(&u).unwrap(), all);
    }

    #[test]
    fn ancestors_not_in_rejects_unrelated_meshes() {
        let a: Mesh<f64> = generate_cube(1);
        let b: Mesh<f64> = generate_cube(2);
        assert!(matches!(
            a.ancestors_not_in(&b),
            Err(MeshError::NotNested { .. })
        ));
    }

    #[test]
    fn nestedness_is_geometric() {
        let mut rng_state = 88172645463325252u64;
        let mut next = move || {
            // xorshift, just to pick marks deterministically
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            rng_state
        };
        let coarse: Mesh<f64> = generate_cube(1);
        let mut fine = coarse.clone();
        for _ in 0..4 {
            let marks: Vec<usize> = (0..fine.n_tets())
                .filter(|_| next() % 3 == 0)
                .collect();
            fine = fine.refine(&marks).unwrap();
        }
        let keys = coarse.key_map();
        for (ti, t) in fine.tets.iter().enumerate() {
            let anc = Mesh::<f64>::ancestor_of(&keys, t).expect("nested");
            for &v in &t.verts {
                let lam = coarse.barycentric(anc, fine.coords(v));
                for l in lam {
                    assert!(
                        (-1e-12..=1.0 + 1e-12).contains(&l),
                        "fine tet {ti} vertex escapes its ancestor"
                    );
                }
            }
        }
    }

    #[test]
    fn shape_regularity_floor_stabilizes() {
        let mut m: Mesh<f64> = generate_fichera(1);
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            rng_state
        };
        let min_quality =
            |m: &Mesh<f64>| (0..m.n_tets()).map(|t| m.tet_quality(t)).fold(f64::MAX, f64::min);
        let mut floors = vec![min_quality(&m)];
        for _ in 0..10 {
            let marks: Vec<usize> = (0..m.n_tets()).filter(|_| next() % 4 == 0).collect();
            m = m.refine(&marks).unwrap();
            floors.push(min_quality(&m));
        }
        let early_floor = floors[..=3].iter().copied().fold(f64::MAX, f64::min);
        for (lvl, &q) in floors.iter().enumerate().skip(3) {
            assert!(
                q >= early_floor * 0.999,
                "quality floor dropped at level {lvl}: {q} < {early_floor}"
            );
        }
    }

    #[test]
    fn degenerate_tet_rejected() {
        let vertices = vec![
            Vertex { coords: [0.0, 0.0, 0.0] },
            Vertex { coords: [1.0, 0.0, 0.0] },
            Vertex { coords: [0.0, 1.0, 0.0] },
            Vertex { coords: [1.0, 1.0, 0.0] }, // coplanar
        ];
        let tets = vec![Tet {
            verts: [0, 1, 2, 3],
            tag: 0,
            gen: 0,
            parent: None,
            root: 0,
            path: 0,
        }];
        assert!(matches!(
            Mesh::build_topology(vertices, tets, 0),
            Err(MeshError::DegenerateTet { .. })
        ));
    }

    #[test]
    fn face_shared_three_times_rejected() {
        let vertices = vec![
            Vertex { coords: [0.0, 0.0, 0.0] },
            Vertex { coords: [1.0, 0.0, 0.0] },
            Vertex { coords: [0.0, 1.0, 0.0] },
            Vertex { coords: [0.0, 0.0, 1.0] },
            Vertex { coords: [0.0, 0.0, -1.0] },
            Vertex { coords: [1.0, 1.0, 1.0] },
        ];
        let mk = |verts| Tet {
            verts,
            tag: 0,
            gen: 0,
            parent: None,
            root: 0,
            path: 0,
        };
        let tets = vec![mk([0, 1, 2, 3]), mk([0, 1, 2, 4]), mk([0, 1, 2, 5])];
        assert!(matches!(
            Mesh::build_topology(vertices, tets, 0),
            Err(MeshError::NonConformingInput { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Any marking of the cube mesh refines to a conforming mesh with
        /// all marked tets eliminated.
        #[test]
        fn prop_refine_conforms_and_eliminates(seed in 0u64..1000) {
            let mut m: Mesh<f64> = generate_cube(1);
            let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
            for _ in 0..3 {
                let mut marks = Vec::new();
                for t in 0..m.n_tets() {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    if state % 3 == 0 {
                        marks.push(t);
                    }
                }
                let keys: Vec<TetKey> = marks.iter().map(|&t| m.tets[t].key()).collect();
                let r = m.refine(&marks).unwrap();
                for key in keys {
                    prop_assert!(r.tets.iter().all(|t| t.key() != key));
                }
                // face-incidence invariant re-checked from scratch
                let mut counts: HashMap<[usize; 3], usize> = HashMap::new();
                for t in &r.tets {
                    for lf in LOCAL_FACES {
                        *counts
                            .entry(canon_face([t.verts[lf[0]], t.verts[lf[1]], t.verts[lf[2]]]))
                            .or_insert(0) += 1;
                    }
                }
                prop_assert!(counts.values().all(|&c| c <= 2));
                m = r;
            }
        }
    }
}
