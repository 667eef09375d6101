//! Lowest-order Nédélec (first family) edge elements.
//!
//! Degrees of freedom are tangential edge moments `∫_e u · t`, with the
//! tangent oriented from the lower to the higher global vertex index; free
//! dofs live on interior edges only (the boundary condition u × n = 0
//! eliminates boundary-edge dofs). On a tet with barycentric functions
//! `λ_i`, the basis function of local edge (i, j) is
//! `φ = λ_i ∇λ_j − λ_j ∇λ_i`, an affine field `a + b × x` with constant
//! curl `2 ∇λ_i × ∇λ_j`.

use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{SparseRect, SparseSym};
use crate::mesh::{add3, cross3, dot3, scale3, sub3, Mesh, LOCAL_EDGES};
use crate::quadrature;
use crate::Real;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("tet {tet} is degenerate")]
    DegenerateTet { tet: usize },
    #[error("point {point:?} lies outside tet {tet}")]
    PointOutsideElement { tet: usize, point: [f64; 3] },
    #[error("coefficient vector has length {got}, space has {expected} dofs")]
    CoefficientLength { expected: usize, got: usize },
    #[error("coefficient table has {got} entries, mesh has {expected} tets")]
    CoefficientTable { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}

/// Piecewise-constant material coefficients, one value per tet.
#[derive(Debug, Clone)]
pub struct Coefficients<T> {
    pub eps: Vec<T>,
    pub mu: Vec<T>,
}

impl<T: Real> Coefficients<T> {
    pub fn uniform(n_tets: usize, eps: T, mu: T) -> Self {
        Coefficients {
            eps: vec![eps; n_tets],
            mu: vec![mu; n_tets],
        }
    }

    pub fn unit(n_tets: usize) -> Self {
        Self::uniform(n_tets, T::one(), T::one())
    }

    pub fn is_unit(&self) -> bool {
        self.eps.iter().all(|&e| e == T::one()) && self.mu.iter().all(|&m| m == T::one())
    }
}

/// Edge-element space: global numbering of the free (interior-edge) dofs and
/// the per-element orientation signs.
#[derive(Debug, Clone)]
pub struct EdgeSpace {
    pub n_dofs: usize,
    pub n_edges: usize,
    /// Free dof index of each mesh edge (`None` on boundary edges).
    pub dof_of_edge: Vec<Option<usize>>,
    /// Mesh edge of each dof.
    pub free_edges: Vec<usize>,
    /// Orientation sign of each local edge of each tet: +1 when the local
    /// direction (lower local index to higher) agrees with the global
    /// canonical direction (lower global vertex id to higher).
    pub signs: Vec<[i8; 6]>,
}

impl EdgeSpace {
    pub fn new<T: Real>(mesh: &Mesh<T>) -> Self {
        let mut dof_of_edge = vec![None; mesh.n_edges()];
        let mut free_edges = Vec::new();
        for (e, &on_boundary) in mesh.boundary_edge.iter().enumerate() {
            if !on_boundary {
                dof_of_edge[e] = Some(free_edges.len());
                free_edges.push(e);
            }
        }
        let signs = mesh
            .tets
            .iter()
            .map(|t| {
                let mut s = [1i8; 6];
                for (k, le) in LOCAL_EDGES.iter().enumerate() {
                    if t.verts[le[0]] > t.verts[le[1]] {
                        s[k] = -1;
                    }
                }
                s
            })
            .collect();
        EdgeSpace {
            n_dofs: free_edges.len(),
            n_edges: mesh.n_edges(),
            dof_of_edge,
            free_edges,
            signs,
        }
    }
}

/// Companion nodal (Lagrange) space on interior vertices.
#[derive(Debug, Clone)]
pub struct NodalSpace {
    pub n_dofs: usize,
    pub dof_of_vertex: Vec<Option<usize>>,
    pub free_vertices: Vec<usize>,
}

impl NodalSpace {
    pub fn new<T: Real>(mesh: &Mesh<T>) -> Self {
        let mut dof_of_vertex = vec![None; mesh.n_vertices()];
        let mut free_vertices = Vec::new();
        for (v, &on_boundary) in mesh.boundary_vertex.iter().enumerate() {
            if !on_boundary {
                dof_of_vertex[v] = Some(free_vertices.len());
                free_vertices.push(v);
            }
        }
        NodalSpace {
            n_dofs: free_vertices.len(),
            dof_of_vertex,
            free_vertices,
        }
    }
}

/// Constant curls of the six local basis functions on a tet.
pub fn element_curls<T: Real>(mesh: &Mesh<T>, ti: usize) -> [[T; 3]; 6] {
    let geom = mesh.tet_geometry(ti);
    let mut c = [[T::zero(); 3]; 6];
    for (k, le) in LOCAL_EDGES.iter().enumerate() {
        c[k] = scale3(cross3(geom.grads[le[0]], geom.grads[le[1]]), T::of(2.0));
    }
    c
}

/// Local curl-curl and mass matrices of a tet.
///
/// The curl-curl entries are exact (constant integrand); the mass entries
/// use the degree-2 four-point rule, exact for the quadratic integrand.
pub fn local_matrices<T: Real>(
    mesh: &Mesh<T>,
    ti: usize,
    eps: T,
    mu: T,
) -> Result<([[T; 6]; 6], [[T; 6]; 6]), FemError> {
    let geom = mesh.tet_geometry(ti);
    if !geom.volume.is_finite() || geom.volume == T::zero() {
        return Err(FemError::DegenerateTet { tet: ti });
    }
    let curls = element_curls(mesh, ti);
    let mut k_loc = [[T::zero(); 6]; 6];
    let inv_mu_vol = geom.volume / mu;
    for a in 0..6 {
        for b in a..6 {
            let v = inv_mu_vol * dot3(curls[a], curls[b]);
            k_loc[a][b] = v;
            k_loc[b][a] = v;
        }
    }

    let rule = quadrature::tet_degree2::<T>();
    let mut m_loc = [[T::zero(); 6]; 6];
    for (bary, w) in rule {
        let mut phi = [[T::zero(); 3]; 6];
        for (k, le) in LOCAL_EDGES.iter().enumerate() {
            let (i, j) = (le[0], le[1]);
            phi[k] = sub3(
                scale3(geom.grads[j], bary[i]),
                scale3(geom.grads[i], bary[j]),
            );
        }
        let scale = w * eps * geom.volume;
        for a in 0..6 {
            for b in a..6 {
                let v = scale * dot3(phi[a], phi[b]);
                m_loc[a][b] += v;
                if a != b {
                    m_loc[b][a] += v;
                }
            }
        }
    }
    Ok((k_loc, m_loc))
}

/// Assemble the global curl-curl matrix A and mass matrix M on the free
/// dofs, with orientation signs applied.
pub fn assemble<T: Real>(
    mesh: &Mesh<T>,
    space: &EdgeSpace,
    coeff: &Coefficients<T>,
) -> Result<(SparseSym<T>, SparseSym<T>), FemError> {
    if coeff.eps.len() != mesh.n_tets() || coeff.mu.len() != mesh.n_tets() {
        return Err(FemError::CoefficientTable {
            expected: mesh.n_tets(),
            got: coeff.eps.len(),
        });
    }
    let locals: Vec<([[T; 6]; 6], [[T; 6]; 6])> = (0..mesh.n_tets())
        .into_par_iter()
        .map(|ti| local_matrices(mesh, ti, coeff.eps[ti], coeff.mu[ti]))
        .collect::<Result<_, _>>()?;

    let mut a_trips = Vec::new();
    let mut m_trips = Vec::new();
    for ti in 0..mesh.n_tets() {
        let (k_loc, m_loc) = &locals[ti];
        let edges = &mesh.tet_edges[ti];
        let signs = &space.signs[ti];
        for a in 0..6 {
            let Some(ga) = space.dof_of_edge[edges[a]] else {
                continue;
            };
            for b in 0..6 {
                let Some(gb) = space.dof_of_edge[edges[b]] else {
                    continue;
                };
                let s = T::of((signs[a] * signs[b]) as f64);
                a_trips.push((ga, gb, s * k_loc[a][b]));
                m_trips.push((ga, gb, s * m_loc[a][b]));
            }
        }
    }
    let a = SparseSym::from_triplets(space.n_dofs, &a_trips)?;
    let m = SparseSym::from_triplets(space.n_dofs, &m_trips)?;
    Ok((a, m))
}

/// Signed incidence matrix of the discrete gradient N_h → S_h: the edge
/// interpolant of grad ψ has coefficients G ψ.
pub fn discrete_gradient<T: Real>(
    mesh: &Mesh<T>,
    nodal: &NodalSpace,
    edge: &EdgeSpace,
) -> SparseRect<T> {
    let mut trips = Vec::with_capacity(edge.n_dofs * 2);
    for (dof, &e) in edge.free_edges.iter().enumerate() {
        let [a, b] = mesh.edges[e]; // a < b, tangent points a -> b
        if let Some(col) = nodal.dof_of_vertex[b] {
            trips.push((dof, col, T::one()));
        }
        if let Some(col) = nodal.dof_of_vertex[a] {
            trips.push((dof, col, -T::one()));
        }
    }
    SparseRect::from_triplets(edge.n_dofs, nodal.n_dofs, &trips)
        .expect("incidence triplets are in range")
}

fn coefficient<T: Real>(space: &EdgeSpace, u: &[T], edge_id: usize) -> T {
    match space.dof_of_edge[edge_id] {
        Some(d) => u[d],
        None => T::zero(),
    }
}

/// Affine representation (a, b) of the discrete field on a tet:
/// `u(x) = a + b × x`, `curl u = 2 b`.
pub fn element_affine<T: Real>(
    mesh: &Mesh<T>,
    space: &EdgeSpace,
    u: &[T],
    ti: usize,
) -> ([T; 3], [T; 3]) {
    let geom = mesh.tet_geometry(ti);
    let mut a = [T::zero(); 3];
    let mut b = [T::zero(); 3];
    for (k, le) in LOCAL_EDGES.iter().enumerate() {
        let c = coefficient(space, u, mesh.tet_edges[ti][k]) * T::of(space.signs[ti][k] as f64);
        if c == T::zero() {
            continue;
        }
        let (i, j) = (le[0], le[1]);
        let gi = geom.grads[i];
        let gj = geom.grads[j];
        a = add3(
            a,
            sub3(
                scale3(gj, c * geom.offsets[i]),
                scale3(gi, c * geom.offsets[j]),
            ),
        );
        b = add3(b, scale3(cross3(gi, gj), c));
    }
    (a, b)
}

/// Constant curl of the discrete field on a tet.
pub fn curl_eval<T: Real>(mesh: &Mesh<T>, space: &EdgeSpace, u: &[T], ti: usize) -> [T; 3] {
    let (_, b) = element_affine(mesh, space, u, ti);
    scale3(b, T::of(2.0))
}

/// Pointwise value of the discrete field; errors when the point is outside
/// the element (barycentric tolerance 1e-9).
pub fn field_eval<T: Real>(
    mesh: &Mesh<T>,
    space: &EdgeSpace,
    u: &[T],
    ti: usize,
    x: [T; 3],
) -> Result<[T; 3], FemError> {
    let lam = mesh.barycentric(ti, x);
    let tol = T::of(1e-9);
    if lam.iter().any(|&l| l < -tol || l > T::one() + tol) {
        return Err(FemError::PointOutsideElement {
            tet: ti,
            point: [
                x[0].to_f64().unwrap_or(f64::NAN),
                x[1].to_f64().unwrap_or(f64::NAN),
                x[2].to_f64().unwrap_or(f64::NAN),
            ],
        });
    }
    let (a, b) = element_affine(mesh, space, u, ti);
    Ok(add3(a, cross3(b, x)))
}

/// Edge-moment interpolant of a smooth field: dof = ∫_e f · t by Gauss
/// quadrature along each free edge.
pub fn interpolate<T: Real>(
    mesh: &Mesh<T>,
    space: &EdgeSpace,
    f: impl Fn([T; 3]) -> [T; 3],
) -> Vec<T> {
    let rule = quadrature::segment_gauss5::<T>();
    let mut u = vec![T::zero(); space.n_dofs];
    for (dof, &e) in space.free_edges.iter().enumerate() {
        let [a, b] = mesh.edges[e];
        let pa = mesh.coords(a);
        let pb = mesh.coords(b);
        let d = sub3(pb, pa);
        let mut acc = T::zero();
        for &(t, w) in &rule {
            let x = add3(pa, scale3(d, t));
            acc += w * dot3(f(x), d);
        }
        u[dof] = acc;
    }
    u
}
