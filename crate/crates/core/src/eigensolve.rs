//! Generalized eigensolver for A u = λ M u on the edge space.
//!
//! A is the curl-curl matrix, positive semidefinite with the huge gradient
//! kernel range(G); M is the SPD mass matrix. The positive spectrum is
//! extracted by shift-invert Lanczos on (A − σM)⁻¹M in the M-inner product,
//! restricted to the M-orthogonal complement of the kernel: the starting
//! vector is projected and the projection is re-applied every iteration to
//! suppress rounding drift back into the kernel. The basis is kept fully
//! M-orthogonal (two-pass Gram–Schmidt) and thick-restarted when it hits the
//! subspace bound, so the projected operator matrix is a small dense
//! symmetric matrix rather than a strict tridiagonal.
//!
//! Converged candidates go through a final Rayleigh–Ritz pass with the true
//! (A, M) and are accepted only when the residual ‖Au − λMu‖_{M⁻¹} meets the
//! configured tolerance.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fem::{EdgeSpace, NodalSpace};
use crate::linalg::{
    factor, gram_product, sym_eigen_dense, vdot, vnorm2, Factorization, LinalgError, SparseRect,
    SparseSym,
};
use crate::Real;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("requested {requested} eigenpairs but the positive spectrum has dimension {available}")]
    DimensionError { requested: usize, available: usize },
    #[error("edge space smaller than nodal space ({edge} < {nodal}): domain not simply connected or boundary flags wrong")]
    NegativeKernelComplement { edge: usize, nodal: usize },
    #[error("Lanczos breakdown persisted after {restarts} restarts")]
    Breakdown { restarts: usize },
    #[error("no convergence after {iterations} operator applications (worst residual {worst_residual:e})")]
    NoConvergence {
        iterations: usize,
        worst_residual: f64,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Converged eigenpair: λ = ω² and the M-normalized coefficient vector.
#[derive(Debug, Clone)]
pub struct EigenPair<T> {
    pub lambda: T,
    pub u: Vec<T>,
}

/// Solver configuration.
#[derive(Debug, Clone)]
pub struct EigenConfig<T> {
    /// Number of smallest positive eigenvalues to compute.
    pub k: usize,
    /// Residual tolerance: ‖Au − λMu‖_{M⁻¹} ≤ tol · max(1, λ).
    pub tol: T,
    /// Shift σ, strictly between 0 and the first positive eigenvalue.
    pub shift: T,
    /// Subspace bound; 0 selects max(3k + 20, 60).
    pub max_lanczos: usize,
    pub seed: u64,
}

impl<T: Real> Default for EigenConfig<T> {
    fn default() -> Self {
        EigenConfig {
            k: 4,
            tol: T::of(1e-9),
            shift: T::one(),
            max_lanczos: 0,
            seed: 0,
        }
    }
}

/// N(h): dimension of the positive discrete spectrum on simply connected
/// domains, = dim S_h − dim grad(N_h).
pub fn count_positive_dim(edge: &EdgeSpace, nodal: &NodalSpace) -> Result<usize, EigenError> {
    if edge.n_dofs < nodal.n_dofs {
        return Err(EigenError::NegativeKernelComplement {
            edge: edge.n_dofs,
            nodal: nodal.n_dofs,
        });
    }
    Ok(edge.n_dofs - nodal.n_dofs)
}

/// M-orthogonal projection onto the complement of range(G):
/// u' = u − G (GᵀMG)⁻¹ Gᵀ M u.
pub fn project_out_gradients<T: Real>(
    u: &[T],
    g: &SparseRect<T>,
    m: &SparseSym<T>,
    fac_gram: &Factorization<T>,
) -> Result<Vec<T>, LinalgError> {
    if g.cols == 0 {
        return Ok(u.to_vec());
    }
    let mu = m.matvec(u);
    let gtmu = g.matvec_transpose(&mu);
    let y = fac_gram.solve(&gtmu)?;
    let gy = g.matvec(&y);
    Ok(u.iter().zip(gy.iter()).map(|(&a, &b)| a - b).collect())
}

/// Smallest positive eigenpairs, ascending, deterministic for a fixed seed.
pub fn solve_smallest_positive<T: Real>(
    a: &SparseSym<T>,
    m: &SparseSym<T>,
    g: &SparseRect<T>,
    cfg: &EigenConfig<T>,
) -> Result<Vec<EigenPair<T>>, EigenError> {
    solve_with_warm_start(a, m, g, cfg, None)
}

/// Like [`solve_smallest_positive`], with an optional warm-start vector that
/// seeds the Krylov space and fixes the signs of the returned eigenvectors
/// (flipped so the M-inner product with the warm vector is positive).
pub fn solve_with_warm_start<T: Real>(
    a: &SparseSym<T>,
    m: &SparseSym<T>,
    g: &SparseRect<T>,
    cfg: &EigenConfig<T>,
    warm: Option<&[T]>,
) -> Result<Vec<EigenPair<T>>, EigenError> {
    let n = a.n;
    if g.rows != n || m.n != n {
        return Err(EigenError::Linalg(LinalgError::DimensionMismatch {
            expected: n,
            got: g.rows.max(m.n),
        }));
    }
    let n_pos = n.saturating_sub(g.cols);
    if cfg.k == 0 {
        return Ok(Vec::new());
    }
    if cfg.k > n_pos {
        return Err(EigenError::DimensionError {
            requested: cfg.k,
            available: n_pos,
        });
    }

    let shifted = a.add_scaled(m, -cfg.shift);
    let fac_shift = factor(&shifted)?;
    let fac_gram = if g.cols > 0 {
        Some(factor(&gram_product(g, m))?)
    } else {
        None
    };
    let fac_m = factor(m)?;

    let m_max = if cfg.max_lanczos > 0 {
        cfg.max_lanczos
    } else {
        (3 * cfg.k + 20).max(60)
    }
    .min(n_pos)
    .max(cfg.k.min(n_pos));

    let mut solver = Lanczos {
        a,
        m,
        g,
        fac_shift: &fac_shift,
        fac_gram: fac_gram.as_ref(),
        fac_m: &fac_m,
        cfg,
        m_max,
        v: Vec::new(),
        mv: Vec::new(),
        h: vec![T::zero(); m_max * m_max],
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        injections: 0,
        ops: 0,
    };
    solver.run(warm)
}

struct Lanczos<'s, T: Real> {
    a: &'s SparseSym<T>,
    m: &'s SparseSym<T>,
    g: &'s SparseRect<T>,
    fac_shift: &'s Factorization<T>,
    fac_gram: Option<&'s Factorization<T>>,
    fac_m: &'s Factorization<T>,
    cfg: &'s EigenConfig<T>,
    m_max: usize,
    v: Vec<Vec<T>>,
    mv: Vec<Vec<T>>,
    h: Vec<T>,
    rng: ChaCha8Rng,
    injections: usize,
    ops: usize,
}

const MAX_INJECTIONS: usize = 3;
const MAX_CYCLES: usize = 60;

impl<T: Real> Lanczos<'_, T> {
    fn project(&self, x: Vec<T>) -> Result<Vec<T>, LinalgError> {
        match self.fac_gram {
            Some(f) => project_out_gradients(&x, self.g, self.m, f),
            None => Ok(x),
        }
    }

    fn apply_op(&mut self, x: &[T]) -> Result<Vec<T>, LinalgError> {
        self.ops += 1;
        let t = self.m.matvec(x);
        let s = self.fac_shift.solve(&t)?;
        self.project(s)
    }

    fn m_norm(&self, x: &[T]) -> T {
        self.m.quad_form(x, x).max(T::zero()).sqrt()
    }

    /// Two-pass M-orthogonalization against the basis; returns accumulated
    /// coefficients per basis vector.
    fn orthogonalize(&self, w: &mut [T]) -> Vec<T> {
        let mut coeffs = vec![T::zero(); self.v.len()];
        for _pass in 0..2 {
            for (i, (vi, mvi)) in self.v.iter().zip(self.mv.iter()).enumerate() {
                let c = vdot(w, mvi);
                coeffs[i] += c;
                for (wj, vj) in w.iter_mut().zip(vi.iter()) {
                    *wj -= c * *vj;
                }
            }
        }
        coeffs
    }

    fn push_basis(&mut self, v: Vec<T>) {
        let mv = self.m.matvec(&v);
        self.v.push(v);
        self.mv.push(mv);
    }

    /// Fresh direction: warm vector if given and usable, otherwise random;
    /// projected, orthogonalized, M-normalized. None when the complement is
    /// exhausted.
    fn new_direction(&mut self, warm: Option<&[T]>) -> Result<Option<Vec<T>>, EigenError> {
        let n_pos = self.a.n.saturating_sub(self.g.cols);
        for attempt in 0..4 {
            let raw: Vec<T> = match warm {
                Some(w) if attempt == 0 => w.to_vec(),
                _ => (0..self.a.n)
                    .map(|_| T::of(self.rng.random_range(-1.0f64..1.0)))
                    .collect(),
            };
            let mut x = self.project(raw)?;
            self.orthogonalize(&mut x);
            let nrm = self.m_norm(&x);
            if nrm > T::of(1e-8) * vnorm2(&x).max(T::one()) {
                let inv = T::one() / nrm;
                for xi in x.iter_mut() {
                    *xi *= inv;
                }
                return Ok(Some(x));
            }
            if self.v.len() >= n_pos {
                return Ok(None);
            }
        }
        Ok(None)
    }

    /// Ritz decomposition of the symmetrized leading j x j block.
    fn ritz_block(&self, j: usize) -> (Vec<T>, Vec<T>) {
        let mut hs = vec![T::zero(); j * j];
        for col in 0..j {
            for row in 0..j {
                let a = self.h[row * self.m_max + col];
                let b = self.h[col * self.m_max + row];
                hs[row * j + col] = (a + b) * T::of(0.5);
            }
        }
        sym_eigen_dense(&hs, j)
    }

    fn run(&mut self, warm: Option<&[T]>) -> Result<Vec<EigenPair<T>>, EigenError> {
        let k = self.cfg.k;
        let mut trigger = T::of(1e-9);
        let mut worst = f64::NAN;
        let max_ops = 600 + 80 * k;

        let seed = self
            .new_direction(warm)?
            .ok_or(EigenError::Breakdown { restarts: 0 })?;
        self.push_basis(seed);

        for _cycle in 0..MAX_CYCLES {
            while self.v.len() < self.m_max {
                if self.ops > max_ops {
                    return Err(EigenError::NoConvergence {
                        iterations: self.ops,
                        worst_residual: worst,
                    });
                }
                let j = self.v.len() - 1;
                let vj = self.v[j].clone();
                let mut w = self.apply_op(&vj)?;
                let coeffs = self.orthogonalize(&mut w);
                for (i, c) in coeffs.iter().enumerate() {
                    self.h[i * self.m_max + j] = *c;
                    self.h[j * self.m_max + i] = *c;
                }
                let w = self.project(w)?;
                let beta = self.m_norm(&w);

                let jcur = self.v.len();
                let (thetas, vecs) = self.ritz_block(jcur);
                let theta_scale = thetas.last().copied().unwrap_or(T::one()).abs();

                if beta <= theta_scale * T::epsilon() * T::of(100.0) {
                    // invariant subspace reached
                    if self.v.len() >= k {
                        if let Some(pairs) = self.finalize(warm, &mut worst)? {
                            return Ok(pairs);
                        }
                    }
                    self.injections += 1;
                    if self.injections > MAX_INJECTIONS {
                        return Err(EigenError::Breakdown {
                            restarts: self.injections,
                        });
                    }
                    match self.new_direction(None)? {
                        Some(v) => {
                            self.push_basis(v);
                            continue;
                        }
                        None => {
                            if let Some(pairs) = self.finalize(warm, &mut worst)? {
                                return Ok(pairs);
                            }
                            return Err(EigenError::Breakdown {
                                restarts: self.injections,
                            });
                        }
                    }
                }

                // convergence probe before growing the basis further
                if jcur >= k {
                    let all_positive = (0..k).all(|i| thetas[jcur - 1 - i] > T::zero());
                    let ests_ok = (0..k).all(|i| {
                        let col = jcur - 1 - i;
                        let s_last = vecs[col * jcur + (jcur - 1)];
                        (beta * s_last).abs() <= trigger * theta_scale
                    });
                    if all_positive && ests_ok {
                        if let Some(pairs) = self.finalize(warm, &mut worst)? {
                            return Ok(pairs);
                        }
                        trigger = trigger * T::of(0.1);
                    }
                }

                let inv = T::one() / beta;
                let vnext: Vec<T> = w.iter().map(|&x| x * inv).collect();
                self.push_basis(vnext);
            }

            if let Some(pairs) = self.finalize(warm, &mut worst)? {
                return Ok(pairs);
            }
            self.thick_restart(k + 5);
        }
        Err(EigenError::NoConvergence {
            iterations: self.ops,
            worst_residual: worst,
        })
    }

    fn thick_restart(&mut self, keep: usize) {
        let j = self.v.len();
        let keep = keep.min(j.saturating_sub(1)).max(1);
        let (thetas, vecs) = self.ritz_block(j);
        // top `keep` thetas sit at the end of the ascending list
        let sel: Vec<usize> = ((j - keep)..j).collect();
        let mut new_v = Vec::with_capacity(keep);
        let mut new_mv = Vec::with_capacity(keep);
        for &col in &sel {
            let mut y = vec![T::zero(); self.a.n];
            let mut my = vec![T::zero(); self.a.n];
            for l in 0..j {
                let c = vecs[col * j + l];
                for (yi, vi) in y.iter_mut().zip(self.v[l].iter()) {
                    *yi += c * *vi;
                }
                for (myi, mvi) in my.iter_mut().zip(self.mv[l].iter()) {
                    *myi += c * *mvi;
                }
            }
            new_v.push(y);
            new_mv.push(my);
        }
        self.v = new_v;
        self.mv = new_mv;
        self.h = vec![T::zero(); self.m_max * self.m_max];
        for (i, &col) in sel.iter().enumerate() {
            self.h[i * self.m_max + i] = thetas[col];
        }
        // the coupling entries of the next column are rebuilt by the
        // orthogonalization coefficients when the operator is next applied
    }

    /// Rayleigh–Ritz with the true matrices on the current best candidates;
    /// `None` when the residual contract is not yet met.
    fn finalize(
        &mut self,
        warm: Option<&[T]>,
        worst: &mut f64,
    ) -> Result<Option<Vec<EigenPair<T>>>, EigenError> {
        let j = self.v.len();
        let k = self.cfg.k;
        if j < k {
            return Ok(None);
        }
        let (_thetas, vecs) = self.ritz_block(j);
        let mut cand: Vec<Vec<T>> = Vec::with_capacity(k);
        for i in 0..k {
            let col = j - 1 - i;
            let mut y = vec![T::zero(); self.a.n];
            for l in 0..j {
                let c = vecs[col * j + l];
                for (yi, vi) in y.iter_mut().zip(self.v[l].iter()) {
                    *yi += c * *vi;
                }
            }
            cand.push(self.project(y)?);
        }
        // M-Gram-Schmidt, two passes
        for _pass in 0..2 {
            for i in 0..k {
                let (head, tail) = cand.split_at_mut(i);
                let ui = &mut tail[0];
                for uj in head.iter() {
                    let c = self.m.quad_form(uj, ui);
                    for (a, b) in ui.iter_mut().zip(uj.iter()) {
                        *a -= c * *b;
                    }
                }
                let nrm = self.m_norm(ui);
                if nrm <= T::epsilon() * T::of(1e4) {
                    return Ok(None);
                }
                let inv = T::one() / nrm;
                for a in ui.iter_mut() {
                    *a *= inv;
                }
            }
        }
        // small dense Rayleigh-Ritz with the true matrices
        let au: Vec<Vec<T>> = cand.iter().map(|u| self.a.matvec(u)).collect();
        let mu: Vec<Vec<T>> = cand.iter().map(|u| self.m.matvec(u)).collect();
        let mut a_small = vec![T::zero(); k * k];
        let mut m_small = vec![T::zero(); k * k];
        for i in 0..k {
            for l in 0..k {
                a_small[i * k + l] = vdot(&cand[i], &au[l]);
                m_small[i * k + l] = vdot(&cand[i], &mu[l]);
            }
        }
        // M_small ≈ I; fold it in through its inverse square root
        let (me, mvec) = sym_eigen_dense(&m_small, k);
        if me.iter().any(|&e| e <= T::zero()) {
            return Ok(None);
        }
        let mut c = vec![T::zero(); k * k];
        for i in 0..k {
            for l in 0..k {
                let mut acc = T::zero();
                for e in 0..k {
                    acc += mvec[e * k + i] * mvec[e * k + l] / me[e].sqrt();
                }
                c[i * k + l] = acc;
            }
        }
        let mut ac = vec![T::zero(); k * k];
        for i in 0..k {
            for l in 0..k {
                let mut acc = T::zero();
                for p in 0..k {
                    for q in 0..k {
                        acc += c[p * k + i] * a_small[p * k + q] * c[q * k + l];
                    }
                }
                ac[i * k + l] = acc;
            }
        }
        let (lam, s) = sym_eigen_dense(&ac, k);

        let mut pairs = Vec::with_capacity(k);
        let mut worst_res = T::zero();
        for i in 0..k {
            let lambda = lam[i];
            if lambda <= T::zero() {
                return Ok(None);
            }
            let mut wv = vec![T::zero(); k];
            for (p, wp) in wv.iter_mut().enumerate() {
                let mut acc = T::zero();
                for q in 0..k {
                    acc += c[p * k + q] * s[i * k + q];
                }
                *wp = acc;
            }
            let mut u = vec![T::zero(); self.a.n];
            for (p, wp) in wv.iter().enumerate() {
                for (ui, cp) in u.iter_mut().zip(cand[p].iter()) {
                    *ui += *wp * *cp;
                }
            }
            let nrm = self.m_norm(&u);
            let inv = T::one() / nrm;
            for ui in u.iter_mut() {
                *ui *= inv;
            }
            // true residual in the M^{-1} norm
            let au = self.a.matvec(&u);
            let mu = self.m.matvec(&u);
            let r: Vec<T> = au
                .iter()
                .zip(mu.iter())
                .map(|(&x, &y)| x - lambda * y)
                .collect();
            let minv_r = self.fac_m.solve(&r)?;
            let res = vdot(&r, &minv_r).max(T::zero()).sqrt();
            worst_res = worst_res.max(res / lambda.max(T::one()));
            if res > self.cfg.tol * lambda.max(T::one()) {
                *worst = worst_res.to_f64().unwrap_or(f64::NAN);
                return Ok(None);
            }
            pairs.push(EigenPair { lambda, u });
        }
        *worst = worst_res.to_f64().unwrap_or(f64::NAN);
        pairs.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());

        // sign fixing: align with the warm vector where it overlaps,
        // otherwise make the first significant coefficient positive
        for pair in pairs.iter_mut() {
            let flip = match warm {
                Some(w) => {
                    let ip = self.m.quad_form(pair.u.as_slice(), w);
                    if ip.abs() > T::of(1e-12) {
                        ip < T::zero()
                    } else {
                        first_significant_negative(&pair.u)
                    }
                }
                None => first_significant_negative(&pair.u),
            };
            if flip {
                for x in pair.u.iter_mut() {
                    *x = -*x;
                }
            }
        }
        Ok(Some(pairs))
    }
}

fn first_significant_negative<T: Real>(u: &[T]) -> bool {
    let scale = u.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let thresh = scale * T::of(1e-12);
    for &x in u {
        if x.abs() > thresh {
            return x < T::zero();
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, discrete_gradient, Coefficients, EdgeSpace, NodalSpace};
    use crate::mesh::{generate_cube, Mesh};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    struct Problem {
        a: SparseSym<f64>,
        m: SparseSym<f64>,
        g: SparseRect<f64>,
        n_pos: usize,
    }

    fn cube_problem(n: usize) -> Problem {
        let mesh: Mesh<f64> = generate_cube(n);
        let space = EdgeSpace::new(&mesh);
        let nodal = NodalSpace::new(&mesh);
        let coeff = Coefficients::unit(mesh.n_tets());
        let (a, m) = assemble(&mesh, &space, &coeff).unwrap();
        let g = discrete_gradient(&mesh, &nodal, &space);
        let n_pos = count_positive_dim(&space, &nodal).unwrap();
        Problem { a, m, g, n_pos }
    }

    /// Dense generalized eigenvalues of (A, M), ascending; independent
    /// oracle via nalgebra.
    fn dense_generalized_eigenvalues(a: &SparseSym<f64>, m: &SparseSym<f64>) -> Vec<f64> {
        let n = a.n;
        let ad = nalgebra::DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let md = nalgebra::DMatrix::from_fn(n, n, |i, j| m.get(i, j));
        let chol = nalgebra::Cholesky::new(md).expect("SPD mass");
        let li = chol.l().try_inverse().unwrap();
        let c = &li * ad * li.transpose();
        let sym = (&c + c.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    #[test]
    fn count_positive_dim_on_cubes() {
        let m1: Mesh<f64> = generate_cube(1);
        assert_eq!(
            count_positive_dim(&EdgeSpace::new(&m1), &NodalSpace::new(&m1)).unwrap(),
            1
        );
        let m2: Mesh<f64> = generate_cube(2);
        assert_eq!(
            count_positive_dim(&EdgeSpace::new(&m2), &NodalSpace::new(&m2)).unwrap(),
            25
        );
    }

    #[test]
    fn projection_annihilates_gradients() {
        let p = cube_problem(2);
        let fac = factor(&gram_product(&p.g, &p.m)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi: Vec<f64> = (0..p.g.cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gpsi = p.g.matvec(&psi);
        let proj = project_out_gradients(&gpsi, &p.g, &p.m, &fac).unwrap();
        let scale = gpsi.iter().map(|v| v.abs()).fold(1.0, f64::max);
        assert!(proj.iter().all(|v| v.abs() <= 1e-11 * scale));

        // a vector already M-orthogonal to gradients is unchanged
        let u: Vec<f64> = (0..p.a.n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u_perp = project_out_gradients(&u, &p.g, &p.m, &fac).unwrap();
        let twice = project_out_gradients(&u_perp, &p.g, &p.m, &fac).unwrap();
        for (a, b) in u_perp.iter().zip(twice.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
        // and the defect really is orthogonal
        let gtmu = p.g.matvec_transpose(&p.m.matvec(&u_perp));
        assert!(gtmu.iter().all(|v| v.abs() <= 1e-11));
    }

    #[test]
    fn full_spectrum_matches_dense_oracle_cube2() {
        let p = cube_problem(2);
        let cfg = EigenConfig::<f64> {
            k: p.n_pos,
            tol: 1e-10,
            shift: 1.0,
            max_lanczos: 0,
            seed: 42,
        };
        let pairs = solve_smallest_positive(&p.a, &p.m, &p.g, &cfg).unwrap();
        assert_eq!(pairs.len(), p.n_pos);
        let dense = dense_generalized_eigenvalues(&p.a, &p.m);
        let max = dense.last().copied().unwrap();
        let positives: Vec<f64> = dense.iter().copied().filter(|&v| v > 1e-6 * max).collect();
        assert_eq!(positives.len(), p.n_pos, "kernel count mismatch");
        for (pair, ev) in pairs.iter().zip(positives.iter()) {
            assert!(
                (pair.lambda - ev).abs() <= 1e-8 * ev,
                "{} vs {}",
                pair.lambda,
                ev
            );
        }
    }

    #[test]
    fn cube4_first_eigenvalue_near_analytic() {
        let p = cube_problem(4);
        let cfg = EigenConfig::<f64> {
            k: 4,
            seed: 1,
            ..EigenConfig::default()
        };
        let pairs = solve_smallest_positive(&p.a, &p.m, &p.g, &cfg).unwrap();
        let exact = 2.0 * std::f64::consts::PI.powi(2);
        let rel = (pairs[0].lambda - exact).abs() / exact;
        assert!(rel <= 0.10, "lambda_1 = {}, relative gap {rel}", pairs[0].lambda);
        // the deflated zero modes never surface
        assert!(pairs.iter().all(|p| p.lambda > 1.0));
    }

    #[test]
    fn pair_invariants_hold() {
        let p = cube_problem(2);
        let cfg = EigenConfig::<f64> {
            k: 5,
            seed: 3,
            ..EigenConfig::default()
        };
        let pairs = solve_smallest_positive(&p.a, &p.m, &p.g, &cfg).unwrap();
        let tol = cfg.tol;
        for (i, pi) in pairs.iter().enumerate() {
            let mnorm = p.m.quad_form(&pi.u, &pi.u);
            assert!((mnorm - 1.0).abs() <= 10.0 * tol);
            let rq = p.a.quad_form(&pi.u, &pi.u) / mnorm;
            assert!((rq - pi.lambda).abs() <= 10.0 * tol * pi.lambda.max(1.0));
            let gtmu = p.g.matvec_transpose(&p.m.matvec(&pi.u));
            assert!(gtmu.iter().all(|v| v.abs() <= 1e-9));
            for pj in pairs.iter().skip(i + 1) {
                assert!(p.m.quad_form(&pi.u, &pj.u).abs() <= 10.0 * tol);
            }
        }
        for w in pairs.windows(2) {
            assert!(w[0].lambda <= w[1].lambda);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let p = cube_problem(2);
        let cfg = EigenConfig::<f64> {
            k: 3,
            seed: 9,
            ..EigenConfig::default()
        };
        let a = solve_smallest_positive(&p.a, &p.m, &p.g, &cfg).unwrap();
        let b = solve_smallest_positive(&p.a, &p.m, &p.g, &cfg).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.lambda.to_bits(), y.lambda.to_bits());
        }
    }

    #[test]
    fn shift_invariance() {
        let p = cube_problem(2);
        let base = EigenConfig::<f64> {
            k: 3,
            seed: 5,
            ..EigenConfig::default()
        };
        let s1 = solve_smallest_positive(&p.a, &p.m, &p.g, &base).unwrap();
        let cfg2 = EigenConfig::<f64> { shift: 5.0, ..base };
        let s2 = solve_smallest_positive(&p.a, &p.m, &p.g, &cfg2).unwrap();
        for (x, y) in s1.iter().zip(s2.iter()) {
            assert!((x.lambda - y.lambda).abs() <= 100.0 * base.tol * x.lambda.max(1.0));
        }
    }

    #[test]
    fn gradient_warm_start_is_deflated() {
        let p = cube_problem(2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let psi: Vec<f64> = (0..p.g.cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gpsi = p.g.matvec(&psi);
        let cfg = EigenConfig::<f64> {
            k: 3,
            seed: 2,
            ..EigenConfig::default()
        };
        let pairs = solve_with_warm_start(&p.a, &p.m, &p.g, &cfg, Some(&gpsi)).unwrap();
        assert!(pairs.iter().all(|p| p.lambda > 1.0));
    }

    #[test]
    fn oversized_request_rejected() {
        let p = cube_problem(1);
        let cfg = EigenConfig::<f64> {
            k: 2,
            ..EigenConfig::default()
        };
        assert!(matches!(
            solve_smallest_positive(&p.a, &p.m, &p.g, &cfg),
            Err(EigenError::DimensionError {
                requested: 2,
                available: 1
            })
        ));
    }

    #[test]
    fn single_dof_cube_solves() {
        let p = cube_problem(1);
        let cfg = EigenConfig::<f64> {
            k: 1,
            ..EigenConfig::default()
        };
        let pairs = solve_smallest_positive(&p.a, &p.m, &p.g, &cfg).unwrap();
        assert_eq!(pairs.len(), 1);
        // one dof: lambda = A / M exactly
        let expect = p.a.get(0, 0) / p.m.get(0, 0);
        assert!((pairs[0].lambda - expect).abs() <= 1e-12 * expect);
    }
}
