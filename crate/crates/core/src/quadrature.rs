//! Quadrature rules on reference simplices.
//!
//! All rules are given in barycentric coordinates with weights summing to
//! one, so an integral over a physical cell is `measure * sum(w_q * f(x_q))`.
//! The degree-2 rules are the working rules of assembly and the estimator;
//! the 11-point degree-4 rule is the oracle rule used to cross-check them
//! and to integrate element residuals.

use crate::Real;

/// 4-point rule on the tetrahedron, exact for polynomials of degree 2.
pub fn tet_degree2<T: Real>() -> Vec<([T; 4], T)> {
    let a = T::of(0.585_410_196_624_968_5); // (5 + 3 sqrt 5) / 20
    let b = T::of(0.138_196_601_125_010_5); // (5 - sqrt 5) / 20
    let w = T::of(0.25);
    (0..4)
        .map(|i| {
            let mut bary = [b; 4];
            bary[i] = a;
            (bary, w)
        })
        .collect()
}

/// 11-point Keast rule on the tetrahedron, exact for polynomials of degree 4.
///
/// The centroid weight is negative; the rule is still exact and is only used
/// on integrands that are elementwise smooth.
pub fn tet_degree4<T: Real>() -> Vec<([T; 4], T)> {
    let mut pts = Vec::with_capacity(11);
    // centroid
    let q = T::of(0.25);
    pts.push(([q, q, q, q], T::of(-444.0 / 5625.0)));
    // four points toward the vertices
    let a = T::of(11.0 / 14.0);
    let b = T::of(1.0 / 14.0);
    let w1 = T::of(2058.0 / 45000.0);
    for i in 0..4 {
        let mut bary = [b; 4];
        bary[i] = a;
        pts.push((bary, w1));
    }
    // six edge-midpoint-like points (c,c,d,d) permutations
    let s = (5.0f64 / 14.0).sqrt();
    let c = T::of((1.0 + s) / 4.0);
    let d = T::of((1.0 - s) / 4.0);
    let w2 = T::of(168.0 / 1125.0);
    for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
        let mut bary = [d; 4];
        bary[i] = c;
        bary[j] = c;
        pts.push((bary, w2));
    }
    pts
}

/// 3-point edge-midpoint rule on the triangle, exact for degree 2.
pub fn tri_degree2<T: Real>() -> Vec<([T; 3], T)> {
    let h = T::of(0.5);
    let z = T::zero();
    let w = T::of(1.0 / 3.0);
    vec![([h, h, z], w), ([z, h, h], w), ([h, z, h], w)]
}

/// 5-point Gauss–Legendre rule on [0, 1], exact for degree 9.
///
/// Used for tangential edge moments of smooth fields.
pub fn segment_gauss5<T: Real>() -> Vec<(T, T)> {
    const X: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683_1,
        0.0,
        0.538_469_310_105_683_1,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.236_926_885_056_189_08,
        0.478_628_670_499_366_47,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
    ];
    X.iter()
        .zip(W.iter())
        .map(|(&x, &w)| (T::of(0.5 * (1.0 + x)), T::of(0.5 * w)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^p y^q z^r over the reference tetrahedron
    /// (volume 1/6), normalized by the volume.
    fn monomial_mean(p: u32, q: u32, r: u32) -> f64 {
        fn fact(n: u32) -> f64 {
            (1..=n).map(|k| k as f64).product()
        }
        fact(p) * fact(q) * fact(r) / fact(p + q + r + 3) * 6.0
    }

    fn check_tet_rule(rule: &[([f64; 4], f64)], degree: u32, tol: f64) {
        for p in 0..=degree {
            for q in 0..=degree - p {
                for r in 0..=degree - p - q {
                    // reference tet with vertices 0, e1, e2, e3: x = bary[1] etc.
                    let approx: f64 = rule
                        .iter()
                        .map(|(b, w)| w * b[1].powi(p as i32) * b[2].powi(q as i32) * b[3].powi(r as i32))
                        .sum();
                    let exact = monomial_mean(p, q, r);
                    assert!(
                        (approx - exact).abs() <= tol * exact.abs().max(1.0),
                        "monomial ({p},{q},{r}): rule {approx} vs exact {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn tet_degree2_exact_to_degree_2() {
        check_tet_rule(&tet_degree2::<f64>(), 2, 1e-15);
    }

    #[test]
    fn tet_degree4_exact_to_degree_4() {
        check_tet_rule(&tet_degree4::<f64>(), 4, 1e-14);
    }

    #[test]
    fn tet_degree2_not_exact_beyond_degree_2() {
        // x^2 y is degree 3; the 4-point rule must miss it, otherwise the
        // oracle comparison below would be vacuous.
        let rule = tet_degree2::<f64>();
        let approx: f64 = rule.iter().map(|(b, w)| w * b[1] * b[1] * b[2]).sum();
        assert!((approx - monomial_mean(2, 1, 0)).abs() > 1e-6);
    }

    #[test]
    fn tri_degree2_exact() {
        let rule = tri_degree2::<f64>();
        // mean of x^p y^q over reference triangle: p! q! / (p+q+2)! * 2
        let mean = |p: u32, q: u32| -> f64 {
            fn fact(n: u32) -> f64 {
                (1..=n).map(|k| k as f64).product()
            }
            fact(p) * fact(q) / fact(p + q + 2) * 2.0
        };
        for (p, q) in [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2)] {
            let approx: f64 = rule
                .iter()
                .map(|(b, w)| w * b[1].powi(p as i32) * b[2].powi(q as i32))
                .sum();
            assert!((approx - mean(p, q)).abs() < 1e-15, "({p},{q})");
        }
    }

    #[test]
    fn segment_gauss5_exact_to_degree_9() {
        let rule = segment_gauss5::<f64>();
        for p in 0..=9u32 {
            let approx: f64 = rule.iter().map(|(x, w)| w * x.powi(p as i32)).sum();
            let exact = 1.0 / (p as f64 + 1.0);
            assert!((approx - exact).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn weights_sum_to_one() {
        let s2: f64 = tet_degree2::<f64>().iter().map(|(_, w)| w).sum();
        let s4: f64 = tet_degree4::<f64>().iter().map(|(_, w)| w).sum();
        assert!((s2 - 1.0).abs() < 1e-15);
        assert!((s4 - 1.0).abs() < 1e-15);
    }
}
