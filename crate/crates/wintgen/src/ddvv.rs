//! DDVV inequality evaluation, pointwise Wintgen-ideality detection,
//! canonical normal form extraction, and the curvature ellipse for surfaces.
//!
//! The commutator reformulation is implemented with the squared norms on the
//! right-hand side, `(Σ_r ‖Ā_r‖²_F)²`; the unsquared variant fails on
//! equality-form operators (see `commutator_sides` tests).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{point_geometry, scalar_curvatures, ImmersionSpec, PointGeometry};

/// Default relative tolerance for the equality test
/// `|Δ| <= tol · (1 + |c| + H2 + |s| + s⊥)`.
pub const DEFAULT_EQUALITY_TOL: f64 = 1e-8;

/// Per-point DDVV quantities.
#[derive(Debug, Clone, Serialize)]
pub struct DdvvReport {
    pub point: Vec<f64>,
    pub s: f64,
    pub s_perp: f64,
    pub h2: f64,
    pub c: f64,
    pub deficit: f64,
    pub commutator_lhs: f64,
    pub commutator_rhs: f64,
    pub is_umbilic: bool,
    pub is_equality: bool,
    #[serde(skip)]
    pub canonical: Option<CanonicalForm>,
}

/// Bases and parameters putting shape operators into the equality normal
/// form: `A_1 = λ1 I + μ0 (e1⊗e2 + e2⊗e1)`, `A_2 = λ2 I + μ0 (e1⊗e1 − e2⊗e2)`,
/// `A_3 = λ3 I`, `A_r = 0` for r >= 4.
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub mu0: f64,
    /// Columns are the canonical tangent basis vectors.
    pub tangent_basis: DMatrix<f64>,
    /// Columns are the canonical normal basis vectors.
    pub normal_basis: DMatrix<f64>,
    /// Umbilic input: μ0 below tolerance, active plane arbitrary.
    pub degenerate: bool,
}

impl CanonicalForm {
    /// Rebuild the shape operators in the original bases from the canonical
    /// parameters.
    pub fn reconstruct(&self, m: usize, p: usize) -> Vec<DMatrix<f64>> {
        let mut canon: Vec<DMatrix<f64>> = Vec::with_capacity(p);
        for r in 0..p {
            let mut a = DMatrix::zeros(m, m);
            match r {
                0 => {
                    for i in 0..m {
                        a[(i, i)] = self.lambda1;
                    }
                    a[(0, 1)] = self.mu0;
                    a[(1, 0)] = self.mu0;
                }
                1 => {
                    for i in 0..m {
                        a[(i, i)] = self.lambda2;
                    }
                    a[(0, 0)] += self.mu0;
                    a[(1, 1)] -= self.mu0;
                }
                2 => {
                    for i in 0..m {
                        a[(i, i)] = self.lambda3;
                    }
                }
                _ => {}
            }
            canon.push(a);
        }
        // undo the tangent rotation: A_orig_in_new_normal = Q_t A_canon Q_t^T
        let qt = &self.tangent_basis;
        let rotated: Vec<DMatrix<f64>> = canon.iter().map(|a| qt * a * qt.transpose()).collect();
        // undo the normal rotation: A_s = Σ_r (Q_n)_{sr} A'_r
        let qn = &self.normal_basis;
        (0..p)
            .map(|s| {
                let mut a = DMatrix::zeros(m, m);
                for (r, ar) in rotated.iter().enumerate() {
                    a += ar * qn[(s, r)];
                }
                a
            })
            .collect()
    }

    /// Max-norm residual between the reconstruction and `ops`.
    pub fn residual(&self, ops: &[DMatrix<f64>]) -> f64 {
        let m = ops[0].nrows();
        self.reconstruct(m, ops.len())
            .iter()
            .zip(ops)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }
}

/// The DDVV deficit `Δ = c + ‖H‖² − s⊥ − s`; the inequality asserts Δ >= 0.
pub fn ddvv_deficit(s: f64, s_perp: f64, h2: f64, c: f64) -> f64 {
    c + h2 - s_perp - s
}

/// Relative equality test on the deficit.
pub fn is_equality(deficit: f64, s: f64, s_perp: f64, h2: f64, c: f64, tol: f64) -> bool {
    deficit.abs() <= tol * (1.0 + c.abs() + h2 + s.abs() + s_perp)
}

/// Both sides of the commutator reformulation for the traceless shape
/// operators: `lhs = Σ_{r,s} ‖[Ā_r, Ā_s]‖²_F` (ordered pairs),
/// `rhs = (Σ_r ‖Ā_r‖²_F)²`.
pub fn commutator_sides(shape_ops: &[DMatrix<f64>]) -> Result<(f64, f64)> {
    if shape_ops.is_empty() {
        return Err(Error::DimensionMismatch("no shape operators".into()));
    }
    let m = shape_ops[0].nrows();
    for a in shape_ops {
        if a.nrows() != m || a.ncols() != m {
            return Err(Error::DimensionMismatch(
                "shape operators of unequal size".into(),
            ));
        }
    }
    let traceless: Vec<DMatrix<f64>> = shape_ops
        .iter()
        .map(|a| {
            let mut t = a.clone();
            let mean = a.trace() / m as f64;
            for i in 0..m {
                t[(i, i)] -= mean;
            }
            t
        })
        .collect();
    let mut lhs = 0.0;
    for a in &traceless {
        for b in &traceless {
            let comm = a * b - b * a;
            lhs += comm.norm_squared();
        }
    }
    let rhs: f64 = traceless.iter().map(|a| a.norm_squared()).sum::<f64>();
    Ok((lhs, rhs * rhs))
}

/// Extract the equality normal form from shape operators.
///
/// Fails with `NotEquality` when the Gram spectrum of the traceless parts
/// violates the rank-2 / equal-leading-eigenvalue structure beyond `tol`
/// (relative to the total traceless norm).
pub fn canonical_form(shape_ops: &[DMatrix<f64>], tol: f64) -> Result<CanonicalForm> {
    if shape_ops.is_empty() {
        return Err(Error::DimensionMismatch("no shape operators".into()));
    }
    let m = shape_ops[0].nrows();
    let p = shape_ops.len();
    if m < 2 {
        return Err(Error::DimensionMismatch("need m >= 2".into()));
    }

    let traceless: Vec<DMatrix<f64>> = shape_ops
        .iter()
        .map(|a| {
            let mut t = a.clone();
            let mean = a.trace() / m as f64;
            for i in 0..m {
                t[(i, i)] -= mean;
            }
            t
        })
        .collect();

    // Gram matrix of the traceless parts; at equality it has rank <= 2 with
    // equal nonzero eigenvalues (both 2 μ0²).
    let gram = DMatrix::from_fn(p, p, |r, s| traceless[r].dot(&traceless[s]));
    let eig = gram.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let evals: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let total: f64 = gram.trace();
    let scale = 1.0 + total;

    if p >= 2 && evals[0] > tol * scale && (evals[0] - evals[1]).abs() > tol * scale {
        return Err(Error::NotEquality(format!(
            "leading Gram eigenvalues differ: {} vs {}",
            evals[0],
            evals.get(1).copied().unwrap_or(0.0)
        )));
    }
    for &ev in evals.iter().skip(2) {
        if ev.abs() > tol * scale {
            return Err(Error::NotEquality(format!(
                "traceless Gram rank exceeds 2 (eigenvalue {ev})"
            )));
        }
    }

    let degenerate = evals[0] <= tol * scale;
    // normal rotation: active eigenvectors first, kernel after
    let mut q_nor = DMatrix::zeros(p, p);
    for (new_r, &old_r) in order.iter().enumerate() {
        for s in 0..p {
            q_nor[(s, new_r)] = eig.eigenvectors[(s, old_r)];
        }
    }

    // operators in the rotated normal basis: A'_r = Σ_s (Q_n)_{sr} A_s
    let rotate_normals = |q: &DMatrix<f64>, ops: &[DMatrix<f64>]| -> Vec<DMatrix<f64>> {
        (0..p)
            .map(|r| {
                let mut a = DMatrix::zeros(m, m);
                for (s, op) in ops.iter().enumerate() {
                    a += op * q[(s, r)];
                }
                a
            })
            .collect()
    };
    let mut ops = rotate_normals(&q_nor, shape_ops);

    // align the kernel trace vector with the first kernel direction so that
    // A'_3 carries the whole kernel trace (λ3 >= 0)
    if p > 3 || (p == 3 && !degenerate) {
        let start = 2;
        let lam: Vec<f64> = (start..p).map(|r| ops[r].trace() / m as f64).collect();
        let norm = lam.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            // Householder mapping lam -> (norm, 0, ..., 0) within the kernel
            let mut w = lam.clone();
            w[0] -= norm;
            let wn2: f64 = w.iter().map(|v| v * v).sum();
            if wn2 > 1e-300 {
                let mut h = DMatrix::identity(p, p);
                for i in 0..(p - start) {
                    for j in 0..(p - start) {
                        h[(start + i, start + j)] -= 2.0 * w[i] * w[j] / wn2;
                    }
                }
                // new basis columns: Q_nor * H (H symmetric orthogonal)
                q_nor = &q_nor * &h;
                ops = rotate_normals(&q_nor, shape_ops);
            }
        }
    }

    let mut q_tan = DMatrix::identity(m, m);
    let mut mu0 = 0.0;
    if !degenerate {
        // tangent rotation: diagonalize the traceless part of the second
        // active operator; its spectrum at equality is (μ0, -μ0, 0, ...)
        let mut t1 = ops[1].clone();
        let mean = t1.trace() / m as f64;
        for i in 0..m {
            t1[(i, i)] -= mean;
        }
        let teig = t1.symmetric_eigen();
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| {
            teig.eigenvalues[b]
                .partial_cmp(&teig.eigenvalues[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        // e1 = largest, e2 = smallest, kernel in between keeps sorted order
        let mut cols: Vec<usize> = Vec::with_capacity(m);
        cols.push(idx[0]);
        cols.push(idx[m - 1]);
        cols.extend(idx[1..m - 1].iter().copied());
        for (new_i, &old_i) in cols.iter().enumerate() {
            for k in 0..m {
                q_tan[(k, new_i)] = teig.eigenvectors[(k, old_i)];
            }
        }
        let in_tangent = |a: &DMatrix<f64>, q: &DMatrix<f64>| q.transpose() * a * q;
        let b0 = in_tangent(&ops[0], &q_tan);
        let b1 = in_tangent(&ops[1], &q_tan);

        // rotate within the active normal 2-plane so that the first operator
        // is purely off-diagonal in the (e1,e2) block
        let d0 = (b0[(0, 0)] - b0[(1, 1)]) / 2.0;
        let d1 = (b1[(0, 0)] - b1[(1, 1)]) / 2.0;
        let norm = (d0 * d0 + d1 * d1).sqrt();
        if norm > 0.0 {
            let (c, s) = (d1 / norm, -d0 / norm);
            let mut rot = DMatrix::identity(p, p);
            rot[(0, 0)] = c;
            rot[(1, 0)] = s;
            rot[(0, 1)] = -s;
            rot[(1, 1)] = c;
            q_nor = &q_nor * &rot;
            ops = rotate_normals(&q_nor, shape_ops);
        }

        // μ0 >= 0 by flipping e2 if needed
        let b0 = in_tangent(&ops[0], &q_tan);
        if b0[(0, 1)] < 0.0 {
            for k in 0..m {
                q_tan[(k, 1)] = -q_tan[(k, 1)];
            }
        }
        let b0 = in_tangent(&ops[0], &q_tan);
        mu0 = b0[(0, 1)];
    }

    let lambda1 = ops[0].trace() / m as f64;
    let lambda2 = if p >= 2 { ops[1].trace() / m as f64 } else { 0.0 };
    let lambda3 = if p >= 3 { ops[2].trace() / m as f64 } else { 0.0 };

    Ok(CanonicalForm {
        lambda1,
        lambda2,
        lambda3,
        mu0,
        tangent_basis: q_tan,
        normal_basis: q_nor,
        degenerate,
    })
}

/// Summary flags for a grid scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanSummary {
    pub points_total: usize,
    pub points_evaluated: usize,
    pub wintgen_ideal_on_grid: bool,
    pub umbilic_free: bool,
    pub min_deficit: f64,
    pub max_deficit: f64,
    pub skipped: Vec<(Vec<f64>, String)>,
}

/// Evaluate the DDVV report at one point.
pub fn report_at(spec: &ImmersionSpec, x: &[f64], c: f64, tol: f64) -> Result<DdvvReport> {
    let geo = point_geometry(spec, x)?;
    Ok(report_from_geometry(&geo, c, tol))
}

pub fn report_from_geometry(geo: &PointGeometry, c: f64, tol: f64) -> DdvvReport {
    let (s, s_perp, h2) = scalar_curvatures(geo, c);
    let deficit = ddvv_deficit(s, s_perp, h2, c);
    let (lhs, rhs) = commutator_sides(&geo.h).expect("geometry provides shape operators");
    let umbilic = geo.is_umbilic();
    let equality = is_equality(deficit, s, s_perp, h2, c, tol);
    let canonical = if equality {
        canonical_form(&geo.h, tol.max(1e-10)).ok()
    } else {
        None
    };
    DdvvReport {
        point: geo.point.clone(),
        s,
        s_perp,
        h2,
        c,
        deficit,
        commutator_lhs: lhs,
        commutator_rhs: rhs,
        is_umbilic: umbilic,
        is_equality: equality,
        canonical,
    }
}

/// Scan a list of grid points; per-point errors become skips, not failures.
pub fn wintgen_scan(
    spec: &ImmersionSpec,
    points: &[Vec<f64>],
    c: f64,
    tol: f64,
) -> (Vec<DdvvReport>, ScanSummary) {
    use rayon::prelude::*;
    let results: Vec<(Vec<f64>, Result<DdvvReport>)> = points
        .par_iter()
        .map(|x| (x.clone(), report_at(spec, x, c, tol)))
        .collect();

    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for (x, r) in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => skipped.push((x, e.to_string())),
        }
    }
    let mut min_deficit = f64::INFINITY;
    let mut max_deficit = f64::NEG_INFINITY;
    let mut all_equal = true;
    let mut umbilic_free = true;
    for r in &reports {
        min_deficit = min_deficit.min(r.deficit);
        max_deficit = max_deficit.max(r.deficit);
        all_equal &= r.is_equality;
        umbilic_free &= !r.is_umbilic;
    }
    let summary = ScanSummary {
        points_total: points.len(),
        points_evaluated: reports.len(),
        wintgen_ideal_on_grid: all_equal && !reports.is_empty(),
        umbilic_free,
        min_deficit,
        max_deficit,
        skipped,
    };
    (reports, summary)
}

/// Curvature-ellipse data for a surface point (m = 2).
#[derive(Debug, Clone, Serialize)]
pub struct EllipseReport {
    /// Center of the ellipse: the mean curvature vector in the normal frame.
    pub center: Vec<f64>,
    /// Semi-axes a >= b (singular values of [v1 v2]).
    pub semi_axes: (f64, f64),
    pub is_circle: bool,
}

/// The curvature ellipse `{II(X,X) : |X| = 1}` traced in the normal space:
/// center `H`, semi-axes the singular values of `[v1 v2]` with
/// `v1 = (II(e1,e1) − II(e2,e2))/2`, `v2 = II(e1,e2)`.
pub fn curvature_ellipse(geo: &PointGeometry, tol: f64) -> Result<EllipseReport> {
    if geo.m != 2 {
        return Err(Error::NotASurface(geo.m));
    }
    let p = geo.p;
    let v1 = DVector::from_iterator(p, geo.h.iter().map(|hr| (hr[(0, 0)] - hr[(1, 1)]) / 2.0));
    let v2 = DVector::from_iterator(p, geo.h.iter().map(|hr| hr[(0, 1)]));
    let mat = DMatrix::from_fn(p, 2, |r, c| if c == 0 { v1[r] } else { v2[r] });
    let svals = mat.singular_values();
    let (a, b) = (svals.max(), svals.min());
    let is_circle = (a - b).abs() <= tol * (a + b + 1e-300) && a > tol;
    Ok(EllipseReport {
        center: geo.mean_curvature.clone(),
        semi_axes: (a, b),
        is_circle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Shape operators in the equality normal form.
    pub fn normal_form_ops(
        m: usize,
        p: usize,
        l1: f64,
        l2: f64,
        l3: f64,
        mu0: f64,
    ) -> Vec<DMatrix<f64>> {
        let mut ops = vec![DMatrix::zeros(m, m); p];
        for i in 0..m {
            ops[0][(i, i)] = l1;
        }
        ops[0][(0, 1)] = mu0;
        ops[0][(1, 0)] = mu0;
        if p >= 2 {
            for i in 0..m {
                ops[1][(i, i)] = l2;
            }
            ops[1][(0, 0)] += mu0;
            ops[1][(1, 1)] -= mu0;
        }
        if p >= 3 {
            for i in 0..m {
                ops[2][(i, i)] = l3;
            }
        }
        ops
    }

    fn random_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.5);
        let qr = a.qr();
        qr.q()
    }

    #[test]
    fn deficit_sphere_and_normal_form() {
        // unit 3-sphere: Δ = 0 + 1 − 0 − 1 = 0
        assert_eq!(ddvv_deficit(1.0, 0.0, 1.0, 0.0), 0.0);
        // equality normal form, λ = 0, μ0 = 1: Δ = 0 + 0 − 2/3 − (−2/3) = 0
        let ops = normal_form_ops(3, 3, 0.0, 0.0, 0.0, 1.0);
        let (s, s_perp, h2) = crate::geometry::scalars_from_shape_ops(&ops);
        let d = ddvv_deficit(s, s_perp, h2, 0.0);
        assert!(d.abs() < 1e-14, "deficit {d}");
    }

    #[test]
    fn commutator_equality_oracle() {
        // μ0 = 1: ‖Ā1‖² = ‖Ā2‖² = 2, ‖[Ā1,Ā2]‖² = 8,
        // lhs = 16 over ordered pairs, rhs = (2+2)² = 16
        let ops = normal_form_ops(3, 3, 0.0, 0.0, 0.0, 1.0);
        let (lhs, rhs) = commutator_sides(&ops).unwrap();
        assert!((lhs - 16.0).abs() < 1e-12);
        assert!((rhs - 16.0).abs() < 1e-12);
        // the unsquared-rhs reading (√2+√2)² = 8 would violate the inequality
        let unsquared: f64 = {
            let sum: f64 = 2.0f64.sqrt() + 2.0f64.sqrt();
            sum * sum
        };
        assert!(lhs > unsquared);
    }

    #[test]
    fn single_operator_commutes() {
        let ops = vec![DMatrix::from_fn(3, 3, |i, j| ((i + j) % 3) as f64)];
        let sym: Vec<DMatrix<f64>> = ops.iter().map(|a| (a + a.transpose()) * 0.5).collect();
        let (lhs, rhs) = commutator_sides(&sym).unwrap();
        assert_eq!(lhs, 0.0);
        assert!(lhs <= rhs);
    }

    #[test]
    fn random_operators_satisfy_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let ops: Vec<DMatrix<f64>> = (0..3)
                .map(|_| {
                    let a = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
                    (&a + a.transpose()) * 0.5
                })
                .collect();
            let (lhs, rhs) = commutator_sides(&ops).unwrap();
            assert!(lhs <= rhs + 1e-12 * (1.0 + rhs));
        }
    }

    #[test]
    fn canonical_form_fixed_point() {
        let mu = 1.0 / 6.0f64.sqrt();
        let ops = normal_form_ops(3, 3, 0.5, -0.2, 0.1, mu);
        let cf = canonical_form(&ops, 1e-8).unwrap();
        assert!((cf.mu0 - mu).abs() < 1e-12);
        assert!((cf.lambda3.abs() - 0.1).abs() < 1e-12);
        assert!(cf.residual(&ops) < 1e-10);
    }

    #[test]
    fn canonical_form_gauge_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mu = 1.0 / 6.0f64.sqrt();
        let ops = normal_form_ops(3, 3, 0.5, -0.2, 0.1, mu);
        for _ in 0..20 {
            let qt = random_orthogonal(3, &mut rng);
            let qn = random_orthogonal(3, &mut rng);
            // conjugate tangent and mix normals
            let mixed: Vec<DMatrix<f64>> = (0..3)
                .map(|r| {
                    let mut a = DMatrix::zeros(3, 3);
                    for (s, op) in ops.iter().enumerate() {
                        a += qt.transpose() * op * &qt * qn[(r, s)];
                    }
                    a
                })
                .collect();
            let cf = canonical_form(&mixed, 1e-8).unwrap();
            assert!((cf.mu0 - mu).abs() < 1e-8, "mu0 {}", cf.mu0);
            assert!(cf.residual(&mixed) < 1e-8, "residual {}", cf.residual(&mixed));
            // gauge-stable invariants
            let inv_in = 0.5f64.powi(2) + 0.2f64.powi(2);
            let inv_out = cf.lambda1 * cf.lambda1 + cf.lambda2 * cf.lambda2;
            assert!((inv_in - inv_out).abs() < 1e-8);
        }
    }

    #[test]
    fn canonical_form_rejects_generic_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rejected = 0;
        for _ in 0..50 {
            let ops: Vec<DMatrix<f64>> = (0..3)
                .map(|_| {
                    let a = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
                    (&a + a.transpose()) * 0.5
                })
                .collect();
            if canonical_form(&ops, 1e-8).is_err() {
                rejected += 1;
            }
        }
        assert_eq!(rejected, 50);
    }

    #[test]
    fn umbilic_input_is_degenerate_not_error() {
        let mut id = DMatrix::zeros(3, 3);
        for i in 0..3 {
            id[(i, i)] = 2.0;
        }
        let cf = canonical_form(&[id, DMatrix::zeros(3, 3), DMatrix::zeros(3, 3)], 1e-8).unwrap();
        assert!(cf.degenerate);
        assert_eq!(cf.mu0, 0.0);
    }

    #[test]
    fn scan_flat_plane_all_umbilic_equality() {
        let spec = ImmersionSpec::from_strings(
            &["u", "v", "s"],
            &["u", "v", "s", "0"],
            &[-1.0, -1.0, -1.0],
            &[1.0, 1.0, 1.0],
        )
        .unwrap();
        let grid = spec.grid(&[3, 3, 3], 0.05);
        let (reports, summary) = wintgen_scan(&spec, &grid, 0.0, DEFAULT_EQUALITY_TOL);
        assert_eq!(reports.len(), 27);
        assert!(summary.wintgen_ideal_on_grid);
        assert!(!summary.umbilic_free);
    }

    #[test]
    fn scan_cylinder_over_holomorphic_curve_is_ideal() {
        let spec = ImmersionSpec::from_strings(
            &["u", "v", "s"],
            &["u", "v", "u^2 - v^2", "2*u*v", "s"],
            &[-1.0, -1.0, -1.0],
            &[1.0, 1.0, 1.0],
        )
        .unwrap();
        let grid = spec.grid(&[5, 5, 5], 0.05);
        let (reports, summary) = wintgen_scan(&spec, &grid, 0.0, DEFAULT_EQUALITY_TOL);
        assert_eq!(reports.len(), 125);
        assert!(summary.wintgen_ideal_on_grid);
        // umbilic only above the curve's isolated flat point (u,v) = (0,0),
        // which the margined grid avoids
        assert!(summary.umbilic_free);
    }

    #[test]
    fn scan_generic_graph_is_not_ideal() {
        let spec = ImmersionSpec::from_strings(
            &["u", "v", "w"],
            &["u", "v", "w", "u^2 + v^2", "u*v"],
            &[-1.0, -1.0, -1.0],
            &[1.0, 1.0, 1.0],
        )
        .unwrap();
        let grid = spec.grid(&[3, 3, 3], 0.1);
        let (_, summary) = wintgen_scan(&spec, &grid, 0.0, DEFAULT_EQUALITY_TOL);
        assert!(!summary.wintgen_ideal_on_grid);
        assert!(summary.min_deficit > 0.0);
    }

    #[test]
    fn ellipse_holomorphic_curve_is_circle() {
        let spec = ImmersionSpec::from_strings(
            &["u", "v"],
            &["u", "v", "u^2 - v^2", "2*u*v"],
            &[-1.0, -1.0],
            &[1.0, 1.0],
        )
        .unwrap();
        let geo = point_geometry(&spec, &[0.4, 0.3]).unwrap();
        let rep = curvature_ellipse(&geo, 1e-8).unwrap();
        assert!(rep.is_circle, "semi-axes {:?}", rep.semi_axes);
        assert!(rep.semi_axes.0 > 0.1);
    }

    #[test]
    fn ellipse_clifford_torus_is_segment() {
        let r = 1.0 / 2.0f64.sqrt();
        let spec = ImmersionSpec::from_strings(
            &["u", "v"],
            &[
                &format!("{r}*cos(u)"),
                &format!("{r}*sin(u)"),
                &format!("{r}*cos(v)"),
                &format!("{r}*sin(v)"),
            ],
            &[0.0, 0.0],
            &[3.0, 3.0],
        )
        .unwrap();
        let geo = point_geometry(&spec, &[0.7, 1.1]).unwrap();
        let rep = curvature_ellipse(&geo, 1e-8).unwrap();
        assert!(!rep.is_circle);
        assert!(rep.semi_axes.1 < 1e-10, "b = {}", rep.semi_axes.1);
        assert!(rep.semi_axes.0 > 0.1);
    }

    #[test]
    fn ellipse_round_sphere_is_point() {
        let spec = ImmersionSpec::from_strings(
            &["u", "v"],
            &["cos(u)*cos(v)", "cos(u)*sin(v)", "sin(u)"],
            &[-1.0, -1.0],
            &[1.0, 1.0],
        )
        .unwrap();
        let geo = point_geometry(&spec, &[0.3, 0.5]).unwrap();
        let rep = curvature_ellipse(&geo, 1e-8).unwrap();
        assert!(!rep.is_circle);
        assert!(rep.semi_axes.0 < 1e-10);
    }

    #[test]
    fn ellipse_requires_surface() {
        let spec = ImmersionSpec::from_strings(
            &["u", "v", "s"],
            &["u", "v", "s", "0"],
            &[-1.0, -1.0, -1.0],
            &[1.0, 1.0, 1.0],
        )
        .unwrap();
        let geo = point_geometry(&spec, &[0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            curvature_ellipse(&geo, 1e-8),
            Err(Error::NotASurface(3))
        ));
    }

    #[test]
    fn equality_flag_scale_invariant() {
        for kappa in [0.5, 2.0, 10.0] {
            let e = format!("{kappa}*(u^2 - v^2)");
            let e2 = format!("{kappa}*2*u*v");
            let spec = ImmersionSpec::from_strings(
                &["u", "v", "s"],
                &[
                    &format!("{kappa}*u"),
                    &format!("{kappa}*v"),
                    &e,
                    &e2,
                    &format!("{kappa}*s"),
                ],
                &[-1.0, -1.0, -1.0],
                &[1.0, 1.0, 1.0],
            )
            .unwrap();
            let rep = report_at(&spec, &[0.3, 0.2, 0.1], 0.0, DEFAULT_EQUALITY_TOL).unwrap();
            assert!(rep.is_equality, "kappa {kappa}: deficit {}", rep.deficit);
        }
    }
}
