//! Euclidean submanifold invariants of a parametric immersion
//! `f: U ⊆ R^m -> R^{m+p}`: frames, fundamental forms, shape operators,
//! curvature tensors, and the scalar quantities `s`, `s⊥`, `‖H‖²`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::jet::Jet;

/// Relative singular-value threshold below which the Jacobian counts as
/// rank deficient.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

/// Relative threshold for umbilic detection:
/// `‖II - (tr II / m) I‖ < 1e-10 · (1 + ‖II‖)`.
pub const UMBILIC_THRESHOLD: f64 = 1e-10;

/// Gram-Schmidt skip threshold for near-parallel normal-frame candidates.
const GS_SKIP_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpecOptions {
    /// Override for the jet order used by the Möbius pipeline (default 4).
    pub jet_order: Option<usize>,
    pub fd_step: f64,
    pub tol_exact: f64,
    pub tol_fd_constant: f64,
    pub ambient_c: f64,
}

impl Default for SpecOptions {
    fn default() -> Self {
        SpecOptions {
            jet_order: None,
            fd_step: 1e-3,
            tol_exact: 1e-8,
            tol_fd_constant: 10.0,
            ambient_c: 0.0,
        }
    }
}

/// A parametric immersion `f: U ⊆ R^m -> R^{m+p}` given by DSL expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmersionSpec {
    pub variables: Vec<String>,
    pub components: Vec<Expr>,
    pub domain_min: Vec<f64>,
    pub domain_max: Vec<f64>,
    pub options: SpecOptions,
}

impl ImmersionSpec {
    pub fn new(
        variables: Vec<String>,
        components: Vec<Expr>,
        domain_min: Vec<f64>,
        domain_max: Vec<f64>,
    ) -> Result<ImmersionSpec> {
        let spec = ImmersionSpec {
            variables,
            components,
            domain_min,
            domain_max,
            options: SpecOptions::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Parse component expressions from text.
    pub fn from_strings(
        variables: &[&str],
        components: &[&str],
        domain_min: &[f64],
        domain_max: &[f64],
    ) -> Result<ImmersionSpec> {
        let vars: Vec<String> = variables.iter().map(|s| s.to_string()).collect();
        let comps: Vec<Expr> = components
            .iter()
            .map(|c| parse(c, &vars))
            .collect::<Result<_>>()?;
        ImmersionSpec::new(vars, comps, domain_min.to_vec(), domain_max.to_vec())
    }

    fn validate(&self) -> Result<()> {
        let m = self.variables.len();
        let n = self.components.len();
        if m < 1 {
            return Err(Error::Config("immersion needs at least one variable".into()));
        }
        if n <= m {
            return Err(Error::Config(format!(
                "need codimension >= 1: {n} components for {m} variables"
            )));
        }
        if self.domain_min.len() != m || self.domain_max.len() != m {
            return Err(Error::Config("domain box dimension mismatch".into()));
        }
        for i in 0..m {
            if !(self.domain_min[i] < self.domain_max[i]) {
                return Err(Error::Config(format!(
                    "domain axis {i}: min must be < max"
                )));
            }
        }
        let mut free = Vec::new();
        for c in &self.components {
            c.free_variables(&mut free);
        }
        for name in &free {
            if !self.variables.contains(name) {
                return Err(Error::UnknownIdentifier(name.clone()));
            }
        }
        Ok(())
    }

    /// Parameter dimension m.
    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    /// Codimension p.
    pub fn codim(&self) -> usize {
        self.components.len() - self.variables.len()
    }

    /// Ambient dimension m + p.
    pub fn ambient_dim(&self) -> usize {
        self.components.len()
    }

    pub fn contains(&self, x: &[f64], margin: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.domain_min.iter().zip(&self.domain_max))
                .all(|(&xi, (&lo, &hi))| xi >= lo + margin && xi <= hi - margin)
    }

    /// Jets of all components at `x`.
    pub fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.components
            .iter()
            .map(|c| c.eval_jet(&self.variables, x, order))
            .collect()
    }

    /// Plain values of all components at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        let vals: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.eval(&self.variables, x))
            .collect::<Result<_>>()?;
        Ok(DVector::from_vec(vals))
    }

    /// Uniform grid over the domain box (counts per axis), row-major order.
    pub fn grid(&self, counts: &[usize], margin_fraction: f64) -> Vec<Vec<f64>> {
        let m = self.dim();
        assert_eq!(counts.len(), m);
        let mut axes: Vec<Vec<f64>> = Vec::with_capacity(m);
        for i in 0..m {
            let lo = self.domain_min[i];
            let hi = self.domain_max[i];
            let margin = (hi - lo) * margin_fraction;
            let (a, b) = (lo + margin, hi - margin);
            let n = counts[i].max(2);
            axes.push(
                (0..n)
                    .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
                    .collect(),
            );
        }
        let total: usize = counts.iter().product();
        let mut points = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut pt = vec![0.0; m];
            for i in (0..m).rev() {
                pt[i] = axes[i][rem % counts[i]];
                rem /= counts[i];
            }
            points.push(pt);
        }
        points
    }
}

/// Per-point Euclidean invariants of an immersion.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub point: Vec<f64>,
    pub position: DVector<f64>,
    /// Coordinate tangent vectors ∂_a f (m rows in R^{m+p}).
    pub jacobian: Vec<DVector<f64>>,
    /// Coordinate Hessian vectors ∂_a ∂_b f.
    pub hessian: Vec<Vec<DVector<f64>>>,
    /// Orthonormal tangent frame e_i ⊂ R^{m+p}.
    pub tangent_frame: Vec<DVector<f64>>,
    /// Change of basis: e_i = Σ_a T[(i,a)] ∂_a f.
    pub tangent_change: DMatrix<f64>,
    /// Orthonormal normal frame n_r.
    pub normal_frame: Vec<DVector<f64>>,
    /// Induced metric I_ab in the coordinate basis.
    pub metric: DMatrix<f64>,
    /// Second fundamental form h^r_ij in the orthonormal frame (per r).
    pub h: Vec<DMatrix<f64>>,
    /// Coordinate second fundamental form ⟨∂_ab f, n_r⟩ (per r).
    pub h_coord: Vec<DMatrix<f64>>,
    /// Mean curvature components H^r = (1/m) tr h^r.
    pub mean_curvature: Vec<f64>,
    pub m: usize,
    pub p: usize,
}

/// Stable Gram-Schmidt: orthonormalize `vectors` against `basis` then each
/// other, skipping candidates whose residual norm falls below `skip`.
/// Returns the accepted orthonormal vectors.
pub fn gram_schmidt(
    basis: &[DVector<f64>],
    candidates: &[DVector<f64>],
    skip: f64,
) -> Vec<DVector<f64>> {
    let mut frame: Vec<DVector<f64>> = Vec::new();
    for cand in candidates {
        let mut v = cand.clone();
        // two passes for numerical stability
        for _ in 0..2 {
            for b in basis.iter().chain(frame.iter()) {
                let proj = v.dot(b);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > skip {
            frame.push(v / norm);
        }
    }
    frame
}

fn jet_dot(a: &[Jet], b: &[Jet]) -> Jet {
    let mut acc = Jet::constant(a[0].space(), 0.0);
    for (x, y) in a.iter().zip(b) {
        acc = acc.add(&x.mul(y).unwrap()).unwrap();
    }
    acc
}

/// Jet-valued orthonormal tangent and normal frames at `x` (ambient
/// Euclidean inner product), by the same deterministic Gram-Schmidt used for
/// the value-level frames: tangent vectors in index order, then ambient
/// basis seeds with near-tangent candidates skipped.
pub fn frame_jets(
    spec: &ImmersionSpec,
    x: &[f64],
    order: usize,
) -> Result<(Vec<Vec<Jet>>, Vec<Vec<Jet>>)> {
    let m = spec.dim();
    let p = spec.codim();
    let n = spec.ambient_dim();
    let fj = spec.jets(x, order + 1)?;
    let df: Vec<Vec<Jet>> = (0..m)
        .map(|a| fj.iter().map(|j| j.deriv(a)).collect())
        .collect();
    let space = df[0][0].space().clone();

    let jmat = DMatrix::from_fn(m, n, |a, k| df[a][k].value());
    let svals = jmat.singular_values();
    if svals.min() < DEGENERACY_THRESHOLD * svals.max() {
        return Err(Error::DegenerateImmersion(svals.min() / svals.max()));
    }

    let mut tangent: Vec<Vec<Jet>> = Vec::with_capacity(m);
    for a in 0..m {
        let mut v = df[a].clone();
        for _ in 0..2 {
            for u in &tangent {
                let proj = jet_dot(&v, u);
                for (vc, uc) in v.iter_mut().zip(u) {
                    *vc = vc.sub(&proj.mul(uc).unwrap()).unwrap();
                }
            }
        }
        let norm = jet_dot(&v, &v).sqrt()?;
        if norm.value() < DEGENERACY_THRESHOLD * svals.max() {
            return Err(Error::DegenerateImmersion(norm.value() / svals.max()));
        }
        tangent.push(v.iter().map(|c| c.div(&norm)).collect::<Result<_>>()?);
    }

    let mut normals: Vec<Vec<Jet>> = Vec::with_capacity(p);
    for k in 0..n {
        if normals.len() == p {
            break;
        }
        let mut v: Vec<Jet> = (0..n)
            .map(|c| Jet::constant(&space, if c == k { 1.0 } else { 0.0 }))
            .collect();
        for _ in 0..2 {
            for u in tangent.iter().chain(normals.iter()) {
                let proj = jet_dot(&v, u);
                for (vc, uc) in v.iter_mut().zip(u) {
                    *vc = vc.sub(&proj.mul(uc).unwrap()).unwrap();
                }
            }
        }
        let norm2 = jet_dot(&v, &v);
        if norm2.value().max(0.0).sqrt() > GS_SKIP_THRESHOLD {
            let norm = norm2.sqrt()?;
            normals.push(v.iter().map(|c| c.div(&norm)).collect::<Result<_>>()?);
        }
    }
    if normals.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "normal frame has {} vectors, expected {p}",
            normals.len()
        )));
    }
    Ok((tangent, normals))
}

/// Compute all Euclidean invariants at `x`.
pub fn point_geometry(spec: &ImmersionSpec, x: &[f64]) -> Result<PointGeometry> {
    if !spec.contains(x, 0.0) {
        return Err(Error::Domain(format!("point {x:?} outside domain box")));
    }
    let m = spec.dim();
    let p = spec.codim();
    let n = spec.ambient_dim();
    let jets = spec.jets(x, 2)?;

    let position = DVector::from_iterator(n, jets.iter().map(|j| j.value()));
    let jacobian: Vec<DVector<f64>> = (0..m)
        .map(|a| DVector::from_iterator(n, jets.iter().map(|j| j.d(a))))
        .collect();
    let hessian: Vec<Vec<DVector<f64>>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| DVector::from_iterator(n, jets.iter().map(|j| j.d2(a, b))))
                .collect()
        })
        .collect();

    // rank check
    let jmat = DMatrix::from_fn(m, n, |a, k| jacobian[a][k]);
    let svals = jmat.singular_values();
    let (smax, smin) = (svals.max(), svals.min());
    if smin < DEGENERACY_THRESHOLD * smax {
        return Err(Error::DegenerateImmersion(smin / smax));
    }

    let metric = DMatrix::from_fn(m, m, |a, b| jacobian[a].dot(&jacobian[b]));

    // orthonormal tangent frame by Gram-Schmidt on Jacobian rows, tracking
    // the change of basis T with e_i = Σ_a T_ia ∂_a f
    let mut tangent_frame: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut tangent_change = DMatrix::zeros(m, m);
    for i in 0..m {
        let mut v = jacobian[i].clone();
        let mut coeff = DVector::zeros(m);
        coeff[i] = 1.0;
        for _ in 0..2 {
            for (j, e) in tangent_frame.iter().enumerate() {
                let proj = v.dot(e);
                v -= e * proj;
                for a in 0..m {
                    coeff[a] -= proj * tangent_change[(j, a)];
                }
            }
        }
        let norm = v.norm();
        if norm < DEGENERACY_THRESHOLD * smax {
            return Err(Error::DegenerateImmersion(norm / smax));
        }
        tangent_frame.push(v / norm);
        for a in 0..m {
            tangent_change[(i, a)] = coeff[a] / norm;
        }
    }

    // orthonormal normal frame from standard basis seeds, in index order
    let seeds: Vec<DVector<f64>> = (0..n)
        .map(|k| {
            let mut v = DVector::zeros(n);
            v[k] = 1.0;
            v
        })
        .collect();
    let normal_frame = gram_schmidt(&tangent_frame, &seeds, GS_SKIP_THRESHOLD);
    if normal_frame.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "normal frame has {} vectors, expected {}",
            normal_frame.len(),
            p
        )));
    }

    let h_coord: Vec<DMatrix<f64>> = (0..p)
        .map(|r| DMatrix::from_fn(m, m, |a, b| hessian[a][b].dot(&normal_frame[r])))
        .collect();

    // h^r_ij = Σ_ab T_ia T_jb ⟨∂_ab f, n_r⟩, symmetrized
    let h: Vec<DMatrix<f64>> = (0..p)
        .map(|r| {
            let raw = &tangent_change * &h_coord[r] * tangent_change.transpose();
            (&raw + raw.transpose()) * 0.5
        })
        .collect();

    let mean_curvature: Vec<f64> = h.iter().map(|hr| hr.trace() / m as f64).collect();

    Ok(PointGeometry {
        point: x.to_vec(),
        position,
        jacobian,
        hessian,
        tangent_frame,
        tangent_change,
        normal_frame,
        metric,
        h,
        h_coord,
        mean_curvature,
        m,
        p,
    })
}

impl PointGeometry {
    /// Gauss-equation curvature tensor (flat ambient):
    /// `R_ijkl = Σ_r (h^r_ik h^r_jl − h^r_il h^r_jk)` in the orthonormal frame.
    pub fn riemann(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.h
            .iter()
            .map(|hr| hr[(i, k)] * hr[(j, l)] - hr[(i, l)] * hr[(j, k)])
            .sum()
    }

    /// Normal curvature tensor
    /// `R⊥_{ij,rs} = Σ_k (h^r_ik h^s_kj − h^s_ik h^r_kj)`.
    pub fn normal_curvature(&self, i: usize, j: usize, r: usize, s: usize) -> f64 {
        (0..self.m)
            .map(|k| {
                self.h[r][(i, k)] * self.h[s][(k, j)] - self.h[s][(i, k)] * self.h[r][(k, j)]
            })
            .sum()
    }

    /// Traceless second fundamental form norm and umbilic test:
    /// `‖II − (tr II/m) I‖ < 1e−10 · (1 + ‖II‖)`.
    pub fn is_umbilic(&self) -> bool {
        let (traceless, total) = self.traceless_norms();
        traceless < UMBILIC_THRESHOLD * (1.0 + total)
    }

    /// (‖II − (tr II/m)I‖, ‖II‖) over all normal directions.
    pub fn traceless_norms(&self) -> (f64, f64) {
        let m = self.m as f64;
        let mut traceless2 = 0.0;
        let mut total2 = 0.0;
        for hr in &self.h {
            let mean = hr.trace() / m;
            for i in 0..self.m {
                for j in 0..self.m {
                    let v = hr[(i, j)];
                    total2 += v * v;
                    let t = v - if i == j { mean } else { 0.0 };
                    traceless2 += t * t;
                }
            }
        }
        (traceless2.sqrt(), total2.sqrt())
    }

    /// Shape operators A_r = (h^r_ij) in the orthonormal tangent frame.
    pub fn shape_operators(&self) -> Vec<DMatrix<f64>> {
        self.h.clone()
    }
}

/// Normalized scalar curvature, normal scalar curvature, and `‖H‖²`.
///
/// `s = (2/(m(m−1))) Σ_{i<j} R_ijij`,
/// `s⊥ = (2/(m(m−1))) sqrt(Σ_{i<j} Σ_{r<s} (R⊥_{ij,rs})²)`,
/// `H2 = Σ_r (H^r)²`.
///
/// The engine always computes flat-ambient curvature; the ambient constant
/// `c` enters only the DDVV deficit.
pub fn scalar_curvatures(g: &PointGeometry, _c: f64) -> (f64, f64, f64) {
    scalars_from_shape_ops(&g.h)
}

/// Same scalars from raw symmetric shape operators (synthetic inputs).
pub fn scalars_from_shape_ops(ops: &[DMatrix<f64>]) -> (f64, f64, f64) {
    let m = ops[0].nrows();
    let p = ops.len();
    let norm = 2.0 / (m as f64 * (m - 1) as f64);

    let mut sum_r = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            for hr in ops {
                sum_r += hr[(i, i)] * hr[(j, j)] - hr[(i, j)] * hr[(j, i)];
            }
        }
    }
    let s = norm * sum_r;

    let mut perp2 = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            for r in 0..p {
                for t in (r + 1)..p {
                    let mut v = 0.0;
                    for k in 0..m {
                        v += ops[r][(i, k)] * ops[t][(k, j)] - ops[t][(i, k)] * ops[r][(k, j)];
                    }
                    perp2 += v * v;
                }
            }
        }
    }
    let s_perp = norm * perp2.sqrt();

    let h2: f64 = ops
        .iter()
        .map(|hr| {
            let hm = hr.trace() / m as f64;
            hm * hm
        })
        .sum();

    (s, s_perp, h2)
}

/// Two-route Gauss-equation consistency: intrinsic curvature of the induced
/// metric (Christoffel symbols from central differences of the metric field)
/// against the extrinsic Gauss-equation curvature. Returns the max absolute
/// componentwise difference in the coordinate basis.
pub fn intrinsic_curvature_crosscheck(spec: &ImmersionSpec, x: &[f64], h: f64) -> Result<f64> {
    let m = spec.dim();
    if !spec.contains(x, 2.0 * h) {
        return Err(Error::StencilOutsideDomain);
    }

    let metric_at = |pt: &[f64]| -> Result<DMatrix<f64>> {
        let jets = spec.jets(pt, 1)?;
        let n = spec.ambient_dim();
        let jac: Vec<DVector<f64>> = (0..m)
            .map(|a| DVector::from_iterator(n, jets.iter().map(|j| j.d(a))))
            .collect();
        Ok(DMatrix::from_fn(m, m, |a, b| jac[a].dot(&jac[b])))
    };

    let g0 = metric_at(x)?;
    let shift = |x: &[f64], a: usize, s: f64| -> Vec<f64> {
        let mut y = x.to_vec();
        y[a] += s;
        y
    };

    // first and second metric derivatives by central differences
    let mut dg = vec![DMatrix::zeros(m, m); m];
    let mut ddg = vec![vec![DMatrix::zeros(m, m); m]; m];
    for a in 0..m {
        let gp = metric_at(&shift(x, a, h))?;
        let gm = metric_at(&shift(x, a, -h))?;
        dg[a] = (&gp - &gm) / (2.0 * h);
        ddg[a][a] = (&gp - 2.0 * &g0 + &gm) / (h * h);
    }
    for a in 0..m {
        for b in (a + 1)..m {
            let gpp = metric_at(&shift(&shift(x, a, h), b, h))?;
            let gpm = metric_at(&shift(&shift(x, a, h), b, -h))?;
            let gmp = metric_at(&shift(&shift(x, a, -h), b, h))?;
            let gmm = metric_at(&shift(&shift(x, a, -h), b, -h))?;
            let d = (gpp - gpm - gmp + gmm) / (4.0 * h * h);
            ddg[a][b] = d.clone();
            ddg[b][a] = d;
        }
    }

    let ginv = g0
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular induced metric".into()))?;

    // Christoffel symbols Γ^k_ab and their derivatives ∂_c Γ^k_ab
    let gamma_from = |dg: &[DMatrix<f64>], ginv: &DMatrix<f64>| -> Vec<DMatrix<f64>> {
        (0..m)
            .map(|k| {
                DMatrix::from_fn(m, m, |a, b| {
                    0.5 * (0..m)
                        .map(|l| ginv[(k, l)] * (dg[a][(b, l)] + dg[b][(a, l)] - dg[l][(a, b)]))
                        .sum::<f64>()
                })
            })
            .collect()
    };
    let gamma = gamma_from(&dg, &ginv);

    // ∂_c g^{kl} = −g^{km} ∂_c g_mn g^{nl}
    let dginv: Vec<DMatrix<f64>> = (0..m).map(|c| -(&ginv * &dg[c] * &ginv)).collect();
    let mut dgamma = vec![vec![DMatrix::zeros(m, m); m]; m]; // [c][k](a,b)
    for c in 0..m {
        for k in 0..m {
            for a in 0..m {
                for b in 0..m {
                    let mut v = 0.0;
                    for l in 0..m {
                        v += 0.5
                            * dginv[c][(k, l)]
                            * (dg[a][(b, l)] + dg[b][(a, l)] - dg[l][(a, b)]);
                        v += 0.5
                            * ginv[(k, l)]
                            * (ddg[c][a][(b, l)] + ddg[c][b][(a, l)] - ddg[c][l][(a, b)]);
                    }
                    dgamma[c][k][(a, b)] = v;
                }
            }
        }
    }

    // R^l_abd = ∂_a Γ^l_bd − ∂_b Γ^l_ad + Γ^l_am Γ^m_bd − Γ^l_bm Γ^m_ad,
    // then R_abcd = ⟨R(∂_a,∂_b)∂_d, ∂_c⟩ = g_cl R^l_abd, matching the
    // Gauss-equation pattern h_ac h_bd − h_ad h_bc.
    let geo = point_geometry(spec, x)?;
    let mut max_residual: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    let mut r_up = vec![0.0; m];
                    for (l, r_l) in r_up.iter_mut().enumerate() {
                        let mut v = dgamma[a][l][(b, d)] - dgamma[b][l][(a, d)];
                        for mm in 0..m {
                            v += gamma[l][(a, mm)] * gamma[mm][(b, d)]
                                - gamma[l][(b, mm)] * gamma[mm][(a, d)];
                        }
                        *r_l = v;
                    }
                    let r_intr: f64 = (0..m).map(|l| g0[(c, l)] * r_up[l]).sum();
                    let r_gauss: f64 = geo
                        .h_coord
                        .iter()
                        .map(|hr| hr[(a, c)] * hr[(b, d)] - hr[(a, d)] * hr[(b, c)])
                        .sum();
                    max_residual = max_residual.max((r_intr - r_gauss).abs());
                }
            }
        }
    }
    Ok(max_residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sphere3() -> ImmersionSpec {
        // unit 3-sphere chart in R^4
        ImmersionSpec::from_strings(
            &["u", "v", "w"],
            &[
                "cos(u)*cos(v)*cos(w)",
                "cos(u)*cos(v)*sin(w)",
                "cos(u)*sin(v)",
                "sin(u)",
            ],
            &[-1.0, -1.0, -1.0],
            &[1.0, 1.0, 1.0],
        )
        .unwrap()
    }

    fn flat_plane() -> ImmersionSpec {
        ImmersionSpec::from_strings(
            &["u", "v", "s"],
            &["u", "v", "s", "0"],
            &[-1.0, -1.0, -1.0],
            &[1.0, 1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn frames_are_orthonormal() {
        let spec = sphere3();
        let g = point_geometry(&spec, &[0.3, 0.2, 0.1]).unwrap();
        for i in 0..g.m {
            for j in 0..g.m {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(
                    g.tangent_frame[i].dot(&g.tangent_frame[j]),
                    want,
                    epsilon = 1e-10
                );
            }
            for r in 0..g.p {
                assert_relative_eq!(
                    g.tangent_frame[i].dot(&g.normal_frame[r]),
                    0.0,
                    epsilon = 1e-10
                );
            }
        }
        for r in 0..g.p {
            for s in 0..g.p {
                let want = if r == s { 1.0 } else { 0.0 };
                assert_relative_eq!(
                    g.normal_frame[r].dot(&g.normal_frame[s]),
                    want,
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn sphere_is_totally_umbilic_with_unit_mean_curvature() {
        let spec = sphere3();
        let g = point_geometry(&spec, &[0.3, 0.2, 0.1]).unwrap();
        assert_eq!(g.p, 1);
        // h^1 = ±I_3 in the orthonormal frame
        let sign = g.h[0][(0, 0)].signum();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { sign } else { 0.0 };
                assert_relative_eq!(g.h[0][(i, j)], want, epsilon = 1e-9);
            }
        }
        assert_relative_eq!(g.mean_curvature[0].abs(), 1.0, epsilon = 1e-9);
        assert!(g.is_umbilic());
    }

    #[test]
    fn flat_plane_is_totally_geodesic() {
        let spec = flat_plane();
        let g = point_geometry(&spec, &[0.1, 0.2, 0.3]).unwrap();
        for hr in &g.h {
            assert!(hr.amax() < 1e-12);
        }
        let (s, s_perp, h2) = scalar_curvatures(&g, 0.0);
        assert_relative_eq!(s, 0.0, epsilon = 1e-12);
        assert_relative_eq!(s_perp, 0.0, epsilon = 1e-12);
        assert_relative_eq!(h2, 0.0, epsilon = 1e-12);
        assert!(g.is_umbilic());
    }

    #[test]
    fn paraboloid_graph_shape_operator() {
        let spec = ImmersionSpec::from_strings(
            &["u", "v"],
            &["u", "v", "u^2 + v^2", "0"],
            &[-1.0, -1.0],
            &[1.0, 1.0],
        )
        .unwrap();
        let g = point_geometry(&spec, &[0.0, 0.0]).unwrap();
        // normal frame at the origin is (0,0,1,0), (0,0,0,1) in index order
        assert_relative_eq!(g.h[0][(0, 0)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(g.h[0][(1, 1)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(g.h[0][(0, 1)], 0.0, epsilon = 1e-12);
        assert!(g.h[1].amax() < 1e-12);
    }

    #[test]
    fn sphere_scalar_curvatures() {
        let spec = sphere3();
        let g = point_geometry(&spec, &[0.3, 0.2, 0.1]).unwrap();
        let (s, s_perp, h2) = scalar_curvatures(&g, 0.0);
        assert_relative_eq!(s, 1.0, epsilon = 1e-9);
        assert_relative_eq!(s_perp, 0.0, epsilon = 1e-9);
        assert_relative_eq!(h2, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn normal_form_synthetic_scalars() {
        // Eq-(2)-shaped operators, m = 3, p = 3, λ = 0, μ0 = 1
        let mut a1 = DMatrix::zeros(3, 3);
        a1[(0, 1)] = 1.0;
        a1[(1, 0)] = 1.0;
        let mut a2 = DMatrix::zeros(3, 3);
        a2[(0, 0)] = 1.0;
        a2[(1, 1)] = -1.0;
        let a3 = DMatrix::zeros(3, 3);
        let (s, s_perp, h2) = scalars_from_shape_ops(&[a1, a2, a3]);
        assert_relative_eq!(s, -2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(s_perp, 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(h2, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_jacobian_detected() {
        let spec = ImmersionSpec::from_strings(
            &["u", "v"],
            &["u", "u", "0"],
            &[-1.0, -1.0],
            &[1.0, 1.0],
        )
        .unwrap();
        assert!(matches!(
            point_geometry(&spec, &[0.1, 0.1]),
            Err(Error::DegenerateImmersion(_))
        ));
    }

    #[test]
    fn crosscheck_flat_plane_exact() {
        let spec = flat_plane();
        let r = intrinsic_curvature_crosscheck(&spec, &[0.0, 0.0, 0.0], 1e-3).unwrap();
        assert!(r <= 1e-12, "residual {r}");
    }

    #[test]
    fn crosscheck_sphere_within_fd_tolerance() {
        let spec = sphere3();
        let r = intrinsic_curvature_crosscheck(&spec, &[0.3, 0.2, 0.1], 1e-3).unwrap();
        assert!(r <= 1e-5, "residual {r}");
    }

    #[test]
    fn crosscheck_graph_within_fd_tolerance() {
        let spec = ImmersionSpec::from_strings(
            &["u", "v"],
            &["u", "v", "u^2 + v^2", "0"],
            &[-1.0, -1.0],
            &[1.0, 1.0],
        )
        .unwrap();
        let r = intrinsic_curvature_crosscheck(&spec, &[0.2, -0.3], 1e-3).unwrap();
        assert!(r <= 1e-5, "residual {r}");
    }

    #[test]
    fn stencil_outside_domain() {
        let spec = flat_plane();
        assert!(matches!(
            intrinsic_curvature_crosscheck(&spec, &[0.9999, 0.0, 0.0], 1e-3),
            Err(Error::StencilOutsideDomain)
        ));
    }
}
