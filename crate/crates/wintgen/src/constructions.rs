//! Cylinder, cone, and rotational constructions over a base immersion,
//! the upper-half-space isometry `tau`, conformal transformations applied at
//! the expression level, and a catalog of named base surfaces.
//!
//! Each construction comes with a verifier that checks the fundamental-form
//! identities relating the built immersion to its base at sampled points.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{Expr, UnaryOp};
use crate::geometry::{frame_jets, point_geometry, ImmersionSpec};
use crate::moebius::LorentzVec;

/// Absolute tolerance for the unit-sphere base check `|Σ f_k² - 1|`.
pub const SPHERE_TOL: f64 = 1e-10;

/// A named base immersion with space-form flags.
///
/// `on_unit_sphere` marks the image as lying in the unit sphere of the
/// ambient space; `in_upper_half_space` marks the last component as positive
/// (upper-half-space model of hyperbolic space). Both are checked numerically
/// by the constructions that rely on them.
#[derive(Debug, Clone)]
pub struct BaseSurface {
    pub name: String,
    pub spec: ImmersionSpec,
    pub on_unit_sphere: bool,
    pub in_upper_half_space: bool,
    pub expected_superminimal: bool,
}

impl BaseSurface {
    /// Check the set flags numerically on a coarse grid.
    pub fn check_flags(&self) -> Result<()> {
        let counts = vec![4; self.spec.dim()];
        let pts = self.spec.grid(&counts, 0.02);
        if self.on_unit_sphere {
            let dev = sphere_deviation(&self.spec, &pts)?;
            if dev > SPHERE_TOL {
                return Err(Error::NotOnSphere(dev));
            }
        }
        if self.in_upper_half_space {
            for x in &pts {
                let f = self.spec.eval(x)?;
                if f[f.len() - 1] <= 0.0 {
                    return Err(Error::NotInUpperHalfSpace);
                }
            }
        }
        Ok(())
    }
}

fn sphere_deviation(spec: &ImmersionSpec, pts: &[Vec<f64>]) -> Result<f64> {
    let mut dev = 0.0f64;
    for x in pts {
        let f = spec.eval(x)?;
        dev = dev.max((f.norm_squared() - 1.0).abs());
    }
    Ok(dev)
}

/// Variable names not already taken and distinct from the reserved constants.
fn fresh_names(taken: &[String], prefix: &str, count: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(count);
    let mut k = 1usize;
    while out.len() < count {
        let cand = format!("{prefix}{k}");
        if cand != "pi" && cand != "e" && !taken.contains(&cand) && !out.contains(&cand) {
            out.push(cand);
        }
        k += 1;
    }
    out
}

fn fresh_single(taken: &[String], preferred: &str) -> String {
    let p = preferred.to_string();
    if p != "pi" && p != "e" && !taken.contains(&p) {
        p
    } else {
        fresh_names(taken, preferred, 1).remove(0)
    }
}

// ---------------------------------------------------------------------------
// the three constructions

/// Cylinder over `base`: appends `extra` flat variables, `f = (u, id)`.
pub fn cylinder(base: &ImmersionSpec, extra: usize) -> Result<ImmersionSpec> {
    if extra < 1 {
        return Err(Error::Config("cylinder needs extra >= 1".into()));
    }
    let mut vars = base.variables.clone();
    let new = fresh_names(&vars, "s", extra);
    let mut comps = base.components.clone();
    for v in &new {
        comps.push(Expr::var(v));
    }
    vars.extend(new);
    let mut lo = base.domain_min.clone();
    let mut hi = base.domain_max.clone();
    lo.extend(std::iter::repeat(-1.0).take(extra));
    hi.extend(std::iter::repeat(1.0).take(extra));
    let mut spec = ImmersionSpec::new(vars, comps, lo, hi)?;
    spec.options = base.options.clone();
    Ok(spec)
}

/// Cone over a unit-sphere base: `f(t, y, u) = (y, t u)` with `t` bounded
/// away from the apex (default domain `[0.5, 2]`).
pub fn cone(base: &BaseSurface, extra: usize) -> Result<ImmersionSpec> {
    let counts = vec![4; base.spec.dim()];
    let pts = base.spec.grid(&counts, 0.02);
    let dev = sphere_deviation(&base.spec, &pts)?;
    if !base.on_unit_sphere || dev > SPHERE_TOL {
        return Err(Error::NotOnSphere(dev));
    }
    let mut vars = Vec::with_capacity(1 + extra + base.spec.dim());
    let t_name = fresh_single(&base.spec.variables, "t");
    vars.push(t_name.clone());
    let mut taken = base.spec.variables.clone();
    taken.push(t_name.clone());
    let y_names = fresh_names(&taken, "y", extra);
    vars.extend(y_names.iter().cloned());
    vars.extend(base.spec.variables.iter().cloned());

    let mut comps: Vec<Expr> = y_names.iter().map(|v| Expr::var(v)).collect();
    for c in &base.spec.components {
        comps.push(Expr::var(&t_name).mul(c.clone()));
    }

    let mut lo = vec![0.5];
    let mut hi = vec![2.0];
    lo.extend(std::iter::repeat(-1.0).take(extra));
    hi.extend(std::iter::repeat(1.0).take(extra));
    lo.extend(base.spec.domain_min.iter().cloned());
    hi.extend(base.spec.domain_max.iter().cloned());
    let mut spec = ImmersionSpec::new(vars, comps, lo, hi)?;
    spec.options = base.spec.options.clone();
    Ok(spec)
}

/// Iterated polar chart of the unit sphere `S^d ⊂ R^{d+1}`.
fn sphere_chart_exprs(angle_vars: &[String]) -> Vec<Expr> {
    let d = angle_vars.len();
    let mut comps = Vec::with_capacity(d + 1);
    for k in 0..=d {
        let mut e: Option<Expr> = None;
        for v in angle_vars.iter().take(k) {
            let s = Expr::apply(UnaryOp::Sin, Expr::var(v));
            e = Some(match e {
                Some(prev) => prev.mul(s),
                None => s,
            });
        }
        if k < d {
            let c = Expr::apply(UnaryOp::Cos, Expr::var(&angle_vars[k]));
            e = Some(match e {
                Some(prev) => prev.mul(c),
                None => c,
            });
        }
        comps.push(e.unwrap_or_else(|| Expr::num(1.0)));
    }
    comps
}

fn build_rotational(
    base: &BaseSurface,
    sphere_dim: usize,
) -> Result<(ImmersionSpec, Vec<String>)> {
    if sphere_dim < 1 {
        return Err(Error::Config("rotational needs sphere_dim >= 1".into()));
    }
    let counts = vec![4; base.spec.dim()];
    let pts = base.spec.grid(&counts, 0.02);
    let last = base.spec.ambient_dim() - 1;
    let mut ok = base.in_upper_half_space;
    for x in &pts {
        if base.spec.eval(x)?[last] <= 0.0 {
            ok = false;
        }
    }
    if !ok {
        return Err(Error::NotInUpperHalfSpace);
    }

    let angles = fresh_names(&base.spec.variables, "a", sphere_dim);
    let phi = sphere_chart_exprs(&angles);
    let mut comps: Vec<Expr> = base.spec.components[..last].to_vec();
    for p in &phi {
        comps.push(base.spec.components[last].clone().mul(p.clone()));
    }
    let mut vars = base.spec.variables.clone();
    vars.extend(angles.iter().cloned());
    let mut lo = base.spec.domain_min.clone();
    let mut hi = base.spec.domain_max.clone();
    // angle domains sit inside (0, pi), away from the chart singularities
    lo.extend(std::iter::repeat(0.3).take(sphere_dim));
    hi.extend(std::iter::repeat(2.8).take(sphere_dim));
    let mut spec = ImmersionSpec::new(vars, comps, lo, hi)?;
    spec.options = base.spec.options.clone();
    Ok((spec, angles))
}

/// Rotational submanifold over an upper-half-space base:
/// `f(u, φ) = (x_1, .., x_{n-1}, x_n φ)` with `φ` the polar chart of
/// `S^{sphere_dim}`.
pub fn rotational(base: &BaseSurface, sphere_dim: usize) -> Result<ImmersionSpec> {
    build_rotational(base, sphere_dim).map(|(s, _)| s)
}

// ---------------------------------------------------------------------------
// the upper-half-space isometry

/// Isometry from the upper half-space model onto the hyperboloid:
/// `τ(x) = ((1+|x|²)/(2 x_n), (1-|x|²)/(2 x_n), x_1/x_n, .., x_{n-1}/x_n)`.
pub fn tau(x: &[f64]) -> Result<LorentzVec> {
    let n = x.len();
    if n == 0 || x[n - 1] <= 0.0 {
        return Err(Error::NotInUpperHalfSpace);
    }
    let q: f64 = x.iter().map(|v| v * v).sum();
    let xn = x[n - 1];
    let mut out = Vec::with_capacity(n + 1);
    out.push((1.0 + q) / (2.0 * xn));
    out.push((1.0 - q) / (2.0 * xn));
    for v in x.iter().take(n - 1) {
        out.push(v / xn);
    }
    let v = LorentzVec(DVector::from_vec(out));
    debug_assert!((v.inner(&v).unwrap() + 1.0).abs() < 1e-9 * (1.0 + q / (xn * xn)));
    debug_assert!(v.0[0] >= 1.0 - 1e-12);
    Ok(v)
}

// ---------------------------------------------------------------------------
// conformal transformations and stereographic projection

/// A conformal transformation of the ambient space, applied by composing
/// the component expressions.
#[derive(Debug, Clone)]
pub enum MoebiusTransform {
    Translation(Vec<f64>),
    Scaling(f64),
    Inversion(Vec<f64>),
}

/// Closest sampled approach of the image to a point, on a 5-per-axis grid.
fn min_image_distance(spec: &ImmersionSpec, target: &[f64]) -> Result<f64> {
    let counts = vec![5; spec.dim()];
    let mut best = f64::INFINITY;
    for x in spec.grid(&counts, 0.0) {
        let f = spec.eval(&x)?;
        let d2: f64 = f.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
        best = best.min(d2.sqrt());
    }
    Ok(best)
}

pub fn apply_transform(spec: &ImmersionSpec, t: &MoebiusTransform) -> Result<ImmersionSpec> {
    let n = spec.ambient_dim();
    let comps: Vec<Expr> = match t {
        MoebiusTransform::Translation(a) => {
            if a.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "translation vector has {} entries, ambient is {n}",
                    a.len()
                )));
            }
            spec.components
                .iter()
                .zip(a)
                .map(|(c, &ak)| c.clone().add(Expr::num(ak)))
                .collect()
        }
        MoebiusTransform::Scaling(k) => {
            if !(*k > 0.0) {
                return Err(Error::Config("scaling factor must be positive".into()));
            }
            spec.components
                .iter()
                .map(|c| Expr::num(*k).mul(c.clone()))
                .collect()
        }
        MoebiusTransform::Inversion(center) => {
            if center.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "inversion center has {} entries, ambient is {n}",
                    center.len()
                )));
            }
            if min_image_distance(spec, center)? < 1e-6 {
                return Err(Error::CenterOnImage);
            }
            let diffs: Vec<Expr> = spec
                .components
                .iter()
                .zip(center)
                .map(|(c, &ck)| c.clone().sub(Expr::num(ck)))
                .collect();
            let mut denom = diffs[0].clone().pow(2.0);
            for d in &diffs[1..] {
                denom = denom.add(d.clone().pow(2.0));
            }
            diffs
                .iter()
                .zip(center)
                .map(|(d, &ck)| Expr::num(ck).add(d.clone().div(denom.clone())))
                .collect()
        }
    };
    let mut out = ImmersionSpec::new(
        spec.variables.clone(),
        comps,
        spec.domain_min.clone(),
        spec.domain_max.clone(),
    )?;
    out.options = spec.options.clone();
    Ok(out)
}

/// Stereographic projection from the pole `(0, .., 0, 1)`:
/// `y_k = f_k / (1 - f_n)`.
pub fn stereographic(spec: &ImmersionSpec) -> Result<ImmersionSpec> {
    let n = spec.ambient_dim();
    let mut pole = vec![0.0; n];
    pole[n - 1] = 1.0;
    if min_image_distance(spec, &pole)? < 1e-6 {
        return Err(Error::PoleOnImage);
    }
    let denom = Expr::num(1.0).sub(spec.components[n - 1].clone());
    let comps: Vec<Expr> = spec.components[..n - 1]
        .iter()
        .map(|c| c.clone().div(denom.clone()))
        .collect();
    let mut out = ImmersionSpec::new(
        spec.variables.clone(),
        comps,
        spec.domain_min.clone(),
        spec.domain_max.clone(),
    )?;
    out.options = spec.options.clone();
    Ok(out)
}

/// Inverse stereographic projection onto the unit sphere:
/// `(2y, |y|² - 1) / (|y|² + 1)`.
pub fn inverse_stereographic(spec: &ImmersionSpec) -> Result<ImmersionSpec> {
    let mut q = spec.components[0].clone().pow(2.0);
    for c in &spec.components[1..] {
        q = q.add(c.clone().pow(2.0));
    }
    let denom = q.clone().add(Expr::num(1.0));
    let mut comps: Vec<Expr> = spec
        .components
        .iter()
        .map(|c| Expr::num(2.0).mul(c.clone()).div(denom.clone()))
        .collect();
    comps.push(q.sub(Expr::num(1.0)).div(denom));
    let mut out = ImmersionSpec::new(
        spec.variables.clone(),
        comps,
        spec.domain_min.clone(),
        spec.domain_max.clone(),
    )?;
    out.options = spec.options.clone();
    Ok(out)
}

// ---------------------------------------------------------------------------
// base surface catalog

/// Polynomial holomorphic curve `z ↦ (z, P(z))` in `C² = R⁴`, with complex
/// coefficients `coeffs[k]` of `z^k`.
pub fn holomorphic_curve(coeffs: &[(f64, f64)]) -> Result<BaseSurface> {
    if coeffs.len() < 2 {
        return Err(Error::Config("polynomial needs degree >= 1".into()));
    }
    let u = || Expr::var("u");
    let v = || Expr::var("v");
    // real and imaginary parts of z^k, built by z^{k+1} = z^k * z
    let mut re_p: Option<Expr> = None;
    let mut im_p: Option<Expr> = None;
    let mut re_zk = Expr::num(1.0);
    let mut im_zk = Expr::num(0.0);
    let acc = |term: Expr, slot: &mut Option<Expr>| {
        *slot = Some(match slot.take() {
            Some(prev) => prev.add(term),
            None => term,
        });
    };
    for (k, &(a, b)) in coeffs.iter().enumerate() {
        if a != 0.0 {
            acc(Expr::num(a).mul(re_zk.clone()), &mut re_p);
            acc(Expr::num(a).mul(im_zk.clone()), &mut im_p);
        }
        if b != 0.0 {
            acc(Expr::num(-b).mul(im_zk.clone()), &mut re_p);
            acc(Expr::num(b).mul(re_zk.clone()), &mut im_p);
        }
        if k + 1 < coeffs.len() {
            let re_next = re_zk.clone().mul(u()).sub(im_zk.clone().mul(v()));
            let im_next = re_zk.mul(v()).add(im_zk.mul(u()));
            re_zk = re_next;
            im_zk = im_next;
        }
    }
    let comps = vec![
        u(),
        v(),
        re_p.unwrap_or_else(|| Expr::num(0.0)),
        im_p.unwrap_or_else(|| Expr::num(0.0)),
    ];
    let spec = ImmersionSpec::new(
        vec!["u".into(), "v".into()],
        comps,
        vec![0.2, 0.2],
        vec![1.2, 1.2],
    )?;
    Ok(BaseSurface {
        name: "holomorphic_curve".into(),
        spec,
        on_unit_sphere: false,
        in_upper_half_space: false,
        expected_superminimal: true,
    })
}

/// Named base surfaces.
///
/// `veronese` and `holomorphic_curve` (default `P(z) = z²`) are the
/// super-minimal positive examples; `clifford_torus` is minimal but not
/// super-minimal; the geodesic hemisphere is the totally geodesic
/// hyperbolic base (degenerate super-minimality).
pub fn catalog(name: &str) -> Result<BaseSurface> {
    match name {
        "veronese" => {
            let spec = ImmersionSpec::from_strings(
                &["u", "v"],
                &[
                    "sqrt(3) * cos(u)^2 * cos(v) * sin(v)",
                    "sqrt(3) * cos(u) * sin(u) * cos(v)",
                    "sqrt(3) * cos(u) * sin(u) * sin(v)",
                    "(sqrt(3)/2) * cos(u)^2 * (cos(v)^2 - sin(v)^2)",
                    "(cos(u)^2 - 2*sin(u)^2) / 2",
                ],
                &[-0.6, 0.2],
                &[0.6, 1.4],
            )?;
            Ok(BaseSurface {
                name: name.into(),
                spec,
                on_unit_sphere: true,
                in_upper_half_space: false,
                expected_superminimal: true,
            })
        }
        "holomorphic_curve" => {
            let mut b = holomorphic_curve(&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)])?;
            b.name = name.into();
            Ok(b)
        }
        "clifford_torus" => {
            let spec = ImmersionSpec::from_strings(
                &["u", "v"],
                &[
                    "cos(u) / sqrt(2)",
                    "sin(u) / sqrt(2)",
                    "cos(v) / sqrt(2)",
                    "sin(v) / sqrt(2)",
                ],
                &[0.2, 0.2],
                &[2.8, 2.8],
            )?;
            Ok(BaseSurface {
                name: name.into(),
                spec,
                on_unit_sphere: true,
                in_upper_half_space: false,
                expected_superminimal: false,
            })
        }
        "round_sphere_chart" => {
            let spec = ImmersionSpec::from_strings(
                &["u", "v"],
                &["cos(u) * cos(v)", "cos(u) * sin(v)", "sin(u)"],
                &[-0.6, 0.2],
                &[0.6, 1.4],
            )?;
            Ok(BaseSurface {
                name: name.into(),
                spec,
                on_unit_sphere: true,
                in_upper_half_space: false,
                expected_superminimal: false,
            })
        }
        "great_sphere_chart" => {
            let spec = ImmersionSpec::from_strings(
                &["u", "v"],
                &["cos(u) * cos(v)", "cos(u) * sin(v)", "sin(u)", "0"],
                &[-0.6, 0.2],
                &[0.6, 1.4],
            )?;
            Ok(BaseSurface {
                name: name.into(),
                spec,
                on_unit_sphere: true,
                in_upper_half_space: false,
                expected_superminimal: false,
            })
        }
        "geodesic_hemisphere_H3" => {
            // totally geodesic H^2 in H^3: the unit hemisphere over the
            // boundary plane, upper-half-space model
            let spec = ImmersionSpec::from_strings(
                &["th", "ph"],
                &[
                    "cos(ph) * sin(th)",
                    "sin(ph) * sin(th)",
                    "cos(th)",
                ],
                &[0.3, 0.2],
                &[1.2, 1.4],
            )?;
            Ok(BaseSurface {
                name: name.into(),
                spec,
                on_unit_sphere: false,
                in_upper_half_space: true,
                expected_superminimal: false,
            })
        }
        other => Err(Error::UnknownName(other.to_string())),
    }
}

/// Deviation of the base from minimality in its own space form, at `x`.
///
/// Euclidean bases: `|H|`. Sphere bases: `|H + f|` (the radial umbilic part
/// removed). Upper-half-space bases: `|H - P⊥(-e_n / x_n)|`, the mean
/// curvature prescribed for hyperbolic minimality under the conformal factor
/// `1/x_n`.
pub fn minimality_residual(base: &BaseSurface, x: &[f64]) -> Result<f64> {
    let geo = point_geometry(&base.spec, x)?;
    let n = base.spec.ambient_dim();
    let mut h = DVector::zeros(n);
    for (r, nr) in geo.normal_frame.iter().enumerate() {
        h += nr * geo.mean_curvature[r];
    }
    if base.in_upper_half_space {
        let xn = geo.position[n - 1];
        let mut grad = DVector::zeros(n);
        grad[n - 1] = -1.0 / xn;
        let mut target = DVector::zeros(n);
        for nr in &geo.normal_frame {
            target += nr * grad.dot(nr);
        }
        Ok((h - target).norm())
    } else if base.on_unit_sphere {
        Ok((h + &geo.position).norm())
    } else {
        Ok(h.norm())
    }
}

// ---------------------------------------------------------------------------
// fundamental-form verification

/// Vector-valued second fundamental form at coordinate pair `(a, b)`:
/// the Hessian with its tangential part removed.
fn normal_hessian(geo: &crate::geometry::PointGeometry, a: usize, b: usize) -> DVector<f64> {
    let mut v = geo.hessian[a][b].clone();
    for e in &geo.tangent_frame {
        let c = v.dot(e);
        v -= e * c;
    }
    v
}

fn grid3(spec: &ImmersionSpec) -> Vec<Vec<f64>> {
    spec.grid(&vec![3; spec.dim()], 0.1)
}

/// Max residual of `I = I_u ⊕ I_flat`, `II = II_u ⊕ 0` over a sample grid
/// of the cylinder built from `base`.
pub fn verify_cylinder_forms(base: &ImmersionSpec, extra: usize) -> Result<f64> {
    let cyl = cylinder(base, extra)?;
    verify_cylinder_forms_at(base, extra, &grid3(&cyl))
}

/// Same check at caller-chosen points of the cylinder domain.
pub fn verify_cylinder_forms_at(
    base: &ImmersionSpec,
    extra: usize,
    pts: &[Vec<f64>],
) -> Result<f64> {
    let cyl = cylinder(base, extra)?;
    let r = base.dim();
    let nb = base.ambient_dim();
    let m = cyl.dim();
    let mut worst = 0.0f64;
    for x in pts {
        let gc = point_geometry(&cyl, x)?;
        let gu = point_geometry(base, &x[..r])?;
        let mut gref = DMatrix::identity(m, m);
        gref.view_mut((0, 0), (r, r)).copy_from(&gu.metric);
        worst = worst.max((&gc.metric - gref).norm());
        for a in 0..m {
            for b in 0..m {
                let got = normal_hessian(&gc, a, b);
                let mut want = DVector::zeros(cyl.ambient_dim());
                if a < r && b < r {
                    want.rows_mut(0, nb).copy_from(&normal_hessian(&gu, a, b));
                }
                worst = worst.max((got - want).norm());
            }
        }
    }
    Ok(worst)
}

/// Max residual of `I = t² I_u ⊕ I_flat`, `II = t II_u` (spherical base
/// forms) over a sample grid of the cone built from `base`.
pub fn verify_cone_forms(base: &BaseSurface, extra: usize) -> Result<f64> {
    let spec = cone(base, extra)?;
    verify_cone_forms_at(base, extra, &grid3(&spec))
}

/// Same check at caller-chosen points of the cone domain.
pub fn verify_cone_forms_at(
    base: &BaseSurface,
    extra: usize,
    pts: &[Vec<f64>],
) -> Result<f64> {
    let spec = cone(base, extra)?;
    let r = base.spec.dim();
    let nb = base.spec.ambient_dim();
    let m = spec.dim();
    let off = 1 + extra;
    let mut worst = 0.0f64;
    for x in pts {
        let t = x[0];
        let gc = point_geometry(&spec, x)?;
        let gu = point_geometry(&base.spec, &x[off..])?;
        let mut gref = DMatrix::identity(m, m);
        gref.view_mut((off, off), (r, r))
            .copy_from(&(&gu.metric * (t * t)));
        worst = worst.max((&gc.metric - gref).norm());
        for a in 0..m {
            for b in 0..m {
                let got = normal_hessian(&gc, a, b);
                let mut want = DVector::zeros(spec.ambient_dim());
                if a >= off && b >= off {
                    // spherical second fundamental form: Hessian minus both
                    // the tangential and the radial parts
                    let mut ii = normal_hessian(&gu, a - off, b - off);
                    let rad = ii.dot(&gu.position);
                    ii -= &gu.position * rad;
                    want.rows_mut(extra, nb).copy_from(&(ii * t));
                }
                worst = worst.max((got - want).norm());
            }
        }
    }
    Ok(worst)
}

/// Max residual of the rotational identities
/// `I = x_n² (I_u + I_S)` and `⟨∂²f, ξ_i⟩ = x_n II^i_u - η^i_n (I_u + I_S)`
/// over a sample grid, with `η^i = x_n ν^i` the hyperbolic unit normals of
/// the base and `II^i_u = -(1/x_n²) Σ_j dx_j dη^i_j + (η^i_n/x_n) I_u`.
pub fn verify_rotational_forms(base: &BaseSurface, sphere_dim: usize) -> Result<f64> {
    let (spec, _) = build_rotational(base, sphere_dim)?;
    verify_rotational_forms_at(base, sphere_dim, &grid3(&spec))
}

/// Same check at caller-chosen points of the rotational domain.
pub fn verify_rotational_forms_at(
    base: &BaseSurface,
    sphere_dim: usize,
    pts: &[Vec<f64>],
) -> Result<f64> {
    let (spec, angles) = build_rotational(base, sphere_dim)?;
    let r = base.spec.dim();
    let nb = base.spec.ambient_dim();
    let d = sphere_dim;
    let m = r + d;
    let p = base.spec.codim();
    let phi_exprs = sphere_chart_exprs(&angles);
    let mut worst = 0.0f64;
    for x in pts {
        let (w, a) = x.split_at(r);
        let xj = base.spec.jets(w, 2)?;
        let (_, nu) = frame_jets(&base.spec, w, 1)?;
        let xn = xj[nb - 1].value();
        let phi: Vec<crate::jet::Jet> = phi_exprs
            .iter()
            .map(|e| e.eval_jet(&angles, a, 1))
            .collect::<Result<_>>()?;

        // base and sphere first fundamental forms in coordinates
        let iu = DMatrix::from_fn(r, r, |al, be| {
            (0..nb).map(|j| xj[j].d(al) * xj[j].d(be)).sum::<f64>() / (xn * xn)
        });
        let is = DMatrix::from_fn(d, d, |k, l| {
            (0..=d).map(|c| phi[c].d(k) * phi[c].d(l)).sum::<f64>()
        });

        let gc = point_geometry(&spec, x)?;
        let mut gref = DMatrix::zeros(m, m);
        gref.view_mut((0, 0), (r, r)).copy_from(&(&iu * (xn * xn)));
        gref.view_mut((r, r), (d, d)).copy_from(&(&is * (xn * xn)));
        worst = worst.max((&gc.metric - gref).norm());

        for i in 0..p {
            // eta = x_n nu: hyperbolic unit normal of the base
            let eta_n = xn * nu[i][nb - 1].value();
            let deta = |al: usize, j: usize| {
                xj[nb - 1].d(al) * nu[i][j].value() + xn * nu[i][j].d(al)
            };
            let iiu = DMatrix::from_fn(r, r, |al, be| {
                let s: f64 = (0..nb)
                    .map(|j| 0.5 * (xj[j].d(al) * deta(be, j) + xj[j].d(be) * deta(al, j)))
                    .sum();
                -s / (xn * xn) + eta_n / xn * iu[(al, be)]
            });

            // xi_i = (nu_1, .., nu_{n-1}, nu_n * phi)
            let mut xi = DVector::zeros(spec.ambient_dim());
            for j in 0..nb - 1 {
                xi[j] = nu[i][j].value();
            }
            for k in 0..=d {
                xi[nb - 1 + k] = nu[i][nb - 1].value() * phi[k].value();
            }

            let mut rhs = DMatrix::zeros(m, m);
            rhs.view_mut((0, 0), (r, r))
                .copy_from(&(&iiu * xn - &iu * eta_n));
            rhs.view_mut((r, r), (d, d)).copy_from(&(&is * (-eta_n)));
            let lhs = DMatrix::from_fn(m, m, |al, be| gc.hessian[al][be].dot(&xi));
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
