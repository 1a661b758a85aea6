//! Command-line front end: grid scans, per-point conformal frames,
//! construction emission, the property-suite runner, and the surface
//! curvature-ellipse report.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wintgen::config::{config_for_spec, load_config, KNOWN_SUITES};
use wintgen::constructions::{
    apply_transform, catalog, cone, cylinder, holomorphic_curve, rotational, tau,
    verify_cone_forms, verify_cylinder_forms, verify_rotational_forms, MoebiusTransform,
};
use wintgen::ddvv::{
    commutator_sides, curvature_ellipse, report_at, wintgen_scan, DEFAULT_EQUALITY_TOL,
};
use wintgen::error::Error;
use wintgen::expr::parse;
use wintgen::geometry::{point_geometry, ImmersionSpec};
use wintgen::moebius::{
    canonical_moebius_form_check, integrability_residuals, moebius_frame, moebius_lift,
};
use wintgen::report::{fmt_f64, run_check};

#[derive(Parser)]
#[command(name = "wintgen", version, about = "DDVV / Wintgen ideality analysis of parametric immersions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan the configured grid and report DDVV quantities per point.
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit CSV instead of line-delimited records.
        #[arg(long)]
        csv: bool,
    },
    /// Conformal invariants and structure-equation residuals at one point.
    Moebius {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated parameter values, e.g. "0.1,0.2,0.3".
        #[arg(long)]
        point: String,
    },
    /// Build a cylinder/cone/rotational config over a catalog base.
    Construct {
        /// One of: cylinder, cone, rotational.
        kind: String,
        /// Catalog name, or "holomorphic:z^K" for a monomial curve.
        #[arg(long)]
        base: String,
        /// Flat factor dimension (cylinder/cone) or sphere dimension
        /// (rotational).
        #[arg(long)]
        extra: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the named property suite (default: all) with a fixed seed.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Curvature-ellipse report over the grid (surfaces only).
    Ellipse {
        #[arg(long)]
        config: PathBuf,
    },
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Syntax { .. }
        | Error::UnknownIdentifier(_)
        | Error::NonConstantExponent
        | Error::UnknownName(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("WINTGEN_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Check { config, out, csv } => cmd_check(&config, out.as_deref(), csv),
        Command::Moebius { config, point } => cmd_moebius(&config, &point),
        Command::Construct {
            kind,
            base,
            extra,
            out,
        } => cmd_construct(&kind, &base, extra, out.as_deref()),
        Command::Verify { suite, seed } => cmd_verify(&suite, seed),
        Command::Ellipse { config } => cmd_ellipse(&config),
    }
}

fn write_output(path: Option<&std::path::Path>, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), Error> {
    let io_err = |e: std::io::Error| Error::Config(format!("write output: {e}"));
    match path {
        Some(p) => {
            let mut f = std::fs::File::create(p).map_err(io_err)?;
            body(&mut f).map_err(io_err)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock).map_err(io_err)
        }
    }
}

fn cmd_check(config: &std::path::Path, out: Option<&std::path::Path>, csv: bool) -> Result<(), Error> {
    let cfg = load_config(config)?;
    let report = run_check(&cfg)?;
    write_output(out, |w| {
        if csv {
            report.write_csv(w)
        } else {
            report.write_jsonl(w)
        }
    })
}

fn parse_point(text: &str, m: usize) -> Result<Vec<f64>, Error> {
    let vals: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|e| Error::Config(format!("bad point `{text}`: {e}")))?;
    if vals.len() != m {
        return Err(Error::Config(format!(
            "point has {} coordinates, immersion has {m} parameters",
            vals.len()
        )));
    }
    Ok(vals)
}

fn cmd_moebius(config: &std::path::Path, point: &str) -> Result<(), Error> {
    let cfg = load_config(config)?;
    let spec = cfg.to_spec()?;
    let x = parse_point(point, spec.dim())?;
    if !spec.contains(&x, 0.0) {
        return Err(Error::Config("point lies outside the domain box".into()));
    }
    let frame = moebius_frame(&spec, &x, spec.options.fd_step)?;
    println!("point      = {:?}", frame.point);
    println!("m = {}, p = {}", frame.m, frame.p);
    println!("rho        = {}", fmt_f64(frame.rho));
    println!("kappa      = {}", fmt_f64(frame.kappa));
    println!("g (coordinates) ={}", frame.g);
    println!("A (frame) ={}", frame.a);
    for (r, b) in frame.b.iter().enumerate() {
        println!("B[{r}] (closed form) ={b}");
    }
    for (r, b) in frame.b_fd.iter().enumerate() {
        println!("B[{r}] (structure eq) ={b}");
    }
    println!("C (p x m) ={}", frame.c);
    println!("frame residuals:");
    for (k, v) in &frame.residuals {
        println!("  {k:<14} {}", fmt_f64(*v));
    }
    let integ = integrability_residuals(&spec, &x, spec.options.fd_step)?;
    println!("integrability residuals (step {}):", fmt_f64(spec.options.fd_step));
    for (k, v) in &integ {
        println!("  {k:<14} {}", fmt_f64(*v));
    }
    match canonical_moebius_form_check(&spec, &x) {
        Ok(c) => println!(
            "canonical mu  = {} (expected {}, residual {})",
            fmt_f64(c.mu_measured),
            fmt_f64(c.mu_expected),
            fmt_f64(c.residual)
        ),
        Err(e) => println!("canonical form: {e}"),
    }
    Ok(())
}

fn resolve_base(name: &str) -> Result<wintgen::constructions::BaseSurface, Error> {
    if let Some(poly) = name.strip_prefix("holomorphic:") {
        let deg: usize = poly
            .strip_prefix("z^")
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| Error::Config(format!("expected holomorphic:z^K, got `{name}`")))?;
        let mut coeffs = vec![(0.0, 0.0); deg + 1];
        coeffs[deg] = (1.0, 0.0);
        holomorphic_curve(&coeffs)
    } else {
        catalog(name)
    }
}

fn cmd_construct(
    kind: &str,
    base: &str,
    extra: Option<usize>,
    out: Option<&std::path::Path>,
) -> Result<(), Error> {
    let surface = resolve_base(base)?;
    let spec = match kind {
        "cylinder" => cylinder(&surface.spec, extra.unwrap_or(1))?,
        "cone" => cone(&surface, extra.unwrap_or(0))?,
        "rotational" => rotational(&surface, extra.unwrap_or(1))?,
        other => return Err(Error::Config(format!("unknown construction `{other}`"))),
    };
    let cfg = config_for_spec(&spec, vec![5; spec.dim()]);
    let text = cfg.to_string_pretty()?;
    write_output(out, |w| w.write_all(text.as_bytes()))
}

fn cmd_ellipse(config: &std::path::Path) -> Result<(), Error> {
    let cfg = load_config(config)?;
    let spec = cfg.to_spec()?;
    let pts = spec.grid(&cfg.domain.grid, 0.0);
    let mut circles = 0usize;
    let mut evaluated = 0usize;
    for x in &pts {
        match point_geometry(&spec, x).and_then(|g| curvature_ellipse(&g, spec.options.tol_exact)) {
            Ok(ell) => {
                evaluated += 1;
                if ell.is_circle {
                    circles += 1;
                }
                println!(
                    "{{\"point\":{:?},\"semi_axes\":[{},{}],\"is_circle\":{}}}",
                    x,
                    fmt_f64(ell.semi_axes.0),
                    fmt_f64(ell.semi_axes.1),
                    ell.is_circle
                );
            }
            Err(Error::NotASurface(m)) => return Err(Error::NotASurface(m)),
            Err(e) => println!("{{\"point\":{x:?},\"skip\":\"{e}\"}}"),
        }
    }
    println!(
        "{{\"summary\":{{\"points\":{},\"evaluated\":{evaluated},\"circular\":{circles}}}}}",
        pts.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// property-suite runner

type Check = (&'static str, fn(u64) -> Result<(), String>);

fn approx(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    if (a - b).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: {a} vs {b} (tol {tol})"))
    }
}

fn small(v: f64, tol: f64, what: &str) -> Result<(), String> {
    if v.abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: {v} exceeds {tol}"))
    }
}

fn graph_z2() -> ImmersionSpec {
    ImmersionSpec::from_strings(
        &["u", "v"],
        &["u", "v", "u^2 - v^2", "2*u*v"],
        &[-1.0, -1.0],
        &[1.0, 1.0],
    )
    .unwrap()
}

fn parser_checks() -> Vec<Check> {
    vec![
        ("pow_binds_tighter_than_neg", |_| {
            let vars = vec!["u".to_string()];
            let e = parse("-u^2", &vars).map_err(|e| e.to_string())?;
            approx(e.eval(&vars, &[3.0]).unwrap(), -9.0, 1e-15, "-u^2 at 3")
        }),
        ("reserved_constants", |_| {
            let vars: Vec<String> = vec![];
            let e = parse("2*pi + e", &vars).map_err(|e| e.to_string())?;
            approx(
                e.eval(&vars, &[]).unwrap(),
                2.0 * std::f64::consts::PI + std::f64::consts::E,
                1e-15,
                "2*pi + e",
            )
        }),
        ("unknown_identifier_rejected", |_| {
            match parse("q + 1", &vec!["u".to_string()]) {
                Err(Error::UnknownIdentifier(_)) => Ok(()),
                other => Err(format!("expected UnknownIdentifier, got {other:?}")),
            }
        }),
        ("variable_exponent_rejected", |_| {
            let vars = vec!["u".to_string(), "v".to_string()];
            match parse("u^v", &vars) {
                Err(Error::NonConstantExponent) => Ok(()),
                other => Err(format!("expected NonConstantExponent, got {other:?}")),
            }
        }),
    ]
}

fn jets_checks() -> Vec<Check> {
    vec![
        ("polynomial_jets_exact", |_| {
            let vars = vec!["u".to_string(), "v".to_string()];
            let e = parse("(u + 2*v)^3", &vars).unwrap();
            let j = e.eval_jet(&vars, &[0.5, -0.3], 3).map_err(|e| e.to_string())?;
            let w: f64 = 0.5 + 2.0 * (-0.3);
            approx(j.value(), w.powi(3), 1e-13, "value")?;
            approx(j.d(1), 6.0 * w * w, 1e-12, "d/dv")?;
            approx(j.d2(0, 1), 12.0 * w, 1e-12, "d2/dudv")?;
            approx(j.partial(&[0, 3]).unwrap(), 48.0, 1e-11, "d3/dv3")
        }),
        ("composition_chain_rule", |_| {
            let vars = vec!["u".to_string(), "v".to_string()];
            let e = parse("sin(u*v)", &vars).unwrap();
            let (u, v) = (0.7, 1.1);
            let j = e.eval_jet(&vars, &[u, v], 2).map_err(|e| e.to_string())?;
            approx(
                j.d2(0, 1),
                (u * v).cos() - u * v * (u * v).sin(),
                1e-12,
                "d2 sin(uv)",
            )
        }),
        ("jet_derivative_matches_fd", |seed| {
            let vars = vec!["u".to_string(), "v".to_string()];
            let e = parse("exp(u) * cos(v) + u*v^2", &vars).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let j = e.eval_jet(&vars, &x, 1).unwrap();
                let h = 1e-5;
                let fd = (e.eval(&vars, &[x[0] + h, x[1]]).unwrap()
                    - e.eval(&vars, &[x[0] - h, x[1]]).unwrap())
                    / (2.0 * h);
                approx(j.d(0), fd, 1e-9, "d/du vs fd")?;
            }
            Ok(())
        }),
    ]
}

fn geometry_checks() -> Vec<Check> {
    vec![
        ("sphere_chart_metric", |_| {
            let base = catalog("round_sphere_chart").unwrap();
            let geo = point_geometry(&base.spec, &[0.3, 0.8]).map_err(|e| e.to_string())?;
            approx(geo.metric[(0, 0)], 1.0, 1e-12, "g_uu")?;
            approx(geo.metric[(1, 1)], 0.3f64.cos().powi(2), 1e-12, "g_vv")?;
            small(geo.metric[(0, 1)], 1e-12, "g_uv")
        }),
        ("sphere_gauss_curvature", |_| {
            let base = catalog("round_sphere_chart").unwrap();
            let geo = point_geometry(&base.spec, &[0.2, 0.9]).map_err(|e| e.to_string())?;
            // frame components: R_1212 is the sectional curvature directly
            approx(geo.riemann(0, 1, 0, 1), 1.0, 1e-8, "gauss curvature")
        }),
        ("frames_orthonormal", |seed| {
            let spec = graph_z2();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..10 {
                let x = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
                let geo = point_geometry(&spec, &x).map_err(|e| e.to_string())?;
                for (i, ei) in geo.tangent_frame.iter().enumerate() {
                    for (j, ej) in geo.tangent_frame.iter().enumerate() {
                        let want = if i == j { 1.0 } else { 0.0 };
                        approx(ei.dot(ej), want, 1e-10, "tangent gram")?;
                    }
                    for nr in &geo.normal_frame {
                        small(ei.dot(nr), 1e-10, "tangent-normal")?;
                    }
                }
            }
            Ok(())
        }),
    ]
}

fn ddvv_checks() -> Vec<Check> {
    vec![
        ("commutator_equality_oracle", |_| {
            use nalgebra::DMatrix;
            let mut a1 = DMatrix::zeros(3, 3);
            a1[(0, 1)] = 1.0;
            a1[(1, 0)] = 1.0;
            let mut a2 = DMatrix::zeros(3, 3);
            a2[(0, 0)] = 1.0;
            a2[(1, 1)] = -1.0;
            let a3 = DMatrix::zeros(3, 3);
            let (lhs, rhs) = commutator_sides(&[a1, a2, a3]).map_err(|e| e.to_string())?;
            approx(lhs, 16.0, 1e-12, "lhs")?;
            approx(rhs, 16.0, 1e-12, "rhs")
        }),
        ("commutator_inequality_random", |seed| {
            use nalgebra::DMatrix;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..500 {
                let m = rng.gen_range(2..5);
                let p = rng.gen_range(1..4);
                let ops: Vec<DMatrix<f64>> = (0..p)
                    .map(|_| {
                        let a = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
                        (&a + a.transpose()) * 0.5
                    })
                    .collect();
                let (lhs, rhs) = commutator_sides(&ops).unwrap();
                if lhs > rhs * (1.0 + 1e-12) + 1e-12 {
                    return Err(format!("inequality violated: {lhs} > {rhs}"));
                }
            }
            Ok(())
        }),
        ("deficit_nonnegative_on_graphs", |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..5 {
                let (a, b, c) = (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                let comps = [
                    "u".to_string(),
                    "v".to_string(),
                    format!("{a}*u^2 + {b}*u*v"),
                    format!("{c}*v^2 + {b}*u^2"),
                ];
                let comp_refs: Vec<&str> = comps.iter().map(|s| s.as_str()).collect();
                let spec = ImmersionSpec::from_strings(
                    &["u", "v"],
                    &comp_refs,
                    &[-1.0, -1.0],
                    &[1.0, 1.0],
                )
                .unwrap();
                for _ in 0..10 {
                    let x = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
                    let rep = report_at(&spec, &x, 0.0, DEFAULT_EQUALITY_TOL)
                        .map_err(|e| e.to_string())?;
                    if rep.deficit < -1e-8 {
                        return Err(format!("negative deficit {} at {x:?}", rep.deficit));
                    }
                }
            }
            Ok(())
        }),
    ]
}

fn moebius_checks() -> Vec<Check> {
    vec![
        ("b_norm_identity", |_| {
            let cyl = cylinder(&graph_z2(), 1).unwrap();
            let f = moebius_frame(&cyl, &[0.3, -0.2, 0.4], 1e-3).map_err(|e| e.to_string())?;
            small(f.residuals["b_norm"], 1e-9, "b_norm residual")?;
            small(f.residuals["b_trace"], 1e-11, "b_trace residual")?;
            small(f.residuals["gram_exact"], 1e-8, "gram residual")
        }),
        ("canonical_mu_on_cone", |_| {
            let base = catalog("veronese").unwrap();
            let spec = cone(&base, 0).unwrap();
            let c = canonical_moebius_form_check(&spec, &[1.1, 0.2, 0.8])
                .map_err(|e| e.to_string())?;
            approx(c.mu_measured, (1.0f64 / 6.0).sqrt(), 1e-6, "mu")
        }),
        ("integrability_residuals_small", |_| {
            let cyl = cylinder(&graph_z2(), 1).unwrap();
            let res = integrability_residuals(&cyl, &[0.2, 0.1, -0.3], 1e-2)
                .map_err(|e| e.to_string())?;
            for (k, v) in &res {
                small(*v, 2e-3, k)?;
            }
            Ok(())
        }),
    ]
}

fn constructions_checks() -> Vec<Check> {
    vec![
        ("cylinder_fundamental_forms", |_| {
            let r = verify_cylinder_forms(&graph_z2(), 1).map_err(|e| e.to_string())?;
            small(r, 1e-10, "cylinder forms residual")
        }),
        ("cone_fundamental_forms", |_| {
            let base = catalog("veronese").unwrap();
            let r = verify_cone_forms(&base, 0).map_err(|e| e.to_string())?;
            small(r, 1e-8, "cone forms residual")
        }),
        ("rotational_fundamental_forms", |_| {
            let base = catalog("geodesic_hemisphere_H3").unwrap();
            let r = verify_rotational_forms(&base, 1).map_err(|e| e.to_string())?;
            small(r, 1e-8, "rotational forms residual")
        }),
        ("tau_is_an_isometry_onto_hyperboloid", |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..100 {
                let x = [
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(0.1..3.0),
                ];
                let t = tau(&x).map_err(|e| e.to_string())?;
                approx(t.inner(&t).unwrap(), -1.0, 1e-10, "norm")?;
            }
            Ok(())
        }),
    ]
}

fn invariance_checks() -> Vec<Check> {
    vec![
        ("equality_flags_survive_transforms", |_| {
            let cyl = cylinder(&graph_z2(), 1).unwrap();
            let pts = cyl.grid(&[3, 3, 3], 0.05);
            let transforms = [
                MoebiusTransform::Translation(vec![0.4, -0.1, 0.7, 0.0, 0.2]),
                MoebiusTransform::Scaling(2.5),
                MoebiusTransform::Inversion(vec![8.0, 0.0, 0.0, 0.0, 0.0]),
            ];
            for t in &transforms {
                let moved = apply_transform(&cyl, t).map_err(|e| e.to_string())?;
                let (_, summary) = wintgen_scan(&moved, &pts, 0.0, DEFAULT_EQUALITY_TOL);
                if !summary.wintgen_ideal_on_grid {
                    return Err(format!("equality lost under {t:?}"));
                }
            }
            Ok(())
        }),
        ("moebius_metric_invariant", |_| {
            let spec = graph_z2();
            let x = [0.35, -0.25];
            let (_, g0) = moebius_lift(&spec, &x).map_err(|e| e.to_string())?;
            let transforms = [
                MoebiusTransform::Translation(vec![1.0, -2.0, 0.5, 0.3]),
                MoebiusTransform::Scaling(3.0),
                MoebiusTransform::Inversion(vec![6.0, 0.0, 0.0, 0.0]),
            ];
            for t in &transforms {
                let moved = apply_transform(&spec, t).map_err(|e| e.to_string())?;
                let (_, g1) = moebius_lift(&moved, &x).map_err(|e| e.to_string())?;
                let rel = (&g1 - &g0).norm() / g0.norm();
                small(rel, 1e-6, &format!("g drift under {t:?}"))?;
            }
            Ok(())
        }),
    ]
}

fn suite_checks(name: &str) -> Option<Vec<(String, Check)>> {
    let tag = |suite: &str, checks: Vec<Check>| -> Vec<(String, Check)> {
        checks
            .into_iter()
            .map(|c| (format!("{suite}::{}", c.0), c))
            .collect()
    };
    match name {
        "parser" => Some(tag("parser", parser_checks())),
        "jets" => Some(tag("jets", jets_checks())),
        "geometry" => Some(tag("geometry", geometry_checks())),
        "ddvv" => Some(tag("ddvv", ddvv_checks())),
        "moebius" => Some(tag("moebius", moebius_checks())),
        "constructions" => Some(tag("constructions", constructions_checks())),
        "invariance" => Some(tag("invariance", invariance_checks())),
        "all" => {
            let mut all = Vec::new();
            for s in KNOWN_SUITES.iter().filter(|s| **s != "all") {
                all.extend(suite_checks(s).unwrap());
            }
            Some(all)
        }
        _ => None,
    }
}

fn cmd_verify(suite: &str, seed: u64) -> Result<(), Error> {
    let checks = suite_checks(suite).ok_or_else(|| Error::UnknownName(suite.to_string()))?;
    let mut failures = 0usize;
    for (name, (_, f)) in &checks {
        match f(seed) {
            Ok(()) => println!("PASS  {name}"),
            Err(why) => {
                failures += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} checks, {failures} failures", checks.len());
    if failures > 0 {
        Err(Error::Domain(format!("{failures} verification checks failed")))
    } else {
        Ok(())
    }
}
