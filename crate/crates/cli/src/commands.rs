use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use serde_json::{json, Value};
use torus_zeros::curves::{
    emit, measure_decomposition, to_svg, trace, trace_all, CurveId, CurvePolyline, EmitFormat, GridSpec, TraceOutput,
};
use torus_zeros::green::{hessian_checks, q_degenerate};
use torus_zeros::kernel::{theta1_with, KernelConfig, Lattice, ModuliPoint};
use torus_zeros::moduli::{f_cap_with_dtau, phi_with, ExtendedScalar, Family, FamilyIndex, PhiBranch};
use torus_zeros::painleve::{lambda_with, t_of_tau, RiccatiFamily};
use torus_zeros::region::Rectangle;
use torus_zeros::scalar::fmt_complex;
use torus_zeros::suites::{run_suite, Suite, SuiteConfig};
use torus_zeros::zeros::{verify_simple, ZeroConfig};

use crate::args::Format;
use crate::report::{check_record, extremum, num, RunConfig};

/// Command output before it is wrapped into a report.
pub struct Outcome {
    pub records: Value,
    pub summary: Value,
    pub pass: bool,
}

fn rect(cfg: &RunConfig) -> Result<Rectangle<f64>> {
    let r = cfg.region;
    Ok(Rectangle::new(r.re_min, r.re_max, r.im_min, r.im_max)?)
}

fn tol(cfg: &RunConfig, name: &str) -> f64 {
    cfg.tolerances[name]
}

fn scalar(s: &str) -> Result<ExtendedScalar<f64>> {
    Ok(s.parse::<ExtendedScalar<f64>>()?)
}

fn complex(s: &str, what: &str) -> Result<Complex64> {
    scalar(s)?.as_finite().ok_or_else(|| anyhow!("{what} must be finite"))
}

fn ext(v: ExtendedScalar<f64>) -> Value {
    json!(v.to_string())
}

fn cplx(z: Complex64) -> Value {
    json!(fmt_complex(z))
}

pub struct EvalArgs<'a> {
    pub symbol: &'a str,
    pub tau: &'a str,
    pub z: Option<&'a str>,
    pub k: Option<u8>,
    pub c: Option<&'a str>,
    pub level: Option<u8>,
    pub expect: Option<&'a str>,
}

pub fn eval(a: &EvalArgs, cfg: &RunConfig) -> Result<Outcome> {
    let tau = ModuliPoint::from_complex(complex(a.tau, "tau")?)?;
    let kcfg = KernelConfig { max_terms: cfg.series_depth, ..KernelConfig::default() };
    let lat = Lattice::with_config(tau, kcfg)?;
    let inv = *lat.invariants();
    let d = lat.tau_derivatives();
    let need_z = || -> Result<Complex64> {
        complex(a.z.ok_or_else(|| anyhow!("{} needs --z", a.symbol))?, "z")
    };
    let need_k = || a.k.ok_or_else(|| anyhow!("{} needs --k", a.symbol));
    let c = a.c.map(scalar).transpose()?.unwrap_or(ExtendedScalar::Infinity);
    let fin = ExtendedScalar::Finite;
    let mut extra = serde_json::Map::new();
    let value: ExtendedScalar<f64> = match a.symbol {
        "theta1" => fin(theta1_with(need_z()?, &tau, &kcfg)?.value),
        "wp" => fin(lat.wp(need_z()?)?),
        "wp_prime" => fin(lat.wp_prime(need_z()?)?),
        "wp_pp" => fin(lat.wp_pp(need_z()?)?),
        "zeta" => fin(lat.zeta(need_z()?)?),
        "wp_dtau" => fin(lat.wp_dtau(need_z()?)?),
        "e1" => fin(inv.e1),
        "e2" => fin(inv.e2),
        "e3" => fin(inv.e3),
        "g2" => fin(inv.g2),
        "g3" => fin(inv.g3),
        "eta1" => fin(inv.eta1),
        "eta2" => fin(inv.eta2),
        "f" => {
            let e = Family::new(FamilyIndex::new(need_k()?)?, c).eval_with(&inv, &d);
            extra.insert("dtau".into(), cplx(e.dtau));
            fin(e.value)
        }
        "F" => {
            let (v, dv) = f_cap_with_dtau(need_k()? as usize, tau)?;
            extra.insert("dtau".into(), cplx(dv));
            fin(v)
        }
        "phi_plus" => phi_with(PhiBranch::Plus, &inv, &d).value,
        "phi_minus" => phi_with(PhiBranch::Minus, &inv, &d).value,
        "phi" => {
            let k = need_k()? as usize;
            let b = PhiBranch::from_k(k).ok_or_else(|| anyhow!("phi needs --k in 1..=3"))?;
            phi_with(b, &inv, &d).value
        }
        "t" => fin(t_of_tau(tau)?),
        "lambda" => {
            let fam = RiccatiFamily::new(FamilyIndex::new(need_k()?)?, c, a.level.unwrap_or(1))?;
            lambda_with(&fam, &inv)
        }
        other => bail!("unknown symbol '{other}'"),
    };
    let mut rec = serde_json::Map::new();
    rec.insert("symbol".into(), json!(a.symbol));
    rec.insert("tau".into(), cplx(tau.tau()));
    if let Some(z) = a.z {
        rec.insert("z".into(), cplx(complex(z, "z")?));
    }
    if let Some(k) = a.k {
        rec.insert("k".into(), json!(k));
    }
    if a.c.is_some() || matches!(a.symbol, "f" | "lambda") {
        rec.insert("c".into(), ext(c));
    }
    rec.insert("value".into(), ext(value));
    rec.extend(extra);
    let (pass, summary) = match a.expect {
        None => (true, json!({})),
        Some(e) => {
            let want = scalar(e)?;
            let err = match (value, want) {
                (ExtendedScalar::Infinity, ExtendedScalar::Infinity) => 0.0,
                (ExtendedScalar::Finite(v), ExtendedScalar::Finite(w)) => (v - w).norm() / w.norm().max(1.0),
                _ => f64::INFINITY,
            };
            let t = tol(cfg, "eval");
            (err <= t, json!({ "expect": ext(want), "error": num(err), "tolerance": num(t) }))
        }
    };
    Ok(Outcome { records: json!([Value::Object(rec)]), summary, pass })
}

pub fn verify(suite: &str, cfg: &RunConfig) -> Result<Outcome> {
    let suite: Suite = suite.parse()?;
    let scfg = SuiteConfig { seed: cfg.seed, tolerances: cfg.tolerances.clone(), ..SuiteConfig::default() };
    let o = run_suite(suite, &scfg)?;
    let failures = o.records.iter().filter(|r| !r.pass).count();
    Ok(Outcome {
        records: Value::Array(o.records.iter().map(check_record).collect()),
        summary: json!({
            "suite": suite.as_str(),
            "checks": o.records.len(),
            "failures": failures,
            "extrema": o.extrema.iter().map(extremum).collect::<Vec<_>>(),
        }),
        pass: o.pass,
    })
}

pub fn zeros(k: u8, c: &str, cfg: &RunConfig) -> Result<Outcome> {
    let k = FamilyIndex::new(k)?;
    let c = scalar(c)?;
    let region = rect(cfg)?;
    let zcfg = ZeroConfig { simple_floor: tol(cfg, "simple_floor"), ..ZeroConfig::default() };
    let v = verify_simple(k, c, &region, &zcfg)?;
    let records = v
        .zeros
        .iter()
        .zip(&v.witnesses)
        .map(|(z, w)| {
            json!({
                "tau": cplx(z.location.tau()),
                "winding": z.winding,
                "derivative": num(z.derivative_magnitude),
                "derivative_rel": num(z.derivative_magnitude / v.scale),
                "newton_residual": num(z.newton_residual),
                "witness_rel": num(*w),
            })
        })
        .collect();
    Ok(Outcome {
        records: Value::Array(records),
        summary: json!({
            "k": k.k(),
            "c": ext(c),
            "zero_count": v.zeros.len(),
            "total_winding": v.total_winding,
            "all_simple": v.all_simple,
            "witnesses_ok": v.witnesses_ok,
            "min_derivative_rel": num(v.min_derivative / v.scale),
            "boundary_margin": num(v.boundary_margin),
            "scale": num(v.scale),
            "nudges": v.nudges,
        }),
        pass: v.all_simple && v.witnesses_ok,
    })
}

/// Per-curve verdict of a trace run.
fn curve_record(o: &TraceOutput<f64>, grid: &GridSpec<f64>, cfg: &RunConfig, files: &[String]) -> Result<(Value, bool)> {
    let res_tol = tol(cfg, "residual");
    let grad_tol = tol(cfg, "smooth_floor");
    let all = |f: &dyn Fn(&CurvePolyline<f64>) -> Vec<f64>| -> Vec<f64> { o.polylines.iter().flat_map(f).collect() };
    let residuals = all(&|p| p.residuals.clone());
    let grads = all(&|p| p.grad_norms.clone());
    let worst_res = residuals.iter().cloned().fold(0.0, f64::max);
    let min_grad = grads.iter().cloned().fold(f64::INFINITY, f64::min);
    let res_fail = residuals.iter().filter(|r| !(**r < res_tol)).count();
    let grad_fail = grads.iter().filter(|g| !(**g > grad_tol)).count();
    let max_step = o.polylines.iter().map(|p| p.max_step()).fold(0.0, f64::max);
    let max_gap = o.polylines.iter().map(|p| p.max_gradient_gap).fold(0.0, f64::max);
    let near_orbit = o.polylines.iter().flat_map(|p| p.near_orbit.iter()).filter(|b| **b).count();
    let mut pass = o.point_count() > 0 && res_fail == 0 && grad_fail == 0 && o.unresolved.is_empty();
    let mut rec = json!({
        "curve_id": o.id.as_str(),
        "polylines": o.polylines.len(),
        "points": o.point_count(),
        "unresolved": o.unresolved.len(),
        "unresolved_points": o.unresolved.iter().map(|p| cplx(p.tau())).collect::<Vec<_>>(),
        "max_residual": num(worst_res),
        "min_grad_norm": num(min_grad),
        "residual_failures": res_fail,
        "grad_failures": grad_fail,
        "max_step": num(max_step),
        "max_gradient_gap": num(max_gap),
        "near_orbit_points": near_orbit,
        "warnings": o.warnings.len(),
        "files": files,
    });
    if let Some(sign) = o.id.sign() {
        let d = measure_decomposition(sign, o.clone(), grid)?;
        let required = tol(cfg, "margin_cells") * grid.cell_diagonal();
        let det_tol = tol(cfg, "det_q");
        let margin_ok = d.min_distance > required;
        let det_ok = d.det_on_curve < det_tol && d.det_on_orbit < det_tol;
        pass = pass && margin_ok && det_ok;
        rec["decomposition"] = json!({
            "orbit": d.orbit_distances().iter().map(|(p, dist)| json!({"tau": cplx(p.tau()), "distance": num(*dist)})).collect::<Vec<_>>(),
            "min_distance": num(d.min_distance),
            "required_distance": num(required),
            "margin_ok": margin_ok,
            "det_on_curve": num(d.det_on_curve),
            "det_on_orbit": num(d.det_on_orbit),
            "det_ok": det_ok,
        });
    }
    rec["pass"] = json!(pass);
    Ok((rec, pass))
}

fn rel_name(dir: &Path, p: &Path) -> String {
    p.strip_prefix(dir).unwrap_or(p).to_string_lossy().into_owned()
}

pub fn trace_cmd(curve: &str, cfg: &RunConfig) -> Result<Outcome> {
    let grid = GridSpec::new(rect(cfg)?, cfg.grid[0], cfg.grid[1])?;
    let outputs = if curve.eq_ignore_ascii_case("all") {
        trace_all(&grid)?
    } else {
        vec![trace(curve.parse::<CurveId>()?, &grid)?]
    };
    let dir = Path::new(&cfg.output_dir);
    let formats: &[EmitFormat] = match cfg.format {
        Format::Json => &[EmitFormat::Csv, EmitFormat::Svg],
        Format::Csv => &[EmitFormat::Csv],
        Format::Svg => &[EmitFormat::Svg],
    };
    let mut records = Vec::new();
    let mut pass = true;
    for o in &outputs {
        let mut files = Vec::new();
        for f in formats {
            let p = emit(dir, o.id, &grid, &o.polylines, *f).with_context(|| format!("writing {}", o.id))?;
            files.push(rel_name(dir, &p));
        }
        let (rec, ok) = curve_record(o, &grid, cfg, &files)?;
        pass &= ok;
        records.push(rec);
    }
    let mut combined = Value::Null;
    if outputs.len() > 1 && formats.contains(&EmitFormat::Svg) {
        let pairs: Vec<(CurveId, &[CurvePolyline<f64>])> = outputs.iter().map(|o| (o.id, o.polylines.as_slice())).collect();
        let name = format!("curves_{}.svg", grid.region_hash());
        std::fs::write(dir.join(&name), to_svg(&grid.rect, &pairs))?;
        combined = json!(name);
    }
    let warnings: Vec<&String> = outputs.iter().flat_map(|o| o.warnings.iter()).collect();
    Ok(Outcome {
        summary: json!({
            "curves": outputs.len(),
            "cell_diagonal": num(grid.cell_diagonal()),
            "region_hash": grid.region_hash(),
            "combined_svg": combined,
            "failing_curves": records.iter().filter(|r| r["pass"] == json!(false)).map(|r| r["curve_id"].clone()).collect::<Vec<_>>(),
            "warnings": warnings,
        }),
        records: Value::Array(records),
        pass,
    })
}

pub fn hessian_table(cfg: &RunConfig) -> Result<Outcome> {
    let r = rect(cfg)?;
    let [nx, ny] = cfg.grid;
    if nx < 1 || ny < 1 {
        bail!("hessian-table needs a non-empty grid");
    }
    let t = tol(cfg, "hessian");
    let node = |i: usize, n: usize, lo: f64, hi: f64| if n == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    let mut degenerate = 0usize;
    for j in 0..ny {
        for i in 0..nx {
            let tau = ModuliPoint::new(node(i, nx, r.re_min(), r.re_max()), node(j, ny, r.im_min(), r.im_max()))?;
            let inv = *Lattice::new(tau)?.invariants();
            if q_degenerate(&inv) {
                degenerate += 1;
            }
            for c in hessian_checks(tau)? {
                let e = c.relative_error();
                worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
                rows.push(json!({
                    "tau": cplx(tau.tau()),
                    "point": c.kind.label(),
                    "det_matrix": num(c.det_matrix),
                    "det_closed": num(c.det_closed),
                    "det_phi": num(c.det_phi),
                    "scale": num(c.scale),
                    "relative_error": num(e),
                    "degenerate": c.degenerate,
                }));
            }
        }
    }
    Ok(Outcome {
        summary: json!({
            "taus": nx * ny,
            "rows": rows.len(),
            "max_relative_error": num(worst),
            "tolerance": num(t),
            "degenerate_taus": degenerate,
        }),
        records: Value::Array(rows),
        pass: worst < t,
    })
}
