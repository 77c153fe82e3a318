//! Seeded property suites over random τ, C and paths.
//!
//! Every suite is deterministic for a given seed: samples are drawn up front
//! from a ChaCha8 stream and evaluated in order (in parallel, but collected
//! positionally), so records come out identical run to run.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{cauchy_derivative, DEFAULT_NODES, DEFAULT_RADIUS};
use crate::error::{Error, Result};
use crate::green::{critical_residual, hessian_checks, trivial_critical_points};
use crate::kernel::{theta1, Lattice, LatticeInvariants, ModuliPoint, TorusPoint};
use crate::moduli::{companion_determinant, ExtendedScalar, Family, FamilyIndex};
use crate::painleve::{okamoto_route_gap, pvi_path_residual, riccati_residual, straight_path, t_of_tau, PathConfig, RiccatiFamily};
use crate::region::Rectangle;
use crate::scalar::fmt_complex;
use crate::zeros::{verify_simple, ZeroConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Derivatives,
    Riccati0,
    Riccati1,
    Okamoto,
    Hessian,
    Lemma22,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Identities,
        Suite::Derivatives,
        Suite::Riccati0,
        Suite::Riccati1,
        Suite::Okamoto,
        Suite::Hessian,
        Suite::Lemma22,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Derivatives => "derivatives",
            Suite::Riccati0 => "riccati0",
            Suite::Riccati1 => "riccati1",
            Suite::Okamoto => "okamoto",
            Suite::Hessian => "hessian",
            Suite::Lemma22 => "lemma22",
        }
    }

    /// Names of the tolerances this suite reads.
    pub fn tolerance_names(&self) -> &'static [&'static str] {
        match self {
            Suite::Identities => &["identity", "eta1_i", "eta1_rho", "g2_rho", "g3_i", "e3_i", "t_i"],
            Suite::Derivatives => &["derivative"],
            Suite::Riccati0 => &["riccati0"],
            Suite::Riccati1 => &["riccati1", "pvi"],
            Suite::Okamoto => &["okamoto"],
            Suite::Hessian => &["hessian", "critical"],
            Suite::Lemma22 => &["lemma22", "witness"],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {s:?}")))
    }
}

/// Default value of every named tolerance used by the suites, the zero
/// scans and the curve tracer.
pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("identity", 1e-10),
        ("eta1_i", 1e-12),
        ("eta1_rho", 1e-11),
        ("g2_rho", 1e-10),
        ("g3_i", 1e-10),
        ("e3_i", 1e-10),
        ("t_i", 1e-12),
        ("derivative", 1e-8),
        ("riccati0", 1e-8),
        ("riccati1", 1e-7),
        ("pvi", 1e-5),
        ("okamoto", 1e-9),
        ("hessian", 1e-9),
        ("critical", 1e-9),
        ("lemma22", 1e-10),
        ("witness", 1e-6),
        ("simple_floor", 1e-6),
        ("residual", 1e-8),
        ("smooth_floor", 1e-6),
        ("margin_cells", 10.0),
        ("det_q", 1e-7),
        ("eval", 1e-10),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub paths: PathConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: 0, tolerances: default_tolerances(), paths: PathConfig::default() }
    }
}

impl SuiteConfig {
    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances
            .get(name)
            .copied()
            .or_else(|| default_tolerances().get(name).copied())
            .unwrap_or_else(|| panic!("no tolerance named {name}"))
    }

    fn rng(&self, suite: Suite) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ ((suite as u64 + 1) << 40))
    }
}

/// Whether a value must stay below (`max`) or above (`min`) its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    /// Where the check was made, e.g. `tau=0.1+1.2i`.
    pub case: String,
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new(check: &str, case: String, value: f64, tolerance: f64, bound: Bound) -> Self {
        let pass = match bound {
            Bound::Max => value < tolerance,
            Bound::Min => value > tolerance,
        };
        CheckRecord { check: check.to_string(), case, value, tolerance, bound, pass: pass && value.is_finite() }
    }

    fn max(check: &str, case: String, value: f64, tolerance: f64) -> Self {
        Self::new(check, case, value, tolerance, Bound::Max)
    }

    fn min(check: &str, case: String, value: f64, tolerance: f64) -> Self {
        Self::new(check, case, value, tolerance, Bound::Min)
    }
}

/// The worst record of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub check: String,
    pub worst: f64,
    pub case: String,
    pub tolerance: f64,
    pub bound: Bound,
    pub count: usize,
    pub failures: usize,
}

/// Worst value per check, in order of first appearance.
pub fn extrema(records: &[CheckRecord]) -> Vec<Extremum> {
    let mut out: Vec<Extremum> = Vec::new();
    for r in records {
        let worse = |e: &Extremum| match r.bound {
            Bound::Max => !(r.value <= e.worst),
            Bound::Min => !(r.value >= e.worst),
        };
        match out.iter_mut().find(|e| e.check == r.check) {
            Some(e) => {
                e.count += 1;
                e.failures += usize::from(!r.pass);
                if worse(e) {
                    e.worst = r.value;
                    e.case = r.case.clone();
                    e.tolerance = r.tolerance;
                }
            }
            None => out.push(Extremum {
                check: r.check.clone(),
                worst: r.value,
                case: r.case.clone(),
                tolerance: r.tolerance,
                bound: r.bound,
                count: 1,
                failures: usize::from(!r.pass),
            }),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub seed: u64,
    pub records: Vec<CheckRecord>,
    pub extrema: Vec<Extremum>,
    pub pass: bool,
}

impl SuiteOutcome {
    fn new(suite: Suite, seed: u64, records: Vec<CheckRecord>) -> Self {
        let pass = !records.is_empty() && records.iter().all(|r| r.pass);
        SuiteOutcome { suite, seed, extrema: extrema(&records), records, pass }
    }

    pub fn extremum(&self, check: &str) -> Option<&Extremum> {
        self.extrema.iter().find(|e| e.check == check)
    }
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let records = match suite {
        Suite::Identities => identities(cfg)?,
        Suite::Derivatives => derivatives(cfg)?,
        Suite::Riccati0 => riccati(0, cfg)?,
        Suite::Riccati1 => riccati(1, cfg)?,
        Suite::Okamoto => okamoto(cfg)?,
        Suite::Hessian => hessian(cfg)?,
        Suite::Lemma22 => lemma22(cfg)?,
    };
    Ok(SuiteOutcome::new(suite, cfg.seed, records))
}

fn tau_case(t: &ModuliPoint<f64>) -> String {
    format!("tau={}", fmt_complex(t.tau()))
}

fn sample_taus(rng: &mut ChaCha8Rng, n: usize, re: (f64, f64), im: (f64, f64)) -> Vec<ModuliPoint<f64>> {
    (0..n)
        .map(|_| ModuliPoint::new(rng.gen_range(re.0..re.1), rng.gen_range(im.0..im.1)).expect("sampled in ℍ"))
        .collect()
}

fn sample_c(rng: &mut ChaCha8Rng) -> ExtendedScalar<f64> {
    ExtendedScalar::finite(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
}

fn idx(k: u8) -> FamilyIndex {
    FamilyIndex::new(k).expect("k in 0..=3")
}

fn flatten(v: Vec<Result<Vec<CheckRecord>>>) -> Result<Vec<CheckRecord>> {
    Ok(v.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

/// ζ straight from the theta series, without reducing z into the period cell.
fn zeta_series(lat: &Lattice<f64>, z: Complex64) -> Result<Complex64> {
    let th = theta1(z, &lat.tau())?;
    Ok(lat.invariants().eta1 * z + th.d1 / th.value)
}

fn identities(cfg: &SuiteConfig) -> Result<Vec<CheckRecord>> {
    let tol = cfg.tol("identity");
    let mut rng = cfg.rng(Suite::Identities);
    let samples: Vec<(ModuliPoint<f64>, f64, f64)> = sample_taus(&mut rng, 200, (-1.0, 1.0), (0.3, 3.0))
        .into_iter()
        .map(|t| (t, rng.gen_range(-0.45..0.45), rng.gen_range(-0.45..0.45)))
        .collect();
    let per_tau = samples
        .par_iter()
        .map(|&(t, r, s)| -> Result<Vec<CheckRecord>> {
            let lat = Lattice::new(t)?;
            let inv = lat.invariants();
            let case = tau_case(&t);
            let mut out = Vec::new();

            // η₂ from the series at τ/2, independent of the Legendre route
            let eta2 = zeta_series(&lat, t.tau() * 0.5)? * 2.0;
            let leg = t.tau() * inv.eta1 - eta2 - Complex64::new(0.0, 2.0 * std::f64::consts::PI);
            let leg_scale = (t.tau() * inv.eta1).norm() + eta2.norm() + 2.0 * std::f64::consts::PI;
            out.push(CheckRecord::max("legendre", case.clone(), leg.norm() / leg_scale, tol));

            // keep z away from the lattice so ℘ stays moderate
            let mut z = TorusPoint::from_coords(r, s, &t).z;
            if lat.distance_to_lattice(z) < 0.05 {
                z += Complex64::new(0.1, 0.0);
            }
            let w = lat.eval(z)?;
            let ode = w.wp1 * w.wp1 - (w.wp * w.wp * w.wp * 4.0 - inv.g2 * w.wp - inv.g3);
            let ode_scale = (w.wp1 * w.wp1).norm() + 4.0 * w.wp.norm().powi(3) + (inv.g2 * w.wp).norm() + inv.g3.norm();
            out.push(CheckRecord::max("wp_ode", format!("{case} z={}", fmt_complex(z)), ode.norm() / ode_scale, tol));

            out.extend(symmetric_records(inv, &case, tol));

            let one = Complex64::new(1.0, 0.0);
            let z0 = zeta_series(&lat, z)?;
            let d1 = zeta_series(&lat, z + one)? - z0 - inv.eta1;
            let d2 = zeta_series(&lat, z + t.tau())? - z0 - inv.eta2;
            let qp_scale = z0.norm() + inv.eta1.norm() + inv.eta2.norm();
            let wp_shift = (lat.wp(z + one + t.tau())? - w.wp).norm() / w.wp.norm().max(inv.eta1.norm());
            let qp = (d1.norm().max(d2.norm()) / qp_scale).max(wp_shift);
            out.push(CheckRecord::max("quasi_period", format!("{case} z={}", fmt_complex(z)), qp, tol));
            Ok(out)
        })
        .collect::<Vec<_>>();
    let mut records = flatten(per_tau)?;
    records.extend(anchors(cfg)?);
    Ok(records)
}

fn symmetric_records(inv: &LatticeInvariants<f64>, case: &str, tol: f64) -> Vec<CheckRecord> {
    let (e1, e2, e3) = (inv.e1, inv.e2, inv.e3);
    let m = e1.norm().max(e2.norm()).max(e3.norm());
    let sum = (e1 + e2 + e3).norm() / m;
    let g2 = (inv.g2 - (e1 * e1 + e2 * e2 + e3 * e3) * 2.0).norm() / (2.0 * 3.0 * m * m);
    let g3 = (inv.g3 - (e1 * e1 * e1 + e2 * e2 * e2 + e3 * e3 * e3) * (4.0 / 3.0)).norm() / (4.0 * m * m * m);
    let prod = (e1 - e2) * (e1 - e3) * (e2 - e3);
    let disc = (inv.discriminant() - prod * prod * 16.0).norm() / (inv.g2.norm().powi(3) + 27.0 * inv.g3.norm_sqr());
    vec![CheckRecord::max("symmetric", case.to_string(), sum.max(g2).max(g3).max(disc), tol)]
}

fn anchors(cfg: &SuiteConfig) -> Result<Vec<CheckRecord>> {
    use std::f64::consts::PI;
    let i = Lattice::new(ModuliPoint::<f64>::i())?;
    let rho = Lattice::new(ModuliPoint::<f64>::rho())?;
    let (ii, ri) = (i.invariants(), rho.invariants());
    let t_i = t_of_tau(ModuliPoint::<f64>::i())?;
    let at = |n: &str| format!("tau={n}");
    Ok(vec![
        CheckRecord::max("eta1_i", at("i"), (ii.eta1 - PI).norm(), cfg.tol("eta1_i")),
        CheckRecord::max("eta1_rho", at("rho"), (ri.eta1 - 2.0 * PI / 3f64.sqrt()).norm(), cfg.tol("eta1_rho")),
        CheckRecord::max("g2_rho", at("rho"), ri.g2.norm(), cfg.tol("g2_rho")),
        CheckRecord::max("g3_i", at("i"), ii.g3.norm(), cfg.tol("g3_i")),
        CheckRecord::max("e3_i", at("i"), ii.e3.norm(), cfg.tol("e3_i")),
        CheckRecord::max("t_i", at("i"), (t_i - 0.5).norm(), cfg.tol("t_i")),
    ])
}

/// `|closed − oracle|` over the larger of `|oracle|` and the closed form's
/// own term scale, so derivatives passing through zero are not penalised.
fn derivative_error(closed: Complex64, oracle: Complex64, term_scale: f64) -> f64 {
    (closed - oracle).norm() / oracle.norm().max(term_scale)
}

fn derivatives(cfg: &SuiteConfig) -> Result<Vec<CheckRecord>> {
    use std::f64::consts::PI;
    let tol = cfg.tol("derivative");
    let mut rng = cfg.rng(Suite::Derivatives);
    let samples: Vec<(ModuliPoint<f64>, Complex64, ExtendedScalar<f64>)> = sample_taus(&mut rng, 50, (-0.5, 0.5), (0.5, 2.5))
        .into_iter()
        .map(|t| {
            let z = TorusPoint::from_coords(rng.gen_range(0.1..0.4), rng.gen_range(0.1..0.4), &t).z;
            (t, z, sample_c(&mut rng))
        })
        .collect();
    let oracle = |t: ModuliPoint<f64>, pick: &(dyn Fn(&Lattice<f64>) -> Result<Complex64> + Sync)| {
        cauchy_derivative(
            |w| pick(&Lattice::new(ModuliPoint::from_complex(w)?)?),
            t.tau(),
            DEFAULT_RADIUS,
            DEFAULT_NODES,
            1,
        )
    };
    let per_tau = samples
        .par_iter()
        .map(|&(t, z, c)| -> Result<Vec<CheckRecord>> {
            let lat = Lattice::new(t)?;
            let inv = *lat.invariants();
            let d = lat.tau_derivatives();
            let case = tau_case(&t);
            let q = 1.0 / (4.0 * PI);
            let mut out = Vec::new();

            let s = q * (2.0 * inv.eta1.norm_sqr() + inv.g2.norm() / 6.0);
            let o = oracle(t, &|l| Ok(l.invariants().eta1))?;
            out.push(CheckRecord::max("deta1", case.clone(), derivative_error(d.deta1, o, s), tol));

            for k in 1..=3 {
                let e = inv.e(k);
                let s = q * (4.0 * e.norm_sqr() + 4.0 * (inv.eta1 * e).norm() + 2.0 / 3.0 * inv.g2.norm());
                let o = oracle(t, &move |l| Ok(l.invariants().e(k)))?;
                out.push(CheckRecord::max("de", format!("{case} k={k}"), derivative_error(d.de(k), o, s), tol));
            }

            let s = (3.0 * inv.g3.norm() + 2.0 * (inv.eta1 * inv.g2).norm()) / PI;
            let o = oracle(t, &|l| Ok(l.invariants().g2))?;
            out.push(CheckRecord::max("dg2", case.clone(), derivative_error(d.dg2, o, s), tol));

            let s = (3.0 * (inv.g3 * inv.eta1).norm() + inv.g2.norm_sqr() / 6.0) / PI;
            let o = oracle(t, &|l| Ok(l.invariants().g3))?;
            out.push(CheckRecord::max("dg3", case.clone(), derivative_error(d.dg3, o, s), tol));

            let w = lat.eval(z)?;
            let closed = lat.wp_dtau(z)?;
            let s = q * (2.0 * ((w.zeta - z * inv.eta1) * w.wp1).norm()
                + 4.0 * ((w.wp - inv.eta1) * w.wp).norm()
                + 2.0 / 3.0 * inv.g2.norm());
            let o = oracle(t, &move |l| l.wp(z))?;
            out.push(CheckRecord::max("dwp_dtau", format!("{case} z={}", fmt_complex(z)), derivative_error(closed, o, s), tol));

            for k in 0..=3u8 {
                for cc in [ExtendedScalar::Infinity, c] {
                    let fam = Family::new(idx(k), cc);
                    let closed = fam.eval_with(&inv, &d);
                    let o = oracle(t, &move |l| Ok(fam.eval_with(l.invariants(), &l.tau_derivatives()).value))?;
                    let s = family_dtau_scale(&fam, &inv, &d);
                    out.push(CheckRecord::max(
                        "f_dtau",
                        format!("{case} k={k} C={cc}"),
                        derivative_error(closed.dtau, o, s),
                        tol,
                    ));
                }
            }
            Ok(out)
        })
        .collect::<Vec<_>>();
    flatten(per_tau)
}

/// Sum of the moduli of the terms of `df_{k,C}/dτ`.
fn family_dtau_scale(fam: &Family<f64>, inv: &LatticeInvariants<f64>, d: &crate::kernel::DTauInvariants<f64>) -> f64 {
    let tau = inv.tau.tau();
    let (x, y, dx, dy) = match fam.c {
        ExtendedScalar::Infinity => (inv.eta1, Complex64::new(1.0, 0.0), d.deta1, Complex64::new(0.0, 0.0)),
        ExtendedScalar::Finite(c) => (c * inv.eta1 - inv.eta2, c - tau, (c - tau) * d.deta1 - inv.eta1, Complex64::new(-1.0, 0.0)),
    };
    if fam.k.is_zero() {
        24.0 * (x * dx).norm() + (d.dg2 * y * y).norm() + 2.0 * (inv.g2 * y * dy).norm()
    } else {
        let k = fam.k.k();
        let (e, de) = (inv.e(k), d.de(k));
        let coef = inv.g2.norm() / 2.0 + 3.0 * e.norm_sqr();
        let dcoef = d.dg2.norm() / 2.0 + 6.0 * (e * de).norm();
        3.0 * (de * x).norm() + 3.0 * (e * dx).norm() + dcoef * y.norm() + coef * dy.norm()
    }
}

fn seeded_path(rng: &mut ChaCha8Rng) -> Vec<ModuliPoint<f64>> {
    let a = ModuliPoint::new(rng.gen_range(-0.5..0.5), rng.gen_range(0.5..1.0)).expect("in ℍ");
    let b = ModuliPoint::new(rng.gen_range(-0.5..0.5), rng.gen_range(1.2..2.0)).expect("in ℍ");
    straight_path(a, b, 40)
}

/// Level-0 or level-1 Riccati residuals (and PVI at level 1) along a
/// 40-point seeded path for `C = ∞` and nine seeded finite C per family.
fn riccati(level: u8, cfg: &SuiteConfig) -> Result<Vec<CheckRecord>> {
    let suite = if level == 0 { Suite::Riccati0 } else { Suite::Riccati1 };
    let tol = cfg.tol(suite.as_str());
    let pvi_tol = cfg.tol("pvi");
    let mut rng = cfg.rng(suite);
    let mut jobs = Vec::new();
    for k in 0..=3u8 {
        for j in 0..10 {
            let c = if j == 0 { ExtendedScalar::Infinity } else { sample_c(&mut rng) };
            jobs.push((k, c, seeded_path(&mut rng)));
        }
    }
    let per_job = jobs
        .par_iter()
        .map(|(k, c, path)| -> Result<Vec<CheckRecord>> {
            let fam = RiccatiFamily::new(idx(*k), *c, level)?;
            let case = format!(
                "k={k} C={c} path={}..{}",
                fmt_complex(path[0].tau()),
                fmt_complex(path[path.len() - 1].tau())
            );
            let r = riccati_residual(fam, path, &cfg.paths)?;
            let mut out = vec![CheckRecord::max(suite.as_str(), case.clone(), r.max_residual, tol)];
            if level == 1 {
                let p = pvi_path_residual(fam, path, &cfg.paths)?;
                out.push(CheckRecord::max("pvi", case, p.max_residual, pvi_tol));
            }
            Ok(out)
        })
        .collect::<Vec<_>>();
    flatten(per_job)
}

fn okamoto(cfg: &SuiteConfig) -> Result<Vec<CheckRecord>> {
    let tol = cfg.tol("okamoto");
    let mut rng = cfg.rng(Suite::Okamoto);
    let jobs: Vec<(u8, ExtendedScalar<f64>, ModuliPoint<f64>)> = (0..100)
        .map(|j| {
            let c = if j % 10 == 0 { ExtendedScalar::Infinity } else { sample_c(&mut rng) };
            let t = sample_taus(&mut rng, 1, (-0.5, 0.5), (0.5, 2.0))[0];
            ((j % 4) as u8, c, t)
        })
        .collect();
    jobs.par_iter()
        .map(|(k, c, t)| {
            let gap = okamoto_route_gap(idx(*k), *c, *t)?;
            Ok(CheckRecord::max("okamoto", format!("k={k} C={c} {}", tau_case(t)), gap, tol))
        })
        .collect()
}

fn hessian(cfg: &SuiteConfig) -> Result<Vec<CheckRecord>> {
    let tol = cfg.tol("hessian");
    let ctol = cfg.tol("critical");
    let mut rng = cfg.rng(Suite::Hessian);
    let taus = sample_taus(&mut rng, 100, (-0.5, 0.5), (0.3, 3.0));
    let per_tau = taus
        .par_iter()
        .map(|t| -> Result<Vec<CheckRecord>> {
            let case = tau_case(t);
            let mut out = Vec::new();
            for c in hessian_checks(*t)? {
                out.push(CheckRecord::max("determinant", format!("{case} {}", c.kind.label()), c.relative_error(), tol));
            }
            let lat = Lattice::new(*t)?;
            for pair in trivial_critical_points(*t)? {
                let r = critical_residual(&lat, &pair)?;
                out.push(CheckRecord::max(
                    "critical",
                    format!("{case} {}", pair.kind.label()),
                    r.pairwise.max(r.summed),
                    ctol,
                ));
            }
            Ok(out)
        })
        .collect::<Vec<_>>();
    flatten(per_tau)
}

/// Term scale of `3e·(g₂e/4) − (g₂/2 − 3e²)²`.
fn companion_scale(inv: &LatticeInvariants<f64>, k: usize) -> f64 {
    let e = inv.e(k).norm();
    let off = inv.g2.norm() / 2.0 + 3.0 * e * e;
    0.75 * inv.g2.norm() * e * e + off * off
}

fn lemma22(cfg: &SuiteConfig) -> Result<Vec<CheckRecord>> {
    let tol = cfg.tol("lemma22");
    let wtol = cfg.tol("witness");
    let mut rng = cfg.rng(Suite::Lemma22);
    let taus = sample_taus(&mut rng, 100, (-1.0, 1.0), (0.15, 3.0));
    let per_tau = taus
        .par_iter()
        .map(|t| -> Result<Vec<CheckRecord>> {
            let inv = *Lattice::new(*t)?.invariants();
            let case = tau_case(t);
            let mut out = Vec::new();
            for k in 1..=3 {
                let (det, prod) = companion_determinant(k, &inv);
                let s = companion_scale(&inv, k);
                out.push(CheckRecord::max("determinant_identity", format!("{case} k={k}"), (det - prod).norm() / s, tol));
                // the product of differences is the nonvanishing witness
                out.push(CheckRecord::min("determinant_nonzero", format!("{case} k={k}"), prod.norm() / s, 0.0));
            }
            Ok(out)
        })
        .collect::<Vec<_>>();
    let mut records = flatten(per_tau)?;

    // companion expressions at located zeros
    let region = Rectangle::new(-1.0, 1.0, 0.3, 2.0)?;
    let c = ExtendedScalar::finite(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let zcfg = ZeroConfig::default();
    for k in 0..=3u8 {
        for cc in [ExtendedScalar::Infinity, c] {
            let v = verify_simple(idx(k), cc, &region, &zcfg)?;
            for (z, w) in v.zeros.iter().zip(&v.witnesses) {
                records.push(CheckRecord::min(
                    "companion_witness",
                    format!("k={k} C={cc} {}", tau_case(&z.location)),
                    *w,
                    wtol,
                ));
            }
        }
    }
    Ok(records)
}
