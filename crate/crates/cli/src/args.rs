use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use torus_zeros::suites::default_tolerances;

#[derive(Debug, Parser)]
#[command(name = "torus-zeros", version, about = "Modular forms on tori: evaluation, verification suites, zero scans and degeneracy curves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// re_min,re_max,im_min,im_max
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub region: Option<String>,

    /// NXxNY or N
    #[arg(long, global = true)]
    pub grid: Option<String>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; falls back to TORUS_ZEROS_THREADS, then the CPU count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory for curve files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one function at τ (and z where needed).
    Eval {
        /// theta1, wp, wp_prime, wp_pp, zeta, wp_dtau, e1, e2, e3, g2, g3,
        /// eta1, eta2, f, F, phi_plus, phi_minus, phi, t, lambda
        symbol: String,
        #[arg(long, allow_hyphen_values = true)]
        tau: String,
        #[arg(long, allow_hyphen_values = true)]
        z: Option<String>,
        #[arg(long)]
        k: Option<u8>,
        #[arg(long, allow_hyphen_values = true)]
        c: Option<String>,
        /// Riccati level for lambda.
        #[arg(long)]
        level: Option<u8>,
        /// Pass only if the value matches within tol.eval.
        #[arg(long, allow_hyphen_values = true)]
        expect: Option<String>,
    },
    /// Run a seeded property suite.
    Verify {
        /// identities, derivatives, riccati0, riccati1, okamoto, hessian, lemma22
        suite: String,
    },
    /// Locate the zeros of f_{k,C} in the region and certify them simple.
    Zeros {
        #[arg(long)]
        k: u8,
        #[arg(long, default_value = "inf", allow_hyphen_values = true)]
        c: String,
    },
    /// Trace degeneracy curves and write CSV/SVG files.
    Trace {
        /// C12, C13, C23, Ctilde_plus, Ctilde_minus or all
        #[arg(default_value = "all")]
        curve: String,
    },
    /// Hessian determinants at the trivial critical points over the grid.
    HessianTable,
}

/// Pulls `--tol.<name>=<value>` and `--tol.<name> <value>` out of the
/// argument list, since their names are not known to the parser.
pub fn split_tolerances(args: Vec<String>) -> Result<(Vec<String>, BTreeMap<String, f64>)> {
    let known = default_tolerances();
    let mut rest = Vec::with_capacity(args.len());
    let mut tols = BTreeMap::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(body) = a.strip_prefix("--tol.") else {
            rest.push(a);
            continue;
        };
        let (name, value) = match body.split_once('=') {
            Some((n, v)) => (n.to_string(), v.to_string()),
            None => (body.to_string(), it.next().ok_or_else(|| anyhow!("--tol.{body} needs a value"))?),
        };
        if !known.contains_key(&name) {
            let names: Vec<&str> = known.keys().map(|s| s.as_str()).collect();
            bail!("unknown tolerance '{name}'; known: {}", names.join(", "));
        }
        let v: f64 = value.parse().map_err(|_| anyhow!("tolerance {name}: cannot parse '{value}'"))?;
        if !(v.is_finite() && v > 0.0) {
            bail!("tolerance {name} must be positive and finite, got {value}");
        }
        tols.insert(name, v);
    }
    Ok((rest, tols))
}

pub fn parse_region(s: &str) -> Result<[f64; 4]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| anyhow!("region: cannot parse '{p}'")))
        .collect::<Result<_>>()?;
    <[f64; 4]>::try_from(parts).map_err(|_| anyhow!("region needs four numbers re_min,re_max,im_min,im_max"))
}

pub fn parse_grid(s: &str) -> Result<[usize; 2]> {
    let num = |p: &str| p.trim().parse::<usize>().map_err(|_| anyhow!("grid: cannot parse '{p}'"));
    match s.split_once(['x', 'X']) {
        Some((a, b)) => Ok([num(a)?, num(b)?]),
        None => {
            let n = num(s)?;
            Ok([n, n])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn tolerances_are_extracted() {
        let (rest, t) = split_tolerances(v(&["tz", "verify", "--tol.riccati1=1e-6", "identities", "--tol.pvi", "2e-5"])).unwrap();
        assert_eq!(rest, v(&["tz", "verify", "identities"]));
        assert_eq!(t["riccati1"], 1e-6);
        assert_eq!(t["pvi"], 2e-5);
        assert!(split_tolerances(v(&["--tol.bogus=1"])).is_err());
        assert!(split_tolerances(v(&["--tol.pvi=-1"])).is_err());
        assert!(split_tolerances(v(&["--tol.pvi"])).is_err());
    }

    #[test]
    fn region_and_grid() {
        assert_eq!(parse_region("-1,1,0.1,3").unwrap(), [-1.0, 1.0, 0.1, 3.0]);
        assert!(parse_region("-1,1,0.1").is_err());
        assert_eq!(parse_grid("40x30").unwrap(), [40, 30]);
        assert_eq!(parse_grid("64").unwrap(), [64, 64]);
        assert!(parse_grid("a").is_err());
    }
}
