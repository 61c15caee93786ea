//! JSON and CSV file formats.
//!
//! Input files may omit `"schema"`; every file written carries `"schema": "1"`.
//! Vectors are nested arrays (`values[k]` is one point of the target space),
//! `q = ∞` is written as the string `"inf"`, and a non-finite scalar in a
//! report is written as `null`.

use std::fmt::Write as _;
use std::path::Path;

use affapprox_core::affinefit::{ApproximabilityReport, FitResult, SweepRow};
use affapprox_core::net::NetResult;
use affapprox_core::{AffineMap, GridFunction1D, GridFunctionCube, NormKind, NormedSpace, SampleSet, UcParams, WalshCoefficients};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    Named(InfName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfName {
    #[serde(rename = "inf")]
    Inf,
}

impl Exponent {
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(q) => q,
            Exponent::Named(InfName::Inf) => f64::INFINITY,
        }
    }

    pub fn from_value(q: f64) -> Self {
        if q.is_infinite() {
            Exponent::Named(InfName::Inf)
        } else {
            Exponent::Finite(q)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcJson {
    pub p: f64,
    #[serde(rename = "K")]
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpaceJson {
    Lq {
        q: Exponent,
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        uc: Option<UcJson>,
    },
    Mixed {
        outer: usize,
        q: Exponent,
        inner: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        uc: Option<UcJson>,
    },
}

impl SpaceJson {
    pub fn build(&self) -> Result<NormedSpace, CliError> {
        let (space, uc) = match *self {
            SpaceJson::Lq { q, dim, uc } => (NormedSpace::lq(q.value(), dim)?, uc),
            SpaceJson::Mixed { outer, q, inner, uc } => (NormedSpace::mixed(outer, q.value(), inner)?, uc),
        };
        Ok(match uc {
            Some(u) => space.with_uc_params(UcParams::new(u.p, u.k)?),
            None => space,
        })
    }

    pub fn from_space(space: &NormedSpace) -> Self {
        let uc = space.uc_override().map(|u| UcJson { p: u.p, k: u.k });
        match space.kind() {
            NormKind::Lq { q, dim } => SpaceJson::Lq { q: Exponent::from_value(q), dim, uc },
            NormKind::MixedL2Lq { outer, q, inner } => SpaceJson::Mixed { outer, q: Exponent::from_value(q), inner, uc },
        }
    }
}

fn flatten(rows: &[Vec<f64>], dim: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::with_capacity(rows.len() * dim);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(CliError::input(format!("{what}[{i}] has {} coordinates, expected {dim}", row.len())));
        }
        out.extend_from_slice(row);
    }
    Ok(out)
}

fn nest(flat: &[f64], dim: usize) -> Vec<Vec<f64>> {
    flat.chunks_exact(dim.max(1)).map(<[f64]>::to_vec).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridJson {
    #[serde(default = "schema")]
    pub schema: String,
    pub space: SpaceJson,
    pub a: f64,
    pub b: f64,
    pub m: u32,
    pub values: Vec<Vec<f64>>,
}

fn schema() -> String {
    SCHEMA.to_string()
}

impl GridJson {
    pub fn build(&self) -> Result<GridFunction1D, CliError> {
        let space = self.space.build()?;
        let expected = 1usize.checked_shl(self.m).map(|s| s + 1).unwrap_or(usize::MAX);
        if self.values.len() != expected {
            return Err(CliError::input(format!("level {} needs {expected} values, found {}", self.m, self.values.len())));
        }
        Ok(GridFunction1D::new(space, self.a, self.b, self.m, flatten(&self.values, space.dim(), "values")?)?)
    }

    pub fn from_grid(g: &GridFunction1D) -> Self {
        GridJson {
            schema: schema(),
            space: SpaceJson::from_space(g.space()),
            a: g.a(),
            b: g.b(),
            m: g.m(),
            values: nest(g.values(), g.space().dim()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeJson {
    #[serde(default = "schema")]
    pub schema: String,
    pub space: SpaceJson,
    pub n: usize,
    pub origin: Vec<f64>,
    pub theta: f64,
    pub m: u32,
    pub values: Vec<Vec<f64>>,
}

impl CubeJson {
    pub fn build(&self) -> Result<GridFunctionCube, CliError> {
        let space = self.space.build()?;
        if self.origin.len() != self.n {
            return Err(CliError::input(format!("origin has {} coordinates, expected n = {}", self.origin.len(), self.n)));
        }
        Ok(GridFunctionCube::new(space, self.origin.clone(), self.theta, self.m, flatten(&self.values, space.dim(), "values")?)?)
    }

    pub fn from_cube(f: &GridFunctionCube) -> Self {
        CubeJson {
            schema: schema(),
            space: SpaceJson::from_space(f.space()),
            n: f.n(),
            origin: f.origin().to_vec(),
            theta: f.theta(),
            m: f.m(),
            values: nest(f.values(), f.space().dim()),
        }
    }
}

/// Scattered samples for `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesJson {
    #[serde(default = "schema")]
    pub schema: String,
    pub space: SpaceJson,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

impl SamplesJson {
    pub fn build(&self) -> Result<(SampleSet, NormedSpace), CliError> {
        let space = self.space.build()?;
        if self.points.len() != self.values.len() {
            return Err(CliError::input(format!("{} points but {} values", self.points.len(), self.values.len())));
        }
        let n = self.points.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(CliError::input("no sample points"));
        }
        let mut set = SampleSet::new(n, space.dim());
        for (i, (x, v)) in self.points.iter().zip(&self.values).enumerate() {
            if x.len() != n || v.len() != space.dim() {
                return Err(CliError::input(format!("sample {i} has the wrong dimensions")));
            }
            set.push(x, v)?;
        }
        Ok((set, space))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineJson {
    /// Row-major `target_dim × domain_dim`.
    pub linear: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

impl AffineJson {
    pub fn from_map(map: &AffineMap) -> Self {
        AffineJson { linear: nest(map.linear(), map.domain_dim()), offset: map.offset().to_vec() }
    }
}

/// `Some(x)` for finite `x`, `None` (JSON `null`) otherwise.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitJson {
    pub schema: &'static str,
    pub map: AffineJson,
    pub sup_error: f64,
    pub lower_certificate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub pass: bool,
}

impl FitJson {
    pub fn new(fit: &FitResult, tol: f64) -> Self {
        FitJson {
            schema: SCHEMA,
            map: AffineJson::from_map(&fit.map),
            sup_error: fit.sup_error,
            lower_certificate: fit.lower_certificate,
            iterations: fit.iterations,
            converged: fit.converged,
            pass: fit.lower_certificate <= fit.sup_error + tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalshJson {
    pub n: usize,
    /// `v_S` keyed by the decimal subset mask (bit `i` ↔ coordinate `i + 1`).
    pub coefficients: std::collections::BTreeMap<usize, Vec<f64>>,
}

impl WalshJson {
    pub fn new(w: &WalshCoefficients) -> Self {
        WalshJson { n: w.n(), coefficients: w.iter().map(|(mask, v)| (mask, v.to_vec())).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportJson {
    pub schema: &'static str,
    pub eps: f64,
    pub lip: f64,
    pub best_rho: f64,
    pub center: Vec<f64>,
    pub map: Option<AffineJson>,
    pub relative_error: f64,
    pub grid_gap: f64,
    pub candidates: usize,
    pub pass: bool,
}

impl ReportJson {
    pub fn new(r: &ApproximabilityReport, pass: bool) -> Self {
        ReportJson {
            schema: SCHEMA,
            eps: r.eps,
            lip: r.lip,
            best_rho: r.best_rho,
            center: r.center.clone(),
            map: r.map.as_ref().map(AffineJson::from_map),
            relative_error: r.relative_error,
            grid_gap: r.grid_gap,
            candidates: r.sweep.len(),
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetJson {
    pub schema: &'static str,
    pub delta: f64,
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub min_separation: Option<f64>,
    pub separation_ok: bool,
    pub covering_checked: usize,
    pub max_covering_distance: f64,
    pub covering_ok: bool,
}

impl NetJson {
    pub fn new(net: &NetResult) -> Self {
        NetJson {
            schema: SCHEMA,
            delta: net.delta,
            dim: net.dim,
            points: nest(&net.points, net.dim),
            min_separation: finite(net.min_separation),
            separation_ok: net.separation_ok,
            covering_checked: net.covering_checked,
            max_covering_distance: net.max_covering_distance,
            covering_ok: net.covering_ok,
        }
    }
}

/// `rho,center_1,…,center_n,sup_error,certificate,pass`; a candidate rejected
/// by its certificate has an empty `sup_error` field.
pub fn sweep_csv(rows: &[SweepRow], n: usize) -> String {
    let mut out = String::from("rho");
    for i in 1..=n {
        let _ = write!(out, ",center_{i}");
    }
    out.push_str(",sup_error,certificate,pass\n");
    for row in rows {
        let _ = write!(out, "{}", row.rho);
        for c in &row.center {
            let _ = write!(out, ",{c}");
        }
        match row.sup_error {
            Some(e) => {
                let _ = write!(out, ",{e}");
            }
            None => out.push(','),
        }
        let _ = writeln!(out, ",{},{}", row.certificate, row.pass);
    }
    out
}

pub const BOUNDS_HEADER: &str = "n,p,K,eps,variant,log2_value\n";

pub fn bounds_row(n: usize, p: f64, k: f64, eps: f64, variant: &str, log2: f64) -> String {
    format!("{n},{p},{k},{eps},{variant},{log2}\n")
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_round_trip() {
        for text in [
            r#"{"kind":"lq","q":2.0,"dim":4}"#,
            r#"{"kind":"mixed","outer":3,"q":2.5,"inner":5}"#,
            r#"{"kind":"lq","q":"inf","dim":2}"#,
            r#"{"kind":"lq","q":3.0,"dim":2,"uc":{"p":3.0,"K":2.0}}"#,
        ] {
            let parsed: SpaceJson = serde_json::from_str(text).unwrap();
            let space = parsed.build().unwrap();
            let back = SpaceJson::from_space(&space);
            assert_eq!(back, parsed);
            assert_eq!(serde_json::to_string(&back).unwrap(), text);
        }
        assert!(serde_json::from_str::<SpaceJson>(r#"{"kind":"lq","q":"infinity","dim":2}"#).is_err());
        let bad: SpaceJson = serde_json::from_str(r#"{"kind":"lq","q":0.5,"dim":2}"#).unwrap();
        assert!(bad.build().is_err());
    }

    #[test]
    fn grid_validation() {
        let text = r#"{"space":{"kind":"lq","q":2.0,"dim":1},"a":0.0,"b":1.0,"m":1,"values":[[0.0],[0.5],[0.0]]}"#;
        let g: GridJson = serde_json::from_str(text).unwrap();
        let grid = g.build().unwrap();
        assert_eq!(GridJson::from_grid(&grid), g);
        let short = r#"{"space":{"kind":"lq","q":2.0,"dim":1},"a":0.0,"b":1.0,"m":2,"values":[[0.0],[0.5],[0.0]]}"#;
        assert!(serde_json::from_str::<GridJson>(short).unwrap().build().is_err());
        let ragged = r#"{"space":{"kind":"lq","q":2.0,"dim":1},"a":0.0,"b":1.0,"m":1,"values":[[0.0],[0.5,1.0],[0.0]]}"#;
        assert!(serde_json::from_str::<GridJson>(ragged).unwrap().build().is_err());
    }

    #[test]
    fn csv_rows() {
        assert_eq!(bounds_row(1, 2.0, 1.0, 0.25, "theorem", -8192.0), "1,2,1,0.25,theorem,-8192\n");
    }
}
