//! Run configuration: the TOML schema, unknown-key detection with
//! did-you-mean suggestions, field validation, and resolution of the
//! declarative pieces (domain, obstacle, densities, schedule) into runtime
//! objects. Reports embed the effective config — every default resolved — so
//! any number in any artifact can be reproduced from the report alone.

use crate::density::DensityField;
use crate::domain::DomainSpec;
use crate::envelope::{geometric_schedule, BermanOptions};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{build_grid, Grid, GridFunction};
use crate::io::read_grid_function;
use crate::solver::{SolveParams, SweepMode};
use crate::stencil::StencilSet;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Obstacle or density data: an expression, a constant, or a grid file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum FieldSource {
    File { file: PathBuf },
    Const(f64),
    Expr(String),
}

impl FieldSource {
    pub fn grid_function(&self, grid: &Arc<Grid>) -> Result<GridFunction> {
        match self {
            FieldSource::Expr(src) => GridFunction::sample(grid, &Expr::parse(src)?),
            FieldSource::Const(c) => Ok(GridFunction::constant(grid, *c)),
            FieldSource::File { file } => {
                let u = read_grid_function(file)?;
                if u.grid.fingerprint != grid.fingerprint {
                    return Err(Error::GridMismatch {
                        a: u.grid.fingerprint,
                        b: grid.fingerprint,
                    });
                }
                Ok(GridFunction { grid: grid.clone(), vals: u.vals })
            }
        }
    }

    pub fn density(&self, grid: &Arc<Grid>, p: f64) -> Result<DensityField> {
        match self {
            FieldSource::Expr(src) => DensityField::sample(grid, &Expr::parse(src)?, p),
            FieldSource::Const(c) => DensityField::constant(grid, *c, p),
            FieldSource::File { .. } => DensityField::new(self.grid_function(grid)?, p),
        }
    }

    /// Expression form, required by refinement studies that rebuild grids.
    pub fn as_expr(&self) -> Result<Expr> {
        match self {
            FieldSource::Expr(src) => Expr::parse(src),
            FieldSource::Const(c) => Ok(Expr::parse(&format!("{c}"))?),
            FieldSource::File { file } => Err(Error::Validation(format!(
                "{} is a grid file; refinement runs need an expression or constant",
                file.display()
            ))),
        }
    }

    /// Constant value of the source when it is one (a number, or an
    /// expression using no coordinates).
    fn constant_value(&self) -> Option<f64> {
        match self {
            FieldSource::Const(c) => Some(*c),
            FieldSource::Expr(src) => {
                let e = Expr::parse(src).ok()?;
                (e.max_coord() == 0).then(|| e.eval(&[0.0; 4]))
            }
            FieldSource::File { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainConfig {
    pub kind: String,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bbox_lo: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bbox_hi: Option<Vec<f64>>,
}

impl DomainConfig {
    pub fn to_spec(&self) -> Result<DomainSpec> {
        let need = |opt: &Option<Vec<f64>>, name: &str| -> Result<Vec<f64>> {
            opt.clone().ok_or_else(|| {
                Error::Validation(format!("domain kind `{}` needs `{name}`", self.kind))
            })
        };
        let spec = match self.kind.as_str() {
            "ball" => DomainSpec::Ball {
                n: self.n,
                center: need(&self.center, "center")?,
                radius: self.radius.ok_or_else(|| {
                    Error::Validation("domain kind `ball` needs `radius`".into())
                })?,
            },
            "polydisc" => DomainSpec::Polydisc {
                n: self.n,
                center: need(&self.center, "center")?,
                radii: need(&self.radii, "radii")?,
            },
            "box" => DomainSpec::Box {
                n: self.n,
                lo: need(&self.lo, "lo")?,
                hi: need(&self.hi, "hi")?,
            },
            "sublevel" => DomainSpec::Sublevel {
                n: self.n,
                rho: Expr::parse(self.rho.as_deref().ok_or_else(|| {
                    Error::Validation("domain kind `sublevel` needs `rho`".into())
                })?)?,
                bbox_lo: need(&self.bbox_lo, "bbox_lo")?,
                bbox_hi: need(&self.bbox_hi, "bbox_hi")?,
            },
            other => {
                return Err(Error::Validation(format!(
                    "unknown domain kind `{other}` (ball, polydisc, box, sublevel)"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TolConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<u64>,
}

/// Closed ball E = {|z − center| ≤ radius} for the capacity subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetConfig {
    pub center: Vec<f64>,
    pub radius: f64,
}

fn default_stencil() -> String {
    "default".into()
}

fn default_obstacle() -> FieldSource {
    FieldSource::Expr("0".into())
}

fn default_density() -> FieldSource {
    FieldSource::Const(0.0)
}

fn default_p() -> f64 {
    2.0
}

fn default_method() -> String {
    "obstacle".into()
}

fn default_mode() -> String {
    "seq".into()
}

fn default_outdir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: DomainConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement: Option<Vec<f64>>,
    #[serde(default = "default_stencil")]
    pub stencil: String,
    #[serde(default = "default_obstacle")]
    pub obstacle: FieldSource,
    #[serde(default = "default_density")]
    pub f: FieldSource,
    #[serde(default = "default_density")]
    pub g: FieldSource,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub declared_max_of_subsolutions: bool,
    #[serde(default)]
    pub tolerances: TolConfig,
    #[serde(default = "default_mode")]
    pub mode: String,
    /// Closed-form solution to compare against (convergence runs, report
    /// sup-error column).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    /// Error bound is bound_factor·h against `exact`; default n + 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_factor: Option<f64>,
    #[serde(default)]
    pub experiments: Vec<String>,
    #[serde(default = "default_outdir")]
    pub outdir: PathBuf,
    /// Reserved: every current pipeline is deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set: Option<SetConfig>,
}

// -------------------------------------------------------- unknown-key check

const ROOT_KEYS: &[&str] = &[
    "domain", "h", "refinement", "stencil", "obstacle", "f", "g", "p", "method",
    "schedule", "declared_max_of_subsolutions", "tolerances", "mode", "exact",
    "bound_factor", "experiments", "outdir", "seed", "set",
];
const DOMAIN_KEYS: &[&str] = &[
    "kind", "n", "center", "radius", "radii", "lo", "hi", "rho", "bbox_lo", "bbox_hi",
];
const TOL_KEYS: &[&str] = &["tol", "max_iter"];
const SET_KEYS: &[&str] = &["center", "radius"];
const FIELD_KEYS: &[&str] = &["file"];

fn suggest<'a>(key: &str, allowed: &[&'a str]) -> Option<&'a str> {
    allowed
        .iter()
        .map(|&a| (strsim::levenshtein(key, a), a))
        .filter(|&(d, _)| d <= 2)
        .min_by_key(|&(d, _)| d)
        .map(|(_, a)| a)
}

fn check_table(
    table: &toml::value::Table,
    allowed: &[&str],
    prefix: &str,
    issues: &mut Vec<String>,
) {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            let mut msg = String::new();
            let _ = write!(msg, "unknown key `{prefix}{key}`");
            if let Some(s) = suggest(key, allowed) {
                let _ = write!(msg, "; did you mean `{s}`?");
            }
            issues.push(msg);
        }
    }
}

fn unknown_keys(root: &toml::Value) -> Vec<String> {
    let mut issues = Vec::new();
    let Some(table) = root.as_table() else {
        return issues;
    };
    check_table(table, ROOT_KEYS, "", &mut issues);
    let mut sub = |name: &str, allowed: &[&str]| {
        if let Some(t) = table.get(name).and_then(|v| v.as_table()) {
            check_table(t, allowed, &format!("{name}."), &mut issues);
        }
    };
    sub("domain", DOMAIN_KEYS);
    sub("tolerances", TOL_KEYS);
    sub("set", SET_KEYS);
    sub("obstacle", FIELD_KEYS);
    sub("f", FIELD_KEYS);
    sub("g", FIELD_KEYS);
    issues
}

// ------------------------------------------------------------------ parsing

/// Parse and validate a config. In strict mode unknown keys are errors;
/// otherwise they come back as warnings for the caller to surface.
pub fn parse_config_str(text: &str, strict: bool) -> Result<(RunConfig, Vec<String>)> {
    let value: toml::Value = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Format(e.to_string()))?;
    let warnings = unknown_keys(&value);
    if strict && !warnings.is_empty() {
        return Err(Error::Validation(warnings.join("; ")));
    }
    let config: RunConfig = value
        .try_into()
        .map_err(|e: toml::de::Error| Error::Format(e.to_string()))?;
    config.validate()?;
    Ok((config, warnings))
}

pub fn parse_config(path: &Path, strict: bool) -> Result<(RunConfig, Vec<String>)> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, strict).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.domain.to_spec()?;
        if self.h.is_none() && self.refinement.is_none() {
            return Err(Error::Validation(
                "config needs `h` or a `refinement` list".into(),
            ));
        }
        for &h in self.h.iter().chain(self.refinement.iter().flatten()) {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::Validation(format!("spacing h = {h} must be > 0")));
            }
        }
        if self.stencil != "default" {
            return Err(Error::Validation(format!(
                "unknown stencil `{}` (only `default` is available)",
                self.stencil
            )));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::Validation(format!(
                "exponent p = {} must be finite and > 1",
                self.p
            )));
        }
        if !matches!(self.method.as_str(), "obstacle" | "berman") {
            return Err(Error::Validation(format!(
                "unknown method `{}` (obstacle, berman)",
                self.method
            )));
        }
        if !matches!(self.mode.as_str(), "seq" | "redblack") {
            return Err(Error::Validation(format!(
                "unknown sweep mode `{}` (seq, redblack)",
                self.mode
            )));
        }
        if let Some(tol) = self.tolerances.tol {
            if !(tol > 0.0) || !tol.is_finite() {
                return Err(Error::Validation(format!("tol = {tol} must be > 0")));
            }
        }
        if self.tolerances.max_iter == Some(0) {
            return Err(Error::Validation("max_iter must be ≥ 1".into()));
        }
        if let Some(schedule) = &self.schedule {
            if schedule.is_empty()
                || schedule.iter().any(|&j| !(j > 0.0) || !j.is_finite())
                || schedule.windows(2).any(|w| w[0] >= w[1])
            {
                return Err(Error::Validation(
                    "schedule must be a strictly increasing list of positive slopes".into(),
                ));
            }
        }
        for (name, field) in [("f", &self.f), ("g", &self.g)] {
            if let Some(c) = field.constant_value() {
                if !(c >= 0.0) || !c.is_finite() {
                    return Err(Error::Validation(format!(
                        "density `{name}` must be ≥ 0 (got {c})"
                    )));
                }
            }
            if let FieldSource::File { file } = field {
                if !file.exists() {
                    return Err(Error::Validation(format!(
                        "density `{name}` references missing file {}",
                        file.display()
                    )));
                }
            }
        }
        if let FieldSource::File { file } = &self.obstacle {
            if !file.exists() {
                return Err(Error::Validation(format!(
                    "obstacle references missing file {}",
                    file.display()
                )));
            }
        }
        if let Some(set) = &self.set {
            if !(set.radius > 0.0) || !set.radius.is_finite() {
                return Err(Error::Validation(format!(
                    "set radius = {} must be > 0",
                    set.radius
                )));
            }
            if set.center.len() != 2 * self.domain.n {
                return Err(Error::Validation(format!(
                    "set center has {} coordinates, domain needs {}",
                    set.center.len(),
                    2 * self.domain.n
                )));
            }
        }
        if let Some(src) = &self.exact {
            Expr::parse(src)?;
        }
        if let Some(b) = self.bound_factor {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::Validation(format!(
                    "bound_factor = {b} must be > 0"
                )));
            }
        }
        Ok(())
    }

    pub fn exact_expr(&self) -> Result<Option<Expr>> {
        self.exact.as_deref().map(Expr::parse).transpose()
    }

    pub fn bound_factor_or_default(&self) -> f64 {
        self.bound_factor
            .unwrap_or((self.domain.n + 1) as f64)
    }

    pub fn spec(&self) -> Result<DomainSpec> {
        self.domain.to_spec()
    }

    pub fn solve_params(&self) -> SolveParams {
        let mut params = SolveParams::default_for(self.domain.n);
        if let Some(tol) = self.tolerances.tol {
            params.tol = tol;
        }
        if let Some(mi) = self.tolerances.max_iter {
            params.max_iter = mi;
        }
        params.mode = match self.mode.as_str() {
            "redblack" => SweepMode::RedBlack,
            _ => SweepMode::Seq,
        };
        params
    }

    /// The spacings to run: the refinement list, else the single h.
    pub fn hs(&self) -> Vec<f64> {
        match (&self.refinement, self.h) {
            (Some(list), _) if !list.is_empty() => list.clone(),
            (_, Some(h)) => vec![h],
            _ => Vec::new(),
        }
    }

    pub fn grid_at(&self, h: f64) -> Result<Arc<Grid>> {
        build_grid(&self.spec()?, h, StencilSet::default_for(self.domain.n))
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        let h = self
            .h
            .or_else(|| self.refinement.as_ref().and_then(|r| r.first().copied()))
            .ok_or_else(|| Error::Validation("config needs `h`".into()))?;
        self.grid_at(h)
    }

    pub fn berman_options(&self) -> BermanOptions {
        BermanOptions {
            schedule: self
                .schedule
                .clone()
                .unwrap_or_else(|| geometric_schedule(1024.0)),
            declared_max_of_subsolutions: self.declared_max_of_subsolutions,
            stage_tol: None,
        }
    }

    /// The config with every default resolved, as echoed into reports.
    pub fn effective(&self) -> RunConfig {
        let mut c = self.clone();
        c.tolerances.tol = Some(c.tolerances.tol.unwrap_or(self.solve_params().tol));
        c.tolerances.max_iter = Some(c.tolerances.max_iter.unwrap_or(self.solve_params().max_iter));
        if c.method == "berman" && c.schedule.is_none() {
            c.schedule = Some(geometric_schedule(1024.0));
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        h = 0.03125
        obstacle = "0"
        f = "4"
        method = "obstacle"

        [domain]
        kind = "ball"
        n = 1
        center = [0.0, 0.0]
        radius = 1.0
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let (c, warnings) = parse_config_str(MINIMAL, true).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(c.h, Some(0.03125));
        assert_eq!(c.method, "obstacle");
        assert_eq!(c.mode, "seq");
        assert_eq!(c.p, 2.0);
        assert!(matches!(c.spec().unwrap(), DomainSpec::Ball { .. }));
        let params = c.solve_params();
        assert_eq!(params.tol, 1e-8);
        let eff = c.effective();
        assert_eq!(eff.tolerances.tol, Some(1e-8));
        // the echo itself serializes
        let text = toml::to_string_pretty(&eff).unwrap();
        assert!(text.contains("tol"));
    }

    #[test]
    fn negative_density_is_rejected_by_name() {
        let bad = MINIMAL.replace("f = \"4\"", "f = \"-1\"");
        match parse_config_str(&bad, true) {
            Err(Error::Validation(msg)) => {
                assert!(msg.contains("density `f` must be ≥ 0"), "{msg}");
            }
            other => panic!("expected Validation, got {other:?}"),
        }
        let bad = MINIMAL.replace("f = \"4\"", "f = -1.0");
        assert!(matches!(parse_config_str(&bad, false), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_key_suggests_the_nearest_field() {
        let bad = MINIMAL.replace("method = \"obstacle\"", "metod = \"obstacle\"");
        match parse_config_str(&bad, true) {
            Err(Error::Validation(msg)) => {
                assert!(msg.contains("unknown key `metod`"), "{msg}");
                assert!(msg.contains("did you mean `method`?"), "{msg}");
            }
            other => panic!("expected Validation, got {other:?}"),
        }
        // non-strict: same text comes back as a warning
        let (_, warnings) = parse_config_str(&bad, false).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("did you mean `method`?"));
    }

    #[test]
    fn nested_unknown_keys_carry_their_path() {
        let bad = format!("{MINIMAL}\n[tolerances]\ntoll = 1e-9\n");
        match parse_config_str(&bad, true) {
            Err(Error::Validation(msg)) => {
                assert!(msg.contains("tolerances.toll"), "{msg}");
                assert!(msg.contains("did you mean `tol`?"), "{msg}");
            }
            other => panic!("expected Validation, got {other:?}"),
        }
    }

    #[test]
    fn structural_requirements_are_validated() {
        let no_h = MINIMAL.replace("h = 0.03125", "");
        assert!(matches!(parse_config_str(&no_h, true), Err(Error::Validation(_))));

        // root-level keys go before the [domain] table
        let at_root = |line: &str| MINIMAL.replace("h = 0.03125", &format!("h = 0.03125\n{line}"));

        let bad_mode = at_root("mode = \"checkerboard\"");
        assert!(matches!(parse_config_str(&bad_mode, true), Err(Error::Validation(_))));

        let bad_schedule = at_root("schedule = [4.0, 2.0]");
        assert!(matches!(parse_config_str(&bad_schedule, true), Err(Error::Validation(_))));

        let missing = at_root("g = { file = \"/nonexistent/g.pshg\" }");
        match parse_config_str(&missing, true) {
            Err(Error::Validation(msg)) => assert!(msg.contains("missing file"), "{msg}"),
            other => panic!("expected Validation, got {other:?}"),
        }
    }

    #[test]
    fn field_sources_resolve_on_the_grid() {
        let (c, _) = parse_config_str(MINIMAL, true).unwrap();
        let grid = c.grid().unwrap();
        let u = c.obstacle.grid_function(&grid).unwrap();
        assert!(u.vals.iter().all(|&v| v == 0.0));
        let f = c.f.density(&grid, c.p).unwrap();
        assert!(f.vals.vals.iter().all(|&v| v == 4.0));

        // file-backed source round-trips through the PSHG format
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pshg");
        crate::io::write_grid_function(&path, &f.vals).unwrap();
        let src = FieldSource::File { file: path };
        let back = src.density(&grid, 2.0).unwrap();
        assert_eq!(back.vals.vals, f.vals.vals);
    }

    #[test]
    fn refinement_list_supplies_the_spacings() {
        let text = MINIMAL.replace("h = 0.03125", "refinement = [0.125, 0.0625]");
        let (c, _) = parse_config_str(&text, true).unwrap();
        assert_eq!(c.hs(), vec![0.125, 0.0625]);
        assert!(c.grid().is_ok());
    }
}
