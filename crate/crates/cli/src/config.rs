//! Scenario files.
//!
//! A scenario is a small TOML document. Any consistent length unit `L` and
//! time unit `T` work: extents are in `L`, `ks` in `L/T`, `alpha` in `1/L`,
//! `tau` and `t_final` in `T`. Saturations are effective saturations in
//! `[0, 1]`. The vertical coordinate `z` points upward; gravity pulls
//! toward `z = 0`.
//!
//! ```toml
//! name = "example"
//! description = "one line shown by `richards list`"
//!
//! [geometry]
//! kind = "rect"          # or "interval" with `height` and `points`
//! length = 50.0
//! height = 200.0
//! nx = 20                # segments along x
//! nz = 40                # segments along z
//!
//! [soil]
//! model = "vgm"          # vgm | gardner | brooks-corey (b) | haverkamp (a, beta, gamma)
//! ks = 5.0
//! alpha = 0.05
//! n = 2.0
//! theta_s = 0.45
//! theta_r = 0.05
//!
//! [scheme]
//! kind = "explicit"      # or "implicit"
//! tau = 5.0
//! t_final = 50.0
//!
//! [initial]
//! background = 0.2
//! regions = [{ z = "[0, 60)", theta = 1.0 }]   # later regions win
//! # linear = { bottom = 0.8, top = 0.2 }
//!
//! [boundary]
//! dirichlet = { bottom = 1.0, top = 0.2 }      # a number or "initial"
//! neumann = ["left", "right"]
//!
//! [output]
//! csv = "diagnostics.csv"
//! profile = "profile.csv"
//! profile_x = 25.0
//! vtk_every = 0
//! ```

use richards_core::constitutive::{ConstitutiveError, SaturationCore, SoilKind};
use richards_core::mesh::Side;
use richards_core::schemes::{Scheme, SchemeConfig, ADAPTIVE_SAFETY, NEWTON_MAX_ITER, NEWTON_TOL};
use richards_core::SoilModel;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("line {line}: {msg}")]
    Invalid { line: usize, msg: String },
    #[error("{msg}")]
    Semantic { msg: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("`{0}` is neither a readable file nor a builtin scenario (see `richards list`)")]
    UnknownScenario(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub geometry: GeometryConfig,
    pub soil: SoilConfig,
    pub scheme: SchemeSection,
    pub initial: InitialConfig,
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeometryConfig {
    Rect { length: f64, height: f64, nx: usize, nz: usize },
    Interval { height: f64, points: usize },
}

impl GeometryConfig {
    pub fn height(&self) -> f64 {
        match *self {
            GeometryConfig::Rect { height, .. } | GeometryConfig::Interval { height, .. } => height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoilConfig {
    #[serde(default = "default_model")]
    pub model: String,
    pub ks: f64,
    pub alpha: f64,
    pub n: f64,
    pub theta_s: f64,
    pub theta_r: f64,
    pub b: Option<f64>,
    pub a: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    /// `theta = u^p` on the core interval instead of the identity
    pub core_exponent: Option<f64>,
}

fn default_model() -> String {
    "vgm".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: String,
    pub tau: f64,
    pub t_final: f64,
    #[serde(default = "default_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default)]
    pub adaptive: bool,
    #[serde(default = "default_safety")]
    pub adaptive_safety: f64,
}

fn default_tol() -> f64 {
    NEWTON_TOL
}
fn default_max_iter() -> usize {
    NEWTON_MAX_ITER
}
fn default_safety() -> f64 {
    ADAPTIVE_SAFETY
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub background: Option<f64>,
    #[serde(default)]
    pub regions: Vec<RegionConfig>,
    pub linear: Option<LinearProfile>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    /// interval in z such as `"[0, 60)"` or `"(100, 200]"`
    pub z: String,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearProfile {
    pub bottom: f64,
    pub top: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DirichletValue {
    Theta(f64),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub dirichlet: BTreeMap<String, DirichletValue>,
    #[serde(default)]
    pub neumann: Vec<String>,
    #[serde(default = "default_admissible")]
    pub admissible: [f64; 2],
}

fn default_admissible() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<String>,
    pub profile: Option<String>,
    pub profile_x: Option<f64>,
    #[serde(default)]
    pub vtk_every: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub meshes: Vec<usize>,
    pub csv: Option<String>,
}

/// Half-open or closed interval parsed from `"[a, b)"`-style text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl ZInterval {
    pub fn parse(text: &str) -> Option<ZInterval> {
        let t = text.trim();
        let lo_closed = match t.chars().next()? {
            '[' => true,
            '(' => false,
            _ => return None,
        };
        let hi_closed = match t.chars().last()? {
            ']' => true,
            ')' => false,
            _ => return None,
        };
        let inner = &t[1..t.len() - 1];
        let (a, b) = inner.split_once(',')?;
        let lo: f64 = a.trim().parse().ok()?;
        let hi: f64 = b.trim().parse().ok()?;
        (lo <= hi).then_some(ZInterval { lo, hi, lo_closed, hi_closed })
    }

    pub fn contains(&self, z: f64) -> bool {
        let above = if self.lo_closed { z >= self.lo } else { z > self.lo };
        let below = if self.hi_closed { z <= self.hi } else { z < self.hi };
        above && below
    }
}

/// 1-based line of the first occurrence of `needle`, or 0.
pub fn line_of(src: &str, needle: &str) -> usize {
    src.lines().position(|l| l.contains(needle)).map_or(0, |i| i + 1)
}

impl ScenarioConfig {
    pub fn from_toml_str(src: &str) -> Result<ScenarioConfig, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(src).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        cfg.validate(src)?;
        Ok(cfg)
    }

    fn validate(&self, src: &str) -> Result<(), ConfigError> {
        let err = |needle: &str, msg: String| {
            let line = line_of(src, needle);
            if line == 0 {
                ConfigError::Semantic { msg }
            } else {
                ConfigError::Invalid { line, msg }
            }
        };
        match self.geometry {
            GeometryConfig::Rect { length, height, nx, nz } => {
                if !(length > 0.0 && height > 0.0) || nx == 0 || nz == 0 {
                    return Err(err("[geometry]", "rect geometry needs positive extents and segment counts".into()));
                }
            }
            GeometryConfig::Interval { height, points } => {
                if !(height > 0.0) || points < 3 {
                    return Err(err("[geometry]", "interval geometry needs a positive height and at least 3 points".into()));
                }
            }
        }
        self.soil_model().map_err(|e| err("[soil]", e.to_string()))?;
        self.scheme_config().map_err(|e| err("[scheme]", e))?;
        for r in &self.initial.regions {
            if ZInterval::parse(&r.z).is_none() {
                return Err(err(&r.z, format!("cannot parse z interval `{}`", r.z)));
            }
        }
        if self.initial.background.is_none() && self.initial.linear.is_none() && self.initial.regions.is_empty() {
            return Err(err("[initial]", "initial condition needs a background, a linear profile or regions".into()));
        }
        if self.initial.background.is_some() && self.initial.linear.is_some() {
            return Err(err("linear", "`background` and `linear` are mutually exclusive".into()));
        }
        self.dirichlet_sides().map_err(|m| err("dirichlet", m))?;
        let [lo, hi] = self.boundary.admissible;
        for (side, v) in &self.boundary.dirichlet {
            if let DirichletValue::Theta(t) = v {
                if !(lo..=hi).contains(t) {
                    return Err(err("dirichlet", format!("Dirichlet value {t} on `{side}` outside [{lo}, {hi}]")));
                }
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.meshes.is_empty() || sweep.meshes.iter().any(|&n| n < 3) {
                return Err(err("[sweep]", "sweep needs a nonempty mesh list of at least 3 points each".into()));
            }
        }
        Ok(())
    }

    pub fn soil_model(&self) -> Result<SoilModel, ConstitutiveError> {
        let s = &self.soil;
        let missing = |name: &'static str| ConstitutiveError::InvalidParameter {
            name,
            value: f64::NAN,
            reason: "required by this soil model",
        };
        let kind = match s.model.to_ascii_lowercase().as_str() {
            "vgm" | "van-genuchten" | "van_genuchten" => SoilKind::VanGenuchtenMualem,
            "gardner" => SoilKind::Gardner,
            "brooks-corey" | "brooks_corey" => SoilKind::BrooksCorey { b: s.b.ok_or_else(|| missing("b"))? },
            "haverkamp" => SoilKind::Haverkamp {
                a: s.a.ok_or_else(|| missing("a"))?,
                beta: s.beta.ok_or_else(|| missing("beta"))?,
                gamma: s.gamma.ok_or_else(|| missing("gamma"))?,
            },
            _ => {
                return Err(ConstitutiveError::InvalidParameter {
                    name: "model",
                    value: f64::NAN,
                    reason: "unknown soil model",
                })
            }
        };
        let model = SoilModel::new(kind, s.ks, s.alpha, s.n, s.theta_s, s.theta_r)?;
        match s.core_exponent {
            Some(p) => model.with_core(SaturationCore::Power { exponent: p }),
            None => Ok(model),
        }
    }

    pub fn scheme_config(&self) -> Result<SchemeConfig, String> {
        let s = &self.scheme;
        let scheme = Scheme::parse(&s.kind).ok_or_else(|| format!("unknown scheme `{}`", s.kind))?;
        let cfg = SchemeConfig {
            scheme,
            tau: s.tau,
            t_final: s.t_final,
            newton_tol: s.newton_tol,
            newton_max_iter: s.newton_max_iter,
            adaptive: s.adaptive,
            adaptive_safety: s.adaptive_safety,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    /// Dirichlet sides with their data, in mesh labels. Interval meshes use
    /// `bottom` (z = 0) and `top` (z = H), both mandatory.
    pub fn dirichlet_sides(&self) -> Result<BTreeMap<Side, DirichletValue>, String> {
        let mut out = BTreeMap::new();
        for (name, v) in &self.boundary.dirichlet {
            let side = Side::parse(name).ok_or_else(|| format!("unknown side `{name}`"))?;
            if let DirichletValue::Keyword(k) = v {
                if k != "initial" {
                    return Err(format!("side `{name}`: expected a number or \"initial\", got \"{k}\""));
                }
            }
            out.insert(side, v.clone());
        }
        let mut neumann = Vec::new();
        for name in &self.boundary.neumann {
            let side = Side::parse(name).ok_or_else(|| format!("unknown side `{name}`"))?;
            if out.contains_key(&side) {
                return Err(format!("side `{name}` is both Dirichlet and Neumann"));
            }
            neumann.push(side);
        }
        match self.geometry {
            GeometryConfig::Rect { .. } => {
                if out.is_empty() {
                    return Err("at least one side must carry Dirichlet data".into());
                }
                for side in Side::ALL {
                    if !out.contains_key(&side) && !neumann.contains(&side) {
                        return Err(format!("side `{}` is neither Dirichlet nor Neumann", side.name()));
                    }
                }
            }
            GeometryConfig::Interval { .. } => {
                if !neumann.is_empty() || out.len() != 2 || !out.contains_key(&Side::Bottom) || !out.contains_key(&Side::Top) {
                    return Err("interval geometry takes Dirichlet data on exactly `bottom` and `top`".into());
                }
                let bottom = out.remove(&Side::Bottom).expect("checked");
                let top = out.remove(&Side::Top).expect("checked");
                out.insert(Side::Left, bottom);
                out.insert(Side::Right, top);
            }
        }
        Ok(out)
    }

    /// Initial saturation at height `z`.
    pub fn initial_theta(&self, z: f64) -> Option<f64> {
        let init = &self.initial;
        let mut theta = init.background;
        if let Some(lin) = init.linear {
            let h = self.geometry.height();
            theta = Some(lin.bottom + (lin.top - lin.bottom) * z / h);
        }
        for r in &init.regions {
            if ZInterval::parse(&r.z).is_some_and(|iv| iv.contains(z)) {
                theta = Some(r.theta);
            }
        }
        theta
    }
}
