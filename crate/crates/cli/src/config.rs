//! Run configuration: embedded defaults, TOML file, `--set` overrides, flags.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use hscale::harness::{RateStudyConfig, Rule, StudyProblem};
use hscale::{
    DiscrepancyOptions, ParamIdReference, ParamIdSpec, PenaltyScale, SmoothingReference, SmoothingSpec,
    StabilityVariant,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: u64,
    pub smoothing: SmoothingSection,
    pub param_id: ParamIdSection,
    pub tables: TablesSection,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            smoothing: SmoothingSection::default(),
            param_id: ParamIdSection::default(),
            tables: TablesSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingSection {
    pub rule: Rule,
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub norms: Vec<f64>,
    pub delta0: f64,
    pub j_min: u32,
    pub j_max: u32,
    pub reps: u32,
    pub tau: f64,
    pub max_n: usize,
    pub max_wavenumber: usize,
    pub variant: StabilityVariant,
}

impl Default for SmoothingSection {
    fn default() -> Self {
        let d = DiscrepancyOptions::default();
        Self {
            rule: Rule::Apriori,
            s: vec![0.0, 1.0],
            u: vec![0.5, 1.0, 1.5],
            norms: vec![0.0, 1.0],
            delta0: 1.0,
            j_min: 3,
            j_max: 14,
            reps: 5,
            tau: d.tau,
            max_n: d.max_n,
            max_wavenumber: hscale::smoothing::DEFAULT_MAX_WAVENUMBER,
            variant: StabilityVariant::LipschitzA1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamIdSection {
    pub rule: Rule,
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub norms: Vec<f64>,
    pub delta0: f64,
    pub j_min: u32,
    pub j_max: u32,
    pub reps: u32,
    pub tau: f64,
    pub max_n: usize,
    pub grid_n: usize,
    pub t_end: f64,
    pub u0: f64,
    pub gauss_points: usize,
    pub penalty_scale: PenaltyScale,
}

impl Default for ParamIdSection {
    fn default() -> Self {
        let d = DiscrepancyOptions::default();
        let spec = ParamIdSpec::default();
        Self {
            rule: Rule::Discrepancy,
            s: vec![1.0, 2.0],
            u: vec![1.5, 2.0, 2.5],
            norms: vec![0.0, 1.0],
            delta0: 1.0,
            j_min: 3,
            j_max: 9,
            reps: 5,
            tau: d.tau,
            max_n: d.max_n,
            grid_n: spec.grid_n,
            t_end: spec.t_end,
            u0: spec.u0,
            gauss_points: spec.gauss_points,
            penalty_scale: spec.penalty_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TablesSection {
    /// A `results.json` written by a study subcommand.
    pub input: String,
    /// `csv`, `markdown` or `json`.
    pub format: String,
}

impl Default for TablesSection {
    fn default() -> Self {
        Self {
            input: "out/results.json".into(),
            format: "markdown".into(),
        }
    }
}

/// Study-specific flags; `None` leaves the file value in place.
#[derive(Debug, Default, Clone)]
pub struct StudyFlags {
    pub rule: Option<Rule>,
    pub s: Option<Vec<f64>>,
    pub u: Option<Vec<f64>>,
    pub norms: Option<Vec<f64>>,
    pub deltas: Option<(u32, u32)>,
    pub reps: Option<u32>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        // toml's error message carries the line and column.
        toml::from_str(text).map_err(|e| anyhow!("{e}"))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Applies `key=value` overrides with dotted keys, e.g. `param_id.grid_n=100`.
    /// Values are parsed as TOML; bare words fall back to strings.
    pub fn apply_overrides(self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut root = toml::Value::try_from(&self)?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects key=value, got `{item}`"))?;
            let value = parse_value(raw.trim());
            let parts: Vec<&str> = key.trim().split('.').collect();
            let (last, sections) = parts.split_last().expect("split yields at least one part");
            let mut node = &mut root;
            for part in sections {
                node = node
                    .get_mut(*part)
                    .filter(|v| v.is_table())
                    .ok_or_else(|| anyhow!("--set {key}: unknown section `{part}`"))?;
            }
            let table = node
                .as_table_mut()
                .ok_or_else(|| anyhow!("--set {key}: `{last}` is not inside a table"))?;
            if !table.contains_key(*last) {
                bail!("--set {key}: unknown key `{last}`");
            }
            table.insert((*last).to_string(), value);
        }
        root.try_into().map_err(|e: toml::de::Error| anyhow!("--set: {e}"))
    }
}

fn parse_value(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Probe {
        v: toml::Value,
    }
    match toml::from_str::<Probe>(&format!("v = {raw}")) {
        Ok(p) => p.v,
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl SmoothingSection {
    pub fn apply(&mut self, f: &StudyFlags) {
        apply_common(
            f,
            &mut self.rule,
            &mut self.s,
            &mut self.u,
            &mut self.norms,
            &mut self.j_min,
            &mut self.j_max,
            &mut self.reps,
        );
    }

    pub fn studies(&self, seed: u64) -> Result<Vec<RateStudyConfig>> {
        let mut out = Vec::new();
        for &s in &self.s {
            for &u in &self.u {
                let reference = SmoothingReference::from_u(u).ok_or_else(|| {
                    anyhow!("no smoothing reference solution with regularity u = {u} (use 0.5, 1 or 1.5)")
                })?;
                let spec = SmoothingSpec {
                    max_wavenumber: self.max_wavenumber,
                    s,
                    variant: self.variant,
                };
                let problem = StudyProblem::Smoothing { spec, reference };
                out.push(self.fill(RateStudyConfig::new(problem, self.rule), seed));
            }
        }
        Ok(out)
    }

    fn fill(&self, mut c: RateStudyConfig, seed: u64) -> RateStudyConfig {
        c.report_norms = self.norms.clone();
        c.delta0 = self.delta0;
        c.j_min = self.j_min;
        c.j_max = self.j_max;
        c.repetitions = self.reps;
        c.seed = seed;
        c.discrepancy = DiscrepancyOptions {
            tau: self.tau,
            max_n: self.max_n,
        };
        c
    }
}

impl ParamIdSection {
    pub fn apply(&mut self, f: &StudyFlags) {
        apply_common(
            f,
            &mut self.rule,
            &mut self.s,
            &mut self.u,
            &mut self.norms,
            &mut self.j_min,
            &mut self.j_max,
            &mut self.reps,
        );
    }

    pub fn studies(&self, seed: u64) -> Result<Vec<RateStudyConfig>> {
        let mut out = Vec::new();
        for &s in &self.s {
            for &u in &self.u {
                let reference = ParamIdReference::from_u(u).ok_or_else(|| {
                    anyhow!("no param-id reference solution with regularity u = {u} (use 1.5, 2 or 2.5)")
                })?;
                let spec = ParamIdSpec {
                    t_end: self.t_end,
                    u0: self.u0,
                    grid_n: self.grid_n,
                    s,
                    gauss_points: self.gauss_points,
                    penalty_scale: self.penalty_scale,
                };
                let mut c = RateStudyConfig::new(StudyProblem::ParamId { spec, reference }, self.rule);
                c.report_norms = self.norms.clone();
                c.delta0 = self.delta0;
                c.j_min = self.j_min;
                c.j_max = self.j_max;
                c.repetitions = self.reps;
                c.seed = seed;
                c.discrepancy = DiscrepancyOptions {
                    tau: self.tau,
                    max_n: self.max_n,
                };
                out.push(c);
            }
        }
        Ok(out)
    }
}

#[allow(clippy::too_many_arguments)]
fn apply_common(
    f: &StudyFlags,
    rule: &mut Rule,
    s: &mut Vec<f64>,
    u: &mut Vec<f64>,
    norms: &mut Vec<f64>,
    j_min: &mut u32,
    j_max: &mut u32,
    reps: &mut u32,
) {
    if let Some(r) = f.rule {
        *rule = r;
    }
    if let Some(v) = &f.s {
        *s = v.clone();
    }
    if let Some(v) = &f.u {
        *u = v.clone();
    }
    if let Some(v) = &f.norms {
        *norms = v.clone();
    }
    if let Some((a, b)) = f.deltas {
        *j_min = a;
        *j_max = b;
    }
    if let Some(r) = f.reps {
        *reps = r;
    }
}

/// Parses `j0..j1` (inclusive).
pub fn parse_ladder(s: &str) -> std::result::Result<(u32, u32), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected j0..j1, got `{s}`"))?;
    let a: u32 = a.trim().parse().map_err(|e| format!("bad j0 `{a}`: {e}"))?;
    let b: u32 = b
        .trim_start_matches('=')
        .trim()
        .parse()
        .map_err(|e| format!("bad j1 `{b}`: {e}"))?;
    if b < a {
        return Err(format!("empty ladder {a}..{b}"));
    }
    Ok((a, b))
}

/// Parses a comma-separated list of reals; `1/2` style fractions are accepted.
pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            match t.split_once('/') {
                Some((n, d)) => {
                    let n: f64 = n.trim().parse().map_err(|_| format!("bad number `{t}`"))?;
                    let d: f64 = d.trim().parse().map_err(|_| format!("bad number `{t}`"))?;
                    Ok(n / d)
                }
                None => t.parse().map_err(|_| format!("bad number `{t}`")),
            }
        })
        .collect()
}
