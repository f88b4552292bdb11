//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comment
//! [operator]
//! dimension = 3
//! lambda = 1
//! a11 = 1
//! F1 = -x1
//! H0star = -3
//! [grid]
//! radii = 2, 3, 4
//! h = 0.25
//! dt = 0.05
//! [times]
//! values = 0.25, 0.5
//! [sources]
//! points = 0 0 0; 0.5 0 0
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::operators::{halton_ball, OperatorSpec, DEFAULT_SAMPLE_COUNT};
use crate::pdekernel::{default_t_min, step_count};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("[{section}] {message}")]
    Invalid { section: &'static str, message: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(section: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { section, message: message.into() }
}

/// Checks a run can execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Nash,
    Mass,
    Positivity,
    ChapmanKolmogorov,
    Duality,
    L2,
    Gns,
    Zeta,
    Cutoff,
    Holder,
    Monotonicity,
}

impl CheckKind {
    pub const ALL: [CheckKind; 11] = [
        CheckKind::Nash,
        CheckKind::Mass,
        CheckKind::Positivity,
        CheckKind::ChapmanKolmogorov,
        CheckKind::Duality,
        CheckKind::L2,
        CheckKind::Gns,
        CheckKind::Zeta,
        CheckKind::Cutoff,
        CheckKind::Holder,
        CheckKind::Monotonicity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Nash => "nash",
            CheckKind::Mass => "mass",
            CheckKind::Positivity => "positivity",
            CheckKind::ChapmanKolmogorov => "chapman_kolmogorov",
            CheckKind::Duality => "duality",
            CheckKind::L2 => "l2",
            CheckKind::Gns => "gns",
            CheckKind::Zeta => "zeta",
            CheckKind::Cutoff => "cutoff",
            CheckKind::Holder => "holder",
            CheckKind::Monotonicity => "monotonicity",
        }
    }
}

impl FromStr for CheckKind {
    type Err = String;
    fn from_str(s: &str) -> Result<CheckKind, String> {
        CheckKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown check '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<OutputFormat, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OperatorBlock {
    pub dim: usize,
    pub lambda: f64,
    /// Expressions keyed `aij`, `Fi`, `H`.
    pub expressions: BTreeMap<String, String>,
    pub h0: Option<f64>,
    pub h0_star: Option<f64>,
    pub check_radius: f64,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct GridBlock {
    pub radii: Vec<f64>,
    pub h: f64,
    pub dt: f64,
    pub t_min: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ChecksBlock {
    pub enabled: Vec<CheckKind>,
    pub ck_pairs: Vec<(f64, f64)>,
    pub cutoff_m: Option<u32>,
    pub gns_radius: f64,
    pub nash_tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct McBlock {
    pub samples: usize,
    pub dt: f64,
    pub seed: u64,
    pub bandwidth: Option<f64>,
    pub r_trunc: f64,
    pub x0: Vec<f64>,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub operator: OperatorBlock,
    pub grid: GridBlock,
    pub times: Vec<f64>,
    pub sources: Vec<Vec<f64>>,
    pub checks: ChecksBlock,
    pub mc: Option<McBlock>,
    pub output: OutputBlock,
}

type Section = BTreeMap<String, (usize, String)>;

const SECTIONS: [&str; 7] = ["operator", "grid", "times", "sources", "checks", "mc", "output"];

fn split_sections(text: &str) -> Result<BTreeMap<&'static str, Section>, ConfigError> {
    let mut sections: BTreeMap<&'static str, Section> = BTreeMap::new();
    let mut current: Option<&'static str> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                message: "section header must end with ']'".into(),
            })?;
            let name = SECTIONS.iter().find(|s| **s == name.trim()).ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                message: format!("unknown section [{}]", name.trim()),
            })?;
            if sections.contains_key(name) {
                return Err(ConfigError::Syntax { line: line_no, message: format!("section [{name}] repeated") });
            }
            sections.insert(name, Section::new());
            current = Some(name);
            continue;
        }
        let section = current.ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            message: "key outside of any section".into(),
        })?;
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = key.trim().to_string();
        let entry = sections.get_mut(section).expect("section inserted");
        if entry.insert(key.clone(), (line_no, value.trim().to_string())).is_some() {
            return Err(ConfigError::Syntax { line: line_no, message: format!("key '{key}' repeated") });
        }
    }
    Ok(sections)
}

struct Reader {
    name: &'static str,
    entries: Section,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::Syntax { line, message: format!("cannot parse {key} = '{v}'") }),
        }
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Result<T, ConfigError> {
        self.parse(key)?.ok_or_else(|| invalid(self.name, format!("missing key '{key}'")))
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => parse_list(&v)
                .map(Some)
                .map_err(|message| ConfigError::Syntax { line, message: format!("{key}: {message}") }),
        }
    }

    fn points(&mut self, key: &str) -> Result<Option<Vec<Vec<f64>>>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(';')
                .map(|p| {
                    p.split_whitespace()
                        .map(|c| c.parse::<f64>().map_err(|_| format!("bad number '{c}'")))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|message| ConfigError::Syntax { line, message: format!("{key}: {message}") }),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => {
                Err(ConfigError::Syntax { line, message: format!("unknown key '{key}' in [{}]", self.name) })
            }
        }
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    v.split([',', ' '])
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad number '{s}'")))
        .collect()
}

fn is_expression_key(key: &str, dim: usize) -> bool {
    if key == "H" {
        return true;
    }
    let digit = |c: char| c.to_digit(10).map(|d| d as usize);
    let chars: Vec<char> = key.chars().collect();
    match chars.as_slice() {
        ['F', i] => digit(*i).is_some_and(|i| (1..=dim).contains(&i)),
        ['a', i, j] => {
            digit(*i).is_some_and(|i| (1..=dim).contains(&i)) && digit(*j).is_some_and(|j| (1..=dim).contains(&j))
        }
        _ => false,
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = RunConfig::parse(&text)?;
        if cfg.operator.label.is_empty() {
            cfg.operator.label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut sections = split_sections(text)?;
        let mut reader = |name: &'static str| Reader { name, entries: sections.remove(name).unwrap_or_default() };

        let mut op = reader("operator");
        let dim: usize = op.required("dimension")?;
        if !(3..=8).contains(&dim) {
            return Err(invalid("operator", format!("dimension {dim} outside 3..=8")));
        }
        let lambda: f64 = op.required("lambda")?;
        let h0 = op.parse("H0")?;
        let h0_star = op.parse("H0star")?;
        let check_radius = op.parse("check_radius")?.unwrap_or(4.0);
        let label = op.take("label").map(|(_, v)| v).unwrap_or_default();
        let keys: Vec<String> = op.entries.keys().cloned().collect();
        let mut expressions = BTreeMap::new();
        for key in keys {
            if is_expression_key(&key, dim) {
                let (_, v) = op.take(&key).expect("key listed");
                expressions.insert(key, v);
            }
        }
        op.finish()?;
        let operator = OperatorBlock { dim, lambda, expressions, h0, h0_star, check_radius, label };

        let mut g = reader("grid");
        let radii = g.list("radii")?.ok_or_else(|| invalid("grid", "missing key 'radii'"))?;
        let grid = GridBlock { radii, h: g.required("h")?, dt: g.required("dt")?, t_min: g.parse("t_min")? };
        g.finish()?;

        let mut t = reader("times");
        let times = t.list("values")?.ok_or_else(|| invalid("times", "missing key 'values'"))?;
        t.finish()?;

        let mut s = reader("sources");
        let sources = s.points("points")?.unwrap_or_else(|| vec![vec![0.0; dim]]);
        s.finish()?;

        let mut c = reader("checks");
        let enabled = match c.take("enabled") {
            None => CheckKind::ALL.to_vec(),
            Some((line, v)) => v
                .split(',')
                .map(|n| n.trim())
                .filter(|n| !n.is_empty())
                .map(|n| n.parse::<CheckKind>().map_err(|message| ConfigError::Syntax { line, message }))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let ck_pairs = match c.points("ck_pairs")? {
            None => Vec::new(),
            Some(pairs) => pairs
                .into_iter()
                .map(|p| match p.as_slice() {
                    [a, b] => Ok((*a, *b)),
                    _ => Err(invalid("checks", "ck_pairs entries need exactly two times")),
                })
                .collect::<Result<_, _>>()?,
        };
        let checks = ChecksBlock {
            enabled,
            ck_pairs,
            cutoff_m: c.parse("cutoff_m")?,
            gns_radius: c.parse("gns_radius")?.unwrap_or(8.0),
            nash_tolerance: c.parse("nash_tolerance")?.unwrap_or(0.1),
        };
        c.finish()?;

        let mut m = reader("mc");
        let mc = if m.entries.is_empty() {
            None
        } else {
            let block = McBlock {
                samples: m.required("samples")?,
                dt: m.required("dt")?,
                seed: m.parse("seed")?.unwrap_or(0),
                bandwidth: m.parse("bandwidth")?,
                r_trunc: m.parse("r_trunc")?.unwrap_or(f64::INFINITY),
                x0: m.list("x0")?.unwrap_or_else(|| vec![0.0; dim]),
                time: m.required("time")?,
            };
            m.finish()?;
            Some(block)
        };

        let mut o = reader("output");
        let output = OutputBlock {
            dir: o.take("dir").map(|(_, v)| PathBuf::from(v)).unwrap_or_else(|| PathBuf::from("out")),
            format: o.parse("format")?.unwrap_or(OutputFormat::Json),
        };
        o.finish()?;

        let cfg = RunConfig { operator, grid, times, sources, checks, mc, output };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn t_min(&self) -> f64 {
        self.grid.t_min.unwrap_or_else(|| default_t_min(self.grid.h, self.operator.lambda))
    }

    pub fn largest_radius(&self) -> f64 {
        *self.grid.radii.last().expect("validated non-empty")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if !(self.operator.lambda > 0.0) {
            return Err(invalid("operator", "lambda must be positive"));
        }
        if g.radii.is_empty() {
            return Err(invalid("grid", "radii list is empty"));
        }
        if g.radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grid", format!("radii must be strictly increasing, got {:?}", g.radii)));
        }
        if !(g.h > 0.0 && g.dt > 0.0) {
            return Err(invalid("grid", "h and dt must be positive"));
        }
        if self.times.is_empty() || self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("times", "times must be a non-empty increasing list"));
        }
        let t_min = self.t_min();
        for &t in &self.times {
            if t < t_min * (1.0 - 1e-12) {
                return Err(invalid("times", format!("time {t} is below t_min = {t_min}")));
            }
            step_count(t, g.dt).map_err(|_| invalid("times", format!("time {t} is not a multiple of dt = {}", g.dt)))?;
        }
        for p in &self.sources {
            if p.len() != self.operator.dim {
                return Err(invalid("sources", format!("point {p:?} does not have {} coordinates", self.operator.dim)));
            }
            let r2: f64 = p.iter().map(|v| v * v).sum();
            if r2 >= g.radii[0] * g.radii[0] {
                return Err(invalid("sources", format!("point {p:?} lies outside the smallest ball")));
            }
            for c in p {
                let k = (c / g.h).round();
                if (k * g.h - c).abs() > 1e-9 * g.h.max(c.abs()) {
                    return Err(invalid("sources", format!("point {p:?} is not a lattice node for h = {}", g.h)));
                }
            }
        }
        for &(a, b) in &self.checks.ck_pairs {
            for t in [a, b, a + b] {
                step_count(t, g.dt).map_err(|_| {
                    invalid("checks", format!("ck pair ({a}, {b}) is incompatible with dt = {}", g.dt))
                })?;
            }
        }
        if let Some(m) = self.checks.cutoff_m {
            if m == 0 {
                return Err(invalid("checks", "cutoff_m must be at least 1"));
            }
        }
        if let Some(mc) = &self.mc {
            if mc.x0.len() != self.operator.dim {
                return Err(invalid("mc", "x0 has the wrong dimension"));
            }
            if mc.samples < 1000 {
                return Err(invalid("mc", "samples must be at least 1000"));
            }
        }
        Ok(())
    }

    /// Operator spec with declared floors, or floors estimated on the check sample.
    pub fn operator_spec(&self) -> Result<OperatorSpec, crate::operators::OperatorError> {
        let o = &self.operator;
        let expr = |key: String, default: &str| o.expressions.get(&key).cloned().unwrap_or_else(|| default.into());
        let mut rows = Vec::with_capacity(o.dim);
        for i in 1..=o.dim {
            let mut row = Vec::with_capacity(o.dim);
            for j in 1..=o.dim {
                let own = o.expressions.get(&format!("a{i}{j}"));
                let mirror = o.expressions.get(&format!("a{j}{i}"));
                let v = match (own, mirror) {
                    (Some(v), _) => v.clone(),
                    (None, Some(v)) => v.clone(),
                    (None, None) if i == j => "1".to_string(),
                    (None, None) => "0".to_string(),
                };
                row.push(v);
            }
            rows.push(row);
        }
        let rows_ref: Vec<Vec<&str>> = rows.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
        let drift: Vec<String> = (1..=o.dim).map(|i| expr(format!("F{i}"), "0")).collect();
        let drift_ref: Vec<&str> = drift.iter().map(String::as_str).collect();
        let spec = OperatorSpec::from_strings(o.dim, o.lambda, &rows_ref, &drift_ref, &expr("H".into(), "0"))?
            .with_label(o.label.clone());
        match (o.h0, o.h0_star) {
            (Some(a), Some(b)) => Ok(spec.with_declared_floors(a, b)),
            _ => {
                let sample = halton_ball(DEFAULT_SAMPLE_COUNT, o.dim, o.check_radius);
                let est = crate::operators::estimate_floors(&spec, &sample)?;
                let mut floors = est.floors();
                if let Some(a) = o.h0 {
                    floors.h0 = crate::operators::Floor::new(a, crate::operators::FloorSource::Declared, "H0");
                }
                if let Some(b) = o.h0_star {
                    floors.h0_star =
                        crate::operators::Floor::new(b, crate::operators::FloorSource::Declared, "H0star");
                }
                log::warn!("floors estimated by sampling ({floors:?}); results are not certified");
                Ok(spec.with_floors(floors))
            }
        }
    }
}
