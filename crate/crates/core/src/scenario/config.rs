//! Line-oriented scenario files.
//!
//! ```text
//! name = ds-example
//! seed = 7
//! paths = 10000
//!
//! [process]
//! model = ds-example
//!
//! [grid]
//! horizon = 1
//! steps = 1024
//!
//! [rules]
//! t0 = at(0)
//!
//! [task star-scan]
//! probe = tau: t0; event: all; horizon: 1; eps: 0.5
//! ```
//!
//! `#` starts a comment. Keys inside `[rules]` and `[events]` are names;
//! everything else is a fixed vocabulary checked here.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::lattice::TreeSpec;
use crate::process::ProcessSpec;
use crate::scalar::parse_scalar;
use crate::Rational;

/// `key = value` on a given line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Defect,
    StarScan,
    ArbSearch,
    Extract,
    Reduce,
    Oracle,
    Invariance,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        Self::Defect,
        Self::StarScan,
        Self::ArbSearch,
        Self::Extract,
        Self::Reduce,
        Self::Oracle,
        Self::Invariance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Defect => "defect",
            Self::StarScan => "star-scan",
            Self::ArbSearch => "arb-search",
            Self::Extract => "extract",
            Self::Reduce => "reduce",
            Self::Oracle => "oracle",
            Self::Invariance => "invariance",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Keys accepted inside the task section.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Self::Defect => &["label", "times", "z_strict", "z_consistent", "pair"],
            Self::StarScan => &["label", "probe", "family", "min_count"],
            Self::ArbSearch => &["label", "candidate", "family", "shortsale", "leg"],
            Self::Extract => &["label", "tau", "event", "horizon", "epsilon", "entry", "exit", "levels"],
            Self::Reduce => &["label", "from", "leg"],
            Self::Oracle => &["label", "shortsale", "alphabet", "budget", "pairwise"],
            Self::Invariance => &["label", "check", "map", "min_count"],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl TaskSpec {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn all(&self, key: &str) -> impl Iterator<Item = &Entry> + '_ {
        let key = key.to_string();
        self.entries.iter().filter(move |e| e.key == key)
    }

    pub fn label(&self, index: usize) -> String {
        self.get("label")
            .map_or_else(|| format!("{}-{}", self.kind.as_str(), index + 1), |e| e.value.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub horizon: f64,
    pub steps: usize,
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Process { spec: ProcessSpec<f64>, grid: GridSpec },
    Lattice { tree: TreeSpec<Rational> },
}

/// A parsed scenario. Rule, event and task expressions are kept as text and
/// typed when the run starts, since lattice scenarios use exact numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub paths: usize,
    pub out: Option<PathBuf>,
    pub save_paths: usize,
    pub source: Source,
    pub rules: Vec<Entry>,
    pub events: Vec<Entry>,
    pub tasks: Vec<TaskSpec>,
}

/// Names and parameters of the simulated models, for `list-models`.
pub const MODELS: &[(&str, &str)] = &[
    ("brownian", "x0, sigma"),
    ("gbm", "x0, sigma (driftless geometric Brownian motion)"),
    ("cev", "x0, a, b, rho"),
    ("bessel", "x0, delta (> 2)"),
    ("inverse-bessel3", "x0"),
    ("ds-example", "none (starts at 1 on [0, 1])"),
    ("abs-bm", "n (exp(-|W|^(1/(2n+1))))"),
];

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

struct Section {
    header: String,
    line: usize,
    entries: Vec<Entry>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let mut top = Vec::new();
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let header = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, "section header must end with ']'"))?;
                sections.push(Section {
                    header: header.trim().to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected 'key = value', found '{content}'")))?;
            let entry = Entry {
                key: k.trim().to_string(),
                value: v.trim().to_string(),
                line,
            };
            if entry.key.is_empty() {
                return Err(err(line, "empty key"));
            }
            match sections.last_mut() {
                Some(s) => s.entries.push(entry),
                None => top.push(entry),
            }
        }

        let mut name = None;
        let mut seed = None;
        let mut paths = 10_000usize;
        let mut out = None;
        let mut save_paths = 0usize;
        for e in &top {
            match e.key.as_str() {
                "name" => name = Some(e.value.clone()),
                "seed" => seed = Some(parse_int::<u64>(e)?),
                "paths" => paths = parse_int(e)?,
                "out" => out = Some(PathBuf::from(&e.value)),
                "save_paths" => save_paths = parse_int(e)?,
                other => return Err(err(e.line, format!("unknown top-level key '{other}'"))),
            }
        }
        let name = name.ok_or_else(|| err(1, "missing 'name'"))?;
        let seed = seed.ok_or_else(|| err(1, "missing 'seed'"))?;
        if paths == 0 {
            return Err(err(1, "'paths' must be at least 1"));
        }

        let mut process = None;
        let mut grid = None;
        let mut lattice = None;
        let mut rules = Vec::new();
        let mut events = Vec::new();
        let mut tasks = Vec::new();
        for s in sections {
            let mut words = s.header.split_whitespace();
            match (words.next(), words.next(), words.next()) {
                (Some("process"), None, _) => {
                    if process.is_some() {
                        return Err(err(s.line, "duplicate [process] section"));
                    }
                    process = Some(parse_process(&s)?);
                }
                (Some("grid"), None, _) => grid = Some(parse_grid(&s)?),
                (Some("lattice"), None, _) => {
                    if lattice.is_some() {
                        return Err(err(s.line, "duplicate [lattice] section"));
                    }
                    let e = single(&s, "tree")?;
                    lattice = Some(TreeSpec::parse(&e.value).map_err(|x| err(e.line, x.to_string()))?);
                }
                (Some("rules"), None, _) => rules.extend(s.entries),
                (Some("events"), None, _) => events.extend(s.entries),
                (Some("task"), Some(kind), None) => {
                    let kind = TaskKind::parse(kind).ok_or_else(|| {
                        let known: Vec<&str> = TaskKind::ALL.iter().map(|k| k.as_str()).collect();
                        err(
                            s.line,
                            format!("unknown task '{kind}'; expected one of {}", known.join(", ")),
                        )
                    })?;
                    for e in &s.entries {
                        if !kind.keys().contains(&e.key.as_str()) {
                            return Err(err(
                                e.line,
                                format!("unknown key '{}' in task {}", e.key, kind.as_str()),
                            ));
                        }
                    }
                    tasks.push(TaskSpec {
                        kind,
                        line: s.line,
                        entries: s.entries,
                    });
                }
                _ => return Err(err(s.line, format!("unknown section [{}]", s.header))),
            }
        }
        for e in rules.iter().chain(&events) {
            if !e.key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                || !e.key.starts_with(|c: char| c.is_ascii_alphabetic())
            {
                return Err(err(e.line, format!("'{}' is not a valid name", e.key)));
            }
        }
        let source = match (process, lattice) {
            (Some(spec), None) => {
                let grid = grid.ok_or_else(|| err(1, "a [process] scenario needs a [grid] section"))?;
                Source::Process { spec, grid }
            }
            (None, Some(tree)) => {
                if grid.is_some() {
                    return Err(err(
                        1,
                        "a [lattice] scenario takes its grid from the tree; remove [grid]",
                    ));
                }
                Source::Lattice { tree }
            }
            (Some(_), Some(_)) => return Err(err(1, "declare either [process] or [lattice], not both")),
            (None, None) => return Err(err(1, "missing [process] or [lattice] section")),
        };
        if tasks.is_empty() {
            return Err(err(1, "no [task ...] sections"));
        }
        Ok(Self {
            name,
            seed,
            paths,
            out,
            save_paths,
            source,
            rules,
            events,
            tasks,
        })
    }

    /// Canonical text of the scenario with overrides applied.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "paths = {}", self.paths);
        if let Some(out) = &self.out {
            let _ = writeln!(s, "out = {}", out.display());
        }
        if self.save_paths > 0 {
            let _ = writeln!(s, "save_paths = {}", self.save_paths);
        }
        match &self.source {
            Source::Process { spec, grid } => {
                let _ = writeln!(s, "\n[process]");
                for (k, v) in process_fields(spec) {
                    let _ = writeln!(s, "{k} = {v}");
                }
                let _ = writeln!(
                    s,
                    "\n[grid]\nhorizon = {}\nsteps = {}\nsubsteps = {}",
                    grid.horizon, grid.steps, grid.substeps
                );
            }
            Source::Lattice { tree } => {
                let _ = writeln!(s, "\n[lattice]\ntree = {tree}");
            }
        }
        for (title, entries) in [("rules", &self.rules), ("events", &self.events)] {
            if !entries.is_empty() {
                let _ = writeln!(s, "\n[{title}]");
                for e in entries {
                    let _ = writeln!(s, "{} = {}", e.key, e.value);
                }
            }
        }
        for t in &self.tasks {
            let _ = writeln!(s, "\n[task {}]", t.kind.as_str());
            for e in &t.entries {
                let _ = writeln!(s, "{} = {}", e.key, e.value);
            }
        }
        s
    }
}

/// `(key, value)` pairs describing a process, as written in a scenario file.
pub fn process_fields(spec: &ProcessSpec<f64>) -> Vec<(&'static str, String)> {
    let mut v = Vec::new();
    match *spec {
        ProcessSpec::BrownianMotion { x0, sigma } => {
            v.push(("model", "brownian".to_string()));
            v.push(("x0", x0.to_string()));
            v.push(("sigma", sigma.to_string()));
        }
        ProcessSpec::DriftlessGbm { x0, sigma } => {
            v.push(("model", "gbm".to_string()));
            v.push(("x0", x0.to_string()));
            v.push(("sigma", sigma.to_string()));
        }
        ProcessSpec::Cev { x0, a, b, rho } => {
            v.push(("model", "cev".to_string()));
            v.push(("x0", x0.to_string()));
            v.push(("a", a.to_string()));
            v.push(("b", b.to_string()));
            v.push(("rho", rho.to_string()));
        }
        ProcessSpec::Bessel { x0, delta } => {
            v.push(("model", "bessel".to_string()));
            v.push(("x0", x0.to_string()));
            v.push(("delta", delta.to_string()));
        }
        ProcessSpec::InverseBessel3 { x0 } => {
            v.push(("model", "inverse-bessel3".to_string()));
            v.push(("x0", x0.to_string()));
        }
        ProcessSpec::DsExample => v.push(("model", "ds-example".to_string())),
        ProcessSpec::AbsBmTransform { n } => {
            v.push(("model", "abs-bm".to_string()));
            v.push(("n", n.to_string()));
        }
    }
    v
}

fn parse_int<N: std::str::FromStr>(e: &Entry) -> Result<N> {
    e.value.parse().map_err(|_| {
        err(
            e.line,
            format!("'{}' expects a non-negative integer, got '{}'", e.key, e.value),
        )
    })
}

fn parse_real(e: &Entry) -> Result<f64> {
    parse_scalar::<f64>(&e.value).ok_or_else(|| err(e.line, format!("'{}' expects a number, got '{}'", e.key, e.value)))
}

fn single<'a>(s: &'a Section, key: &str) -> Result<&'a Entry> {
    for e in &s.entries {
        if e.key != key {
            return Err(err(e.line, format!("unknown key '{}' in [{}]", e.key, s.header)));
        }
    }
    s.entries
        .iter()
        .find(|e| e.key == key)
        .ok_or_else(|| err(s.line, format!("[{}] needs '{key}'", s.header)))
}

fn parse_process(s: &Section) -> Result<ProcessSpec<f64>> {
    let model = s
        .entries
        .iter()
        .find(|e| e.key == "model")
        .ok_or_else(|| err(s.line, "[process] needs 'model'"))?;
    let allowed: &[&str] = match model.value.as_str() {
        "brownian" | "gbm" => &["x0", "sigma"],
        "cev" => &["x0", "a", "b", "rho"],
        "bessel" => &["x0", "delta"],
        "inverse-bessel3" => &["x0"],
        "ds-example" => &[],
        "abs-bm" => &["n"],
        other => {
            let known: Vec<&str> = MODELS.iter().map(|m| m.0).collect();
            return Err(err(
                model.line,
                format!("unknown model '{other}'; expected one of {}", known.join(", ")),
            ));
        }
    };
    let get = |key: &str, default: Option<f64>| -> Result<f64> {
        match s.entries.iter().find(|e| e.key == key) {
            Some(e) => parse_real(e),
            None => default.ok_or_else(|| err(s.line, format!("model '{}' needs '{key}'", model.value))),
        }
    };
    for e in &s.entries {
        if e.key != "model" && !allowed.contains(&e.key.as_str()) {
            return Err(err(
                e.line,
                format!("model '{}' has no parameter '{}'", model.value, e.key),
            ));
        }
    }
    let spec = match model.value.as_str() {
        "brownian" => ProcessSpec::BrownianMotion {
            x0: get("x0", Some(0.0))?,
            sigma: get("sigma", Some(1.0))?,
        },
        "gbm" => ProcessSpec::DriftlessGbm {
            x0: get("x0", Some(1.0))?,
            sigma: get("sigma", Some(1.0))?,
        },
        "cev" => ProcessSpec::Cev {
            x0: get("x0", Some(1.0))?,
            a: get("a", Some(0.0))?,
            b: get("b", Some(1.0))?,
            rho: get("rho", None)?,
        },
        "bessel" => ProcessSpec::Bessel {
            x0: get("x0", Some(1.0))?,
            delta: get("delta", None)?,
        },
        "inverse-bessel3" => ProcessSpec::InverseBessel3 {
            x0: get("x0", Some(1.0))?,
        },
        "ds-example" => ProcessSpec::DsExample,
        _ => {
            let n = match s.entries.iter().find(|e| e.key == "n") {
                Some(e) => parse_int::<u32>(e)?,
                None => 1,
            };
            ProcessSpec::AbsBmTransform { n }
        }
    };
    spec.validate().map_err(|e| err(model.line, e.to_string()))?;
    Ok(spec)
}

fn parse_grid(s: &Section) -> Result<GridSpec> {
    let mut horizon = None;
    let mut steps = None;
    let mut substeps = 1;
    for e in &s.entries {
        match e.key.as_str() {
            "horizon" => horizon = Some(parse_real(e)?),
            "steps" => steps = Some(parse_int::<usize>(e)?),
            "substeps" => substeps = parse_int::<usize>(e)?,
            other => return Err(err(e.line, format!("unknown key '{other}' in [grid]"))),
        }
    }
    let horizon = horizon.ok_or_else(|| err(s.line, "[grid] needs 'horizon'"))?;
    let steps = steps.ok_or_else(|| err(s.line, "[grid] needs 'steps'"))?;
    if steps == 0 || substeps == 0 || horizon.is_nan() || horizon <= 0.0 {
        return Err(err(s.line, "[grid] needs horizon > 0, steps >= 1 and substeps >= 1"));
    }
    Ok(GridSpec {
        horizon,
        steps,
        substeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DS: &str = "name = ds\nseed = 7\npaths = 100\n\n[process]\nmodel = ds-example\n\n[grid]\nhorizon = 1\nsteps = 64\n\n[task star-scan]\n";

    #[test]
    fn parses_and_round_trips() {
        let s = Scenario::parse(DS).unwrap();
        assert_eq!(s.seed, 7);
        assert!(matches!(
            s.source,
            Source::Process {
                spec: ProcessSpec::DsExample,
                ..
            }
        ));
        let text = s.to_config_string();
        let again = Scenario::parse(&text).unwrap();
        assert_eq!(again.to_config_string(), text);
        assert_eq!(
            (again.seed, again.paths, again.tasks.len()),
            (s.seed, s.paths, s.tasks.len())
        );
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            (DS.replace("seed = 7\n", ""), "seed"),
            (DS.replace("[task star-scan]", "[task fly]"), "line 12"),
            (DS.replace("horizon = 1", "horizon = one"), "line 9"),
            (
                DS.replace("model = ds-example", "model = ds-example\nsigma = 1"),
                "line 7",
            ),
            (format!("{DS}bogus line\n"), "line 13"),
            (format!("{DS}eps = 3\n"), "unknown key 'eps'"),
            (DS.replace("[grid]\nhorizon = 1\nsteps = 64\n", ""), "[grid]"),
        ];
        for (text, needle) in cases {
            let e = Scenario::parse(&text).unwrap_err().to_string();
            assert!(e.contains(needle), "{e} should mention {needle}");
        }
    }

    #[test]
    fn invalid_model_parameters_are_config_errors() {
        let text = DS.replace("model = ds-example", "model = bessel\ndelta = 2");
        assert!(matches!(Scenario::parse(&text), Err(Error::Config { line: 6, .. })));
    }

    #[test]
    fn lattice_scenarios() {
        let text = "name = l\nseed = 1\n[lattice]\ntree = 1 [1/2: 2, 1/2: 0]\n[task oracle]\n";
        let s = Scenario::parse(text).unwrap();
        assert!(matches!(s.source, Source::Lattice { .. }));
        let bad = "name = l\nseed = 1\n[lattice]\ntree = 1 [1/2 2]\n[task oracle]\n";
        assert!(matches!(Scenario::parse(bad), Err(Error::Config { line: 4, .. })));
    }
}
