//! Executes a parsed scenario and writes its report files.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use super::config::{Entry, Scenario, Source, TaskKind, TaskSpec};
use super::expr::{parse_event, parse_fields, parse_map, parse_number, parse_numbers, parse_rule, Defs};
use super::svg::{histogram, line_chart, Series};
use crate::constructive::{extract_from_violation, find_violation_witness, reduce_to_single_leg, ViolationWitness};
use crate::diagnostics::{martingale_defect_with, stopped_pair_check, DefectConfig};
use crate::ensemble::PathEnsemble;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::lattice::{
    build_lattice, default_alphabet, enumerate_no_arbitrage, find_multi_step_arbitrage, pairwise_characterization,
    Lattice, DEFAULT_BUDGET,
};
use crate::process::{simulate_ensemble_with, ProcessSpec, SimOptions};
use crate::rng::SeedInfo;
use crate::scalar::Scalar;
use crate::star::{standard_probe_family, star_scan, StarConfig, StarProbe, StarVerdict};
use crate::stopping::{EventPredicate, StoppingRule};
use crate::strategy::{
    arbitrage_verdict, search_single_leg, standard_leg_family, strategy_gain, ArbitrageReport, ArbitrageVerdict, Leg,
    LegCandidate, SimpleStrategy, Tolerances, WeightRule,
};
use crate::transforms::{invariance_report, InvarianceCheck, MonotoneMap};
use crate::Rational;

pub const SCHEMA_VERSION: u32 = 1;

/// Exit status when a task flags a violation or an arbitrage.
pub const EXIT_FLAGGED: i32 = 2;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Value,
    /// `"<task label>: <verdict>"` for every flagged finding.
    pub flags: Vec<String>,
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn at_line<X>(e: &Entry, r: std::result::Result<X, String>) -> Result<X> {
    r.map_err(|m| err(e.line, format!("{}: {m}", e.key)))
}

/// Named rules and events, typed for one scalar.
struct Names<T> {
    rules: Vec<(String, StoppingRule<T>)>,
    events: Vec<(String, EventPredicate<T>)>,
}

impl<T: Scalar> Names<T> {
    fn build(sc: &Scenario) -> Result<Self> {
        let mut names = Self {
            rules: Vec::new(),
            events: Vec::new(),
        };
        for e in &sc.rules {
            let r = at_line(e, parse_rule(&e.value, &names.defs()))?;
            names.rules.push((e.key.clone(), r));
        }
        for e in &sc.events {
            let ev = at_line(e, parse_event(&e.value, &names.defs()))?;
            names.events.push((e.key.clone(), ev));
        }
        Ok(names)
    }

    fn defs(&self) -> Defs<'_, T> {
        Defs {
            rules: &self.rules,
            events: &self.events,
        }
    }

    fn rule(&self, e: &Entry, text: &str) -> Result<StoppingRule<T>> {
        at_line(e, parse_rule(text, &self.defs()))
    }

    fn event(&self, e: &Entry, text: &str) -> Result<EventPredicate<T>> {
        at_line(e, parse_event(text, &self.defs()))
    }
}

enum ExtractFrom<T> {
    Witness(ViolationWitness<T>),
    ShortLeg {
        entry: StoppingRule<T>,
        exit: StoppingRule<T>,
        levels: Vec<T>,
    },
}

enum Task<T> {
    Defect {
        times: Option<Vec<T>>,
        config: DefectConfig,
        pairs: Vec<(StoppingRule<T>, StoppingRule<T>)>,
    },
    StarScan {
        probes: Vec<StarProbe<T>>,
        min_count: usize,
    },
    ArbSearch {
        family: Vec<LegCandidate<T>>,
        restricted: bool,
        strategy: Option<SimpleStrategy<T>>,
    },
    Extract(ExtractFrom<T>),
    Reduce {
        strategy: Option<SimpleStrategy<T>>,
    },
    Oracle {
        restricted: bool,
        alphabet: Vec<T>,
        budget: u128,
        pairwise: bool,
    },
    Invariance {
        check: InvarianceCheck<T>,
        map: MonotoneMap<T>,
    },
}

fn shortsale(t: &TaskSpec, default: bool) -> Result<bool> {
    match t.get("shortsale") {
        None => Ok(default),
        Some(e) => match e.value.as_str() {
            "restricted" => Ok(true),
            "unrestricted" => Ok(false),
            other => Err(err(
                e.line,
                format!("shortsale must be 'restricted' or 'unrestricted', got '{other}'"),
            )),
        },
    }
}

fn number<T: Scalar>(e: &Entry, text: &str) -> Result<T> {
    at_line(e, parse_number(text))
}

fn count(e: &Entry) -> Result<usize> {
    e.value
        .parse()
        .map_err(|_| err(e.line, format!("{} expects an integer", e.key)))
}

fn leg<T: Scalar>(names: &Names<T>, e: &Entry) -> Result<Leg<T>> {
    let fields = at_line(e, parse_fields(&e.value))?;
    let mut entry = None;
    let mut exit = None;
    let mut weight = T::one();
    let mut event = None;
    for (k, v) in &fields {
        match k.as_str() {
            "entry" => entry = Some(names.rule(e, v)?),
            "exit" => exit = Some(names.rule(e, v)?),
            "weight" => weight = number(e, v)?,
            "event" => event = Some(names.event(e, v)?),
            other => return Err(err(e.line, format!("unknown leg field '{other}'"))),
        }
    }
    let entry = entry.ok_or_else(|| err(e.line, "leg needs 'entry'"))?;
    let exit = exit.ok_or_else(|| err(e.line, "leg needs 'exit'"))?;
    let weight = match event {
        Some(ev) => WeightRule::IndicatorTimes(ev, weight),
        None => WeightRule::Constant(weight),
    };
    Ok(Leg::new(entry, exit, weight))
}

fn legs<T: Scalar>(names: &Names<T>, t: &TaskSpec, restricted: bool) -> Result<Option<SimpleStrategy<T>>> {
    let legs: Vec<Leg<T>> = t.all("leg").map(|e| leg(names, e)).collect::<Result<_>>()?;
    Ok((!legs.is_empty()).then(|| SimpleStrategy::new(legs, restricted)))
}

fn build_task<T: Scalar>(names: &Names<T>, t: &TaskSpec, horizon: T, x0: T, exact: bool) -> Result<Task<T>> {
    let task = match t.kind {
        TaskKind::Defect => {
            let mut config = DefectConfig::default();
            if let Some(e) = t.get("z_strict") {
                config.z_strict = number(e, &e.value)?;
            }
            if let Some(e) = t.get("z_consistent") {
                config.z_consistent = number(e, &e.value)?;
            }
            let times = t
                .get("times")
                .map(|e| at_line(e, parse_numbers(&e.value)))
                .transpose()?;
            let pairs = t
                .all("pair")
                .map(|e| {
                    let (a, b) = e
                        .value
                        .split_once("->")
                        .ok_or_else(|| err(e.line, "pair expects '<rule> -> <rule>'"))?;
                    Ok((names.rule(e, a.trim())?, names.rule(e, b.trim())?))
                })
                .collect::<Result<_>>()?;
            Task::Defect { times, config, pairs }
        }
        TaskKind::StarScan => {
            let mut probes = Vec::new();
            for e in t.all("probe") {
                let mut tau = None;
                let mut event = EventPredicate::WholeSpace;
                let mut h = horizon;
                let mut eps = None;
                for (k, v) in at_line(e, parse_fields(&e.value))? {
                    match k.as_str() {
                        "tau" => tau = Some(names.rule(e, &v)?),
                        "event" => event = names.event(e, &v)?,
                        "horizon" => h = number(e, &v)?,
                        "eps" => eps = Some(at_line(e, parse_numbers(&v))?),
                        other => return Err(err(e.line, format!("unknown probe field '{other}'"))),
                    }
                }
                let tau = tau.ok_or_else(|| err(e.line, "probe needs 'tau'"))?;
                let eps = eps.ok_or_else(|| err(e.line, "probe needs 'eps'"))?;
                let probe = StarProbe::new(tau, event, h, eps);
                probe.validate().map_err(|x| err(e.line, x.to_string()))?;
                probes.push(probe);
            }
            if probes.is_empty() || t.get("family").is_some_and(|e| e.value == "standard") {
                probes.extend(standard_probe_family(horizon, x0));
            }
            let min_count = t
                .get("min_count")
                .map(count)
                .transpose()?
                .unwrap_or(StarConfig::default().min_count);
            Task::StarScan { probes, min_count }
        }
        TaskKind::ArbSearch => {
            let restricted = shortsale(t, false)?;
            let mut family = Vec::new();
            for e in t.all("candidate") {
                let mut entry = None;
                let mut exit = None;
                let mut event = EventPredicate::WholeSpace;
                for (k, v) in at_line(e, parse_fields(&e.value))? {
                    match k.as_str() {
                        "entry" => entry = Some(names.rule(e, &v)?),
                        "exit" => exit = Some(names.rule(e, &v)?),
                        "event" => event = names.event(e, &v)?,
                        other => return Err(err(e.line, format!("unknown candidate field '{other}'"))),
                    }
                }
                let entry = entry.ok_or_else(|| err(e.line, "candidate needs 'entry'"))?;
                let exit = exit.ok_or_else(|| err(e.line, "candidate needs 'exit'"))?;
                family.push(LegCandidate::new(entry, exit, event));
            }
            let strategy = legs(names, t, restricted)?;
            let standard = t.get("family").is_some_and(|e| e.value == "standard");
            if standard || (family.is_empty() && strategy.is_none()) {
                family.extend(standard_leg_family(horizon, x0));
            }
            Task::ArbSearch {
                family,
                restricted,
                strategy,
            }
        }
        TaskKind::Extract => {
            if let Some(e) = t.get("tau") {
                let event = match t.get("event") {
                    Some(ev) => names.event(ev, &ev.value)?,
                    None => EventPredicate::WholeSpace,
                };
                let h = t
                    .get("horizon")
                    .map(|x| number(x, &x.value))
                    .transpose()?
                    .unwrap_or(horizon);
                let eps_entry = t.get("epsilon").ok_or_else(|| err(t.line, "extract needs 'epsilon'"))?;
                Task::Extract(ExtractFrom::Witness(ViolationWitness {
                    tau: names.rule(e, &e.value)?,
                    event,
                    horizon: h,
                    epsilon: number(eps_entry, &eps_entry.value)?,
                }))
            } else {
                let get = |k: &str| {
                    t.get(k)
                        .ok_or_else(|| err(t.line, format!("extract needs 'tau' or '{k}'")))
                };
                let (en, ex) = (get("entry")?, get("exit")?);
                let levels = match t.get("levels") {
                    Some(e) => at_line(e, parse_numbers(&e.value))?,
                    None => [1i64, 2, 4, 8].iter().map(|&k| x0 * T::from_i64(k).unwrap()).collect(),
                };
                Task::Extract(ExtractFrom::ShortLeg {
                    entry: names.rule(en, &en.value)?,
                    exit: names.rule(ex, &ex.value)?,
                    levels,
                })
            }
        }
        TaskKind::Reduce => {
            if !exact {
                return Err(err(t.line, "reduce needs an exact [lattice] source"));
            }
            let strategy = legs(names, t, true)?;
            match (t.get("from"), &strategy) {
                (Some(e), Some(_)) => return Err(err(e.line, "give either 'from' or 'leg' lines, not both")),
                (Some(e), None) if e.value != "oracle" => {
                    return Err(err(e.line, format!("'from' must be 'oracle', got '{}'", e.value)))
                }
                _ => {}
            }
            Task::Reduce { strategy }
        }
        TaskKind::Oracle => {
            if !exact {
                return Err(err(t.line, "oracle needs a [lattice] source"));
            }
            let restricted = shortsale(t, true)?;
            let alphabet = match t.get("alphabet") {
                Some(e) => at_line(e, parse_numbers(&e.value))?,
                None => default_alphabet(restricted),
            };
            let budget = match t.get("budget") {
                Some(e) => e.value.parse().map_err(|_| err(e.line, "budget expects an integer"))?,
                None => DEFAULT_BUDGET,
            };
            let pairwise = match t.get("pairwise") {
                Some(e) => e
                    .value
                    .parse()
                    .map_err(|_| err(e.line, "pairwise expects true or false"))?,
                None => restricted,
            };
            Task::Oracle {
                restricted,
                alphabet,
                budget,
                pairwise,
            }
        }
        TaskKind::Invariance => {
            let m = t.get("map").ok_or_else(|| err(t.line, "invariance needs 'map'"))?;
            let map = at_line(m, parse_map(&m.value))?;
            let check = match t.get("check").map_or("star-scan", |e| e.value.as_str()) {
                "star-scan" => {
                    let min_count = t
                        .get("min_count")
                        .map(count)
                        .transpose()?
                        .unwrap_or(StarConfig::default().min_count);
                    InvarianceCheck::StarScan {
                        probes: standard_probe_family(horizon, x0),
                        config: StarConfig { min_count },
                    }
                }
                "long-only-search" => InvarianceCheck::LongOnlySearch {
                    family: standard_leg_family(horizon, x0),
                },
                other => {
                    let line = t.get("check").map_or(t.line, |e| e.line);
                    return Err(err(
                        line,
                        format!("check must be 'star-scan' or 'long-only-search', got '{other}'"),
                    ));
                }
            };
            Task::Invariance { check, map }
        }
    };
    Ok(task)
}

fn build_tasks<T: Scalar>(sc: &Scenario, horizon: T, x0: T, exact: bool) -> Result<Vec<Task<T>>> {
    let names = Names::build(sc)?;
    sc.tasks
        .iter()
        .map(|t| build_task(&names, t, horizon, x0, exact))
        .collect()
}

/// Model, output grid and substeps of a simulated source.
type ProcessSetup = (ProcessSpec<f64>, TimeGrid<f64>, usize);

fn process_grid(sc: &Scenario) -> Result<Option<ProcessSetup>> {
    match &sc.source {
        Source::Process { spec, grid } => {
            let g = TimeGrid::uniform(grid.horizon, grid.steps).map_err(|e| err(1, e.to_string()))?;
            if matches!(spec, ProcessSpec::DsExample) && grid.horizon > 1.0 {
                return Err(err(1, "the ds-example model lives on [0, 1]; use horizon <= 1"));
            }
            Ok(Some((spec.clone(), g, grid.substeps)))
        }
        Source::Lattice { .. } => Ok(None),
    }
}

/// Checks everything that can be checked without simulating.
pub fn validate(sc: &Scenario) -> Result<()> {
    match process_grid(sc)? {
        Some((spec, grid, _)) => build_tasks::<f64>(sc, grid.horizon(), spec.initial_value(), false).map(drop),
        None => {
            let lattice = lattice_of(sc)?;
            build_tasks::<Rational>(
                sc,
                Rational::from_integer(lattice.depth as i64),
                lattice.nodes[0].value,
                true,
            )
            .map(drop)
        }
    }
}

fn lattice_of(sc: &Scenario) -> Result<Lattice<Rational>> {
    match &sc.source {
        Source::Lattice { tree } => build_lattice(tree).map_err(|e| err(1, format!("lattice: {e}"))),
        Source::Process { .. } => Err(Error::Internal("not a lattice scenario".into())),
    }
}

/// Runs every task and writes `report.json`, CSV tables and SVG plots into
/// `out_dir`. `versions` lists extra component versions for the report.
pub fn run_scenario(sc: &Scenario, out_dir: &Path, versions: &[(&str, &str)]) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    let mut out = Output {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    let mut ctx = Ctx {
        out: &mut out,
        tasks: Vec::new(),
        flags: Vec::new(),
    };
    let ensemble_info;
    match process_grid(sc)? {
        Some((spec, grid, substeps)) => {
            let tasks = build_tasks::<f64>(sc, grid.horizon(), spec.initial_value(), false)?;
            let seed = SeedInfo::named(sc.seed, &sc.name);
            let options = SimOptions {
                substeps,
                scenario: seed.scenario,
            };
            let ensemble = simulate_ensemble_with(&spec, &grid, sc.paths, sc.seed, options)?;
            ensemble_info = describe(&ensemble);
            if sc.save_paths > 0 {
                ctx.save_paths(&ensemble, sc.save_paths)?;
            }
            let note = match spec {
                ProcessSpec::Cev { a, .. } if a != 0.0 => Some(
                    "drift a != 0: the simulation measure is not a local-martingale measure, so the defect mixes drift with strictness",
                ),
                _ => None,
            };
            for (i, (task, spec_t)) in tasks.iter().zip(&sc.tasks).enumerate() {
                ctx.run(&ensemble, None, task, &spec_t.label(i), note)?;
            }
        }
        None => {
            let lattice = lattice_of(sc)?;
            let depth = Rational::from_integer(lattice.depth as i64);
            let tasks = build_tasks::<Rational>(sc, depth, lattice.nodes[0].value, true)?;
            let ensemble = lattice.to_ensemble()?;
            ensemble_info = describe(&ensemble);
            if sc.save_paths > 0 {
                ctx.save_paths(&ensemble, sc.save_paths)?;
            }
            for (i, (task, spec_t)) in tasks.iter().zip(&sc.tasks).enumerate() {
                ctx.run(&ensemble, Some(&lattice), task, &spec_t.label(i), None)?;
            }
        }
    }
    let Ctx { tasks, flags, .. } = ctx;
    let exit_code = if flags.is_empty() { 0 } else { EXIT_FLAGGED };
    let mut version_map = Map::new();
    version_map.insert("localmart-core".into(), json!(env!("CARGO_PKG_VERSION")));
    for (k, v) in versions {
        version_map.insert((*k).into(), json!(v));
    }
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "scenario": sc.name,
        "master_seed": sc.seed,
        "scenario_id": SeedInfo::named(sc.seed, &sc.name).scenario,
        "versions": version_map,
        "config": {
            "text": sc.to_config_string(),
            "paths": sc.paths,
            "source": source_json(sc),
        },
        "ensemble": ensemble_info,
        "tasks": tasks,
        "flags": flags,
        "exit_code": exit_code,
    });
    let path = out_dir.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    out.files.push(path);
    Ok(RunOutcome {
        report,
        flags,
        exit_code,
        files: out.files,
    })
}

fn source_json(sc: &Scenario) -> Value {
    match &sc.source {
        Source::Process { spec, grid } => {
            let mut m = Map::new();
            for (k, v) in super::config::process_fields(spec) {
                m.insert(k.into(), json!(v));
            }
            json!({
                "kind": "process",
                "process": m,
                "grid": {"horizon": grid.horizon, "steps": grid.steps, "substeps": grid.substeps},
            })
        }
        Source::Lattice { tree } => json!({"kind": "lattice", "tree": tree.to_string()}),
    }
}

fn describe<T: Scalar>(e: &PathEnsemble<T>) -> Value {
    let meta: Map<String, Value> = e.metadata().iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    json!({
        "n_paths": e.n_paths(),
        "n_times": e.n_times(),
        "horizon": e.grid().horizon().to_f64_lossy(),
        "uniform_weights": e.is_uniform(),
        "metadata": meta,
    })
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }
}

struct Ctx<'a> {
    out: &'a mut Output,
    tasks: Vec<Value>,
    flags: Vec<String>,
}

fn report_json<T: Scalar>(r: &ArbitrageReport<T>) -> Value {
    json!({
        "verdict": r.verdict.as_str(),
        "min_gain": r.min_gain.to_string(),
        "max_gain": r.max_gain.to_string(),
        "frac_positive": r.frac_positive,
        "frac_negative": r.frac_negative,
        "n_positive": r.n_positive,
        "n_negative": r.n_negative,
        "tol_zero": r.tolerances.tol_zero.to_string(),
        "min_hits": r.tolerances.min_hits,
    })
}

fn safe_name(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

impl Ctx<'_> {
    fn flag(&mut self, label: &str, verdict: &str) {
        self.flags.push(format!("{label}: {verdict}"));
    }

    fn save_paths<T: Scalar>(&mut self, e: &PathEnsemble<T>, n: usize) -> Result<()> {
        let mut header = vec!["path".to_string(), "weight".to_string()];
        header.extend(e.grid().points().iter().map(|t| format!("t={t}")));
        let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = (0..n.min(e.n_paths()))
            .map(|i| {
                let mut r = vec![i.to_string(), fmt_f64(e.weights()[i].to_f64_lossy())];
                r.extend(e.path(i).iter().map(|v| fmt_f64(v.to_f64_lossy())));
                r
            })
            .collect();
        self.out.csv("paths.csv", &header_ref, &rows)
    }

    fn gains<T: Scalar>(&mut self, stem: &str, title: &str, e: &PathEnsemble<T>, gains: &[T]) -> Result<()> {
        let mut header = vec!["path", "weight", "gain"];
        if T::EXACT {
            header.push("gain_exact");
        }
        let rows: Vec<Vec<String>> = gains
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let mut r = vec![
                    i.to_string(),
                    fmt_f64(e.weights()[i].to_f64_lossy()),
                    fmt_f64(g.to_f64_lossy()),
                ];
                if T::EXACT {
                    r.push(g.to_string());
                }
                r
            })
            .collect();
        self.out.csv(&format!("{stem}.csv"), &header, &rows)?;
        let values: Vec<f64> = gains.iter().map(|g| g.to_f64_lossy()).collect();
        self.out
            .text(&format!("{stem}.svg"), &histogram(title, "gain", &values, 40))
    }

    fn run<T: Scalar>(
        &mut self,
        e: &PathEnsemble<T>,
        lattice: Option<&Lattice<T>>,
        task: &Task<T>,
        label: &str,
        note: Option<&str>,
    ) -> Result<()> {
        let stem = safe_name(label);
        let mut v = match task {
            Task::Defect { times, config, pairs } => {
                let times: Vec<T> = match times {
                    Some(t) => t.clone(),
                    None => {
                        let n = e.n_times() - 1;
                        let mut idx: Vec<usize> = (0..=8).map(|k| k * n / 8).collect();
                        idx.dedup();
                        idx.into_iter().map(|k| e.grid().time(k)).collect()
                    }
                };
                let table = martingale_defect_with(e, &times, *config)?;
                let rows: Vec<Vec<String>> = table
                    .rows
                    .iter()
                    .map(|r| {
                        [r.t, r.mean, r.std_error, r.defect, r.z]
                            .iter()
                            .map(|&x| fmt_f64(x))
                            .collect()
                    })
                    .collect();
                self.out.csv(
                    &format!("{stem}.csv"),
                    &["t", "mean", "std_error", "defect", "z"],
                    &rows,
                )?;
                let series = Series {
                    name: "defect".into(),
                    points: table.rows.iter().map(|r| (r.t, r.defect)).collect(),
                    errors: Some(table.rows.iter().map(|r| 2.0 * r.std_error).collect()),
                };
                self.out.text(
                    &format!("{stem}.svg"),
                    &line_chart("Martingale defect X_0 - E[X_t] (±2 s.e.)", "t", "defect", &[series]),
                )?;
                let checks = stopped_pair_check(e, pairs)?;
                let pair_json: Vec<Value> = pairs
                    .iter()
                    .zip(&checks)
                    .map(|((a, b), c)| {
                        json!({
                            "tau0": a.to_string(), "tau1": b.to_string(),
                            "mean_tau0": c.mean_start, "mean_tau1": c.mean_end,
                            "drop": c.drop, "std_error": c.std_error, "z": c.z,
                            "supermartingale_consistent": c.supermartingale_consistent,
                        })
                    })
                    .collect();
                json!({
                    "verdict": table.classification.as_str(),
                    "max_z": table.max_z(),
                    "z_strict": config.z_strict,
                    "z_consistent": config.z_consistent,
                    "rows": table.rows.iter().map(|r| json!({
                        "t": r.t, "mean": r.mean, "std_error": r.std_error, "defect": r.defect, "z": r.z
                    })).collect::<Vec<_>>(),
                    "pairs": pair_json,
                    "note": note,
                })
            }
            Task::StarScan { probes, min_count } => {
                let scan = star_scan(e, probes, StarConfig { min_count: *min_count })?;
                let mut rows = Vec::new();
                let mut series = Vec::new();
                for (k, (p, r)) in probes.iter().zip(&scan.reports).enumerate() {
                    for en in &r.entries {
                        rows.push(vec![
                            k.to_string(),
                            fmt_f64(en.epsilon),
                            fmt_f64(en.p_hat),
                            fmt_f64(en.p_a),
                            en.n_a.to_string(),
                            en.n_joint.to_string(),
                            fmt_f64(en.ci_low),
                            fmt_f64(en.ci_high),
                            en.verdict.as_str().to_string(),
                        ]);
                    }
                    series.push(Series {
                        name: format!("probe {k}"),
                        points: r.entries.iter().map(|en| (en.epsilon, en.p_hat)).collect(),
                        errors: None,
                    });
                    let _ = p;
                }
                self.out.csv(
                    &format!("{stem}.csv"),
                    &[
                        "probe", "epsilon", "p_hat", "p_a", "n_a", "n_joint", "ci_low", "ci_high", "verdict",
                    ],
                    &rows,
                )?;
                series.truncate(6);
                self.out.text(
                    &format!("{stem}.svg"),
                    &line_chart(
                        "Stay-above probability p_hat vs epsilon (first probes)",
                        "epsilon",
                        "p_hat",
                        &series,
                    ),
                )?;
                if scan.verdict == StarVerdict::ViolationSuspected {
                    self.flag(label, scan.verdict.as_str());
                }
                json!({
                    "verdict": scan.verdict.as_str(),
                    "note": scan.note,
                    "probes": probes.iter().zip(&scan.reports).map(|(p, r)| json!({
                        "probe": p.to_string(),
                        "verdict": r.verdict().as_str(),
                        "entries": r.entries.iter().map(|en| json!({
                            "epsilon": en.epsilon, "p_hat": en.p_hat, "p_a": en.p_a,
                            "n_a": en.n_a, "n_joint": en.n_joint,
                            "ci_low": en.ci_low, "ci_high": en.ci_high, "verdict": en.verdict.as_str(),
                        })).collect::<Vec<_>>(),
                    })).collect::<Vec<_>>(),
                })
            }
            Task::ArbSearch {
                family,
                restricted,
                strategy,
            } => {
                let tol = Tolerances::for_ensemble(e);
                let mut verdict = ArbitrageVerdict::NoArbitrageEvidence;
                let mut obj = Map::new();
                if !family.is_empty() {
                    let outcome = search_single_leg(e, family, *restricted, tol)?;
                    let rows: Vec<Vec<String>> = outcome
                        .evaluated
                        .iter()
                        .map(|c| {
                            vec![
                                c.index.to_string(),
                                c.sign.to_string(),
                                fmt_f64(c.report.min_gain.to_f64_lossy()),
                                fmt_f64(c.report.max_gain.to_f64_lossy()),
                                fmt_f64(c.report.frac_positive),
                                fmt_f64(c.report.frac_negative),
                                c.report.n_positive.to_string(),
                                c.report.n_negative.to_string(),
                                c.report.verdict.as_str().to_string(),
                            ]
                        })
                        .collect();
                    self.out.csv(
                        &format!("{stem}_candidates.csv"),
                        &[
                            "candidate",
                            "sign",
                            "min_gain",
                            "max_gain",
                            "frac_positive",
                            "frac_negative",
                            "n_positive",
                            "n_negative",
                            "verdict",
                        ],
                        &rows,
                    )?;
                    let gains = strategy_gain(&outcome.strategy, e)?;
                    self.gains(&format!("{stem}_best_gains"), "Gains of the best candidate", e, &gains)?;
                    verdict = outcome.verdict();
                    obj.insert("candidates".into(), json!(family.len()));
                    obj.insert(
                        "best".into(),
                        json!({
                            "candidate": family[outcome.best.index].to_string(),
                            "sign": outcome.best.sign.to_string(),
                            "strategy": outcome.strategy.to_string(),
                            "report": report_json(&outcome.best.report),
                        }),
                    );
                    obj.insert(
                        "all_have_losses".into(),
                        json!(outcome.evaluated.iter().all(|c| c.report.frac_negative > 0.0)),
                    );
                }
                if let Some(s) = strategy {
                    let report = arbitrage_verdict(s, e, tol)?;
                    let gains = strategy_gain(s, e)?;
                    self.gains(
                        &format!("{stem}_strategy_gains"),
                        "Gains of the given strategy",
                        e,
                        &gains,
                    )?;
                    if report.verdict == ArbitrageVerdict::Arbitrage {
                        verdict = ArbitrageVerdict::Arbitrage;
                    }
                    obj.insert(
                        "strategy".into(),
                        json!({"strategy": s.to_string(), "report": report_json(&report)}),
                    );
                }
                if verdict == ArbitrageVerdict::Arbitrage {
                    self.flag(label, verdict.as_str());
                }
                obj.insert("verdict".into(), json!(verdict.as_str()));
                obj.insert("shortsale_restricted".into(), json!(restricted));
                Value::Object(obj)
            }
            Task::Extract(from) => {
                let tol = Tolerances::for_ensemble(e);
                let witness = match from {
                    ExtractFrom::Witness(w) => Ok(Some(w.clone())),
                    ExtractFrom::ShortLeg { entry, exit, levels } => {
                        find_violation_witness(e, entry, exit, levels, e.grid().horizon(), tol)
                    }
                };
                match witness.and_then(|w| match w {
                    None => Ok(None),
                    Some(w) => extract_from_violation(e, &w, tol).map(|x| Some((w, x))),
                }) {
                    Ok(Some((w, x))) => {
                        self.gains(&format!("{stem}_gains"), "Gains of the extracted strategy", e, &x.gains)?;
                        if x.report.verdict == ArbitrageVerdict::Arbitrage {
                            self.flag(label, x.report.verdict.as_str());
                        }
                        let (p_hat, p_a) = w.probabilities(e)?;
                        json!({
                            "verdict": x.report.verdict.as_str(),
                            "witness": {
                                "tau": w.tau.to_string(), "event": w.event.to_string(),
                                "horizon": w.horizon.to_string(), "epsilon": w.epsilon.to_string(),
                                "p_hat": p_hat, "p_a": p_a,
                            },
                            "strategy": x.strategy.to_string(),
                            "report": report_json(&x.report),
                            "grid_slack": x.grid_slack.to_string(),
                        })
                    }
                    Ok(None) => json!({"verdict": "NO_WITNESS"}),
                    Err(Error::Refused(msg)) => json!({"verdict": "REFUSED", "reason": msg}),
                    Err(other) => return Err(other),
                }
            }
            Task::Reduce { strategy } => {
                let lattice = lattice.ok_or_else(|| Error::Internal("reduce without lattice".into()))?;
                let input = match strategy {
                    Some(s) => Some(s.clone()),
                    None => {
                        let alphabet = default_alphabet(true);
                        let multi = find_multi_step_arbitrage(lattice, true, &alphabet, DEFAULT_BUDGET)?;
                        match multi.certificate {
                            Some(c) => Some(c),
                            None => enumerate_no_arbitrage(lattice, true, &alphabet, DEFAULT_BUDGET)?.certificate,
                        }
                    }
                };
                match input {
                    None => json!({"verdict": "NO_ARBITRAGE", "note": "no long-only arbitrage to reduce"}),
                    Some(s) => match reduce_to_single_leg(e, &s) {
                        Ok(r) => {
                            self.gains(&format!("{stem}_gains"), "Gains of the reduced strategy", e, &r.gains)?;
                            self.flag(label, r.report.verdict.as_str());
                            json!({
                                "verdict": r.report.verdict.as_str(),
                                "input": s.to_string(),
                                "input_legs": s.legs.len(),
                                "k": r.k,
                                "case": format!("{:?}", r.case),
                                "strategy": r.strategy.to_string(),
                                "report": report_json(&r.report),
                            })
                        }
                        Err(Error::Refused(msg)) => {
                            json!({"verdict": "REFUSED", "reason": msg, "input": s.to_string()})
                        }
                        Err(other) => return Err(other),
                    },
                }
            }
            Task::Oracle {
                restricted,
                alphabet,
                budget,
                pairwise,
            } => {
                let lattice = lattice.ok_or_else(|| Error::Internal("oracle without lattice".into()))?;
                let full = enumerate_no_arbitrage(lattice, *restricted, alphabet, *budget)?;
                let mut obj = Map::new();
                obj.insert("shortsale_restricted".into(), json!(restricted));
                obj.insert("no_arbitrage".into(), json!(full.no_arbitrage));
                obj.insert("examined".into(), json!(full.examined.to_string()));
                obj.insert("statement".into(), json!(full.statement));
                if let (Some(c), Some(g)) = (&full.certificate, &full.certificate_gains) {
                    obj.insert("certificate".into(), json!(c.to_string()));
                    self.gains(&format!("{stem}_certificate_gains"), "Gains of the certificate", e, g)?;
                }
                if *pairwise {
                    let pw = pairwise_characterization(lattice, *budget)?;
                    let mut p = Map::new();
                    p.insert("no_arbitrage".into(), json!(pw.no_arbitrage));
                    p.insert("examined".into(), json!(pw.examined.to_string()));
                    p.insert("statement".into(), json!(pw.statement));
                    if let Some(w) = &pw.witness {
                        p.insert("tau0".into(), json!(w.tau0.to_string()));
                        p.insert("tau1".into(), json!(w.tau1.to_string()));
                        p.insert("event".into(), json!(w.event.to_string()));
                    }
                    obj.insert("agree".into(), json!(pw.no_arbitrage == full.no_arbitrage));
                    obj.insert("pairwise".into(), Value::Object(p));
                }
                let verdict = if full.no_arbitrage {
                    "NO_ARBITRAGE"
                } else {
                    ArbitrageVerdict::Arbitrage.as_str()
                };
                if !full.no_arbitrage {
                    self.flag(label, verdict);
                }
                obj.insert("verdict".into(), json!(verdict));
                Value::Object(obj)
            }
            Task::Invariance { check, map } => {
                let rec = invariance_report(check, map, e)?;
                if !rec.p_hat_pairs.is_empty() {
                    let rows: Vec<Vec<String>> = rec
                        .p_hat_pairs
                        .iter()
                        .enumerate()
                        .map(|(i, (a, b))| vec![i.to_string(), fmt_f64(*a), fmt_f64(*b)])
                        .collect();
                    self.out
                        .csv(&format!("{stem}.csv"), &["entry", "p_hat_before", "p_hat_after"], &rows)?;
                }
                json!({
                    "verdict": if rec.pass { "PASS" } else { "FAIL" },
                    "check": rec.check,
                    "map": rec.map,
                    "before": rec.before,
                    "after": rec.after,
                    "exact_probabilities": rec.exact_probabilities,
                    "p_hat_equal": rec.p_hat_pairs.iter().all(|(a, b)| a == b),
                })
            }
        };
        if let Value::Object(m) = &mut v {
            m.insert("label".into(), json!(label));
            m.insert("task".into(), json!(task_kind(task)));
        }
        self.tasks.push(v);
        Ok(())
    }
}

fn task_kind<T>(t: &Task<T>) -> &'static str {
    match t {
        Task::Defect { .. } => TaskKind::Defect.as_str(),
        Task::StarScan { .. } => TaskKind::StarScan.as_str(),
        Task::ArbSearch { .. } => TaskKind::ArbSearch.as_str(),
        Task::Extract(_) => TaskKind::Extract.as_str(),
        Task::Reduce { .. } => TaskKind::Reduce.as_str(),
        Task::Oracle { .. } => TaskKind::Oracle.as_str(),
        Task::Invariance { .. } => TaskKind::Invariance.as_str(),
    }
}
