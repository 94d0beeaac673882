//! Flat INI-style experiment configuration.
//!
//! ```text
//! [model]
//! d = 0.5
//! D = 1
//! omega = 0.5
//! k = 1
//! lambda = 1
//! mu = 1
//! beta = 1
//! N = 2
//!
//! [domain]
//! dim = 1
//! lengths = 1
//! cells = 100
//! ```
//!
//! `[model]` and `[domain]` are required and every key in them must be set;
//! `[solver]`, `[sweep]` and `[output]` are optional and fall back to
//! defaults. Lines starting with `#` or `;` are comments. Unknown sections
//! and keys are errors, and all errors are collected before returning.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::grid::Grid;
use crate::model::ModelParams;
use crate::sweep::{Protocol, DEFAULT_BETAS, DEFAULT_PACKS};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    /// Time horizon `T`.
    pub horizon: f64,
    pub steady_tol: f64,
    pub flatness_tol: f64,
    pub seed: u64,
    pub sample_every: usize,
    pub newton_max_iters: usize,
    /// Relative amplitude of initial perturbations.
    pub amplitude: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = Protocol::default();
        Self {
            dt: p.dt,
            horizon: p.horizon,
            steady_tol: p.steady_tol,
            flatness_tol: p.flatness_tol,
            seed: 0,
            sample_every: p.sample_every,
            newton_max_iters: p.newton_max_iters,
            amplitude: p.amplitude,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub beta_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub runs: usize,
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            beta_grid: DEFAULT_BETAS.to_vec(),
            n_grid: DEFAULT_PACKS.to_vec(),
            runs: Protocol::default().runs,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub svg: bool,
    /// Record wall-clock times in CSV output. Off by default so that reruns
    /// produce byte-identical files.
    pub timings: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            svg: false,
            timings: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    pub domain: Grid,
    pub solver: SolverConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    /// Reference parameters on the unit interval with 100 cells.
    fn default() -> Self {
        Self {
            model: ModelParams::reference(),
            domain: Grid::interval(1.0, 100).expect("valid default grid"),
            solver: SolverConfig::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    /// The per-run protocol these settings describe.
    pub fn protocol(&self) -> Protocol {
        Protocol {
            runs: self.sweep.runs,
            horizon: self.solver.horizon,
            dt: self.solver.dt,
            steady_tol: self.solver.steady_tol,
            flatness_tol: self.solver.flatness_tol,
            amplitude: self.solver.amplitude,
            sample_every: self.solver.sample_every,
            newton_max_iters: self.solver.newton_max_iters,
            parallel: self.sweep.parallel,
        }
    }

    /// Renders the configuration so that `parse_config(render(c)) == c`.
    pub fn render(&self) -> String {
        let m = &self.model;
        let g = &self.domain;
        let s = &self.solver;
        let mut out = String::new();
        let mut section = |name: &str, entries: Vec<(&str, String)>| {
            out.push_str(&format!("[{name}]\n"));
            for (k, v) in entries {
                out.push_str(&format!("{k} = {v}\n"));
            }
            out.push('\n');
        };
        section(
            "model",
            vec![
                ("d", num(m.predator_diffusion)),
                ("D", num(m.prey_diffusion)),
                ("omega", num(m.mortality)),
                ("k", num(m.predation)),
                ("lambda", num(m.prey_growth)),
                ("mu", num(m.prey_crowding)),
                ("beta", num(m.competition)),
                ("N", m.packs.to_string()),
            ],
        );
        section(
            "domain",
            vec![
                ("dim", g.dim().to_string()),
                ("lengths", list(g.lengths().iter().map(|&x| num(x)))),
                ("cells", list(g.cells().iter().map(usize::to_string))),
            ],
        );
        section(
            "solver",
            vec![
                ("dt", num(s.dt)),
                ("T", num(s.horizon)),
                ("steady_tol", num(s.steady_tol)),
                ("flatness_tol", num(s.flatness_tol)),
                ("seed", s.seed.to_string()),
                ("sample_every", s.sample_every.to_string()),
                ("newton_max_iters", s.newton_max_iters.to_string()),
                ("amplitude", num(s.amplitude)),
            ],
        );
        section(
            "sweep",
            vec![
                ("beta_grid", list(self.sweep.beta_grid.iter().map(|&x| num(x)))),
                ("N_grid", list(self.sweep.n_grid.iter().map(usize::to_string))),
                ("runs", self.sweep.runs.to_string()),
                ("parallel", self.sweep.parallel.to_string()),
            ],
        );
        section(
            "output",
            vec![
                ("dir", self.output.dir.display().to_string()),
                ("svg", self.output.svg.to_string()),
                ("timings", self.output.timings.to_string()),
            ],
        );
        out.pop();
        out
    }
}

/// Shortest representation that parses back to the same value.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn list(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(", ")
}

/// One configuration problem; `line` is 1-based, absent for missing entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Reports every error on its own line.
pub fn format_errors(errors: &[ConfigError]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n")
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("model", &["d", "D", "omega", "k", "lambda", "mu", "beta", "N"]),
    ("domain", &["dim", "lengths", "cells"]),
    (
        "solver",
        &[
            "dt",
            "T",
            "steady_tol",
            "flatness_tol",
            "seed",
            "sample_every",
            "newton_max_iters",
            "amplitude",
        ],
    ),
    ("sweep", &["beta_grid", "N_grid", "runs", "parallel"]),
    ("output", &["dir", "svg", "timings"]),
];

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: usize,
}

/// Raw `section → key → entry` table, after syntax and key checks.
#[derive(Clone, Debug, Default)]
struct Table {
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
}

fn tokenize(text: &str, errors: &mut Vec<ConfigError>) -> Table {
    let mut table = Table::default();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
            continue;
        }
        let err = |message: String| ConfigError {
            line: Some(line),
            message,
        };
        if let Some(rest) = t.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']').map(str::trim) else {
                errors.push(err(format!("malformed section header `{t}`")));
                current = None;
                continue;
            };
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                errors.push(err(format!("unknown section [{name}]")));
                current = None;
                continue;
            }
            if let Some((first, _)) = table.sections.get(name) {
                errors.push(err(format!(
                    "duplicate section [{name}] (first at line {first})"
                )));
            } else {
                table.sections.insert(name.to_string(), (line, BTreeMap::new()));
            }
            current = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = t.split_once('=') else {
            errors.push(err(format!("expected `key = value`, got `{t}`")));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(section) = current.as_deref() else {
            errors.push(err(format!("key `{key}` outside of a known section")));
            continue;
        };
        let known = SECTIONS
            .iter()
            .find(|(s, _)| *s == section)
            .is_some_and(|(_, keys)| keys.contains(&key));
        if !known {
            errors.push(err(format!("unknown key `{key}` in [{section}]")));
            continue;
        }
        let entries = &mut table.sections.get_mut(section).expect("section registered").1;
        if let Some(prev) = entries.get(key) {
            errors.push(err(format!(
                "duplicate key `{key}` in [{section}] at lines {} and {line}",
                prev.line
            )));
            continue;
        }
        entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    table
}

/// Typed access to one section, accumulating errors.
struct Reader<'a> {
    section: &'a str,
    entries: Option<&'a BTreeMap<String, Entry>>,
    errors: &'a mut Vec<ConfigError>,
}

impl Reader<'_> {
    fn line(&self, key: &str) -> Option<usize> {
        self.entries.and_then(|e| e.get(key)).map(|e| e.line)
    }

    /// Line for messages; overrides from the command line carry line 0.
    fn report_line(&self, key: &str) -> Option<usize> {
        self.line(key).filter(|&l| l > 0)
    }

    fn get<T>(&mut self, key: &str, parse: impl Fn(&str) -> Option<T>, what: &str) -> Option<T> {
        let entry = self.entries.and_then(|e| e.get(key))?;
        let v = parse(&entry.value);
        if v.is_none() {
            self.errors.push(ConfigError {
                line: Some(entry.line).filter(|&l| l > 0),
                message: format!("`{key}` must be {what}, got `{}`", entry.value),
            });
        }
        v
    }

    fn required<T>(&mut self, key: &str, parse: impl Fn(&str) -> Option<T>, what: &str) -> Option<T> {
        if self.line(key).is_none() {
            if self.entries.is_some() {
                self.errors.push(ConfigError {
                    line: None,
                    message: format!("missing key `{key}` in [{}]", self.section),
                });
            }
            return None;
        }
        self.get(key, parse, what)
    }

    fn optional<T>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> Option<T>, what: &str) -> T {
        if self.line(key).is_none() {
            return default;
        }
        self.get(key, parse, what).unwrap_or(default)
    }

    fn check(&mut self, key: &str, ok: bool, message: &str) {
        if !ok {
            let line = self.report_line(key);
            self.errors.push(ConfigError {
                line,
                message: message.to_string(),
            });
        }
    }
}

fn float(s: &str) -> Option<f64> {
    s.parse().ok()
}

fn uint<T: std::str::FromStr>(s: &str) -> Option<T> {
    s.parse().ok()
}

fn boolean(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

fn list_of<T>(parse: impl Fn(&str) -> Option<T>) -> impl Fn(&str) -> Option<Vec<T>> {
    move |s| {
        let items: Option<Vec<T>> = s.split(',').map(|t| parse(t.trim())).collect();
        items.filter(|v| !v.is_empty())
    }
}

/// Parses and fully validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<ConfigError>> {
    parse_with_overrides(text, &[])
}

/// Like [`parse_config`], with `section.key=value` overrides applied on top.
/// An override may replace a key from the file; the usual key checks apply.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let mut table = tokenize(text, &mut errors);
    for o in overrides {
        apply_override(&mut table, o, &mut errors);
    }
    let cfg = build(&table, &mut errors);
    match cfg {
        Some(c) if errors.is_empty() => Ok(c),
        _ => Err(errors),
    }
}

fn apply_override(table: &mut Table, o: &str, errors: &mut Vec<ConfigError>) {
    let err = |message: String| ConfigError {
        line: None,
        message,
    };
    let parsed = o
        .split_once('=')
        .and_then(|(path, value)| path.trim().split_once('.').map(|(s, k)| (s, k, value)));
    let Some((section, key, value)) = parsed else {
        errors.push(err(format!("override `{o}` is not of the form section.key=value")));
        return;
    };
    let known = SECTIONS
        .iter()
        .find(|(s, _)| *s == section)
        .is_some_and(|(_, keys)| keys.contains(&key));
    if !known {
        errors.push(err(format!("override `{o}` names an unknown key")));
        return;
    }
    let entries = &mut table
        .sections
        .entry(section.to_string())
        .or_insert_with(|| (0, BTreeMap::new()))
        .1;
    let line = entries.get(key).map_or(0, |e| e.line);
    entries.insert(
        key.to_string(),
        Entry {
            value: value.trim().to_string(),
            line,
        },
    );
}

fn build(table: &Table, errors: &mut Vec<ConfigError>) -> Option<RunConfig> {
    for required in ["model", "domain"] {
        if !table.sections.contains_key(required) {
            errors.push(ConfigError {
                line: None,
                message: format!("missing section [{required}]"),
            });
        }
    }
    let section = |name: &str| table.sections.get(name).map(|(_, e)| e);
    let (model_entries, domain_entries) = (section("model"), section("domain"));
    let (solver_entries, sweep_entries, output_entries) =
        (section("solver"), section("sweep"), section("output"));

    let model = {
        let mut r = Reader {
            section: "model",
            entries: model_entries,
            errors,
        };
        let d = r.required("d", float, "a number");
        let big_d = r.required("D", float, "a number");
        let omega = r.required("omega", float, "a number");
        let k = r.required("k", float, "a number");
        let lambda = r.required("lambda", float, "a number");
        let mu = r.required("mu", float, "a number");
        let beta = r.required("beta", float, "a number");
        let n = r.required("N", uint::<usize>, "a nonnegative integer");
        match (d, big_d, omega, k, lambda, mu, beta, n) {
            (Some(d), Some(big_d), Some(omega), Some(k), Some(lambda), Some(mu), Some(beta), Some(n)) => {
                let p = ModelParams {
                    predator_diffusion: d,
                    prey_diffusion: big_d,
                    mortality: omega,
                    predation: k,
                    prey_growth: lambda,
                    prey_crowding: mu,
                    competition: beta,
                    packs: n,
                };
                let violations = p.validate();
                for v in &violations {
                    r.check(v.key, false, &v.message);
                }
                violations.is_empty().then_some(p)
            }
            _ => None,
        }
    };

    let domain = {
        let mut r = Reader {
            section: "domain",
            entries: domain_entries,
            errors,
        };
        let dim = r.required("dim", uint::<usize>, "1 or 2");
        let lengths = r.required("lengths", list_of(float), "a comma-separated list of numbers");
        let cells = r.required("cells", list_of(uint::<usize>), "a comma-separated list of integers");
        match (dim, lengths, cells) {
            (Some(dim), Some(lengths), Some(cells)) => {
                if lengths.len() != dim {
                    r.check("lengths", false, &format!("expected {dim} lengths, got {}", lengths.len()));
                    None
                } else {
                    match Grid::new(&lengths, &cells) {
                        Ok(g) => Some(g),
                        Err(e) => {
                            r.check("dim", false, &e.to_string());
                            None
                        }
                    }
                }
            }
            _ => None,
        }
    };

    let solver = {
        let mut r = Reader {
            section: "solver",
            entries: solver_entries,
            errors,
        };
        let def = SolverConfig::default();
        let s = SolverConfig {
            dt: r.optional("dt", def.dt, float, "a number"),
            horizon: r.optional("T", def.horizon, float, "a number"),
            steady_tol: r.optional("steady_tol", def.steady_tol, float, "a number"),
            flatness_tol: r.optional("flatness_tol", def.flatness_tol, float, "a number"),
            seed: r.optional("seed", def.seed, uint::<u64>, "a 64-bit unsigned integer"),
            sample_every: r.optional("sample_every", def.sample_every, uint::<usize>, "an integer"),
            newton_max_iters: r.optional("newton_max_iters", def.newton_max_iters, uint::<usize>, "an integer"),
            amplitude: r.optional("amplitude", def.amplitude, float, "a number"),
        };
        let pos = |x: f64| x.is_finite() && x > 0.0;
        r.check("dt", pos(s.dt), "dt > 0");
        r.check("T", s.horizon.is_finite() && s.horizon >= 0.0, "T ≥ 0");
        r.check("steady_tol", pos(s.steady_tol), "steady_tol > 0");
        r.check("flatness_tol", pos(s.flatness_tol), "flatness_tol > 0");
        r.check("sample_every", s.sample_every >= 1, "sample_every ≥ 1");
        r.check(
            "amplitude",
            s.amplitude.is_finite() && (0.0..1.0).contains(&s.amplitude),
            "0 ≤ amplitude < 1",
        );
        s
    };

    let sweep = {
        let mut r = Reader {
            section: "sweep",
            entries: sweep_entries,
            errors,
        };
        let def = SweepConfig::default();
        let s = SweepConfig {
            beta_grid: r.optional("beta_grid", def.beta_grid, list_of(float), "a comma-separated list of numbers"),
            n_grid: r.optional("N_grid", def.n_grid, list_of(uint::<usize>), "a comma-separated list of integers"),
            runs: r.optional("runs", def.runs, uint::<usize>, "an integer"),
            parallel: r.optional("parallel", def.parallel, boolean, "true or false"),
        };
        r.check(
            "beta_grid",
            s.beta_grid.iter().all(|b| b.is_finite() && *b >= 0.0),
            "beta_grid entries must be ≥ 0",
        );
        r.check(
            "N_grid",
            s.n_grid.iter().all(|&n| (1..=crate::model::MAX_PACKS).contains(&n)),
            "N_grid entries must be ≥ 1",
        );
        r.check("runs", s.runs >= 1, "runs ≥ 1");
        s
    };

    let output = {
        let mut r = Reader {
            section: "output",
            entries: output_entries,
            errors,
        };
        let def = OutputConfig::default();
        OutputConfig {
            dir: r.optional("dir", def.dir, |s| (!s.is_empty()).then(|| PathBuf::from(s)), "a path"),
            svg: r.optional("svg", def.svg, boolean, "true or false"),
            timings: r.optional("timings", def.timings, boolean, "true or false"),
        }
    };

    Some(RunConfig {
        model: model?,
        domain: domain?,
        solver,
        sweep,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[model]
d = 0.5
D = 1
omega = 0.5
k = 1
lambda = 1
mu = 1
beta = 1
N = 2

[domain]
dim = 1
lengths = 1
cells = 100
";

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.model, ModelParams::reference());
        assert_eq!(c.domain, Grid::interval(1.0, 100).unwrap());
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.sweep, SweepConfig::default());
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn negative_beta_reports_its_line() {
        let text = MINIMAL.replace("beta = 1", "beta = -1");
        let errs = parse_config(&text).unwrap_err();
        assert_eq!(
            errs,
            vec![ConfigError {
                line: Some(8),
                message: "beta ≥ 0".into()
            }]
        );
        assert_eq!(errs[0].to_string(), "line 8: beta ≥ 0");
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let text = MINIMAL.replace("k = 1\n", "k = 1\nk = 2\n");
        let errs = parse_config(&text).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("lines 5 and 6"), "{}", errs[0]);
        assert_eq!(errs[0].line, Some(6));
    }

    #[test]
    fn errors_are_aggregated() {
        let text = MINIMAL
            .replace("mu = 1", "mu = 0")
            .replace("cells = 100", "cells = 2")
            .replace("[domain]", "[domain]\ncolor = red")
            + "[plot]\nx = 1\n";
        let errs = parse_config(&text).unwrap_err();
        let all = format_errors(&errs);
        assert!(all.contains("line 7: mu > 0"), "{all}");
        assert!(all.contains("unknown key `color`"), "{all}");
        assert!(all.contains("unknown section [plot]"), "{all}");
        assert!(all.contains("at least 4 cells"), "{all}");
    }

    #[test]
    fn missing_pieces() {
        let errs = parse_config("[model]\nd = 1\n").unwrap_err();
        let all = format_errors(&errs);
        assert!(all.contains("missing section [domain]"));
        assert!(all.contains("missing key `beta` in [model]"));
        assert!(parse_config("d = 1").is_err());
        assert!(parse_config(&MINIMAL.replace("N = 2", "N = two")).is_err());
    }

    #[test]
    fn viability_is_checked() {
        let text = MINIMAL.replace("lambda = 1", "lambda = 0.25");
        let errs = parse_config(&text).unwrap_err();
        assert_eq!(errs[0].line, Some(6));
        assert_eq!(errs[0].message, "λk ≤ μω");
    }

    #[test]
    fn render_round_trips() {
        let mut c = RunConfig::default();
        c.model.competition = 0.1 + 0.2;
        c.model.packs = 64;
        c.domain = Grid::new(&[1.0, 2.5], &[50, 100]).unwrap();
        c.solver.steady_tol = 1e-11;
        c.solver.seed = u64::MAX;
        c.sweep.beta_grid = vec![0.0, 1.0 / 3.0, 1e20];
        c.sweep.n_grid = vec![1, 7];
        c.sweep.parallel = false;
        c.output.dir = "results/run 1".into();
        c.output.svg = true;
        assert_eq!(parse_config(&c.render()).unwrap(), c);
        assert_eq!(parse_config(&RunConfig::default().render()).unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_replace_values() {
        let c = parse_with_overrides(MINIMAL, &["model.beta=0.25".into(), "solver.seed = 9".into()]).unwrap();
        assert_eq!(c.model.competition, 0.25);
        assert_eq!(c.solver.seed, 9);
        assert!(parse_with_overrides(MINIMAL, &["model.gamma=1".into()]).is_err());
        assert!(parse_with_overrides(MINIMAL, &["beta=1".into()]).is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = format!("# experiment\n; note\n\n{MINIMAL}");
        assert!(parse_config(&text).is_ok());
    }
}
