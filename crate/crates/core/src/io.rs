//! Artifact writers: JSON state snapshots, CSV tables, the sweep heatmap and
//! run manifests.
//!
//! Floats are printed with Rust's shortest round-trip formatting, so output
//! is byte-stable for identical inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::covering::CoverTrial;
use crate::dynamics::{ResidualSample, SolutionLabel};
use crate::grid::{Field, Grid};
use crate::model::ModelParams;
use crate::stability::Spectrum;
use crate::sweep::SweepResult;
use crate::{seed, Result};

/// On-disk form of a state: `{grid, params, components}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub grid: Grid,
    pub params: ModelParams,
    pub components: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn new(params: &ModelParams, s: &Field) -> Self {
        Self {
            grid: s.grid.clone(),
            params: *params,
            components: s.components.clone(),
        }
    }

    pub fn into_field(self) -> Result<Field> {
        Field::new(self.grid, self.components)
    }
}

pub fn write_snapshot(path: &Path, params: &ModelParams, s: &Field) -> Result<()> {
    let json = serde_json::to_string_pretty(&Snapshot::new(params, s))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn history_csv(samples: &[ResidualSample]) -> String {
    let mut out = String::from("step,time,residual,max_u,sum_w_max\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.step, s.time, s.residual, s.max_u, s.sum_w_max
        );
    }
    out
}

/// Spectrum rows tagged with where they came from, e.g. `closed_form` or `numeric`.
pub fn spectrum_csv(sources: &[(&str, Spectrum)]) -> String {
    let mut out = String::from("re,im,multiplicity,source\n");
    for (source, spec) in sources {
        for (z, mult) in &spec.entries {
            let _ = writeln!(out, "{},{},{},{}", z.re, z.im, mult, source);
        }
    }
    out
}

/// Groups numerically computed eigenvalues that agree to `tol` into one
/// entry with a multiplicity.
pub fn group_eigenvalues(values: &[Complex64], tol: f64) -> Spectrum {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut entries: Vec<(Complex64, usize)> = Vec::new();
    for z in sorted {
        match entries.iter_mut().find(|(c, _)| (*c - z).norm() <= tol) {
            Some((_, m)) => *m += 1,
            None => entries.push((z, 1)),
        }
    }
    Spectrum { entries }
}

pub fn cover_csv(trials: &[CoverTrial]) -> String {
    let mut out = String::from("trial,m,bound,ok\n");
    for t in trials {
        let _ = writeln!(out, "{},{},{},{}", t.trial, t.m, t.bound, t.ok);
    }
    out
}

/// `beta,N,label,flatness,runs,runtime_s`; the runtime column is left empty
/// unless `timings` is set.
pub fn sweep_csv(r: &SweepResult, timings: bool) -> String {
    let mut out = String::from("beta,N,label,flatness,runs,runtime_s\n");
    for c in &r.cells {
        let runtime = if timings {
            format!("{:.3}", c.runtime_s)
        } else {
            String::new()
        };
        let _ = writeln!(
            out,
            "{},{},{},{:e},{},{}",
            c.beta,
            c.packs,
            c.classification.label.as_str(),
            c.classification.flatness,
            c.runs.len(),
            runtime
        );
    }
    out
}

fn label_color(label: SolutionLabel) -> &'static str {
    match label {
        SolutionLabel::Constant => "#4c9a6a",
        SolutionLabel::NonConstant => "#c8553d",
        SolutionLabel::NoConvergence => "#9e9e9e",
    }
}

/// Heatmap with β on the horizontal axis and N on the vertical axis (grid
/// order, not to scale), one colored cell per classification.
pub fn sweep_svg(r: &SweepResult) -> String {
    const CELL: usize = 40;
    const LEFT: usize = 60;
    const BOTTOM: usize = 50;
    let (nb, nn) = (r.betas.len(), r.packs.len());
    let width = LEFT + nb * CELL + 150;
    let height = nn * CELL + BOTTOM + 20;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    for ni in 0..nn {
        let y = 10 + (nn - 1 - ni) * CELL;
        for bi in 0..nb {
            let c = r.cell(bi, ni);
            let x = LEFT + bi * CELL;
            let _ = writeln!(
                out,
                "  <rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{}\" stroke=\"white\"><title>beta={} N={} {} flatness={:e}</title></rect>",
                label_color(c.classification.label),
                c.beta,
                c.packs,
                c.classification.label.as_str(),
                c.classification.flatness
            );
        }
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
            LEFT - 6,
            y + CELL / 2 + 4,
            r.packs[ni]
        );
    }
    let base = 10 + nn * CELL;
    for (bi, b) in r.betas.iter().enumerate() {
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{b}</text>",
            LEFT + bi * CELL + CELL / 2,
            base + 15
        );
    }
    let _ = writeln!(
        out,
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">β</text>",
        LEFT + nb * CELL / 2,
        base + 38
    );
    let _ = writeln!(
        out,
        "  <text x=\"15\" y=\"{}\" text-anchor=\"middle\">N</text>",
        10 + nn * CELL / 2
    );
    for (i, label) in [
        SolutionLabel::Constant,
        SolutionLabel::NonConstant,
        SolutionLabel::NoConvergence,
    ]
    .into_iter()
    .enumerate()
    {
        let (x, y) = (LEFT + nb * CELL + 15, 10 + i * 22);
        let _ = writeln!(
            out,
            "  <rect x=\"{x}\" y=\"{y}\" width=\"14\" height=\"14\" fill=\"{}\"/>\n  <text x=\"{}\" y=\"{}\">{}</text>",
            label_color(label),
            x + 20,
            y + 11,
            label.as_str()
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Provenance record written next to every run's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// FNV-1a hash of the rendered configuration, in hex.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, rendered_config: &str, seed: u64, outputs: Vec<String>) -> Self {
        Self {
            command: command.to_string(),
            config_hash: format!("{:016x}", seed::fnv1a64(rendered_config.as_bytes())),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(self)? + "\n",
        )?;
        Ok(())
    }
}
