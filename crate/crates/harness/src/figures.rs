//! Clustering-versus-tail-weight figures: one CSV and one SVG per `r` panel.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::{CalibrationConfig, CalibrationChoice, ExperimentSpec, ModelKind, DEFAULT_DF};
use crate::error::HarnessError;
use crate::grid::{run_grid, GridOutcome};
use crate::report::{clustering_svg, write_csv_file};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    /// statistics are the moving-average values
    Fig1,
    /// statistics are t-statistics over n = 10 columns
    Fig2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Full,
    Reduced,
}

pub const FIGURE_SEED: u64 = 20_050_101;
pub const PANEL_RADII: [usize; 4] = [1, 3, 10, 50];

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
        }
    }

    pub fn model(self) -> ModelKind {
        match self {
            Figure::Fig1 => ModelKind::Model1,
            Figure::Fig2 => ModelKind::Model2 { n: 10 },
        }
    }
}

/// Grid behind a figure preset.
pub fn preset_spec(which: Figure, preset: Preset) -> ExperimentSpec {
    let (nu, repetitions, budget) = match preset {
        Preset::Full => (vec![500, 1000, 2000, 5000, 10_000], 10_000, 200_000_000),
        Preset::Reduced => (vec![500, 2000, 10_000], 2_000, 20_000_000),
    };
    ExperimentSpec {
        model: which.model(),
        nu,
        r: PANEL_RADII.to_vec(),
        df: DEFAULT_DF.to_vec(),
        alpha: 0.05,
        repetitions,
        calibration: CalibrationConfig {
            method: CalibrationChoice::Auto,
            budget,
        },
        master_seed: FIGURE_SEED,
        threads: None,
        weights: None,
    }
}

fn panel_letter(i: usize) -> char {
    (b'a' + (i % 26) as u8) as char
}

pub struct FigureOutput {
    pub files: Vec<PathBuf>,
    pub outcome: GridOutcome,
}

/// Runs `spec` and writes `<name>_<panel>.csv`/`.svg` per `r` plus `<name>_meta.json`.
pub fn write_figure(name: &str, spec: &ExperimentSpec, out_dir: &Path) -> Result<FigureOutput, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let outcome = run_grid(spec)?;
    let mut files = Vec::new();
    let mut radii = spec.radii();
    radii.sort_unstable();
    radii.dedup();
    for (i, r) in radii.iter().enumerate() {
        let rows: Vec<_> = outcome.rows.iter().filter(|row| row.r == *r).cloned().collect();
        let letter = panel_letter(i);
        let csv_path = out_dir.join(format!("{name}_{letter}.csv"));
        write_csv_file(&rows, &csv_path)?;
        let svg_path = out_dir.join(format!("{name}_{letter}.svg"));
        let title = format!("({letter}) {} r = {r}", spec.model.id());
        std::fs::write(&svg_path, clustering_svg(&rows, &title)).map_err(|e| HarnessError::io(&svg_path, e))?;
        files.push(csv_path);
        files.push(svg_path);
    }
    let meta_path = out_dir.join(format!("{name}_meta.json"));
    write_meta(spec, &outcome, &meta_path)?;
    files.push(meta_path);
    Ok(FigureOutput { files, outcome })
}

/// Sidecar metadata: the spec, failed cells and timings.
pub fn write_meta(spec: &ExperimentSpec, outcome: &GridOutcome, path: &Path) -> Result<(), HarnessError> {
    let df_is_default = spec.df == DEFAULT_DF;
    let meta = json!({
        "spec": spec,
        "df_grid": if df_is_default { "default choice {3, 4, 6, 10, 20, inf}" } else { "from config" },
        "failures": outcome.failures,
        "wall_time_secs": outcome.rows.iter().map(|r| json!({
            "nu": r.nu, "r": r.r, "df": r.df, "secs": r.wall_time_secs,
        })).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&meta).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

pub fn reproduce_figure(
    which: Figure,
    preset: Preset,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<FigureOutput, HarnessError> {
    let mut spec = preset_spec(which, preset);
    spec.threads = threads;
    write_figure(which.name(), &spec, out_dir)
}
