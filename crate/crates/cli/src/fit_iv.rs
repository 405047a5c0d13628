use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use jjbarrier::breakdown::{detect_breakdown, DEFAULT_JUMP_FACTOR};
use jjbarrier::fitting::{fit_simmons, AreaMode};
use jjbarrier::io::{read_iv_csv, write_records, JunctionIvData, JunctionRecord};
use jjbarrier::simmons::{low_voltage_resistance, SimmonsParams, DEFAULT_LINEAR_VMAX};
use jjbarrier::stats::{self, Histogram};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::Outputs;
use crate::plot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AreaChoice {
    Fixed,
    Free,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// IV CSV: `voltage_V,current_A`, optionally with `junction_id`, `wafer_x`, `wafer_y`.
    pub input: Option<PathBuf>,
    pub area: AreaChoice,
    /// nm², used when `area = "fixed"` and as the starting value otherwise.
    pub area_nm2: f64,
    /// Largest |V| in the low-bias resistance fit.
    pub v_linear_max: f64,
    /// Largest |V| in the Simmons fit; also capped just below breakdown.
    pub fit_v_max: Option<f64>,
    pub t_init: f64,
    pub phi_init: f64,
    pub jump_factor: f64,
    pub bins: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            input: None,
            area: AreaChoice::Fixed,
            area_nm2: 240.0 * 240.0,
            v_linear_max: DEFAULT_LINEAR_VMAX,
            fit_v_max: None,
            t_init: 1.0,
            phi_init: 1.5,
            jump_factor: DEFAULT_JUMP_FACTOR,
            bins: 20,
        }
    }
}

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// IV data CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Hold the area fixed or fit it.
    #[arg(long, value_enum)]
    area: Option<AreaChoice>,
    /// Junction area, nm².
    #[arg(long)]
    area_nm2: Option<f64>,
    #[arg(long)]
    v_linear_max: Option<f64>,
    #[arg(long)]
    fit_v_max: Option<f64>,
    #[arg(long)]
    t_init: Option<f64>,
    #[arg(long)]
    phi_init: Option<f64>,
    #[arg(long)]
    jump_factor: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Debug, Serialize)]
struct ParamSummary {
    count: usize,
    median: Option<f64>,
    mean: Option<f64>,
    sd: Option<f64>,
}

impl ParamSummary {
    fn of(values: &[f64]) -> Self {
        Self {
            count: values.len(),
            median: stats::median(values),
            mean: stats::mean(values),
            sd: stats::sample_sd(values),
        }
    }
}

#[derive(Debug, Serialize)]
struct Summary {
    n_junctions: usize,
    n_converged: usize,
    n_failed: usize,
    resistance_ohm: ParamSummary,
    /// Sample sd over median, %.
    resistance_spread_pct: Option<f64>,
    t_fit_nm: ParamSummary,
    phi_fit_v: ParamSummary,
    v_bd_v: ParamSummary,
    failures: Vec<String>,
}

fn fit_junction(cfg: &Config, j: &JunctionIvData) -> (JunctionRecord, Vec<String>) {
    let mut notes = Vec::new();
    let mut rec = JunctionRecord {
        junction_id: j.junction_id.clone(),
        wafer_x: j.wafer.map(|w| w.0),
        wafer_y: j.wafer.map(|w| w.1),
        resistance_ohm: None,
        t_fit_nm: None,
        phi_fit_v: None,
        v_bd_v: None,
        residual: None,
        converged: false,
    };
    match detect_breakdown(&j.curve, cfg.jump_factor) {
        Ok(v) => rec.v_bd_v = v,
        Err(e) => notes.push(format!("breakdown: {e}")),
    }
    match low_voltage_resistance(&j.curve, cfg.v_linear_max) {
        Ok(r) => rec.resistance_ohm = Some(r),
        Err(e) => notes.push(format!("resistance: {e}")),
    }
    let vmax = match (rec.v_bd_v, cfg.fit_v_max) {
        (Some(b), Some(f)) => b.min(f),
        (Some(b), None) => b,
        (None, Some(f)) => f,
        (None, None) => f64::INFINITY,
    };
    // Points strictly below breakdown, symmetric in bias.
    let window = j.curve.window(-vmax, vmax);
    let extent = window.voltages().fold(0.0f64, |m, v| m.max(v.abs()));
    let init = SimmonsParams {
        area: cfg.area_nm2,
        thickness: cfg.t_init,
        barrier_height: cfg.phi_init.max(1.05 * extent / 2.0),
    };
    let mode = match cfg.area {
        AreaChoice::Fixed => AreaMode::Fixed(cfg.area_nm2),
        AreaChoice::Free => AreaMode::Free,
    };
    match fit_simmons(&window, mode, init) {
        Ok(fit) => {
            let p = fit.simmons();
            rec.t_fit_nm = Some(p.thickness);
            rec.phi_fit_v = Some(p.barrier_height);
            rec.residual = Some(fit.residual_norm);
            rec.converged = fit.converged;
            if !fit.converged {
                notes.push(format!(
                    "fit stopped at {} iterations without converging",
                    fit.iterations
                ));
            }
        }
        Err(e) => notes.push(format!("simmons fit: {e}")),
    }
    (rec, notes)
}

fn write_hist(out: &mut Outputs, name: &str, label: &str, values: &[f64], bins: usize) -> Result<()> {
    if values.is_empty() {
        return Ok(());
    }
    let hist = Histogram::auto(values, bins, 1e-3 * values[0].abs().max(1e-12))?;
    let rows = hist
        .counts
        .iter()
        .enumerate()
        .map(|(i, c)| vec![hist.edges[i].to_string(), hist.edges[i + 1].to_string(), c.to_string()]);
    jjbarrier::io::write_table(&out.file(&format!("hist_{name}.csv")), &["lo", "hi", "count"], rows)?;
    out.write_text(&format!("hist_{name}.svg"), &plot::histogram(label, label, &hist))
}

pub fn run(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let Some(input) = &cfg.input else {
        bail!("fit-iv needs --input (or `input` in the [fit_iv] config table)");
    };
    if !(cfg.area_nm2 > 0.0) || !(cfg.v_linear_max > 0.0) || cfg.bins == 0 {
        bail!("area_nm2 and v_linear_max must be positive and bins at least 1");
    }
    out.input(input);
    let data = read_iv_csv(input).with_context(|| format!("reading {}", input.display()))?;
    if data.is_empty() {
        bail!("{} contains no junctions", input.display());
    }
    log::info!("fitting {} junctions from {}", data.len(), input.display());

    let fitted: Vec<(JunctionRecord, Vec<String>)> = data.par_iter().map(|j| fit_junction(cfg, j)).collect();
    let mut failures = Vec::new();
    for (rec, notes) in &fitted {
        for n in notes {
            log::warn!("junction {}: {n}", rec.junction_id);
            failures.push(format!("{}: {n}", rec.junction_id));
        }
    }
    let records: Vec<JunctionRecord> = fitted.into_iter().map(|f| f.0).collect();
    write_records(&out.file("records.csv"), &records)?;

    let collect = |f: fn(&JunctionRecord) -> Option<f64>| records.iter().filter_map(f).collect::<Vec<f64>>();
    let r = collect(|r| r.resistance_ohm);
    let t = collect(|r| r.t_fit_nm);
    let phi = collect(|r| r.phi_fit_v);
    let vbd = collect(|r| r.v_bd_v);
    let n_converged = records.iter().filter(|r| r.converged).count();
    let spread = stats::sample_sd(&r).zip(stats::median(&r)).map(|(s, m)| 100.0 * s / m);
    let summary = Summary {
        n_junctions: records.len(),
        n_converged,
        n_failed: records.len() - n_converged,
        resistance_ohm: ParamSummary::of(&r),
        resistance_spread_pct: spread,
        t_fit_nm: ParamSummary::of(&t),
        phi_fit_v: ParamSummary::of(&phi),
        v_bd_v: ParamSummary::of(&vbd),
        failures,
    };
    out.write_json("summary.json", &summary)?;
    write_hist(out, "resistance", "R (Ω)", &r, cfg.bins)?;
    write_hist(out, "t_fit", "t (nm)", &t, cfg.bins)?;
    write_hist(out, "phi_fit", "φ (V)", &phi, cfg.bins)?;
    write_hist(out, "v_bd", "V_bd (V)", &vbd, cfg.bins)?;
    log::info!(
        "{} of {} fits converged; median R {:?} Ω, t {:?} nm, phi {:?} V",
        n_converged,
        records.len(),
        summary.resistance_ohm.median,
        summary.t_fit_nm.median,
        summary.phi_fit_v.median
    );
    Ok(())
}
