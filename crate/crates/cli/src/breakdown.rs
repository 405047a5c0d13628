use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use jjbarrier::breakdown::{
    area_fraction_at, calibrate_dielectric_strength, cumulative_conductance, detect_breakdown, group_by_breakdown,
    min_thickness_samples, positive_minima, BreakdownRecord, DEFAULT_GROUP_THRESHOLD, DEFAULT_JUMP_FACTOR,
    DEFAULT_MESH_NM,
};
use jjbarrier::fitting::fit_double_gaussian;
use jjbarrier::io::{read_iv_csv, write_table};
use jjbarrier::mc::{sample_barrier, ThicknessDistribution};
use jjbarrier::simmons::{low_voltage_resistance, DEFAULT_LINEAR_VMAX};
use jjbarrier::stats::{self, Histogram};
use serde::{Deserialize, Serialize};

use crate::manifest::Outputs;
use crate::plot;
use crate::sweep::Kind;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Measured IV data; when absent, thinnest points are simulated.
    pub input: Option<PathBuf>,
    pub kind: Kind,
    /// nm.
    pub mean: f64,
    /// nm.
    pub sd: f64,
    pub width_nm: f64,
    pub height_nm: f64,
    pub mesh_nm: f64,
    pub n_junctions: usize,
    /// Mean breakdown voltage to calibrate the dielectric strength against, V.
    pub target_vbd: Option<f64>,
    /// Also write the cumulative conductance of one sampled barrier.
    pub cumulative: bool,
    /// Barrier height for the cumulative conductance, V.
    pub barrier_height: f64,
    /// Pixel of the cumulative-conductance barrier, nm.
    pub pixel_nm: f64,
    pub jump_factor: f64,
    /// V; splits the measured junctions into low and high breakdown groups.
    pub threshold: f64,
    pub v_linear_max: f64,
    pub bins: Option<usize>,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            input: None,
            kind: Kind::Lognormal,
            mean: 1.0,
            sd: 0.1,
            width_nm: 240.0,
            height_nm: 240.0,
            mesh_nm: DEFAULT_MESH_NM,
            n_junctions: 597,
            target_vbd: None,
            cumulative: false,
            barrier_height: 1.22,
            pixel_nm: 1.0,
            jump_factor: DEFAULT_JUMP_FACTOR,
            threshold: DEFAULT_GROUP_THRESHOLD,
            v_linear_max: DEFAULT_LINEAR_VMAX,
            bins: None,
            seed: 1,
        }
    }
}

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// IV data CSV; switches to measured-data analysis.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    mean: Option<f64>,
    #[arg(long)]
    sd: Option<f64>,
    #[arg(long)]
    width_nm: Option<f64>,
    #[arg(long)]
    height_nm: Option<f64>,
    /// Thinnest-point mesh, nm (multiple of 0.001).
    #[arg(long)]
    mesh_nm: Option<f64>,
    #[arg(long)]
    n_junctions: Option<usize>,
    #[arg(long)]
    target_vbd: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    cumulative: bool,
    #[arg(long)]
    barrier_height: Option<f64>,
    #[arg(long)]
    pixel_nm: Option<f64>,
    #[arg(long)]
    jump_factor: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    v_linear_max: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn hist_of(values: &[f64], bins: Option<usize>) -> Result<Histogram> {
    let bins = bins.or_else(|| stats::freedman_diaconis_bins(values)).unwrap_or(10);
    Ok(Histogram::auto(values, bins, 1e-3)?)
}

fn write_hist(out: &mut Outputs, name: &str, label: &str, hist: &Histogram) -> Result<()> {
    let rows = hist
        .counts
        .iter()
        .enumerate()
        .map(|(i, c)| vec![hist.edges[i].to_string(), hist.edges[i + 1].to_string(), c.to_string()]);
    write_table(&out.file(&format!("{name}.csv")), &["lo", "hi", "count"], rows)?;
    out.write_text(&format!("{name}.svg"), &plot::histogram(label, label, hist))
}

#[derive(Debug, Serialize)]
struct SimulatedSummary {
    n_junctions: usize,
    n_non_positive: usize,
    mean_min_thickness_nm: Option<f64>,
    sd_min_thickness_nm: Option<f64>,
    /// Over positive minima.
    relative_sd: Option<f64>,
    /// Area fraction carrying half the conductance.
    a50: Option<f64>,
}

fn run_simulated(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let dist = ThicknessDistribution::new(cfg.kind.into(), cfg.mean, cfg.sd)?;
    log::info!(
        "sampling thinnest points of {} junctions on a {} nm mesh",
        cfg.n_junctions,
        cfg.mesh_nm
    );
    let minima = min_thickness_samples(
        &dist,
        cfg.width_nm,
        cfg.height_nm,
        cfg.mesh_nm,
        cfg.n_junctions,
        cfg.seed,
    )?;
    write_table(
        &out.file("minima.csv"),
        &["junction", "t_min_nm"],
        minima
            .iter()
            .enumerate()
            .map(|(k, t)| vec![k.to_string(), t.to_string()]),
    )?;
    let (kept, removed) = positive_minima(&minima);
    if kept.is_empty() {
        bail!("every thinnest point is non-positive; the barrier is shorted everywhere");
    }
    write_hist(out, "hist_min_thickness", "t_min (nm)", &hist_of(&kept, cfg.bins)?)?;

    if let Some(target) = cfg.target_vbd {
        let cal = calibrate_dielectric_strength(&kept, target)?;
        out.write_json("calibration.json", &cal)?;
        let vbd = cal.breakdown_voltages(&kept);
        write_hist(out, "hist_vbd", "V_bd (V)", &hist_of(&vbd, cfg.bins)?)?;
        log::info!("dielectric strength {:.4} GV/m", cal.e_ds);
    }

    let mut a50 = None;
    if cfg.cumulative {
        let field = sample_barrier(&dist, cfg.width_nm, cfg.height_nm, cfg.pixel_nm, cfg.seed, 0)?;
        let curve = cumulative_conductance(&field, cfg.barrier_height)?;
        a50 = area_fraction_at(&curve, 0.5);
        write_table(
            &out.file("cumulative_conductance.csv"),
            &["area_fraction", "conductance_fraction"],
            curve.iter().map(|p| vec![p.0.to_string(), p.1.to_string()]),
        )?;
        let diag = vec![(0.0, 0.0), (1.0, 1.0)];
        let svg = plot::lines(
            "cumulative conductance",
            "area fraction",
            "conductance fraction",
            &[("barrier", curve), ("uniform", diag)],
        );
        out.write_text("cumulative_conductance.svg", &svg)?;
    }

    let mean = stats::mean(&kept);
    let sd = stats::sample_sd(&kept);
    out.write_json(
        "summary.json",
        &SimulatedSummary {
            n_junctions: minima.len(),
            n_non_positive: removed,
            mean_min_thickness_nm: mean,
            sd_min_thickness_nm: sd,
            relative_sd: mean.zip(sd).map(|(m, s)| s / m),
            a50,
        },
    )
}

fn run_measured(cfg: &Config, input: &std::path::Path, out: &mut Outputs) -> Result<()> {
    out.input(input);
    let data = read_iv_csv(input).with_context(|| format!("reading {}", input.display()))?;
    if data.is_empty() {
        bail!("{} contains no junctions", input.display());
    }
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for j in &data {
        let vbd = match detect_breakdown(&j.curve, cfg.jump_factor) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("junction {}: {e}", j.junction_id);
                None
            }
        };
        let r = match low_voltage_resistance(&j.curve, cfg.v_linear_max) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("junction {}: {e}", j.junction_id);
                None
            }
        };
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        rows.push(vec![j.junction_id.clone(), cell(vbd), cell(r)]);
        if let (Some(v), Some(r)) = (vbd, r) {
            records.push(BreakdownRecord::new(j.junction_id.clone(), v, r)?);
        }
    }
    write_table(
        &out.file("breakdown.csv"),
        &["junction_id", "v_bd_V", "resistance_ohm"],
        rows,
    )?;
    if records.len() < 2 {
        bail!(
            "only {} junctions show a breakdown with a valid resistance",
            records.len()
        );
    }
    let vbd: Vec<f64> = records.iter().map(|r| r.breakdown_voltage).collect();
    let grouping = group_by_breakdown(&records, cfg.threshold)?;
    let dg = match fit_double_gaussian(&vbd, cfg.bins) {
        Ok(f) => Some(f),
        Err(e) => {
            log::warn!("double-Gaussian fit failed: {e}");
            None
        }
    };
    if let Some(f) = &dg {
        write_hist(out, "hist_vbd", "V_bd (V)", &f.histogram)?;
    } else {
        write_hist(out, "hist_vbd", "V_bd (V)", &hist_of(&vbd, cfg.bins)?)?;
    }
    let mean = stats::mean(&vbd).unwrap();
    let sd = stats::sample_sd(&vbd).unwrap();
    out.write_json(
        "summary.json",
        &serde_json::json!({
            "n_junctions": data.len(),
            "n_breakdown": records.len(),
            "mean_vbd_V": mean,
            "sd_vbd_V": sd,
            "relative_sd": sd / mean,
            "double_gaussian": dg.as_ref().map(|f| serde_json::json!({
                "params": f.params,
                "midpoint_V": f.midpoint,
                "unimodal": f.unimodal,
                "converged": f.converged,
            })),
            "grouping": grouping,
        }),
    )?;
    log::info!(
        "{} breakdowns; groups {} low / {} high at {} V, delta R {:?} Ω",
        records.len(),
        grouping.low.count,
        grouping.high.count,
        cfg.threshold,
        grouping.delta_r
    );
    Ok(())
}

pub fn run(cfg: &Config, out: &mut Outputs) -> Result<()> {
    match &cfg.input {
        Some(input) => run_measured(cfg, input, out),
        None => run_simulated(cfg, out),
    }
}
