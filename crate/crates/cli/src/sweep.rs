use anyhow::{bail, Result};
use jjbarrier::fitting::DistributionKind;
use jjbarrier::io::write_table;
use jjbarrier::mc::{
    steps_inclusive, sweep, EnsembleConfig, Geometry, MatchTargets, SweepCell, SweepSpec, VoltageGrid,
};
use serde::{Deserialize, Serialize};

use crate::manifest::Outputs;
use crate::plot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Normal,
    Lognormal,
}

impl From<Kind> for DistributionKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Normal => DistributionKind::Normal,
            Kind::Lognormal => DistributionKind::Lognormal,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub kind: Kind,
    pub mean_start: f64,
    pub mean_end: f64,
    pub mean_step: f64,
    pub sd_start: f64,
    pub sd_end: f64,
    pub sd_step: f64,
    /// V.
    pub barrier_height: f64,
    pub n_junctions: usize,
    pub width_nm: f64,
    pub height_nm: f64,
    pub pixel_nm: f64,
    /// Largest bias of the Simmons refit grid, V.
    pub fit_v_max: f64,
    pub fit_points: usize,
    pub target_r: f64,
    pub r_tol: f64,
    pub spread_max: f64,
    pub t_center: f64,
    pub t_tol: f64,
    pub phi_center: f64,
    pub phi_tol: f64,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        let e = EnsembleConfig::default();
        let g = Geometry::default();
        let t = MatchTargets::default();
        Self {
            kind: Kind::Lognormal,
            mean_start: 0.7,
            mean_end: 1.4,
            mean_step: 0.025,
            sd_start: 0.0,
            sd_end: 0.4,
            sd_step: 0.025,
            barrier_height: e.barrier_height,
            n_junctions: e.n_junctions,
            width_nm: g.width_nm,
            height_nm: g.height_nm,
            pixel_nm: g.pixel_nm,
            fit_v_max: e.fit_grid.end,
            fit_points: e.fit_grid.points,
            target_r: t.target_r,
            r_tol: t.r_tol,
            spread_max: t.spread_max,
            t_center: t.t_center,
            t_tol: t.t_tol,
            phi_center: t.phi_center,
            phi_tol: t.phi_tol,
            seed: 1,
        }
    }
}

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Thickness distribution.
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    mean_start: Option<f64>,
    #[arg(long)]
    mean_end: Option<f64>,
    #[arg(long)]
    mean_step: Option<f64>,
    #[arg(long)]
    sd_start: Option<f64>,
    #[arg(long)]
    sd_end: Option<f64>,
    #[arg(long)]
    sd_step: Option<f64>,
    /// V; presets 0.8, 1.0, 1.22, 1.5.
    #[arg(long)]
    barrier_height: Option<f64>,
    #[arg(long)]
    n_junctions: Option<usize>,
    #[arg(long)]
    width_nm: Option<f64>,
    #[arg(long)]
    height_nm: Option<f64>,
    #[arg(long)]
    pixel_nm: Option<f64>,
    #[arg(long)]
    fit_v_max: Option<f64>,
    #[arg(long)]
    fit_points: Option<usize>,
    #[arg(long)]
    target_r: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Config {
    fn spec(&self) -> Result<SweepSpec> {
        let means = steps_inclusive(self.mean_start, self.mean_end, self.mean_step)?;
        let sds = steps_inclusive(self.sd_start, self.sd_end, self.sd_step)?;
        if means.iter().any(|m| !(*m > 0.0)) {
            bail!("thickness means must be positive");
        }
        if !(self.barrier_height > 0.0) {
            bail!("barrier height must be positive");
        }
        if self.fit_v_max / 2.0 >= self.barrier_height {
            bail!(
                "fit grid up to {} V leaves the Simmons domain for barrier height {} V",
                self.fit_v_max,
                self.barrier_height
            );
        }
        if self.n_junctions < 2 || self.fit_points < 3 {
            bail!("need at least 2 junctions and 3 fit points");
        }
        let targets = MatchTargets {
            target_r: self.target_r,
            r_tol: self.r_tol,
            spread_max: self.spread_max,
            t_center: self.t_center,
            t_tol: self.t_tol,
            phi_center: self.phi_center,
            phi_tol: self.phi_tol,
        };
        targets.validate()?;
        let geometry = Geometry {
            width_nm: self.width_nm,
            height_nm: self.height_nm,
            pixel_nm: self.pixel_nm,
        };
        let (w, h) = geometry.pixels();
        if w == 0 || h == 0 {
            bail!("junction smaller than one pixel");
        }
        Ok(SweepSpec {
            kind: self.kind.into(),
            means,
            sds,
            ensemble: EnsembleConfig {
                n_junctions: self.n_junctions,
                barrier_height: self.barrier_height,
                fit_grid: VoltageGrid {
                    start: 0.0,
                    end: self.fit_v_max,
                    points: self.fit_points,
                },
                targets,
                ..EnsembleConfig::default()
            },
            geometry,
            seed: self.seed,
        })
    }
}

type Metric = (&'static str, &'static str, fn(&SweepCell) -> f64);

const METRICS: [Metric; 5] = [
    ("resistance", "median R (Ω)", |c| c.metrics.median_resistance),
    ("spread", "R spread (%)", |c| c.metrics.resistance_spread),
    ("phi_fit", "refit φ (V)", |c| c.metrics.refit_barrier_height),
    ("t_fit", "refit t (nm)", |c| c.metrics.refit_thickness),
    ("match_count", "criteria met", |c| c.metrics.match_count as f64),
];

pub fn run(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let spec = cfg.spec()?;
    log::info!(
        "sweeping {} means x {} sds, {} junctions each",
        spec.means.len(),
        spec.sds.len(),
        spec.ensemble.n_junctions
    );
    let cells = sweep(&spec)?;

    let rows = cells.iter().map(|c| {
        let m = &c.metrics;
        vec![
            c.mean.to_string(),
            c.sd.to_string(),
            c.seed.to_string(),
            m.n_shorted.to_string(),
            m.n_fit_failed.to_string(),
            m.valid.to_string(),
            m.median_resistance.to_string(),
            m.resistance_spread.to_string(),
            m.refit_thickness.to_string(),
            m.refit_barrier_height.to_string(),
            m.match_count.to_string(),
        ]
    });
    write_table(
        &out.file("sweep.csv"),
        &[
            "mean_nm",
            "sd_nm",
            "seed",
            "n_shorted",
            "n_fit_failed",
            "valid",
            "median_resistance_ohm",
            "resistance_spread_pct",
            "t_fit_nm",
            "phi_fit_V",
            "match_count",
        ],
        rows,
    )?;

    for (name, label, f) in METRICS {
        let rows = cells
            .iter()
            .map(|c| vec![c.mean.to_string(), c.sd.to_string(), f(c).to_string()]);
        write_table(
            &out.file(&format!("heatmap_{name}.csv")),
            &["mean_nm", "sd_nm", "value"],
            rows,
        )?;
        let grid: Vec<(usize, usize, f64)> = cells.iter().map(|c| (c.mean_index, c.sd_index, f(c))).collect();
        let svg = plot::heatmap(label, &spec.means, &spec.sds, "mean t (nm)", "sd t (nm)", &grid);
        out.write_text(&format!("heatmap_{name}.svg"), &svg)?;
    }
    let best = cells.iter().map(|c| c.metrics.match_count).max().unwrap_or(0);
    log::info!("best cell meets {best} of 4 criteria");
    Ok(())
}
