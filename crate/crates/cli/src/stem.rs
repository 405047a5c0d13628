use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use jjbarrier::edge::{default_k, multi_delta_summary, DetectOptions, Orientation, DEFAULT_DELTAS};
use jjbarrier::grid::{EdsImage, TopographyMap};
use jjbarrier::io::{read_grid, write_grid, write_pgm16, write_table};
use jjbarrier::rng::KeyedRng;
use jjbarrier::stem::{
    build_lamella, degrade, project, synth_topography, tip_convolve, LamellaConfig, LamellaRegion, NoiseModel,
    ProjectionAxis, DEFAULT_BARRIER_NM, DEFAULT_BLUR_RADIUS_NM, DEFAULT_LAMELLA_DEPTH_NM, DEFAULT_LAMELLA_LENGTH_NM,
    DEFAULT_VOXEL_NM, DEFAULT_Z_MARGIN_NM,
};
use serde::{Deserialize, Serialize};

use crate::manifest::Outputs;
use crate::plot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Depth,
    Length,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BandOrientation {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Grid file of heights (nm); when absent a Gaussian surface is synthesized.
    pub topography: Option<PathBuf>,
    /// nm.
    pub rms: f64,
    /// nm.
    pub correlation_length: f64,
    /// Pixel of the synthesized surface, nm.
    pub topo_pixel_nm: f64,
    /// AFM tip radius applied to the surface, nm (0 = none).
    pub tip_radius: f64,
    pub barrier_thickness: f64,
    pub voxel_nm: f64,
    pub z_margin: f64,
    pub length_nm: f64,
    pub depth_nm: f64,
    /// Lamellae cut side by side along the depth axis.
    pub regions: usize,
    pub axis: Axis,
    pub noise_mean: f64,
    pub noise_sd: f64,
    /// Gaussian blur sd, nm.
    pub blur_nm: f64,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let noise = NoiseModel::default();
        Self {
            topography: None,
            rms: 0.0,
            correlation_length: 10.0,
            topo_pixel_nm: 0.5,
            tip_radius: 0.0,
            barrier_thickness: DEFAULT_BARRIER_NM,
            voxel_nm: DEFAULT_VOXEL_NM,
            z_margin: DEFAULT_Z_MARGIN_NM,
            length_nm: DEFAULT_LAMELLA_LENGTH_NM,
            depth_nm: DEFAULT_LAMELLA_DEPTH_NM,
            regions: 1,
            axis: Axis::Depth,
            noise_mean: noise.mean,
            noise_sd: noise.sd,
            blur_nm: DEFAULT_BLUR_RADIUS_NM,
            seed: 1,
        }
    }
}

#[derive(Debug, clap::Args, Serialize)]
pub struct SimulateArgs {
    /// Height grid to cut instead of a synthetic surface.
    #[arg(long)]
    topography: Option<PathBuf>,
    /// Surface roughness, nm (0 = flat).
    #[arg(long)]
    rms: Option<f64>,
    #[arg(long)]
    correlation_length: Option<f64>,
    #[arg(long)]
    topo_pixel_nm: Option<f64>,
    #[arg(long)]
    tip_radius: Option<f64>,
    #[arg(long)]
    barrier_thickness: Option<f64>,
    #[arg(long)]
    voxel_nm: Option<f64>,
    #[arg(long)]
    z_margin: Option<f64>,
    #[arg(long)]
    length_nm: Option<f64>,
    #[arg(long)]
    depth_nm: Option<f64>,
    #[arg(long)]
    regions: Option<usize>,
    #[arg(long, value_enum)]
    axis: Option<Axis>,
    #[arg(long)]
    noise_mean: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    blur_nm: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn load_topography(cfg: &SimulateConfig, out: &mut Outputs) -> Result<TopographyMap> {
    let topo = match &cfg.topography {
        Some(path) => {
            out.input(path);
            let (px, grid) = read_grid(path).with_context(|| format!("reading {}", path.display()))?;
            TopographyMap::new(px, grid)?
        }
        None => synth_topography(
            cfg.length_nm,
            cfg.depth_nm * cfg.regions as f64,
            cfg.topo_pixel_nm,
            cfg.rms,
            cfg.correlation_length,
            cfg.seed,
        )?,
    };
    Ok(tip_convolve(&topo, cfg.tip_radius)?)
}

pub fn run_simulate(cfg: &SimulateConfig, out: &mut Outputs) -> Result<()> {
    if cfg.regions == 0 {
        bail!("need at least one region");
    }
    let topo = load_topography(cfg, out)?;
    write_grid(&out.file("topography.txt"), topo.pixel_size, &topo.heights)?;
    let lamella_cfg = LamellaConfig {
        barrier_thickness: cfg.barrier_thickness,
        voxel: cfg.voxel_nm,
        z_margin: cfg.z_margin,
    };
    let noise = NoiseModel {
        mean: cfg.noise_mean,
        sd: cfg.noise_sd,
    };
    let axis = match cfg.axis {
        Axis::Depth => ProjectionAxis::Depth,
        Axis::Length => ProjectionAxis::Length,
    };
    let rng = KeyedRng::new(cfg.seed);
    for i in 0..cfg.regions {
        let region = LamellaRegion {
            x0: 0.0,
            y0: cfg.depth_nm * i as f64,
            length: cfg.length_nm,
            depth: cfg.depth_nm,
        };
        let lamella = build_lamella(&topo, &region, &lamella_cfg)?;
        let clean = project(&lamella, axis)?;
        let image = degrade(&clean, &noise, cfg.blur_nm, rng.derive_seed(i as u32, 1))?;
        write_grid(&out.file(&format!("region_{i}.txt")), image.pixel_size, &image.values)?;
        write_pgm16(&out.file(&format!("region_{i}.pgm")), &image.values)?;
        log::info!(
            "region {i}: {} x {} image at {} nm/pixel",
            image.width(),
            image.height(),
            image.pixel_size
        );
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Grid files written by `stem simulate` (or measured maps in that format).
    pub images: Vec<PathBuf>,
    pub deltas: Vec<f64>,
    /// Kernel half-length in pixels; default about 0.5 nm.
    pub k: Option<usize>,
    pub orientation: BandOrientation,
    pub subpixel: bool,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            images: Vec::new(),
            deltas: DEFAULT_DELTAS.to_vec(),
            k: None,
            orientation: BandOrientation::Horizontal,
            subpixel: false,
        }
    }
}

#[derive(Debug, clap::Args, Serialize)]
pub struct AnalyzeArgs {
    /// Image grid files.
    #[arg(long = "image")]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    images: Vec<PathBuf>,
    /// Kernel asymmetry factors, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    deltas: Option<Vec<f64>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    orientation: Option<BandOrientation>,
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    subpixel: bool,
}

fn stem_name(path: &std::path::Path, index: usize) -> String {
    let base = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if base.is_empty() {
        format!("image_{index}")
    } else {
        base
    }
}

pub fn run_analyze(cfg: &AnalyzeConfig, out: &mut Outputs) -> Result<()> {
    if cfg.images.is_empty() {
        bail!("stem analyze needs at least one --image");
    }
    let options = DetectOptions {
        orientation: match cfg.orientation {
            BandOrientation::Horizontal => Orientation::Horizontal,
            BandOrientation::Vertical => Orientation::Vertical,
        },
        subpixel: cfg.subpixel,
    };
    let mut summaries = Vec::new();
    for (n, path) in cfg.images.iter().enumerate() {
        out.input(path);
        let (px, grid) = read_grid(path).with_context(|| format!("reading {}", path.display()))?;
        let image = EdsImage::new(px, grid)?;
        let k = cfg.k.unwrap_or_else(|| default_k(px));
        let summary = multi_delta_summary(&image, &cfg.deltas, k, &options)
            .with_context(|| format!("analyzing {}", path.display()))?;
        let name = stem_name(path, n);
        let mut series = Vec::new();
        for r in &summary.results {
            let p = &r.profile;
            let tag = format!("{name}_delta{}", r.delta);
            write_table(
                &out.file(&format!("{tag}_thickness.csv")),
                &["column", "thickness_nm"],
                p.columns
                    .iter()
                    .zip(&p.thickness)
                    .map(|(c, t)| vec![c.to_string(), t.to_string()]),
            )?;
            let h = &p.histogram;
            write_table(
                &out.file(&format!("{tag}_hist.csv")),
                &["lo", "hi", "count"],
                h.counts
                    .iter()
                    .enumerate()
                    .map(|(i, c)| vec![h.edges[i].to_string(), h.edges[i + 1].to_string(), c.to_string()]),
            )?;
            let trace: Vec<(f64, f64)> = p
                .columns
                .iter()
                .zip(&p.thickness)
                .map(|(&c, &t)| (c as f64 * px, t))
                .collect();
            series.push((format!("δ = {}", r.delta), trace));
            log::info!(
                "{name} δ={}: mean {:.4} nm, sd {:.4} nm, {} excluded",
                r.delta,
                p.mean,
                p.sd,
                p.excluded
            );
        }
        let refs: Vec<(&str, Vec<(f64, f64)>)> = series.iter().map(|(a, b)| (a.as_str(), b.clone())).collect();
        out.write_text(
            &format!("{name}_thickness.svg"),
            &plot::lines(
                &format!("{name} barrier thickness"),
                "position (nm)",
                "thickness (nm)",
                &refs,
            ),
        )?;
        summaries.push(serde_json::json!({
            "image": path.display().to_string(),
            "pixel_size_nm": px,
            "k": summary.k,
            "range_nm": [summary.range.0, summary.range.1],
            "deltas": summary.results.iter().map(|r| serde_json::json!({
                "delta": r.delta,
                "mean_nm": r.profile.mean,
                "sd_nm": r.profile.sd,
                "columns": r.profile.thickness.len(),
                "excluded": r.profile.excluded,
                "fits": r.profile.fits,
            })).collect::<Vec<_>>(),
        }));
    }
    out.write_json("summary.json", &summaries)
}
