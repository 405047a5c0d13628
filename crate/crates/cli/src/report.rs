use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use jjbarrier::io::{read_records, write_records, write_table, JunctionRecord};
use jjbarrier::stats;
use serde::{Deserialize, Serialize};

use crate::manifest::Outputs;
use crate::plot;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// `records.csv` from `fit-iv`.
    pub input: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Records table.
    #[arg(long)]
    input: Option<PathBuf>,
}

type Param = (&'static str, &'static str, fn(&JunctionRecord) -> Option<f64>);

const PARAMS: [Param; 4] = [
    ("resistance_ohm", "R (Ω)", |r| r.resistance_ohm),
    ("t_fit_nm", "t (nm)", |r| r.t_fit_nm),
    ("phi_fit_V", "φ (V)", |r| r.phi_fit_v),
    ("v_bd_V", "V_bd (V)", |r| r.v_bd_v),
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn summary_text(records: &[JunctionRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "junctions {}", records.len());
    let _ = writeln!(s, "converged {}", records.iter().filter(|r| r.converged).count());
    for (name, _, f) in PARAMS {
        let v: Vec<f64> = records.iter().filter_map(f).collect();
        let _ = writeln!(
            s,
            "{name}: n {} median {} mean {} sd {}",
            v.len(),
            cell(stats::median(&v)),
            cell(stats::mean(&v)),
            cell(stats::sample_sd(&v))
        );
    }
    s
}

pub fn run(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let Some(input) = &cfg.input else {
        bail!("report needs --input (a records table from fit-iv)");
    };
    out.input(input);
    let records = read_records(input).with_context(|| format!("reading {}", input.display()))?;
    if records.is_empty() {
        bail!("{} contains no records", input.display());
    }
    out.write_text("summary.txt", &summary_text(&records))?;

    let missing = records
        .iter()
        .filter(|r| r.wafer_x.is_none() || r.wafer_y.is_none())
        .count();
    if missing > 0 {
        log::warn!(
            "{missing} of {} records lack wafer coordinates; writing a flat table instead of wafer maps",
            records.len()
        );
        return Ok(write_records(&out.file("table.csv"), &records)?);
    }

    let mut by_site: BTreeMap<(i64, i64), &JunctionRecord> = BTreeMap::new();
    for r in &records {
        let key = (r.wafer_y.unwrap(), r.wafer_x.unwrap());
        if let Some(prev) = by_site.insert(key, r) {
            bail!(
                "junctions '{}' and '{}' share wafer position ({}, {})",
                prev.junction_id,
                r.junction_id,
                key.1,
                key.0
            );
        }
    }
    let mut xs: Vec<i64> = records.iter().filter_map(|r| r.wafer_x).collect();
    let mut ys: Vec<i64> = records.iter().filter_map(|r| r.wafer_y).collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();

    let mut header = vec!["wafer_x", "wafer_y", "junction_id"];
    header.extend(PARAMS.iter().map(|p| p.0));
    let rows = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).map(|(x, y)| {
        let mut row = vec![x.to_string(), y.to_string()];
        match by_site.get(&(y, x)) {
            Some(r) => {
                row.push(r.junction_id.clone());
                row.extend(PARAMS.iter().map(|p| cell((p.2)(r))));
            }
            None => row.extend(std::iter::repeat_n(String::new(), 1 + PARAMS.len())),
        }
        row
    });
    write_table(&out.file("grid.csv"), &header, rows)?;

    for (name, label, f) in PARAMS {
        let mut header = vec!["wafer_y".to_string()];
        header.extend(xs.iter().map(|x| format!("x{x}")));
        let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let rows = ys.iter().map(|&y| {
            let mut row = vec![y.to_string()];
            row.extend(xs.iter().map(|&x| cell(by_site.get(&(y, x)).and_then(|r| f(r)))));
            row
        });
        write_table(&out.file(&format!("map_{name}.csv")), &header, rows)?;
        let cells: Vec<(usize, usize, f64)> = ys
            .iter()
            .enumerate()
            .flat_map(|(j, &y)| {
                let by_site = &by_site;
                xs.iter()
                    .enumerate()
                    .map(move |(i, &x)| (i, j, by_site.get(&(y, x)).and_then(|r| f(r)).unwrap_or(f64::NAN)))
            })
            .collect();
        let xf: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        let yf: Vec<f64> = ys.iter().map(|&y| y as f64).collect();
        out.write_text(
            &format!("map_{name}.svg"),
            &plot::heatmap(label, &xf, &yf, "wafer x", "wafer y", &cells),
        )?;
    }
    log::info!("wafer maps over {} x {} sites", xs.len(), ys.len());
    Ok(())
}
