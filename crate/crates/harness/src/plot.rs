//! Plain CSV series behind the usual figures, derived from a run directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hawkeye_core::localizer::Localizer;

use crate::error::{HarnessError, Result};
use crate::metrics::{percentile, ErrorStats};
use crate::run::{simulate_radar, trial_scene};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Symbol spectrum of every radar for trial 0.
    Spectrum,
    /// Grid samples of every tag's sinc envelope for trial 0.
    Sinc,
    /// Empirical error CDFs.
    Cdf,
    /// Per-tag box statistics.
    Box,
    /// Trial 0 range tracks, one file per tag and radar.
    Track,
}

impl FromStr for PlotKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "spectrum" => Self::Spectrum,
            "sinc" => Self::Sinc,
            "cdf" => Self::Cdf,
            "box" => Self::Box,
            "track" => Self::Track,
            other => {
                return Err(HarnessError::Usage(format!(
                    "unknown plot kind `{other}` (expected spectrum, sinc, cdf, box or track)"
                )))
            }
        })
    }
}

type Table = (Vec<String>, Vec<Vec<String>>);

fn read_table(path: &Path) -> Result<Table> {
    if !path.exists() {
        return Err(HarnessError::Usage(format!(
            "{} does not exist; run `eval` first",
            path.display()
        )));
    }
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

fn col(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| HarnessError::Usage(format!("missing column `{name}`")))
}

fn errors_by_tag(run_dir: &Path, file: &str) -> Result<Option<BTreeMap<String, Vec<f64>>>> {
    let path = run_dir.join(file);
    if !path.exists() {
        return Ok(None);
    }
    let (h, rows) = read_table(&path)?;
    let (tag, err) = (col(&h, "tag_id")?, col(&h, "error_m")?);
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let Ok(e) = r[err].parse::<f64>() {
            out.entry(r[tag].clone()).or_default().push(e);
        }
    }
    Ok(Some(out))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn cdf_rows(values: impl IntoIterator<Item = f64>) -> Vec<Vec<String>> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, e)| vec![e.to_string(), ((i + 1) as f64 / n).to_string()])
        .collect()
}

fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes the series for `kind` under `run_dir/plot/` and returns the
/// files created.
pub fn emit_plot_data(run_dir: &Path, kind: PlotKind) -> Result<Vec<PathBuf>> {
    let out_dir = run_dir.join("plot");
    fs::create_dir_all(&out_dir)?;
    let mut files = Vec::new();
    match kind {
        PlotKind::Cdf => {
            let ranges = errors_by_tag(run_dir, "results.csv")?
                .ok_or_else(|| HarnessError::Usage(format!("no results.csv in {}", run_dir.display())))?;
            let path = out_dir.join("cdf_range.csv");
            write_rows(
                &path,
                &["error_m", "probability"],
                cdf_rows(ranges.into_values().flatten()),
            )?;
            files.push(path);
            if let Some(pos) = errors_by_tag(run_dir, "positions.csv")? {
                let path = out_dir.join("cdf_position.csv");
                write_rows(
                    &path,
                    &["error_m", "probability"],
                    cdf_rows(pos.into_values().flatten()),
                )?;
                files.push(path);
            }
        }
        PlotKind::Box => {
            let ranges = errors_by_tag(run_dir, "results.csv")?
                .ok_or_else(|| HarnessError::Usage(format!("no results.csv in {}", run_dir.display())))?;
            let mut all: Vec<f64> = ranges.values().flatten().copied().collect();
            all.sort_by(f64::total_cmp);
            let row = |id: &str, v: &[f64]| {
                let s = ErrorStats::from_values(v.iter().copied()).expect("non-empty");
                vec![
                    id.to_string(),
                    s.count.to_string(),
                    s.p10_m.to_string(),
                    s.p25_m.to_string(),
                    s.median_m.to_string(),
                    s.p75_m.to_string(),
                    s.p90_m.to_string(),
                    s.max_m.to_string(),
                ]
            };
            let mut rows: Vec<Vec<String>> = ranges.iter().map(|(id, v)| row(id, v)).collect();
            if !all.is_empty() {
                debug_assert!(percentile(&all, 0.25) <= percentile(&all, 0.75));
                rows.push(row("*", &all));
            }
            let path = out_dir.join("box.csv");
            write_rows(
                &path,
                &[
                    "tag_id", "count", "p10_m", "p25_m", "median_m", "p75_m", "p90_m", "max_m",
                ],
                rows,
            )?;
            files.push(path);
        }
        PlotKind::Track => {
            let (h, rows) = read_table(&run_dir.join("tracks.csv"))?;
            let (trial, radar, tag) = (col(&h, "trial")?, col(&h, "radar_id")?, col(&h, "tag_id")?);
            let (t, r, s) = (col(&h, "t_s")?, col(&h, "range_m")?, col(&h, "snr_db")?);
            let mut series: BTreeMap<(String, String), Vec<Vec<String>>> = BTreeMap::new();
            for row in rows.iter().filter(|row| row[trial] == "0") {
                series
                    .entry((row[tag].clone(), row[radar].clone()))
                    .or_default()
                    .push(vec![row[t].clone(), row[r].clone(), row[s].clone()]);
            }
            for ((tag, radar), rows) in series {
                let path = out_dir.join(format!("track_{}_{}.csv", file_safe(&tag), file_safe(&radar)));
                write_rows(&path, &["t_s", "range_m", "snr_db"], rows)?;
                files.push(path);
            }
        }
        PlotKind::Spectrum | PlotKind::Sinc => {
            let sc = Scenario::load(&run_dir.join("scenario.toml"))?;
            let scene = trial_scene(&sc, 0);
            let cfg = &sc.radar_config;
            let localizer = Localizer::<f64>::new(sc.pipeline.localize_options());
            let ids = sc.id_table();
            let mut sinc_rows = Vec::new();
            for radar in &scene.radars {
                let sig = simulate_radar(&sc, &scene, radar)?.swap_remove(0);
                let spec = localizer.spectrum(&sig, cfg)?;
                if kind == PlotKind::Spectrum {
                    let path = out_dir.join(format!("spectrum_{}.csv", file_safe(&radar.id)));
                    spec.write_csv(fs::File::create(&path)?)?;
                    files.push(path);
                    continue;
                }
                let t = cfg.chirp_duration_s;
                for e in localizer.localize_spectrum(&spec, cfg, &ids)? {
                    let line = spec.grid_values(e.offset_bins);
                    let l = line.len();
                    let mags: Vec<f64> = line.iter().map(|z| z.norm()).collect();
                    let (kpk, peak) = mags
                        .iter()
                        .enumerate()
                        .fold((0, 0.0), |acc, (k, m)| if *m > acc.1 { (k, *m) } else { acc });
                    // grid line k sits at m/T after removing the comb offset
                    let shift = (kpk as i64 - (e.fr_hz * t).round() as i64).rem_euclid(l as i64);
                    let mut pts: Vec<(i64, f64)> = mags
                        .iter()
                        .enumerate()
                        .map(|(k, m)| {
                            let mut idx = (k as i64 - shift).rem_euclid(l as i64);
                            if idx >= l as i64 / 2 {
                                idx -= l as i64;
                            }
                            (idx, 20.0 * (m / peak).max(1e-20).log10())
                        })
                        .collect();
                    pts.sort_by_key(|p| p.0);
                    let tag = e.tag_id.clone().unwrap_or_default();
                    sinc_rows.extend(pts.into_iter().map(|(idx, db)| {
                        vec![
                            radar.id.clone(),
                            tag.clone(),
                            e.fr_hz.to_string(),
                            (idx as f64 / t).to_string(),
                            db.to_string(),
                        ]
                    }));
                }
            }
            if kind == PlotKind::Sinc {
                let path = out_dir.join("sinc.csv");
                write_rows(&path, &["radar_id", "tag_id", "fr_hz", "freq_hz", "mag_db"], sinc_rows)?;
                files.push(path);
            }
        }
    }
    Ok(files)
}
