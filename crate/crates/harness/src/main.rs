use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hawkeye_core::channel::{read_if_dump, write_if_dump};
use hawkeye_core::geometry::{trilaterate_in, write_positions_csv, Observation, SolverOptions};
use hawkeye_core::localizer::{detect_fm_with, IdEntry, IdTable, LocalizeOptions, Localizer};
use hawkeye_core::scene::{range_at, ReflectorRef};
use hawkeye_core::tracker::{
    classify_mobile, dispersion_hz_with, isolation_half_width, track_in_spectrum, TrackOptions,
};
use hawkeye_core::waveform::IqSignal;
use hawkeye_harness::run::{reference_time, simulate_radar, trial_scene};
use hawkeye_harness::{
    compare_baseline, emit_plot_data, run_scenario, run_sweep, write_run, Overrides, PlotKind, Scenario,
};

/// HD-FMCW backscatter tag simulator and localizer.
#[derive(Parser)]
#[command(name = "hawkeye", version)]
struct Cli {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Simulate through the RF mixing oracle instead of the analytic IF path.
    #[arg(long, global = true)]
    oracle: bool,
    /// Zero-padding factor for range extraction.
    #[arg(long, global = true)]
    pad_factor: Option<usize>,
    /// Plain argmax range extraction, without parabolic refinement.
    #[arg(long, global = true)]
    no_refine: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one trial of a scenario and write raw IF dumps (cf32le + JSON).
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Range every tag in one or more IF dumps.
    Localize {
        /// Dump paths, with or without the .iq/.json extension.
        #[arg(required = true)]
        dumps: Vec<PathBuf>,
        /// Take the ID table and pipeline options from this scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Known tag as ID=FM_HZ; repeatable.
        #[arg(long = "id", value_parser = parse_id)]
        ids: Vec<IdEntry>,
        #[arg(long)]
        min_snr_db: Option<f64>,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Range tracks of every detected tag within one IF dump.
    Track {
        dump: PathBuf,
        /// Chirps between updates.
        #[arg(long)]
        stride: usize,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long = "id", value_parser = parse_id)]
        ids: Vec<IdEntry>,
        /// Directory for one track CSV per tag.
        #[arg(long)]
        out: PathBuf,
    },
    /// Positions from a CSV of ranges (tag_id, radar_id, range_m and
    /// radar_x/radar_y/radar_z unless --scenario supplies the radars).
    Solve {
        ranges: PathBuf,
        #[arg(long, default_value_t = 3)]
        dims: usize,
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Point on the tag side of the radars, comma separated.
        #[arg(long, value_delimiter = ',')]
        hint: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario and write results, positions, tracks and metrics.
    Eval {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also compare against the single-chirp baseline.
        #[arg(long)]
        baseline: bool,
        /// Write trial 0's symbol spectra.
        #[arg(long)]
        dump_spectra: bool,
    },
    /// Run every point of the scenario's sweep plan.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit CSV series for plotting from a run directory.
    Plotdata {
        run_dir: PathBuf,
        /// spectrum, sinc, cdf, box or track
        kind: String,
    },
}

fn parse_id(s: &str) -> std::result::Result<IdEntry, String> {
    let (id, fm) = s.split_once('=').ok_or("expected ID=FM_HZ")?;
    let fm_hz = fm.parse::<f64>().map_err(|e| format!("bad frequency `{fm}`: {e}"))?;
    Ok(IdEntry {
        tag_id: id.to_string(),
        fm_hz,
    })
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            oracle: self.oracle,
            pad_factor: self.pad_factor,
            no_refine: self.no_refine,
            ..Overrides::default()
        }
    }

    fn scenario(&self, path: &Path, extra: Overrides) -> Result<Scenario> {
        let mut sc = Scenario::load(path).with_context(|| format!("loading {}", path.display()))?;
        let mut o = self.overrides();
        o.baseline = extra.baseline;
        o.dump_spectra = extra.dump_spectra;
        sc.apply(&o);
        sc.validate()?;
        Ok(sc)
    }

    /// Pipeline options and ID table for commands that read dumps.
    fn pipeline(
        &self,
        scenario: &Option<PathBuf>,
        ids: &[IdEntry],
        min_snr: Option<f64>,
    ) -> Result<(LocalizeOptions, IdTable)> {
        let (mut opts, mut table) = match scenario {
            Some(p) => {
                let sc = self.scenario(p, Overrides::default())?;
                (sc.pipeline.localize_options(), sc.id_table())
            }
            None => (LocalizeOptions::default(), IdTable::default()),
        };
        table.entries.extend(ids.iter().cloned());
        if let Some(p) = self.pad_factor {
            opts.extract.pad_factor = p;
        }
        if self.no_refine {
            opts.extract.refine = false;
        }
        if let Some(m) = min_snr {
            opts.detect.min_snr_db = m;
        }
        Ok((opts, table))
    }
}

fn dump_prefix(p: &Path) -> PathBuf {
    match p.extension().and_then(|e| e.to_str()) {
        Some("iq") | Some("json") => p.with_extension(""),
        _ => p.to_path_buf(),
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn simulate(cli: &Cli, scenario: &Path, out: &Path, trial: usize) -> Result<()> {
    let sc = cli.scenario(scenario, Overrides::default())?;
    fs::create_dir_all(out)?;
    let scene = trial_scene(&sc, trial);
    let t_ref = reference_time(&sc);
    let mut truth = csv::Writer::from_path(out.join("truth.csv"))?;
    truth.write_record(["radar_id", "tag_id", "true_range_m", "fm_hz"])?;
    for radar in &scene.radars {
        let sigs = simulate_radar(&sc, &scene, radar)?;
        for (m, sig) in sigs.iter().enumerate() {
            let name = if sigs.len() > 1 {
                format!("{}_rx{m}", radar.id)
            } else {
                radar.id.clone()
            };
            write_if_dump(&out.join(&name), sig, &sc.radar_config, &radar.id, m)?;
            println!("{}", out.join(name + ".iq").display());
        }
        for tag in &scene.tags {
            let r = range_at(&scene, &radar.id, ReflectorRef::Tag(&tag.id), t_ref)?;
            truth.write_record([
                radar.id.clone(),
                tag.id.clone(),
                r.to_string(),
                tag.fm_nominal_hz.to_string(),
            ])?;
        }
    }
    truth.flush()?;
    Ok(())
}

fn localize(
    cli: &Cli,
    dumps: &[PathBuf],
    scenario: &Option<PathBuf>,
    ids: &[IdEntry],
    min_snr: Option<f64>,
    out: &Option<PathBuf>,
) -> Result<()> {
    let (opts, table) = cli.pipeline(scenario, ids, min_snr)?;
    let localizer = Localizer::<f64>::new(opts);
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record([
        "radar_id",
        "tag_id",
        "offset_bins",
        "fm_detected_hz",
        "fr_hz",
        "range_m",
        "snr_db",
        "ambiguous",
    ])?;
    for d in dumps {
        let prefix = dump_prefix(d);
        let (sig, meta): (IqSignal<f64>, _) =
            read_if_dump(&prefix).with_context(|| format!("reading {}", prefix.display()))?;
        for e in localizer.localize(&sig, &meta.radar_config, &table)? {
            w.write_record([
                meta.radar_id.clone(),
                e.tag_id.unwrap_or_default(),
                e.offset_bins.to_string(),
                e.fm_detected_hz.to_string(),
                e.fr_hz.to_string(),
                e.range_m.to_string(),
                e.snr_db.to_string(),
                e.ambiguous.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn track(cli: &Cli, dump: &Path, stride: usize, scenario: &Option<PathBuf>, ids: &[IdEntry], out: &Path) -> Result<()> {
    let (opts, table) = cli.pipeline(scenario, ids, None)?;
    let localizer = Localizer::<f64>::new(opts);
    let (sig, meta): (IqSignal<f64>, _) = read_if_dump(&dump_prefix(dump))?;
    let cfg = &meta.radar_config;
    let spec = localizer.spectrum(&sig, cfg)?;
    let dets = detect_fm_with(&spec, &localizer.options.detect);
    fs::create_dir_all(out)?;
    for e in localizer.localize_spectrum(&spec, cfg, &table)? {
        let Some(det) = dets.iter().find(|d| d.offset_bins == e.offset_bins) else {
            continue;
        };
        let half = isolation_half_width(&dets, det.offset_bins, cfg.num_chirps);
        let topts = TrackOptions {
            extract: localizer.options.extract.clone(),
            band_half_width: half,
            fm_hz: Some(e.fm_detected_hz * cfg.gap_stretch()),
        };
        let mut t = track_in_spectrum(&spec, cfg, det, stride, &topts)?;
        t.tag_id = e.tag_id.clone();
        let name = e.tag_id.clone().unwrap_or_else(|| format!("q{}", e.offset_bins));
        t.write_csv(io::BufWriter::new(fs::File::create(
            out.join(format!("track_{name}.csv")),
        )?))?;
        let disp = dispersion_hz_with(&spec, det, half);
        println!(
            "{name}: {} updates at {:.2} Hz, dispersion {:.4} Hz ({}), velocity {}",
            t.samples.len(),
            t.update_rate_hz(cfg),
            disp,
            if classify_mobile(disp) { "mobile" } else { "static" },
            t.fitted_velocity_mps()
                .map(|v| format!("{v:.4} m/s"))
                .unwrap_or_else(|| "n/a".into()),
        );
    }
    Ok(())
}

fn solve(
    ranges: &Path,
    dims: usize,
    scenario: &Option<PathBuf>,
    hint: &Option<Vec<f64>>,
    out: &Option<PathBuf>,
    cli: &Cli,
) -> Result<()> {
    let sc = scenario
        .as_ref()
        .map(|p| cli.scenario(p, Overrides::default()))
        .transpose()?;
    let mut r = csv::Reader::from_path(ranges)?;
    let h = r.headers()?.clone();
    let col = |name: &str| h.iter().position(|c| c == name);
    let (Some(ci), Some(cr), Some(cd)) = (col("tag_id"), col("radar_id"), col("range_m")) else {
        bail!("{} needs tag_id, radar_id and range_m columns", ranges.display());
    };
    let xyz = [col("radar_x"), col("radar_y"), col("radar_z")];
    let mut groups: BTreeMap<String, Vec<Observation>> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let (tag, radar) = (&rec[ci], &rec[cr]);
        let Ok(range) = rec[cd].parse::<f64>() else { continue };
        if tag.is_empty() {
            continue;
        }
        let pos = match (&sc, xyz) {
            (_, [Some(x), Some(y), z]) => [
                rec[x].parse()?,
                rec[y].parse()?,
                z.map(|z| rec[z].parse()).transpose()?.unwrap_or(0.0),
            ],
            (Some(sc), _) => sc.scene.radar(radar)?.position_m,
            _ => bail!("radar positions need radar_x/radar_y columns or --scenario"),
        };
        groups
            .entry(tag.to_string())
            .or_default()
            .push(Observation::new(radar, pos, range));
    }
    let opts = SolverOptions {
        hint: hint.clone().or_else(|| sc.and_then(|s| s.pipeline.hint)),
        ..SolverOptions::default()
    };
    let mut estimates = Vec::new();
    for (tag, obs) in groups {
        match trilaterate_in::<f64>(&obs, dims, None, &opts) {
            Ok(mut e) => {
                e.tag_id = Some(tag);
                estimates.push(e);
            }
            Err(err) => eprintln!("{tag}: {err}"),
        }
    }
    write_positions_csv(sink(out)?, &estimates)?;
    Ok(())
}

fn eval(cli: &Cli, scenario: &Path, out: &Path, baseline: bool, dump_spectra: bool) -> Result<()> {
    let sc = cli.scenario(
        scenario,
        Overrides {
            baseline,
            dump_spectra,
            ..Overrides::default()
        },
    )?;
    let run = run_scenario(&sc)?;
    write_run(out, &sc, &run)?;
    let m = &run.metrics;
    println!(
        "{}: {} trials, detected {}/{} ({:.1}%), {} false detections, {} failures",
        m.scenario,
        m.trials,
        m.detected,
        m.expected,
        100.0 * m.detection_rate,
        m.false_detections,
        m.failed_trials.len()
    );
    if let Some(s) = &m.range_error {
        println!(
            "range error: median {:.3} mm, p90 {:.3} mm, max {:.3} mm",
            s.median_m * 1e3,
            s.p90_m * 1e3,
            s.max_m * 1e3
        );
    }
    if let Some(s) = &m.position_error {
        println!(
            "position error: median {:.3} mm, p90 {:.3} mm",
            s.median_m * 1e3,
            s.p90_m * 1e3
        );
    }
    if baseline {
        let report = compare_baseline(&sc)?;
        fs::write(
            out.join("baseline_report.json"),
            serde_json::to_string_pretty(&report)? + "\n",
        )?;
        println!(
            "baseline median {:.1} mm; ratio {:.1} (refined), {:.1} (argmax only)",
            report.baseline_median_m * 1e3,
            report.ratio_refined,
            report.ratio_unrefined
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Simulate { scenario, out, trial } => simulate(&cli, scenario, out, *trial),
        Cmd::Localize {
            dumps,
            scenario,
            ids,
            min_snr_db,
            out,
        } => localize(&cli, dumps, scenario, ids, *min_snr_db, out),
        Cmd::Track {
            dump,
            stride,
            scenario,
            ids,
            out,
        } => track(&cli, dump, *stride, scenario, ids, out),
        Cmd::Solve {
            ranges,
            dims,
            scenario,
            hint,
            out,
        } => solve(ranges, *dims, scenario, hint, out, &cli),
        Cmd::Eval {
            scenario,
            out,
            baseline,
            dump_spectra,
        } => eval(&cli, scenario, out, *baseline, *dump_spectra),
        Cmd::Sweep { scenario, out } => {
            let sc = cli.scenario(scenario, Overrides::default())?;
            for (point, m) in run_sweep(&sc, out)? {
                let median = m
                    .range_error
                    .map(|s| format!("{:.3} mm", s.median_m * 1e3))
                    .unwrap_or_else(|| "n/a".into());
                let what: Vec<String> = point.assignments.iter().map(|(p, v)| format!("{p}={v}")).collect();
                println!(
                    "point {}: {} -> detected {}/{}, median {median}",
                    point.index,
                    what.join(", "),
                    m.detected,
                    m.expected
                );
            }
            Ok(())
        }
        Cmd::Plotdata { run_dir, kind } => {
            for f in emit_plot_data(run_dir, kind.parse::<PlotKind>()?)? {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}
