use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use capsd::dataset::RecordData;
use capsd::solver::sonar_pose_world;
use capsd::sonar::{render_scan, RenderOptions, ScanTarget};
use capsd::{evaluate, run_pipeline, Dataset, EstimatesFile, Scenario};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod plot;

#[derive(Parser)]
#[command(
    name = "capsd",
    version,
    about = "Sonar and depth positioning of an underwater vehicle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scenario file to synthetic dataset.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Writes rendered sonar scans (PGM) into this directory.
        #[arg(long)]
        dump_scans: Option<PathBuf>,
        /// Ground-truth samples between dumped scans.
        #[arg(long, default_value_t = 100)]
        dump_every: usize,
    },
    /// Dataset to estimates file.
    Solve {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimates against dataset ground truth.
    Eval {
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Machine-readable report (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trajectory, per-axis and histogram images (SVG).
    Plot {
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            scenario,
            out,
            seed,
            dump_scans,
            dump_every,
        } => {
            let text = fs::read_to_string(&scenario)
                .with_context(|| format!("reading {}", scenario.display()))?;
            let mut sc = Scenario::from_toml(&text)
                .with_context(|| format!("parsing {}", scenario.display()))?;
            if let Some(seed) = seed {
                sc = sc.with_seed(seed);
            }
            let ds = capsd::simulate(&sc)?;
            write_dataset(&ds, &out)?;
            println!("wrote {} records to {}", ds.records.len(), out.display());
            if let Some(dir) = dump_scans {
                let n = dump_scan_images(&ds, &dir, dump_every.max(1))?;
                println!("wrote {n} scans to {}", dir.display());
            }
        }
        Command::Solve { dataset, out } => {
            let ds = read_dataset(&dataset)?;
            let output = run_pipeline(&ds)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            output.estimates.write(BufWriter::new(file))?;
            let ok = output.estimates.estimates().count();
            println!(
                "{ok} estimates, {} failures",
                output.estimates.lines.len() - ok
            );
            for (code, n) in &output.error_counts {
                println!("  {code}: {n}");
            }
        }
        Command::Eval {
            estimates,
            dataset,
            out,
        } => {
            let ds = read_dataset(&dataset)?;
            let est = read_estimates(&estimates)?;
            let report = evaluate(&est, &ds)?;
            print!("{}", report.to_text());
            if let Some(out) = out {
                let json = serde_json::to_string_pretty(&report)?;
                fs::write(&out, json + "\n")
                    .with_context(|| format!("writing {}", out.display()))?;
            }
        }
        Command::Plot {
            estimates,
            dataset,
            out_dir,
        } => {
            let ds = read_dataset(&dataset)?;
            let est = read_estimates(&estimates)?;
            fs::create_dir_all(&out_dir)?;
            for path in plot::render_all(&est, &ds, &out_dir)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Dataset::read(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn read_estimates(path: &Path) -> Result<EstimatesFile> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    EstimatesFile::read(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    ds.write(BufWriter::new(f))?;
    Ok(())
}

fn dump_scan_images(ds: &Dataset, dir: &Path, every: usize) -> Result<usize> {
    fs::create_dir_all(dir)?;
    let cfg = ds.header.scenario.sonar_config();
    let opts = RenderOptions {
        intensity: 1.0,
        speckle_std: 0.05,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ds.header.seed);
    let mut rov = None;
    let mut k = 0usize;
    let mut written = 0;
    for rec in &ds.records {
        match &rec.data {
            RecordData::GtRov(g) => rov = Some(g.p),
            RecordData::GtAsv(asv) => {
                if let (Some(p), true) = (rov, k.is_multiple_of(every)) {
                    let pose = sonar_pose_world(asv, &cfg.mount);
                    let target = ScanTarget {
                        center: p,
                        radius: 0.3,
                    };
                    let scan = render_scan(&pose, &[target], &cfg, &opts, rec.t, &mut rng);
                    fs::write(dir.join(format!("scan_{written:05}.pgm")), scan.to_pgm())?;
                    written += 1;
                }
                k += 1;
            }
            _ => {}
        }
    }
    Ok(written)
}
