use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use dolfit::morpho::{
    elliptical_body_volume, predicted_mass, read_hw_ratios, read_profiles, write_report, MassModel,
    ReportRow, SITES,
};
use dolfit::pipeline::{export, load_sequence, run_reconstruction, RunConfig};
use dolfit::scene::{load_template_source, ParamsFile};
use dolfit::synth::{compare_recovery, generate_scene, synth_raster, SceneSpec};

/// Reconstructs dolphins from nadir drone footage and estimates their mass.
#[derive(Parser)]
#[command(name = "dolfit", version)]
struct Cli {
    /// Worker threads; 1 runs sequentially. Defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the template to a sequence directory and export the results.
    Reconstruct {
        /// Directory with frames/, masks/, altitude.csv and camera.json.
        dir: PathBuf,
        /// JSON run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Subject id written to report.csv.
        #[arg(long)]
        id: Option<String>,
    },
    /// Elliptical-frustum volume and mass from measured width profiles.
    Baseline {
        #[arg(long)]
        profile: PathBuf,
        /// Height-to-width ratios of the 19 sites; heights equal widths otherwise.
        #[arg(long)]
        hw: Option<PathBuf>,
        #[arg(long)]
        strict_paper_integrand: bool,
    },
    /// Render a synthetic sequence with known ground truth.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare recovered parameters with the ground truth.
    Report {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        est: PathBuf,
    },
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| path.display().to_string())
}

fn reconstruct(dir: &Path, config: Option<&Path>, out: &Path, id: Option<String>) -> Result<()> {
    let config = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let template = load_template_source(config.template_paths()?.as_ref())?;
    let observations = load_sequence(dir)?;
    let result = run_reconstruction(&observations, &template, &config)?;
    let id = id.unwrap_or_else(|| {
        dir.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "subject".into())
    });
    export(&result, &template, &observations, &config, &id, out)?;
    println!(
        "{} frames, volume {:.5} m3, length {:.3} m, mass {:.2} kg -> {}",
        result.meshes.len(),
        result.volume,
        result.body_length,
        result.mass.mass,
        out.display()
    );
    Ok(())
}

fn baseline(profile: &Path, hw: Option<&Path>, strict: bool) -> Result<()> {
    let profiles = read_profiles(open(profile)?).with_context(|| profile.display().to_string())?;
    let ratios = match hw {
        Some(p) => read_hw_ratios(open(p)?).with_context(|| p.display().to_string())?,
        None => [1.0; SITES],
    };
    if profiles.is_empty() {
        bail!("{}: no profile rows", profile.display());
    }
    let model = MassModel::default();
    let mut rows = Vec::with_capacity(profiles.len());
    for (i, p) in profiles.iter().enumerate() {
        let v = elliptical_body_volume(p, &ratios, strict)?;
        let m = predicted_mass(v, p.bl, &model)?;
        rows.push(ReportRow {
            id: p.id.clone().unwrap_or_else(|| (i + 1).to_string()),
            volume_3d: None,
            volume_elliptical: Some(v),
            bci: Some(m.bci),
            density: Some(m.density),
            mass_3d: None,
            mass_elliptical: Some(m.mass),
        });
    }
    write_report(std::io::stdout().lock(), &rows)?;
    Ok(())
}

fn synth(spec: &Path, out: &Path) -> Result<()> {
    let spec = SceneSpec::load(spec)?;
    let template = load_template_source(spec.template.as_ref())?;
    generate_scene(&spec, &template, out)?;
    println!("{} frames -> {}", spec.frames, out.display());
    Ok(())
}

fn report(gt: &Path, est: &Path) -> Result<()> {
    let gt = ParamsFile::read(gt).map_err(anyhow::Error::msg)?;
    let est = ParamsFile::read(est).map_err(anyhow::Error::msg)?;
    if gt.template != est.template {
        bail!("ground truth and estimate use different templates");
    }
    let template = load_template_source(gt.template.as_ref())?;
    let r = compare_recovery(&template, &gt, &est, &synth_raster())?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Reconstruct {
            dir,
            config,
            out,
            id,
        } => reconstruct(&dir, config.as_deref(), &out, id),
        Command::Baseline {
            profile,
            hw,
            strict_paper_integrand,
        } => baseline(&profile, hw.as_deref(), strict_paper_integrand),
        Command::Synth { spec, out } => synth(&spec, &out),
        Command::Report { gt, est } => report(&gt, &est),
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().to_string();
            eprintln!("{}", one_line(&first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
