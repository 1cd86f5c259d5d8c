//! Writes a reconstruction to disk.

use std::path::Path;

use crate::body::{write_obj, TemplateModel};
use crate::morpho::{
    elliptical_body_volume, mesh_volume, predicted_mass, read_hw_ratios, read_profiles,
    write_report, MassModel, ReportRow, SITES,
};
use crate::objectives::Term;
use crate::render::Background;

use super::fit::{render_params, LossRecord, ReconstructionResult};
use super::io::{frame_name, write_rgb};
use super::{Observations, PipelineError, RunConfig};

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io(format!("{}: {e}", path.display()))
}

pub fn loss_header() -> Vec<String> {
    let mut h = vec!["epoch".to_string()];
    h.extend(Term::ALL.iter().map(|t| t.name().to_string()));
    h.extend(Term::ALL.iter().map(|t| format!("weighted_{}", t.name())));
    h.push("total".into());
    h
}

pub fn write_losses(path: &Path, losses: &[LossRecord]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(loss_header()).map_err(|e| io_err(path, e))?;
    for r in losses {
        let mut row = vec![r.epoch.to_string()];
        row.extend(r.raw.iter().map(|x| x.to_string()));
        row.extend(r.weighted.iter().map(|x| x.to_string()));
        row.push(r.total.to_string());
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Morphometrics row: 3D volume always, elliptical columns when the config
/// names a width profile (its first row is used).
pub fn report_row(
    id: &str,
    result: &ReconstructionResult,
    config: &RunConfig,
) -> Result<ReportRow, PipelineError> {
    let model = MassModel::default();
    let mut row = ReportRow {
        id: id.to_string(),
        volume_3d: Some(result.volume),
        volume_elliptical: None,
        bci: Some(result.mass.bci),
        density: Some(result.mass.density),
        mass_3d: Some(result.mass.mass),
        mass_elliptical: None,
    };
    if let Some(path) = &config.profile {
        let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
        let profile = read_profiles(file)?
            .into_iter()
            .next()
            .ok_or_else(|| PipelineError::Input(format!("{}: no profile rows", path.display())))?;
        let ratios = match &config.hw_ratios {
            Some(p) => read_hw_ratios(std::fs::File::open(p).map_err(|e| io_err(p, e))?)?,
            None => [1.0; SITES],
        };
        let v = elliptical_body_volume(&profile, &ratios, config.strict_paper_integrand)?;
        row.volume_elliptical = Some(v);
        row.mass_elliptical = Some(predicted_mass(v, profile.bl, &model)?.mass);
    }
    Ok(row)
}

/// Writes meshes, previews, `params.json`, `losses.csv` and `report.csv`.
/// `observations` supply the preview backgrounds.
pub fn export(
    result: &ReconstructionResult,
    template: &TemplateModel,
    observations: &Observations,
    config: &RunConfig,
    id: &str,
    out: &Path,
) -> Result<(), PipelineError> {
    let mesh_dir = out.join("meshes");
    let preview_dir = out.join("previews");
    for d in [out, &mesh_dir, &preview_dir] {
        std::fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
    }
    let [rh, rw] = config.render_resolution;
    let backgrounds = observations.resampled(rh, rw).ok();
    for (t, mesh) in result.meshes.iter().enumerate() {
        // Volume doubles as the closed-surface check.
        mesh_volume(mesh, &template.faces)?;
        let path = mesh_dir.join(format!("{t:06}.obj"));
        std::fs::write(&path, write_obj(mesh, Some(&template.uv), &template.faces))
            .map_err(|e| io_err(&path, e))?;

        let camera = result.file.cameras[t].with_resolution(rh, rw);
        let bg = match &backgrounds {
            Some(b) => Background::Image(&b.frames[t].image),
            None => Background::Constant([0.0; 3]),
        };
        let buffers = render_params(template, &result.file, t, &camera, &config.raster(), bg)?;
        write_rgb(&preview_dir.join(frame_name(t)), rh, rw, &buffers.filtered)?;
    }
    result
        .file
        .write(&out.join("params.json"))
        .map_err(PipelineError::Io)?;
    write_losses(&out.join("losses.csv"), &result.losses)?;
    let row = report_row(id, result, config)?;
    let path = out.join("report.csv");
    let file = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    write_report(file, &[row])?;
    Ok(())
}
