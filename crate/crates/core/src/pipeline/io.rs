//! Input sequence layout and raster files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;

/// Contents of `camera.json`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraInfo {
    pub sensor_width_mm: f64,
    pub focal_length_mm: f64,
    pub frame_rate: f64,
}

/// One video frame with its mask and altitude.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub index: usize,
    /// Row-major RGB in `[0, 1]`.
    pub image: Vec<[f64; 3]>,
    /// Row-major, 0 or 1.
    pub mask: Vec<f64>,
    /// m
    pub altitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    pub height: usize,
    pub width: usize,
    pub camera: CameraInfo,
    pub frames: Vec<Observation>,
}

impl Observations {
    /// Resamples every frame to `(height, width)`; the aspect ratio must be
    /// kept so the horizontal field of view still spans the width.
    pub fn resampled(&self, height: usize, width: usize) -> Result<Observations, PipelineError> {
        if (height, width) == (self.height, self.width) {
            return Ok(self.clone());
        }
        let src = self.width as f64 / self.height as f64;
        let dst = width as f64 / height as f64;
        if ((src - dst) / src).abs() > 0.01 {
            return Err(PipelineError::Input(format!(
                "frames are {}x{} (HxW) but the raster is {height}x{width}; aspect ratios differ",
                self.height, self.width
            )));
        }
        let frames = self
            .frames
            .iter()
            .map(|f| Observation {
                index: f.index,
                image: resample(&f.image, (self.height, self.width), (height, width)),
                mask: resample(&f.mask, (self.height, self.width), (height, width))
                    .into_iter()
                    .map(|m| f64::from(m >= 0.5))
                    .collect(),
                altitude: f.altitude,
            })
            .collect();
        Ok(Observations {
            height,
            width,
            camera: self.camera,
            frames,
        })
    }
}

trait Pixel: Copy {
    fn zero() -> Self;
    fn add_scaled(self, other: Self, w: f64) -> Self;
}

impl Pixel for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add_scaled(self, other: Self, w: f64) -> Self {
        self + other * w
    }
}

impl Pixel for [f64; 3] {
    fn zero() -> Self {
        [0.0; 3]
    }
    fn add_scaled(self, other: Self, w: f64) -> Self {
        [0, 1, 2].map(|k| self[k] + other[k] * w)
    }
}

/// Area-weighted resampling: every target pixel averages the source area it
/// covers.
fn resample<P: Pixel>(src: &[P], from: (usize, usize), to: (usize, usize)) -> Vec<P> {
    let (sh, sw) = from;
    let (th, tw) = to;
    let spans = |n_src: usize, n_dst: usize| -> Vec<Vec<(usize, f64)>> {
        let scale = n_src as f64 / n_dst as f64;
        (0..n_dst)
            .map(|i| {
                let (a, b) = (i as f64 * scale, (i + 1) as f64 * scale);
                let mut out = Vec::new();
                let mut j = a.floor() as usize;
                while (j as f64) < b && j < n_src {
                    let overlap = (b.min(j as f64 + 1.0) - a.max(j as f64)).max(0.0);
                    if overlap > 0.0 {
                        out.push((j, overlap / scale));
                    }
                    j += 1;
                }
                out
            })
            .collect()
    };
    let (rows, cols) = (spans(sh, th), spans(sw, tw));
    let mut out = Vec::with_capacity(th * tw);
    for r in &rows {
        for c in &cols {
            let mut acc = P::zero();
            for &(y, wy) in r {
                for &(x, wx) in c {
                    acc = acc.add_scaled(src[y * sw + x], wy * wx);
                }
            }
            out.push(acc);
        }
    }
    out
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io(format!("{}: {e}", path.display()))
}

pub fn read_rgb(path: &Path) -> Result<(usize, usize, Vec<[f64; 3]>), PipelineError> {
    let img = image::open(path).map_err(|e| io_err(path, e))?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .pixels()
        .map(|p| p.0.map(|c| c as f64 / 255.0))
        .collect();
    Ok((h, w, data))
}

/// Reads a mask, binarized at half intensity.
pub fn read_mask(path: &Path) -> Result<(usize, usize, Vec<f64>), PipelineError> {
    let img = image::open(path).map_err(|e| io_err(path, e))?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.pixels().map(|p| f64::from(p.0[0] >= 128)).collect();
    Ok((h, w, data))
}

fn to_byte(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_rgb(
    path: &Path,
    height: usize,
    width: usize,
    data: &[[f64; 3]],
) -> Result<(), PipelineError> {
    let bytes: Vec<u8> = data.iter().flat_map(|c| c.map(to_byte)).collect();
    let img = image::RgbImage::from_raw(width as u32, height as u32, bytes)
        .ok_or_else(|| io_err(path, "raster size mismatch"))?;
    img.save(path).map_err(|e| io_err(path, e))
}

pub fn write_mask(
    path: &Path,
    height: usize,
    width: usize,
    data: &[f64],
) -> Result<(), PipelineError> {
    let bytes: Vec<u8> = data
        .iter()
        .map(|&m| if m >= 0.5 { 255 } else { 0 })
        .collect();
    let img = image::GrayImage::from_raw(width as u32, height as u32, bytes)
        .ok_or_else(|| io_err(path, "raster size mismatch"))?;
    img.save(path).map_err(|e| io_err(path, e))
}

pub fn frame_name(index: usize) -> String {
    format!("{index:06}.png")
}

/// Numbered PNG files of a directory by frame index.
fn numbered_pngs(dir: &Path) -> Result<BTreeMap<usize, PathBuf>, PipelineError> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("png") {
            continue;
        }
        let Some(index) = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<usize>().ok())
        else {
            continue;
        };
        out.insert(index, path);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct AltitudeRow {
    frame_index: usize,
    altitude_m: f64,
}

pub fn read_altitudes(path: &Path) -> Result<BTreeMap<usize, f64>, PipelineError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let mut out = BTreeMap::new();
    for row in reader.deserialize::<AltitudeRow>() {
        let row = row.map_err(|e| io_err(path, e))?;
        out.insert(row.frame_index, row.altitude_m);
    }
    Ok(out)
}

/// Reads `frames/`, `masks/`, `altitude.csv` and `camera.json` from `dir`.
pub fn load_sequence(dir: &Path) -> Result<Observations, PipelineError> {
    let frames = numbered_pngs(&dir.join("frames"))?;
    let masks = numbered_pngs(&dir.join("masks"))?;
    if frames.is_empty() {
        return Err(PipelineError::Input(format!(
            "no frames in {}",
            dir.join("frames").display()
        )));
    }
    if frames.len() != masks.len() {
        return Err(PipelineError::Input(format!(
            "{} frames but {} masks",
            frames.len(),
            masks.len()
        )));
    }
    let altitudes = read_altitudes(&dir.join("altitude.csv"))?;
    let camera_path = dir.join("camera.json");
    let camera: CameraInfo = serde_json::from_str(
        &std::fs::read_to_string(&camera_path).map_err(|e| io_err(&camera_path, e))?,
    )
    .map_err(|e| io_err(&camera_path, e))?;

    let mut out = Vec::with_capacity(frames.len());
    let mut dims = None;
    for (&index, frame_path) in &frames {
        let mask_path = masks
            .get(&index)
            .ok_or_else(|| PipelineError::Input(format!("missing mask for frame {index}")))?;
        let altitude = *altitudes
            .get(&index)
            .ok_or_else(|| PipelineError::Input(format!("missing altitude for frame {index}")))?;
        let (h, w, image) = read_rgb(frame_path)?;
        let (mh, mw, mask) = read_mask(mask_path)?;
        if (mh, mw) != (h, w) {
            return Err(PipelineError::Input(format!(
                "frame {index}: mask is {mh}x{mw}, image is {h}x{w}"
            )));
        }
        match dims {
            None => dims = Some((h, w)),
            Some(d) if d != (h, w) => {
                return Err(PipelineError::Input(format!(
                    "frame {index}: resolution differs from the first frame"
                )))
            }
            _ => {}
        }
        out.push(Observation {
            index,
            image,
            mask,
            altitude,
        });
    }
    let (height, width) = dims.unwrap();
    Ok(Observations {
        height,
        width,
        camera,
        frames: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_sequence(dir: &Path, n: usize, skip_mask: Option<usize>) {
        std::fs::create_dir_all(dir.join("frames")).unwrap();
        std::fs::create_dir_all(dir.join("masks")).unwrap();
        let mut alt = String::from("frame_index,altitude_m\n");
        for t in 0..n {
            let img = vec![[0.2, 0.4, 0.6]; 12];
            write_rgb(&dir.join("frames").join(frame_name(t)), 3, 4, &img).unwrap();
            if skip_mask != Some(t) {
                let mask: Vec<f64> = (0..12).map(|i| f64::from(i % 3 == 0)).collect();
                write_mask(&dir.join("masks").join(frame_name(t)), 3, 4, &mask).unwrap();
            }
            alt += &format!("{t},{}\n", 18.43 + t as f64);
        }
        std::fs::write(dir.join("altitude.csv"), alt).unwrap();
        std::fs::write(
            dir.join("camera.json"),
            r#"{"sensor_width_mm": 17.27, "focal_length_mm": 12.29, "frame_rate": 50}"#,
        )
        .unwrap();
    }

    #[test]
    fn reads_a_sequence() {
        let dir = tempfile::tempdir().unwrap();
        write_sequence(dir.path(), 3, None);
        let obs = load_sequence(dir.path()).unwrap();
        assert_eq!(obs.frames.len(), 3);
        assert_eq!((obs.height, obs.width), (3, 4));
        assert_eq!(obs.frames[0].altitude, 18.43);
        assert_eq!(obs.frames[0].mask[3], 1.0);
        assert_eq!(obs.frames[0].mask[1], 0.0);
        assert!((obs.frames[1].image[5][1] - 102.0 / 255.0).abs() < 1e-12);
        assert_eq!(obs.camera.frame_rate, 50.0);
    }

    #[test]
    fn missing_mask_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_sequence(dir.path(), 3, Some(1));
        let err = load_sequence(dir.path()).unwrap_err().to_string();
        assert!(err.contains("2 masks"), "{err}");
        std::fs::rename(
            dir.path().join("masks").join(frame_name(2)),
            dir.path().join("masks").join(frame_name(1)),
        )
        .unwrap();
        write_mask(
            &dir.path().join("masks").join(frame_name(7)),
            3,
            4,
            &[0.0; 12],
        )
        .unwrap();
        let err = load_sequence(dir.path()).unwrap_err().to_string();
        assert!(err.contains("frame 2"), "{err}");
    }

    #[test]
    fn missing_altitude_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_sequence(dir.path(), 2, None);
        std::fs::write(
            dir.path().join("altitude.csv"),
            "frame_index,altitude_m\n0,10\n",
        )
        .unwrap();
        let err = load_sequence(dir.path()).unwrap_err().to_string();
        assert!(err.contains("altitude for frame 1"), "{err}");
    }

    #[test]
    fn area_resampling_preserves_mean() {
        let src: Vec<f64> = (0..24).map(|i| i as f64).collect();
        let half = resample(&src, (4, 6), (2, 3));
        assert_eq!(half[0], (0.0 + 1.0 + 6.0 + 7.0) / 4.0);
        let mean_src = src.iter().sum::<f64>() / 24.0;
        let odd = resample(&src, (4, 6), (3, 4));
        let mean = odd.iter().sum::<f64>() / 12.0;
        assert!((mean - mean_src).abs() < 1e-12);
        assert_eq!(resample(&src, (4, 6), (4, 6)), src);
    }
}
