//! Per-image analysis, batch mode, result tables and overlays.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aponeurosis::{detect_aponeuroses, AponeurosisConfig, AponeurosisPair};
use crate::architecture::{apply_scale, compute_architecture, ArchitectureConfig, ArchitectureResult, ScaleSpec};
use crate::error::{Error, Result};
use crate::fov::{detect_field_of_view, manual_field_of_view, FovConfig};
use crate::frequency::SpectrumMode;
use crate::image::{crop, flip_horizontal, GrayImage, RectRegion};
use crate::io::{decode_image, encode_image};
use crate::orientation::{estimate_orientation, Aggregation, OrientationConfig};
use crate::overlay::{DrawOp, Rgb};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CropMode {
    #[default]
    Auto,
    Manual(RectRegion),
    None,
}

impl fmt::Display for CropMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CropMode::Auto => f.write_str("auto"),
            CropMode::None => f.write_str("none"),
            CropMode::Manual(r) => write!(f, "{r}"),
        }
    }
}

impl FromStr for CropMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(CropMode::Auto),
            "none" => Ok(CropMode::None),
            rect => Ok(CropMode::Manual(rect.parse()?)),
        }
    }
}

impl Serialize for CropMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CropMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Mirror images left-right before analysis.
    pub flip: bool,
    pub crop: CropMode,
    pub fov: FovConfig,
    pub apo: AponeurosisConfig,
    pub orient: OrientationConfig,
    pub arch: ArchitectureConfig,
    pub scale: Option<ScaleSpec>,
    pub scan_depth_mm: Option<f64>,
    pub print_params: bool,
    pub input: Option<PathBuf>,
    /// Batch file extension filter, without the dot.
    pub ext: Option<String>,
    pub output_dir: Option<PathBuf>,
    /// Batch worker threads; 0 uses every core.
    pub workers: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            flip: false,
            crop: CropMode::Auto,
            fov: FovConfig::default(),
            apo: AponeurosisConfig::default(),
            orient: OrientationConfig::default(),
            arch: ArchitectureConfig::default(),
            scale: None,
            scan_depth_mm: None,
            print_params: false,
            input: None,
            ext: None,
            output_dir: None,
            workers: 0,
        }
    }
}

pub const PRESETS: &[&str] = &["sample-c"];

impl AnalysisConfig {
    /// Built-in parameter sets.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "sample-c" => {
                let mut cfg = Self::default();
                cfg.apo.tube_sigma = 7.0;
                cfg.orient.n_rois = 3;
                cfg.orient.roi_width_pct = 60.0;
                cfg.orient.roi_height_pct = 90.0;
                cfg.orient.spectrum_mode = SpectrumMode::Auto;
                cfg.orient.log_sigma = 4.0;
                cfg.orient.aggregation = Aggregation::Max;
                Ok(cfg)
            }
            other => Err(Error::param(format!(
                "unknown preset '{other}' (available: {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::param(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.fov.validate()?;
        self.apo.validate()?;
        self.orient.validate()?;
        self.arch.validate()?;
        if let Some(s) = &self.scale {
            s.mm_per_px()?;
        }
        if let Some(d) = self.scan_depth_mm {
            if !(d > 0.0) {
                return Err(Error::param("scan_depth_mm must be positive"));
            }
        }
        if let Some(ext) = &self.ext {
            if ext.trim_start_matches('.').is_empty() {
                return Err(Error::param("extension filter is empty"));
            }
        }
        Ok(())
    }

    /// Every field as a dotted `key=value` pair, in declaration order.
    pub fn flatten(&self) -> Vec<(String, String)> {
        fn walk(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
            match v {
                serde_json::Value::Object(map) => {
                    for (k, child) in map {
                        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                        walk(&key, child, out);
                    }
                }
                serde_json::Value::String(s) => out.push((prefix.to_string(), s.clone())),
                other => out.push((prefix.to_string(), other.to_string())),
            }
        }
        let mut out = Vec::new();
        let value = serde_json::to_value(self).expect("config serializes");
        walk("", &value, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Decode,
    FovDetect,
    AponeurosisDetect,
    FascicleOrientation,
    Architecture,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Decode => "decode",
            Stage::FovDetect => "fov-detect",
            Stage::AponeurosisDetect => "aponeurosis-detect",
            Stage::FascicleOrientation => "fascicle-orientation",
            Stage::Architecture => "architecture",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed { stage: Stage, reason: String },
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Ok => f.write_str("ok"),
            Status::Failed { stage, .. } => write!(f, "failed({stage})"),
        }
    }
}

/// Geometry in FoV coordinates plus the FoV placement in the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub fov: RectRegion,
    pub pair: AponeurosisPair,
    pub rois: Vec<RectRegion>,
    pub roi_angles: Vec<f64>,
    pub roi_coherences: Vec<f64>,
    pub fascicle_angle: f64,
    pub result: ArchitectureResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub image_id: String,
    pub status: Status,
    /// Present exactly when the status is ok.
    pub measurement: Option<Measurement>,
    pub elapsed_ms: f64,
}

impl AnalysisRecord {
    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    fn failed(image_id: &str, stage: Stage, err: &Error, started: Instant) -> Self {
        Self {
            image_id: image_id.to_string(),
            status: Status::Failed {
                stage,
                reason: err.to_string(),
            },
            measurement: None,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        }
    }
}

fn measure(img: &GrayImage, cfg: &AnalysisConfig) -> std::result::Result<Measurement, (Stage, Error)> {
    let at = |stage: Stage| move |e: Error| (stage, e);
    let fov = match cfg.crop {
        CropMode::Auto => detect_field_of_view(img, &cfg.fov).map_err(at(Stage::FovDetect))?.rect,
        CropMode::Manual(r) => manual_field_of_view(img, r).map_err(at(Stage::FovDetect))?.rect,
        CropMode::None => img.full_rect(),
    };
    let view = crop(img, &fov).map_err(at(Stage::FovDetect))?;
    let pair = detect_aponeuroses(&view, &cfg.apo).map_err(at(Stage::AponeurosisDetect))?;
    let (est, rois) = estimate_orientation(&view, &pair, &cfg.orient).map_err(at(Stage::FascicleOrientation))?;
    let arch = || -> Result<ArchitectureResult> {
        let r = compute_architecture(&pair, est.aggregated_angle, fov.w as f64, &cfg.arch)?;
        match &cfg.scale {
            Some(s) => apply_scale(&r, s, cfg.scan_depth_mm),
            None => Ok(r),
        }
    };
    let result = arch().map_err(at(Stage::Architecture))?;
    Ok(Measurement {
        fov,
        pair,
        rois,
        roi_angles: est.roi_angles,
        roi_coherences: est.roi_coherences,
        fascicle_angle: est.aggregated_angle,
        result,
    })
}

/// Runs field-of-view detection, aponeurosis registration, fascicle
/// orientation and the architecture computation. Failures are captured in
/// the record. `img` is not modified; flipping works on a copy.
pub fn analyze_image(img: &GrayImage, image_id: &str, cfg: &AnalysisConfig) -> AnalysisRecord {
    let started = Instant::now();
    let flipped;
    let img = if cfg.flip {
        flipped = flip_horizontal(img);
        &flipped
    } else {
        img
    };
    match measure(img, cfg) {
        Ok(m) => AnalysisRecord {
            image_id: image_id.to_string(),
            status: Status::Ok,
            measurement: Some(m),
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        },
        Err((stage, e)) => AnalysisRecord::failed(image_id, stage, &e, started),
    }
}

fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Decodes, analyzes and, when `out_dir` is given, writes `<id>_overlay.png`.
pub fn process_file(path: &Path, cfg: &AnalysisConfig, out_dir: Option<&Path>) -> AnalysisRecord {
    let started = Instant::now();
    let id = image_id(path);
    let img = match decode_image(path) {
        Ok(img) => img,
        Err(e) => return AnalysisRecord::failed(&id, Stage::Decode, &e, started),
    };
    let mut record = analyze_image(&img, &id, cfg);
    if let Some(dir) = out_dir {
        let base = if cfg.flip { flip_horizontal(&img) } else { img };
        let ops = render_overlay(&record);
        if let Err(e) = encode_image(&base, dir.join(format!("{id}_overlay.png")), &ops) {
            record = AnalysisRecord::failed(&id, Stage::Output, &e, started);
        }
    }
    record.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    record
}

/// Files in `dir` whose extension matches `ext` (case-insensitive), sorted by name.
pub fn list_inputs(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let want = ext.trim_start_matches('.').to_ascii_lowercase();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let matches = path
            .extension()
            .is_some_and(|e| e.to_string_lossy().to_ascii_lowercase() == want);
        if matches && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::Input(format!("no .{want} files in {}", dir.display())));
    }
    Ok(files)
}

/// One record per matching file, in filename order. Files are processed
/// concurrently on `cfg.workers` threads; output does not depend on the count.
pub fn analyze_folder(dir: &Path, cfg: &AnalysisConfig) -> Result<Vec<AnalysisRecord>> {
    cfg.validate()?;
    let ext = cfg
        .ext
        .as_deref()
        .ok_or_else(|| Error::Input("batch mode needs a file extension filter".into()))?;
    let files = list_inputs(dir, ext)?;
    analyze_files(&files, cfg)
}

pub fn analyze_files(files: &[PathBuf], cfg: &AnalysisConfig) -> Result<Vec<AnalysisRecord>> {
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let workers = if cfg.workers == 0 { par::default_workers() } else { cfg.workers };
    let out = cfg.output_dir.as_deref();
    Ok(par::with_workers(workers, || par::map_collect(files, |p| process_file(p, cfg, out))))
}

/// Draw list for an overlay on the analyzed image: aponeuroses in green,
/// ROIs in yellow, the composite fascicle in red (dashed outside the FoV)
/// and a text block. Failed records get a banner only.
pub fn render_overlay(record: &AnalysisRecord) -> Vec<DrawOp> {
    let m = match (&record.status, &record.measurement) {
        (Status::Ok, Some(m)) => m,
        (Status::Failed { stage, .. }, _) => {
            return vec![DrawOp::Text {
                x: 4.0,
                y: 4.0,
                text: format!("FAILED: {stage}"),
                color: Rgb::RED,
                scale: 2,
            }];
        }
        (Status::Ok, None) => return Vec::new(),
    };
    let (ox, oy) = (m.fov.x as f64, m.fov.y as f64);
    let to_img = |(x, y): (f64, f64)| (x + ox, y + oy);
    let w = m.fov.w as f64;
    let mut ops = Vec::new();
    for line in [&m.pair.superficial, &m.pair.deep] {
        ops.push(DrawOp::Line {
            from: to_img((0.0, line.y_at(0.0))),
            to: to_img((w - 1.0, line.y_at(w - 1.0))),
            color: Rgb::GREEN,
            dashed: false,
        });
    }
    for r in &m.rois {
        ops.push(DrawOp::Rect {
            x: r.x as f64 + ox,
            y: r.y as f64 + oy,
            w: r.w as f64,
            h: r.h as f64,
            color: Rgb::YELLOW,
        });
    }
    let res = &m.result;
    let (p, q) = (res.fascicle_start, res.fascicle_end);
    if res.extrapolated {
        let edge_x = if q.0 < 0.0 { 0.0 } else { w };
        let edge = (edge_x, res.fascicle_line.y_at(edge_x));
        ops.push(DrawOp::Line {
            from: to_img(p),
            to: to_img(edge),
            color: Rgb::RED,
            dashed: false,
        });
        ops.push(DrawOp::Line {
            from: to_img(edge),
            to: to_img(q),
            color: Rgb::RED,
            dashed: true,
        });
    } else {
        ops.push(DrawOp::Line {
            from: to_img(p),
            to: to_img(q),
            color: Rgb::RED,
            dashed: false,
        });
    }
    let mut lines = vec![format!("PENNATION {:.1}°", res.pennation_deg)];
    match (res.fascicle_len_mm, res.thickness_mm) {
        (Some(l), Some(t)) => {
            lines.push(format!("LENGTH {l:.1} MM"));
            lines.push(format!("THICKNESS {t:.1} MM"));
        }
        _ => {
            lines.push(format!("LENGTH {:.1} PX", res.fascicle_len_px));
            lines.push(format!("THICKNESS {:.1} PX", res.thickness_px));
        }
    }
    for (i, text) in lines.into_iter().enumerate() {
        ops.push(DrawOp::Text {
            x: ox + 4.0,
            y: oy + 4.0 + 10.0 * i as f64,
            text,
            color: Rgb::WHITE,
            scale: 1,
        });
    }
    ops
}

pub const RESULT_COLUMNS: [&str; 12] = [
    "image_id",
    "status",
    "pennation_deg",
    "fascicle_len_px",
    "fascicle_len_mm",
    "thickness_px",
    "thickness_mm",
    "extrapolated",
    "apo_sup_deg",
    "apo_deep_deg",
    "roi_angles",
    "elapsed_ms",
];

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn num(v: f64) -> String {
    format!("{v:.4}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// CSV text of `records`, with an optional trailing `# key=value` block.
pub fn format_results(records: &[AnalysisRecord], cfg: &AnalysisConfig) -> String {
    let mut out = RESULT_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let mut row = vec![csv_field(&r.image_id), r.status.to_string()];
        match &r.measurement {
            Some(m) => {
                let a = &m.result;
                row.extend([
                    num(a.pennation_deg),
                    num(a.fascicle_len_px),
                    opt(a.fascicle_len_mm),
                    num(a.thickness_px),
                    opt(a.thickness_mm),
                    a.extrapolated.to_string(),
                    num(m.pair.superficial_angle),
                    num(m.pair.deep_angle),
                    m.roi_angles.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";"),
                ]);
            }
            None => row.extend(std::iter::repeat_n(String::new(), 9)),
        }
        row.push(format!("{:.1}", r.elapsed_ms));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    if cfg.print_params {
        for (k, v) in cfg.flatten() {
            out.push_str(&format!("# {k}={v}\n"));
        }
    }
    out
}

pub fn write_results(records: &[AnalysisRecord], cfg: &AnalysisConfig, path: &Path) -> Result<()> {
    fs::write(path, format_results(records, cfg)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validation::{generate_phantom, PhantomSpec};

    fn phantom() -> (GrayImage, ArchitectureResult) {
        generate_phantom(&PhantomSpec {
            gap_at_right: 150.0,
            fascicle_angle: 20.0,
            seed: 3,
            ..Default::default()
        })
        .unwrap()
    }

    fn no_crop() -> AnalysisConfig {
        AnalysisConfig {
            crop: CropMode::None,
            ..Default::default()
        }
    }

    #[test]
    fn phantom_with_scale() {
        let (img, _) = phantom();
        let cfg = AnalysisConfig {
            scale: Some(ScaleSpec::MmPerPx(0.1)),
            ..no_crop()
        };
        let rec = analyze_image(&img, "p", &cfg);
        let m = rec.measurement.as_ref().unwrap_or_else(|| panic!("{:?}", rec.status));
        let r = &m.result;
        assert!((r.pennation_deg - 20.0).abs() <= 1.0, "{r:?}");
        assert!((r.thickness_mm.unwrap() - 15.0).abs() <= 0.5, "{r:?}");
        assert!((r.fascicle_len_mm.unwrap() - 43.86).abs() <= 1.5, "{r:?}");
    }

    #[test]
    fn black_image_fails_at_fov() {
        let rec = analyze_image(&GrayImage::new(200, 150), "black", &AnalysisConfig::default());
        assert!(matches!(rec.status, Status::Failed { stage: Stage::FovDetect, .. }));
        assert!(rec.measurement.is_none());
    }

    #[test]
    fn deterministic() {
        let (img, _) = phantom();
        let a = analyze_image(&img, "p", &no_crop());
        let b = analyze_image(&img, "p", &no_crop());
        assert_eq!(a.measurement, b.measurement);
    }

    #[test]
    fn original_untouched() {
        let (img, _) = phantom();
        let copy = img.clone();
        analyze_image(&img, "p", &AnalysisConfig { flip: true, ..no_crop() });
        assert_eq!(img, copy);
    }

    #[test]
    fn overlay_primitives() {
        let (img, _) = phantom();
        let rec = analyze_image(&img, "p", &no_crop());
        let ops = render_overlay(&rec);
        let count = |c: Rgb, f: fn(&DrawOp) -> bool| ops.iter().filter(|o| o.color() == c && f(o)).count();
        assert_eq!(count(Rgb::GREEN, |o| matches!(o, DrawOp::Line { .. })), 2);
        assert_eq!(count(Rgb::YELLOW, |o| matches!(o, DrawOp::Rect { .. })), 3);
        let red: Vec<_> = ops.iter().filter(|o| o.color() == Rgb::RED).collect();
        let extrapolated = rec.measurement.unwrap().result.extrapolated;
        assert_eq!(red.len(), if extrapolated { 2 } else { 1 });

        let failed = analyze_image(&GrayImage::new(64, 64), "x", &AnalysisConfig::default());
        let ops = render_overlay(&failed);
        assert_eq!(ops.len(), 1);
        assert!(matches!(ops[0], DrawOp::Text { .. }));
    }

    #[test]
    fn extrapolated_segment_dashed_beyond_fov() {
        let (img, _) = generate_phantom(&PhantomSpec {
            gap_at_right: 300.0,
            fascicle_angle: 12.0,
            ..Default::default()
        })
        .unwrap();
        let rec = analyze_image(&img, "e", &no_crop());
        let m = rec.measurement.as_ref().unwrap_or_else(|| panic!("{:?}", rec.status));
        assert!(m.result.extrapolated);
        let ops = render_overlay(&rec);
        let dashed: Vec<_> = ops
            .iter()
            .filter_map(|o| match o {
                DrawOp::Line { color, dashed, from, to } if *color == Rgb::RED => Some((*dashed, *from, *to)),
                _ => None,
            })
            .collect();
        assert_eq!(dashed.len(), 2);
        assert!(!dashed[0].0 && dashed[1].0);
        assert!((dashed[1].1 .0).abs() < 1e-9 && dashed[1].2 .0 < 0.0);
    }

    #[test]
    fn csv_layout() {
        let (img, _) = phantom();
        let ok = analyze_image(&img, "a", &no_crop());
        let failed = analyze_image(&GrayImage::new(64, 64), "b", &AnalysisConfig::default());
        let text = format_results(&[ok.clone(), failed, ok], &AnalysisConfig::default());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], RESULT_COLUMNS.join(","));
        assert_eq!(lines.len(), 4);
        let failed_row: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(failed_row[1], "failed(fov-detect)");
        assert!(failed_row[2..11].iter().all(|c| c.is_empty()));
        let ok_row: Vec<&str> = lines[1].split(',').collect();
        assert!(ok_row[4].is_empty() && ok_row[6].is_empty());
        assert!(!ok_row[3].is_empty() && !ok_row[5].is_empty());
        assert_eq!(ok_row[10].split(';').count(), 3);
    }

    #[test]
    fn params_block_lists_every_field_once() {
        let cfg = AnalysisConfig {
            print_params: true,
            scale: Some(ScaleSpec::ScaleBar { px: 385.0, mm: 40.0 }),
            ..Default::default()
        };
        let text = format_results(&[], &cfg);
        let keys: Vec<&str> = text
            .lines()
            .filter_map(|l| l.strip_prefix("# "))
            .map(|l| l.split('=').next().unwrap())
            .collect();
        let expected: Vec<String> = cfg.flatten().into_iter().map(|(k, _)| k).collect();
        assert_eq!(keys, expected);
        let mut dedup = keys.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), keys.len());
        for top in ["flip", "crop", "print_params", "workers", "scale.scale_bar.px", "apo.tube_sigma", "orient.n_rois"] {
            assert!(keys.contains(&top), "{top}");
        }
    }

    #[test]
    fn config_json_round_trip() {
        let mut cfg = AnalysisConfig::preset("sample-c").unwrap();
        cfg.crop = CropMode::Manual(RectRegion::new(10, 20, 300, 200));
        cfg.orient.spectrum_mode = SpectrumMode::Manual(75.0);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(AnalysisConfig::from_json(&text).unwrap(), cfg);
        assert_eq!(cfg.apo.tube_sigma, 7.0);
        assert!(AnalysisConfig::from_json(r#"{"apo": {"tube_sigma": -1}}"#).is_err());
        assert!(AnalysisConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(AnalysisConfig::preset("nope").is_err());
    }

    #[test]
    fn folder_order_and_isolation() {
        let dir = tempfile::tempdir().unwrap();
        let (img, _) = phantom();
        for name in ["c", "a"] {
            encode_image(&img, dir.path().join(format!("{name}.png")), &[]).unwrap();
        }
        fs::write(dir.path().join("b.png"), b"not a png").unwrap();
        fs::write(dir.path().join("notes.txt"), b"skip").unwrap();
        let out = dir.path().join("out");
        let cfg = AnalysisConfig {
            ext: Some("png".into()),
            output_dir: Some(out.clone()),
            ..no_crop()
        };
        let recs = analyze_folder(dir.path(), &cfg).unwrap();
        let ids: Vec<&str> = recs.iter().map(|r| r.image_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!(matches!(recs[1].status, Status::Failed { stage: Stage::Decode, .. }));
        assert!(recs[0].is_ok() && recs[2].is_ok());
        assert!(out.join("a_overlay.png").exists() && !out.join("b_overlay.png").exists());

        let serial = analyze_folder(dir.path(), &AnalysisConfig { workers: 1, ..cfg.clone() }).unwrap();
        let wide = analyze_folder(dir.path(), &AnalysisConfig { workers: 4, ..cfg.clone() }).unwrap();
        let strip = |rs: &[AnalysisRecord]| rs.iter().map(|r| (r.status.clone(), r.measurement.clone())).collect::<Vec<_>>();
        assert_eq!(strip(&serial), strip(&wide));

        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(analyze_folder(empty.path(), &cfg), Err(Error::Input(_))));
    }
}
