//! `sma`: batch muscle architecture analysis, phantom generation and
//! agreement statistics.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sma_core::architecture::ScaleSpec;
use sma_core::frequency::SpectrumMode;
use sma_core::orientation::Aggregation;
use sma_core::pipeline::{analyze_files, list_inputs, write_results, AnalysisConfig, AnalysisRecord, CropMode};
use sma_core::validation::{bland_altman, generate_phantom, AgreementStats, PhantomSpec};
use sma_core::RectRegion;

const EXIT_FAILED: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "sma", version, about = "Muscle architecture analysis of B-mode ultrasound images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one image, or a folder with --batch.
    Analyze(Box<AnalyzeArgs>),
    /// Render synthetic muscle images with known architecture.
    Phantom(PhantomArgs),
    /// Bland-Altman agreement between one column of two result tables.
    Agree(AgreeArgs),
}

#[derive(Args, Default)]
struct AnalyzeArgs {
    /// Image file, or a folder with --batch.
    path: Option<PathBuf>,
    #[arg(long)]
    batch: bool,
    /// File extension to pick up in batch mode.
    #[arg(long)]
    ext: Option<String>,
    #[arg(long)]
    flip: bool,
    /// Manual field of view as x,y,w,h.
    #[arg(long)]
    crop: Option<RectRegion>,
    #[arg(long)]
    tube_sigma: Option<f64>,
    #[arg(long)]
    rois: Option<usize>,
    /// ROI width, percent of the field of view.
    #[arg(long)]
    roi_width: Option<f64>,
    /// ROI height, percent of the aponeurosis gap.
    #[arg(long)]
    roi_height: Option<f64>,
    /// `auto` or the percentage of weakest spectrum bins to drop.
    #[arg(long)]
    spectrum: Option<SpectrumMode>,
    #[arg(long)]
    log_sigma: Option<f64>,
    #[arg(long)]
    aggregate: Option<Aggregation>,
    #[arg(long, conflicts_with_all = ["scale_bar_px", "scale_bar_mm"])]
    mm_per_px: Option<f64>,
    #[arg(long, requires = "scale_bar_mm")]
    scale_bar_px: Option<f64>,
    #[arg(long, requires = "scale_bar_px")]
    scale_bar_mm: Option<f64>,
    #[arg(long)]
    scan_depth_mm: Option<f64>,
    /// Output folder for results.csv and overlays.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    print_params: bool,
    /// JSON file mirroring the analysis configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Worker threads for batch mode; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct PhantomArgs {
    /// JSON phantom spec; omitted fields take their defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Number of images; image i uses seed + i.
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct AgreeArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value = "pennation_deg")]
    column: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Analyze(args) => analyze(*args),
        Command::Phantom(args) => phantom(args).map(|()| true),
        Command::Agree(args) => agree(args).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn build_config(args: &AnalyzeArgs) -> Result<AnalysisConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            AnalysisConfig::from_json(&text)?
        }
        (None, Some(name)) => AnalysisConfig::preset(name)?,
        (None, None) => AnalysisConfig::default(),
    };
    if args.flip {
        cfg.flip = true;
    }
    if let Some(r) = args.crop {
        cfg.crop = CropMode::Manual(r);
    }
    if let Some(v) = args.tube_sigma {
        cfg.apo.tube_sigma = v;
    }
    if let Some(v) = args.rois {
        cfg.orient.n_rois = v;
    }
    if let Some(v) = args.roi_width {
        cfg.orient.roi_width_pct = v;
    }
    if let Some(v) = args.roi_height {
        cfg.orient.roi_height_pct = v;
    }
    if let Some(v) = args.spectrum {
        cfg.orient.spectrum_mode = v;
    }
    if let Some(v) = args.log_sigma {
        cfg.orient.log_sigma = v;
    }
    if let Some(v) = args.aggregate {
        cfg.orient.aggregation = v;
    }
    if let Some(v) = args.mm_per_px {
        cfg.scale = Some(ScaleSpec::MmPerPx(v));
    }
    if let (Some(px), Some(mm)) = (args.scale_bar_px, args.scale_bar_mm) {
        cfg.scale = Some(ScaleSpec::ScaleBar { px, mm });
    }
    if args.scan_depth_mm.is_some() {
        cfg.scan_depth_mm = args.scan_depth_mm;
    }
    if args.print_params {
        cfg.print_params = true;
    }
    if let Some(p) = &args.path {
        cfg.input = Some(p.clone());
    }
    if let Some(e) = &args.ext {
        cfg.ext = Some(e.clone());
    }
    if let Some(o) = &args.out {
        cfg.output_dir = Some(o.clone());
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(PathBuf::from("."));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn inputs(cfg: &AnalysisConfig, batch: bool) -> Result<Vec<PathBuf>> {
    let Some(path) = cfg.input.as_deref() else {
        bail!("no input given (pass a path or set \"input\" in the config)");
    };
    if batch {
        if !path.is_dir() {
            bail!("{} is not a folder", path.display());
        }
        let ext = cfg.ext.as_deref().unwrap_or("png");
        return Ok(list_inputs(path, ext)?);
    }
    if !path.is_file() {
        bail!("{} is not a file (use --batch for folders)", path.display());
    }
    Ok(vec![path.to_path_buf()])
}

fn report(records: &[AnalysisRecord]) {
    for r in records {
        match (&r.status, &r.measurement) {
            (_, Some(m)) => eprintln!(
                "{}: pennation {:.2} deg, length {:.1} px, thickness {:.1} px",
                r.image_id, m.result.pennation_deg, m.result.fascicle_len_px, m.result.thickness_px
            ),
            (status, None) => eprintln!("{}: {status:?}", r.image_id),
        }
    }
}

fn analyze(args: AnalyzeArgs) -> Result<bool> {
    let cfg = build_config(&args)?;
    let files = inputs(&cfg, args.batch)?;
    let records = analyze_files(&files, &cfg)?;
    let out = cfg.output_dir.as_deref().unwrap_or(Path::new("."));
    let csv = out.join("results.csv");
    write_results(&records, &cfg, &csv)?;
    report(&records);
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    eprintln!("{} ok, {failed} failed; wrote {}", records.len() - failed, csv.display());
    Ok(failed == 0)
}

fn phantom(args: PhantomArgs) -> Result<()> {
    let base = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<PhantomSpec>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => PhantomSpec::default(),
    };
    base.validate()?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let width = args.n.saturating_sub(1).to_string().len().max(3);
    let mut table = String::from(
        "image_id,seed,pennation_deg,fascicle_len_px,thickness_px,sup_angle_deg,deep_angle_deg,fascicle_angle_deg\n",
    );
    for i in 0..args.n {
        let spec = PhantomSpec {
            seed: base.seed.wrapping_add(i as u64),
            ..base
        };
        let (img, truth) = generate_phantom(&spec)?;
        let id = format!("phantom_{i:0width$}");
        sma_core::encode_image(&img, args.out.join(format!("{id}.png")), &[])?;
        table.push_str(&format!(
            "{id},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
            spec.seed,
            truth.pennation_deg,
            truth.fascicle_len_px,
            truth.thickness_px,
            spec.sup_angle,
            spec.deep_angle,
            spec.fascicle_angle
        ));
    }
    let path = args.out.join("ground_truth.csv");
    fs::write(&path, table).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {} phantoms to {}", args.n, args.out.display());
    Ok(())
}

/// `(image_id, value)` for every row with a numeric `column`.
fn read_column(path: &Path, column: &str) -> Result<Vec<(String, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let Some(col) = find(column) else {
        bail!("{} has no column '{column}'", path.display());
    };
    let id_col = find("image_id");
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.with_context(|| format!("reading {}", path.display()))?;
        let id = id_col.and_then(|c| row.get(c)).map(str::to_string).unwrap_or_else(|| i.to_string());
        if let Some(v) = row.get(col).and_then(|s| s.trim().parse::<f64>().ok()) {
            out.push((id, v));
        }
    }
    Ok(out)
}

fn agreement_csv(s: &AgreementStats) -> String {
    format!(
        "n,bias,sd_diff,loa_low,loa_high,proportional_slope\n{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
        s.n, s.bias, s.sd_diff, s.loa_low, s.loa_high, s.proportional_slope
    )
}

fn agree(args: AgreeArgs) -> Result<()> {
    let a = read_column(&args.a, &args.column)?;
    let b = read_column(&args.b, &args.column)?;
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .filter_map(|(id, va)| b.iter().find(|(other, _)| other == id).map(|(_, vb)| (*va, *vb)))
        .collect();
    let stats = bland_altman(&pairs).context("pairing rows by image_id")?;
    let text = match args.format {
        Format::Csv => agreement_csv(&stats),
        Format::Json => serde_json::to_string_pretty(&stats)? + "\n",
    };
    match &args.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
