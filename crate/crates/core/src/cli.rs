//! Command-line surface. Directory commands process images in parallel and
//! emit results in sorted-id order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluate::{evaluate_run, EvalConfig};
use crate::io::{
    format_coords, list_by_stem, read_coords, read_fovea_stats, read_mask, read_pmap, read_raster,
    read_scores, write_mask, write_pmap, write_raster, write_text, Polarity,
};
use crate::losses::{bce, dice_loss, lovasz_binary, DEFAULT_DICE_SMOOTH};
use crate::metrics::roc_points;
use crate::overlay::{render_overlay, OverlayLayers};
use crate::postprocess::{
    detachment_fix, fuse_disc_atrophy, localize_fovea_detailed, FoveaSource,
    DEFAULT_DETACHMENT_FRACTION,
};
use crate::preprocess::{illumination_correct, resize, IlluminationParams, ResizeMode};
use crate::raster::{threshold, BinaryMask, ImageMeta, Point, ResolutionGroup};
use crate::sampler::{epoch_indices, minority_fraction, ScheduleConfig, DEFAULT_DECAY, DEFAULT_PERIOD};
use crate::tiler::{default_plan, ensemble_average, plan_tiles, stitch, Tile, DEFAULT_PATCH};

/// Environment variable capping the worker count (0 = automatic).
pub const THREADS_ENV: &str = "FUNDUS_TK_THREADS";

const IMAGE_EXT: &[&str] = &["png", "jpg", "jpeg", "bmp", "tif", "tiff"];
const MASK_EXT: &[&str] = &["png", "bmp", "tif", "tiff"];

#[derive(Debug, Parser)]
#[command(name = "fundus-tk", version, about = "Fundus segmentation post-processing and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Illumination-correct an image or every image in a directory.
    Preprocess(PreprocessArgs),
    /// Average overlapping patch predictions back into a full-size map.
    Stitch(StitchArgs),
    /// Fuse disc and atrophy maps into non-overlapping masks.
    Fuse(FuseArgs),
    /// Promote large detachment predictions to the full image.
    DetachFix(DetachFixArgs),
    /// Fovea coordinates from segmentation maps with disc-based fallback.
    Fovea(FoveaArgs),
    /// Score a prediction directory against ground truth.
    Evaluate(EvaluateArgs),
    /// Forward loss values for scores and labels.
    Loss(LossArgs),
    /// Class-balanced sampling schedule.
    Schedule(ScheduleArgs),
    /// Draw outlines and the fovea cross on an image.
    Overlay(OverlayArgs),
}

#[derive(Debug, Args)]
pub struct MaskPolarity {
    /// Mask pixel polarity: `zero` (0 = foreground) or `nonzero`.
    #[arg(long, default_value = "zero", value_parser = parse_polarity)]
    pub polarity: Polarity,
}

fn parse_polarity(s: &str) -> std::result::Result<Polarity, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_group(s: &str) -> std::result::Result<ResolutionGroup, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Input image or directory.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output image or directory (PNG).
    #[arg(short, long)]
    pub output: PathBuf,
    /// Gaussian sigma in pixels [default: width / 30].
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = IlluminationParams::DEFAULT_GAIN)]
    pub gain: f64,
    #[arg(long, default_value_t = IlluminationParams::DEFAULT_OFFSET)]
    pub offset: u8,
    /// Resize the corrected image (bilinear), e.g. `288x288`.
    #[arg(long, value_parser = parse_group)]
    pub resize: Option<ResolutionGroup>,
}

#[derive(Debug, Args)]
pub struct StitchArgs {
    /// `SCALE=DIR` with tiles named `<x0>_<y0>.pmap`; repeat per scale.
    #[arg(long = "tiles", required = true, value_parser = parse_scale_dir)]
    pub tiles: Vec<(usize, PathBuf)>,
    #[arg(long, default_value_t = DEFAULT_PATCH)]
    pub patch: usize,
    /// Tile stride [default: scale - patch].
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub height: usize,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn parse_scale_dir(s: &str) -> std::result::Result<(usize, PathBuf), String> {
    let (scale, dir) = s.split_once('=').ok_or("expected SCALE=DIR")?;
    let scale = scale.parse().map_err(|_| format!("bad scale `{scale}`"))?;
    Ok((scale, PathBuf::from(dir)))
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Disc PMAP file or directory of `<id>.pmap`.
    #[arg(long)]
    pub disc: PathBuf,
    /// Atrophy PMAP file or directory.
    #[arg(long)]
    pub atrophy: PathBuf,
    #[arg(short, long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Output disc mask file or directory.
    #[arg(long)]
    pub disc_out: PathBuf,
    /// Output atrophy mask file or directory.
    #[arg(long)]
    pub atrophy_out: PathBuf,
    #[command(flatten)]
    pub polarity: MaskPolarity,
}

#[derive(Debug, Args)]
pub struct DetachFixArgs {
    /// Mask PNG or PMAP (thresholded), file or directory.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output mask file or directory.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DETACHMENT_FRACTION)]
    pub fraction: f64,
    /// Threshold applied to PMAP inputs.
    #[arg(short, long, default_value_t = 0.5)]
    pub threshold: f64,
    #[command(flatten)]
    pub polarity: MaskPolarity,
}

#[derive(Debug, Args)]
pub struct FoveaArgs {
    /// Fovea PMAP file or directory of `<id>.pmap`.
    #[arg(long)]
    pub maps: PathBuf,
    /// Directory of disc masks `<id>.png` (or a single mask); missing means no disc.
    #[arg(long)]
    pub disc: Option<PathBuf>,
    /// Fovea statistics config.
    #[arg(long)]
    pub stats: PathBuf,
    #[arg(short, long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Output CSV (`id,x,y`); stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub polarity: MaskPolarity,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Text,
    Kv,
    Both,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub min_area: usize,
    #[arg(long, default_value_t = 0.75)]
    pub dice_weight: f64,
    #[arg(long, default_value_t = 0.25)]
    pub f1_weight: f64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Export ROC points (`fpr,tpr`) of the classification task.
    #[arg(long)]
    pub roc: Option<PathBuf>,
    #[command(flatten)]
    pub polarity: MaskPolarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossKind {
    All,
    Bce,
    Dice,
    Lovasz,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Scores: whitespace/comma separated text, PMAP, or image.
    #[arg(long)]
    pub scores: PathBuf,
    /// Labels (0/1): text, PMAP (>= 0.5) or mask image.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_enum, default_value_t = LossKind::All)]
    pub kind: LossKind,
    #[arg(long, default_value_t = DEFAULT_DICE_SMOOTH)]
    pub smooth: f64,
    #[command(flatten)]
    pub polarity: MaskPolarity,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Minority prevalence in the training data.
    #[arg(long)]
    pub f_orig: f64,
    #[arg(long, default_value_t = DEFAULT_DECAY)]
    pub decay: f64,
    #[arg(long, default_value_t = DEFAULT_PERIOD)]
    pub period: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    /// First epoch.
    #[arg(long, default_value_t = 0)]
    pub from: u64,
    /// Number of epochs to emit.
    #[arg(long, default_value_t = 1)]
    pub epochs: u64,
    /// Minority ids, one per line.
    #[arg(long)]
    pub minority_ids: Option<PathBuf>,
    /// Majority ids, one per line.
    #[arg(long)]
    pub majority_ids: Option<PathBuf>,
    /// Use ids `0..n` for the minority class instead of a file.
    #[arg(long)]
    pub n_minority: Option<usize>,
    /// Use ids `n_minority..n_minority+n` for the majority class.
    #[arg(long)]
    pub n_majority: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OverlayArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub disc: Option<PathBuf>,
    #[arg(long)]
    pub atrophy: Option<PathBuf>,
    #[arg(long)]
    pub detachment: Option<PathBuf>,
    /// Fovea as `x,y`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub fovea: Option<Point>,
    /// Fovea CSV to look up `--id` in (alternative to `--fovea`).
    #[arg(long, requires = "id", conflicts_with = "fovea")]
    pub fovea_csv: Option<PathBuf>,
    #[arg(long)]
    pub id: Option<String>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub polarity: MaskPolarity,
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let p = Point::new(
        x.trim().parse().map_err(|_| format!("bad x `{x}`"))?,
        y.trim().parse().map_err(|_| format!("bad y `{y}`"))?,
    );
    if !p.is_finite() {
        return Err("coordinates must be finite".into());
    }
    Ok(p)
}

/// Reads the worker cap from [`THREADS_ENV`]; `None` means automatic.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(Error::Config(format!("{THREADS_ENV}=`{v}` is not a worker count"))),
        },
    }
}

/// Runs `f` over every item in parallel; failures are collected per item.
fn for_each_item<T: Sync>(
    items: &[(String, T)],
    f: impl Fn(&str, &T) -> Result<()> + Sync,
) -> Result<()> {
    let failures: Vec<String> = items
        .par_iter()
        .filter_map(|(id, item)| f(id, item).err().map(|e| format!("{id}: {e}")))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Batch { total: items.len(), failures })
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn preprocess(args: &PreprocessArgs) -> Result<()> {
    let run = |src: &Path, dst: &Path| -> Result<()> {
        let img = read_raster(src)?;
        let mut params = IlluminationParams::for_width(img.width());
        params.gain = args.gain;
        params.offset = args.offset;
        if let Some(s) = args.sigma {
            params.sigma = s;
        }
        let mut out = illumination_correct(&img, &params)?;
        if let Some(g) = args.resize {
            out = resize(&out, g.width, g.height, ResizeMode::Bilinear)?;
        }
        write_raster(dst, &out)
    };
    if args.input.is_dir() {
        ensure_dir(&args.output)?;
        let items: Vec<_> = list_by_stem(&args.input, IMAGE_EXT)?.into_iter().collect();
        for_each_item(&items, |id, src| run(src, &args.output.join(format!("{id}.png"))))
    } else {
        run(&args.input, &args.output)
    }
}

fn parse_tile_name(path: &Path) -> Result<(usize, usize)> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let bad = || Error::format(path, "tile files must be named <x0>_<y0>.pmap");
    let (x, y) = stem.split_once('_').ok_or_else(bad)?;
    Ok((x.parse().map_err(|_| bad())?, y.parse().map_err(|_| bad())?))
}

fn stitch_cmd(args: &StitchArgs) -> Result<()> {
    let maps = args
        .tiles
        .par_iter()
        .map(|(scale, dir)| {
            let plan = match args.stride {
                Some(s) => plan_tiles(*scale, args.patch, s)?,
                None => default_plan(*scale, args.patch)?,
            };
            let tiles = list_by_stem(dir, &["pmap"])?
                .values()
                .map(|path| {
                    let (x0, y0) = parse_tile_name(path)?;
                    Ok(Tile { x0, y0, map: read_pmap(path)? })
                })
                .collect::<Result<Vec<_>>>()?;
            stitch(&tiles, &plan, args.width, args.height)
        })
        .collect::<Result<Vec<_>>>()?;
    write_pmap(&args.output, &ensemble_average(&maps)?)
}

/// `(id, input path)` pairs for a file-or-directory argument.
fn inputs(path: &Path, ext: &[&str]) -> Result<Vec<(String, PathBuf)>> {
    if path.is_dir() {
        Ok(list_by_stem(path, ext)?.into_iter().collect())
    } else {
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("input").to_string();
        Ok(vec![(id, path.to_path_buf())])
    }
}

fn fuse_cmd(args: &FuseArgs) -> Result<()> {
    let pol = args.polarity.polarity;
    let run = |disc: &Path, atrophy: &Path, disc_out: &Path, atrophy_out: &Path| -> Result<()> {
        let fused = fuse_disc_atrophy(&read_pmap(disc)?, &read_pmap(atrophy)?, args.threshold)?;
        write_mask(disc_out, &fused.disc, pol)?;
        write_mask(atrophy_out, &fused.atrophy, pol)
    };
    if !args.disc.is_dir() {
        return run(&args.disc, &args.atrophy, &args.disc_out, &args.atrophy_out);
    }
    ensure_dir(&args.disc_out)?;
    ensure_dir(&args.atrophy_out)?;
    let items = inputs(&args.disc, &["pmap"])?;
    for_each_item(&items, |id, disc| {
        let atrophy = args.atrophy.join(format!("{id}.pmap"));
        let name = format!("{id}.png");
        run(disc, &atrophy, &args.disc_out.join(&name), &args.atrophy_out.join(&name))
    })
}

fn load_mask_or_map(path: &Path, t: f64, pol: Polarity) -> Result<BinaryMask> {
    let is_pmap = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pmap"));
    if is_pmap {
        threshold(&read_pmap(path)?, t)
    } else {
        read_mask(path, pol)
    }
}

fn detach_fix_cmd(args: &DetachFixArgs) -> Result<()> {
    let pol = args.polarity.polarity;
    let run = |src: &Path, dst: &Path| -> Result<()> {
        let mask = load_mask_or_map(src, args.threshold, pol)?;
        write_mask(dst, &detachment_fix(&mask, args.fraction)?, pol)
    };
    if args.input.is_dir() {
        ensure_dir(&args.output)?;
        let mut ext = MASK_EXT.to_vec();
        ext.push("pmap");
        let items = inputs(&args.input, &ext)?;
        for_each_item(&items, |id, src| run(src, &args.output.join(format!("{id}.png"))))
    } else {
        run(&args.input, &args.output)
    }
}

fn fovea_cmd(args: &FoveaArgs, out: &mut dyn Write) -> Result<()> {
    let stats = read_fovea_stats(&args.stats)?;
    let pol = args.polarity.polarity;
    let items = inputs(&args.maps, &["pmap"])?;
    let disc_for = |id: &str| -> Option<PathBuf> {
        let d = args.disc.as_ref()?;
        if d.is_dir() {
            MASK_EXT.iter().map(|e| d.join(format!("{id}.{e}"))).find(|p| p.is_file())
        } else {
            Some(d.clone())
        }
    };
    let results: Vec<(String, Result<(Point, FoveaSource)>)> = items
        .par_iter()
        .map(|(id, path)| {
            let r = (|| {
                let map = read_pmap(path)?;
                let (w, h) = (map.width(), map.height());
                let disc = match disc_for(id) {
                    Some(p) => read_mask(&p, pol)?,
                    None => BinaryMask::empty(w, h)?,
                };
                let meta = ImageMeta::new(id.clone(), w, h);
                let est = localize_fovea_detailed(&map, &disc, &stats, &meta, args.threshold)?;
                Ok((est.point, est.source))
            })();
            (id.clone(), r)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut by_source: BTreeMap<&str, usize> = BTreeMap::new();
    for (id, r) in &results {
        match r {
            Ok((p, src)) => {
                rows.push((id.as_str(), *p));
                let key = match src {
                    FoveaSource::Prediction => "prediction",
                    FoveaSource::DiscFallback => "disc_fallback",
                    FoveaSource::CenterFallback => "center_fallback",
                };
                *by_source.entry(key).or_default() += 1;
            }
            Err(e) => failures.push(format!("{id}: {e}")),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Batch { total: items.len(), failures });
    }
    let csv = format_coords(rows);
    match &args.output {
        Some(path) => write_text(path, &csv)?,
        None => out.write_all(csv.as_bytes()).map_err(|e| Error::io("<stdout>", e))?,
    }
    let summary: Vec<String> = by_source.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("fovea: {}", summary.join(" "));
    Ok(())
}

fn evaluate_cmd(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = EvalConfig {
        polarity: args.polarity.polarity,
        min_area: args.min_area,
        dice_weight: args.dice_weight,
        f1_weight: args.f1_weight,
    };
    let report = evaluate_run(&args.pred, &args.gt, &cfg)?;
    let text = match args.format {
        ReportFormat::Text => report.to_text(),
        ReportFormat::Kv => report.to_key_values(),
        ReportFormat::Both => format!("{}\n{}", report.to_text(), report.to_key_values()),
    };
    match &args.output {
        Some(path) => write_text(path, &text)?,
        None => out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))?,
    }
    if let Some(roc_path) = &args.roc {
        let gt = read_scores(args.gt.join("classification.csv"))?;
        let pred = read_scores(args.pred.join("classification.csv"))?;
        let (mut scores, mut labels) = (Vec::new(), Vec::new());
        for (id, &label) in &gt {
            if let Some(&s) = pred.get(id) {
                scores.push(s);
                labels.push(label == 1.0);
            }
        }
        let mut csv = String::from("fpr,tpr\n");
        for (fpr, tpr) in roc_points(&scores, &labels)? {
            let _ = writeln!(csv, "{fpr},{tpr}");
        }
        write_text(roc_path, &csv)?;
    }
    if report.warning() {
        eprintln!("warning: {} ground-truth entries have no prediction", report.missing.len());
    }
    Ok(())
}

fn read_values(path: &Path, pol: Polarity) -> Result<Vec<f64>> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    if ext == "pmap" {
        return Ok(read_pmap(path)?.into_values());
    }
    if IMAGE_EXT.contains(&ext.as_str()) {
        let m = read_mask(path, pol)?;
        return Ok(m.bits().iter().map(|&b| b as u8 as f64).collect());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::format(path, format!("`{t}` is not a number")))
        })
        .collect()
}

fn loss_cmd(args: &LossArgs, out: &mut dyn Write) -> Result<()> {
    let pol = args.polarity.polarity;
    let scores = read_values(&args.scores, pol)?;
    let raw_labels = read_values(&args.labels, pol)?;
    let is_pmap = args.labels.extension().is_some_and(|e| e.eq_ignore_ascii_case("pmap"));
    let labels = raw_labels
        .iter()
        .map(|&v| {
            if is_pmap {
                Ok(v >= 0.5)
            } else if v == 0.0 || v == 1.0 {
                Ok(v == 1.0)
            } else {
                Err(Error::format(&args.labels, format!("label {v} is not 0 or 1")))
            }
        })
        .collect::<Result<Vec<bool>>>()?;
    let mut text = String::new();
    if matches!(args.kind, LossKind::All | LossKind::Bce) {
        let _ = writeln!(text, "bce={}", bce(&scores, &labels)?);
    }
    if matches!(args.kind, LossKind::All | LossKind::Dice) {
        let _ = writeln!(text, "dice={}", dice_loss(&scores, &labels, args.smooth)?);
    }
    if matches!(args.kind, LossKind::All | LossKind::Lovasz) {
        let _ = writeln!(text, "lovasz={}", lovasz_binary(&scores, &labels)?);
    }
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn read_id_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

fn schedule_cmd(args: &ScheduleArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = ScheduleConfig {
        f_orig: args.f_orig,
        decay: args.decay,
        period: args.period,
        seed: args.seed,
        batch: args.batch,
    };
    cfg.validate()?;
    let ids = |file: &Option<PathBuf>, n: Option<usize>, start: usize| -> Result<Option<Vec<String>>> {
        match (file, n) {
            (Some(f), _) => read_id_list(f).map(Some),
            (None, Some(n)) => Ok(Some((start..start + n).map(|i| i.to_string()).collect())),
            (None, None) => Ok(None),
        }
    };
    let minority = ids(&args.minority_ids, args.n_minority, 0)?;
    let majority = ids(&args.majority_ids, args.n_majority, args.n_minority.unwrap_or(0))?;
    if minority.is_some() != majority.is_some() {
        return Err(Error::param("give both minority and majority ids (or counts)"));
    }

    let mut text = String::new();
    for epoch in args.from..args.from.saturating_add(args.epochs) {
        let _ = writeln!(text, "epoch={epoch} minority_fraction={}", minority_fraction(epoch, &cfg));
        if let (Some(min), Some(maj)) = (&minority, &majority) {
            let seq = epoch_indices(min, maj, epoch, &cfg)?;
            let _ = writeln!(text, "epoch={epoch} indices={}", seq.join(","));
        }
    }
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn overlay_cmd(args: &OverlayArgs) -> Result<()> {
    let pol = args.polarity.polarity;
    let image = read_raster(&args.image)?;
    let load = |p: &Option<PathBuf>| p.as_ref().map(|p| read_mask(p, pol)).transpose();
    let disc = load(&args.disc)?;
    let atrophy = load(&args.atrophy)?;
    let detachment = load(&args.detachment)?;
    let fovea = match (&args.fovea, &args.fovea_csv, &args.id) {
        (Some(p), _, _) => Some(*p),
        (None, Some(csv), Some(id)) => Some(
            *read_coords(csv)?
                .get(id)
                .ok_or_else(|| Error::format(csv, format!("no entry for `{id}`")))?,
        ),
        _ => None,
    };
    let layers = OverlayLayers {
        disc: disc.as_ref(),
        atrophy: atrophy.as_ref(),
        detachment: detachment.as_ref(),
        fovea,
    };
    write_raster(&args.output, &render_overlay(&image, &layers)?)
}

/// Executes a parsed command, writing textual results to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Preprocess(a) => preprocess(a),
        Command::Stitch(a) => stitch_cmd(a),
        Command::Fuse(a) => fuse_cmd(a),
        Command::DetachFix(a) => detach_fix_cmd(a),
        Command::Fovea(a) => fovea_cmd(a, out),
        Command::Evaluate(a) => evaluate_cmd(a, out),
        Command::Loss(a) => loss_cmd(a, out),
        Command::Schedule(a) => schedule_cmd(a, out),
        Command::Overlay(a) => overlay_cmd(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_helpers() {
        assert_eq!(parse_scale_dir("302=/tmp/a").unwrap(), (302, PathBuf::from("/tmp/a")));
        assert!(parse_scale_dir("302").is_err());
        assert_eq!(parse_point("1.5, -2").unwrap(), Point::new(1.5, -2.0));
        assert!(parse_point("nan,1").is_err());
        assert_eq!(parse_tile_name(Path::new("d/14_0.pmap")).unwrap(), (14, 0));
        assert!(parse_tile_name(Path::new("d/tile.pmap")).is_err());
    }
}
