//! `textkernel` command-line front end.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use textkernel::centerline::CenterLine;
use textkernel::evaluation::{evaluate, read_pages, EvalConfig, PageId, PageRecord, TextBox};
use textkernel::overlay::{self, Canvas};
use textkernel::pipeline::{
    make_kernel_labels, perturb_boxes, spot_page, trace_page, PipelineConfig, SkippedComponent,
    TracedLine,
};
use textkernel::polygon::Polygon;
use textkernel::raster::io::{read_mask, read_raster, write_float_raster, write_mask, write_raster};
use textkernel::raster::{BinaryMask, Raster};
use textkernel::synthetic::{render_page, PageSpec};
use textkernel::tps::{rectify_strip, warp_grid};

#[derive(Parser)]
#[command(name = "textkernel", version, about = "Text-kernel geometry: center-lines, rectification, kernel labels and page scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand.
#[derive(Args, Clone, Debug)]
struct Common {
    /// Kernel shrink ratio r (offset d = A(1 - r^2)/L)
    #[arg(long = "r", default_value_t = 0.6)]
    r: f64,
    /// Rectified strip height in pixels
    #[arg(long, default_value_t = 32)]
    height: usize,
    /// Center suppression radius as a multiple of min_r
    #[arg(long, default_value_t = 4.0)]
    suppress_mult: f64,
    /// Sampling pitch of the rasterized IOU, in pixels
    #[arg(long, default_value_t = 1.0)]
    iou_grid: f64,
    /// Vertical box perturbation amplitude, as a fraction of the short side
    #[arg(long, default_value_t = 0.2)]
    amp_v: f64,
    /// Horizontal box perturbation amplitude, as a fraction of the short side
    #[arg(long, default_value_t = 1.0)]
    amp_h: f64,
    /// Random seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Write an inspection overlay PNG to this path
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Work on a 4x-downscaled mask and image (feature-map scale)
    #[arg(long)]
    downscale4: bool,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let cfg = PipelineConfig {
            shrink_ratio: self.r,
            height: self.height,
            suppress_mult: self.suppress_mult,
            iou_grid: self.iou_grid,
            amp_v: self.amp_v,
            amp_h: self.amp_h,
            seed: self.seed,
            jobs: self.jobs,
            downscale4: self.downscale4,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract ordered center-lines from a kernel mask (PGM or PNG)
    Centerline {
        mask: PathBuf,
        /// Output JSON
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Rectify the strips around center-lines of an image
    Rectify {
        image: PathBuf,
        /// Center-line JSON (a single line or the output of `centerline`)
        centerline: PathBuf,
        /// Output strip (.png/.pgm, or .f32 for raw floats with a JSON sidecar);
        /// several lines are written as <stem>_<k>.<ext>
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Build the kernel label mask from the ground-truth boxes of a page file
    Shrink {
        page: PathBuf,
        /// Output mask (.png or .pgm)
        #[arg(short, long)]
        out: PathBuf,
        /// Mask size as WxH (default: just large enough for the boxes)
        #[arg(long)]
        size: Option<String>,
        /// Perturb the boxes with --amp-v/--amp-h/--seed before shrinking
        #[arg(long)]
        perturb: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Score page files and print a report table
    Evaluate {
        #[arg(required = true)]
        pages: Vec<PathBuf>,
        /// Write the report JSON here
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Map full-width punctuation to ASCII before comparing transcripts
        #[arg(long)]
        normalize_symbols: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Render a synthetic page (mask, image, ground truth)
    Synth {
        /// Page spec JSON (default: a built-in page of five straight strips)
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Spot every line of a mask: center-lines, boxes, rectified strips and a page file
    Spot {
        mask: PathBuf,
        image: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// UTF-8 transcripts, one per spotted line in output order
        #[arg(long)]
        transcripts: Option<PathBuf>,
        /// Page file whose ground truth is copied into the output page
        #[arg(long)]
        gt: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Serialize, Deserialize)]
struct LineRecord {
    centerline: CenterLine,
    polygon: Polygon,
}

#[derive(Serialize, Deserialize)]
struct LinesFile {
    lines: Vec<LineRecord>,
    #[serde(default)]
    skipped: Vec<SkippedComponent>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CenterLineInput {
    Single(CenterLine),
    Many(Vec<CenterLine>),
    File(LinesFile),
}

#[derive(Serialize)]
struct TruthFile<'a> {
    spec: &'a PageSpec,
    seed: u64,
    centerlines: Vec<&'a [textkernel::Point]>,
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("input file not found: {}", path.display());
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn lines_file(lines: &[TracedLine], skipped: Vec<SkippedComponent>) -> LinesFile {
    LinesFile {
        lines: lines
            .iter()
            .map(|l| LineRecord { centerline: l.centerline.clone(), polygon: l.polygon.clone() })
            .collect(),
        skipped,
    }
}

fn draw_lines(canvas: &mut Canvas, lines: &[TracedLine], grid_height: Option<usize>) {
    for l in lines {
        if let Some(h) = grid_height {
            if let Ok(grid) = warp_grid(&l.centerline, h, 8) {
                for g in grid {
                    canvas.polyline(&g, false, overlay::GRID);
                }
            }
        }
        canvas.polyline(l.polygon.vertices(), true, overlay::BOX);
        for c in l.centerline.points() {
            canvas.circle(c.position, c.radius, overlay::CIRCLE);
        }
        canvas.polyline(&l.centerline.positions(), false, overlay::LINE);
    }
}

fn numbered(path: &Path, k: usize) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("strip");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{k}.{ext}"),
        None => format!("{stem}_{k}"),
    };
    path.with_file_name(name)
}

fn write_strip(raster: &Raster, path: &Path) -> Result<()> {
    let is_float = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("f32"));
    if is_float {
        write_float_raster(raster, path)?;
    } else {
        write_raster(raster, path)?;
    }
    Ok(())
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s.split_once(['x', 'X']).context("size must look like WxH")?;
    let (w, h): (usize, usize) = (w.trim().parse()?, h.trim().parse()?);
    if w == 0 || h == 0 {
        bail!("size must be positive");
    }
    Ok((w, h))
}

fn first_page(path: &Path) -> Result<PageRecord> {
    read_pages(path)?.into_iter().next().with_context(|| format!("{} holds no pages", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Centerline { mask, out, common } => {
            require_file(&mask)?;
            let cfg = common.config()?;
            let mask = read_mask(&mask)?;
            let traced = trace_page(&mask, &cfg)?;
            info!("{} lines, {} skipped", traced.lines.len(), traced.skipped.len());
            if let Some(path) = &common.overlay {
                let mut canvas = Canvas::from_mask(&mask);
                draw_lines(&mut canvas, &traced.lines, None);
                canvas.save(path)?;
            }
            write_json(&out, &lines_file(&traced.lines, traced.skipped))?;
        }
        Command::Rectify { image, centerline, out, common } => {
            require_file(&image)?;
            require_file(&centerline)?;
            let cfg = common.config()?;
            let img = read_raster(&image)?;
            let input: CenterLineInput = serde_json::from_slice(&fs::read(&centerline)?)
                .with_context(|| format!("{} is not a center-line file", centerline.display()))?;
            let lines = match input {
                CenterLineInput::Single(l) => vec![l],
                CenterLineInput::Many(ls) => ls,
                CenterLineInput::File(f) => f.lines.into_iter().map(|r| r.centerline).collect(),
            };
            if lines.is_empty() {
                bail!("no center-lines in {}", centerline.display());
            }
            for (k, line) in lines.iter().enumerate() {
                let strip = rectify_strip(&img, line, cfg.height)?;
                let path = if lines.len() == 1 { out.clone() } else { numbered(&out, k) };
                write_strip(strip.as_raster(), &path)?;
            }
        }
        Command::Shrink { page, out, size, perturb, common } => {
            require_file(&page)?;
            let cfg = common.config()?;
            let record = first_page(&page)?;
            let mut boxes: Vec<Polygon> = record.gt.iter().map(|b| b.poly.clone()).collect();
            if perturb {
                boxes = perturb_boxes(&boxes, &cfg)?;
            }
            let (w, h) = match size {
                Some(s) => parse_size(&s)?,
                None => {
                    let (mut w, mut h) = (1usize, 1usize);
                    for b in &boxes {
                        let (_, hi) = b.bounding_box();
                        w = w.max(hi.x.max(0.0).ceil() as usize + 1);
                        h = h.max(hi.y.max(0.0).ceil() as usize + 1);
                    }
                    (w, h)
                }
            };
            let labels = make_kernel_labels(&boxes, w, h, &cfg)?;
            if let Some(path) = &common.overlay {
                let mut canvas = Canvas::from_mask(&labels);
                for b in &boxes {
                    canvas.polyline(b.vertices(), true, overlay::BOX);
                }
                canvas.save(path)?;
            }
            write_mask(&labels, &out)?;
        }
        Command::Evaluate { pages, out, normalize_symbols, common } => {
            let cfg = common.config()?;
            let mut all = Vec::new();
            for p in &pages {
                require_file(p)?;
                all.extend(read_pages(p)?);
            }
            let eval_cfg = EvalConfig { iou_grid: cfg.iou_grid, normalize_symbols };
            let report = if cfg.jobs > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(cfg.jobs)
                    .build()?
                    .install(|| evaluate(&all, &eval_cfg))?
            } else {
                evaluate(&all, &eval_cfg)?
            };
            print!("{}", report.to_table());
            println!(
                "precision {:.4}  recall {:.4}  f-measure {:.4}  CR {:.4}  AR {:.4}",
                report.precision, report.recall, report.f_measure, report.cr, report.ar
            );
            if let Some(path) = out {
                write_json(&path, &report)?;
            }
        }
        Command::Synth { spec, out_dir, common } => {
            let spec = match &spec {
                Some(p) => {
                    require_file(p)?;
                    serde_json::from_slice::<PageSpec>(&fs::read(p)?)
                        .with_context(|| format!("{} is not a page spec", p.display()))?
                }
                None => PageSpec::demo(),
            };
            let page = render_page(&spec.strips, spec.pitch, common.seed)?;
            fs::create_dir_all(&out_dir)?;
            write_mask(&page.mask, &out_dir.join("mask.png"))?;
            write_raster(&page.image, &out_dir.join("image.png"))?;
            let record = page.to_page_record(PageId::Text(format!("synth-{}", common.seed)));
            write_json(&out_dir.join("gt.json"), &record)?;
            let transcripts: String = page.strips.iter().map(|s| format!("{}\n", s.text)).collect();
            fs::write(out_dir.join("transcripts.txt"), transcripts)?;
            let truth = TruthFile {
                spec: &spec,
                seed: common.seed,
                centerlines: page.strips.iter().map(|s| s.centerline.as_slice()).collect(),
            };
            write_json(&out_dir.join("truth.json"), &truth)?;
            if let Some(path) = &common.overlay {
                let mut canvas = Canvas::from_raster(&page.image);
                for s in &page.strips {
                    canvas.polyline(s.polygon.vertices(), true, overlay::BOX);
                    canvas.polyline(&s.centerline, false, overlay::LINE);
                }
                canvas.save(path)?;
            }
        }
        Command::Spot { mask, image, out_dir, transcripts, gt, common } => {
            require_file(&mask)?;
            require_file(&image)?;
            for p in transcripts.iter().chain(&gt) {
                require_file(p)?;
            }
            let cfg = common.config()?;
            let mask: BinaryMask = read_mask(&mask)?;
            let img = read_raster(&image)?;
            let texts: Vec<String> = match &transcripts {
                Some(p) => fs::read_to_string(p)?.lines().map(|l| l.trim_end_matches('\r').to_string()).collect(),
                None => Vec::new(),
            };
            let gt_page = gt.as_deref().map(first_page).transpose()?;
            let spotted = spot_page(&mask, &img, &cfg)?;
            fs::create_dir_all(&out_dir)?;
            let traced: Vec<TracedLine> = spotted
                .lines
                .iter()
                .map(|l| TracedLine { centerline: l.centerline.clone(), polygon: l.polygon.clone() })
                .collect();
            for (k, l) in spotted.lines.iter().enumerate() {
                write_raster(l.strip.as_raster(), &out_dir.join(format!("strip_{k:03}.png")))?;
            }
            write_json(&out_dir.join("lines.json"), &lines_file(&traced, spotted.skipped.clone()))?;
            if transcripts.is_some() && texts.len() != traced.len() {
                warn!("{} transcripts for {} spotted lines", texts.len(), traced.len());
            }
            let record = PageRecord {
                page: gt_page.as_ref().map_or(PageId::Number(0), |p| p.page.clone()),
                gt: gt_page.map(|p| p.gt).unwrap_or_default(),
                pred: traced
                    .iter()
                    .enumerate()
                    .map(|(k, l)| TextBox::new(l.polygon.clone(), texts.get(k).cloned().unwrap_or_default()))
                    .collect(),
            };
            write_json(&out_dir.join("page.json"), &record)?;
            if let Some(path) = &common.overlay {
                let mut canvas = Canvas::from_raster(&img);
                draw_lines(&mut canvas, &traced, Some(cfg.height));
                canvas.save(path)?;
            }
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<textkernel::Error>() {
        Some(textkernel::Error::SingularSystem) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TEXTKERNEL_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    panic::set_hook(Box::new(|info| eprintln!("internal error: {info}")));
    match panic::catch_unwind(AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(2),
    }
}
