use std::io::{self, Write};
use std::panic;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use chromatone::classify::{
    classify_hair, classify_iris, classify_skin, classify_undertone, classify_undertone_cosine,
    vein_mean, ClusterSpace, DominantTone,
};
use chromatone::color::{lab_to_rgb, rgb_to_hsv, HsvColor};
use chromatone::config::{Pipeline, RunConfig, UndertoneStrategy};
use chromatone::eval::evaluate_corpus;
use chromatone::fixtures::{generate_fixtures, FixtureKind, FixtureSpec};
use chromatone::imaging::{decode_image, load_mask, Landmarks};
use chromatone::{Classification, DistanceMetric, Error};

/// Classify skin tone, hair color, iris color and skin undertone from
/// images and segmentation masks.
#[derive(Parser)]
#[command(name = "chromatone", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Skin tone from a face image and its skin mask.
    Skin {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        skin: SkinFlags,
    },
    /// Hair color from an image and its hair mask.
    Hair {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Iris color from a face image and 68-point landmarks.
    Iris {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        landmarks: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Warm or cool undertone from a wrist image.
    Undertone {
        #[arg(long)]
        image: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        undertone: UndertoneFlags,
    },
    /// Runs a pipeline over a labeled manifest and prints metrics.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        pipeline: Pipeline,
        /// Per-row results CSV.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Images classified concurrently.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        skin: SkinFlags,
        #[command(flatten)]
        undertone: UndertoneFlags,
    },
    /// Writes a synthetic labeled corpus.
    GenFixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        kind: FixtureKind,
        #[arg(long, default_value_t = 8)]
        count: usize,
        /// Per-channel Gaussian noise sigma in 8-bit levels.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tone scale file replacing the bundled one.
    #[arg(long)]
    scale: Option<PathBuf>,
    #[arg(long)]
    metric: Option<DistanceMetric>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SkinFlags {
    /// Skip the Gaussian blur.
    #[arg(long)]
    no_blur: bool,
    /// Match a main class first, then a subclass within it.
    #[arg(long)]
    two_stage: bool,
    #[arg(long)]
    space: Option<ClusterSpace>,
    #[arg(long)]
    kernel_divisor: Option<u32>,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct UndertoneFlags {
    /// JSON file with "skin" and "vein" LAB threshold boxes.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<UndertoneStrategy>,
    #[arg(long)]
    close_radius: Option<u32>,
}

impl Common {
    fn run_config(&self) -> chromatone::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.scale {
            cfg.scale_path = Some(p.clone());
        }
        if self.metric.is_some() {
            cfg.metric = self.metric;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

impl SkinFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if self.no_blur {
            cfg.blur = false;
        }
        if self.two_stage {
            cfg.two_stage = true;
        }
        if let Some(s) = self.space {
            cfg.space = s;
        }
        if let Some(k) = self.kernel_divisor {
            cfg.kernel_divisor = k;
        }
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
    }
}

impl UndertoneFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(p) = &self.thresholds {
            cfg.thresholds_path = Some(p.clone());
        }
        if let Some(s) = self.strategy {
            cfg.strategy = s;
        }
        if let Some(r) = self.close_radius {
            cfg.close_radius = r;
        }
    }
}

#[derive(Serialize)]
struct Output {
    label: String,
    distance: f64,
    /// Hue in degrees, saturation and value in 8-bit steps.
    dominant_hsv: [u16; 3],
    dominant_lab: [f64; 3],
    cluster_share: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    warm_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cool_delta: Option<f64>,
}

fn hsv_array(c: HsvColor) -> [u16; 3] {
    let q = c.quantized();
    [
        q.h as u16,
        (q.s * 255.0).round() as u16,
        (q.v * 255.0).round() as u16,
    ]
}

impl Output {
    fn new(c: &Classification, tone: Option<&DominantTone>) -> Self {
        let hsv = match tone {
            Some(t) => t.hsv,
            None => rgb_to_hsv(lab_to_rgb(c.dominant).0),
        };
        Output {
            label: c.label.clone(),
            distance: c.distance,
            dominant_hsv: hsv_array(hsv),
            dominant_lab: c.dominant.to_array(),
            cluster_share: c.cluster_share(),
            warm_delta: c.metadata.get("warm_delta").copied(),
            cool_delta: c.metadata.get("cool_delta").copied(),
        }
    }
}

/// Writes to stdout; a closed pipe on the reader's side is not an error.
fn emit(text: &str) {
    let _ = io::stdout().lock().write_all(text.as_bytes());
}

fn print_json(out: &Output) {
    emit(&(serde_json::to_string(out).expect("output serializes") + "\n"));
}

fn run(cli: Cli) -> chromatone::Result<()> {
    match cli.command {
        Command::Skin {
            image,
            mask,
            common,
            skin,
        } => {
            let mut cfg = common.run_config()?;
            skin.apply(&mut cfg);
            let setup = cfg.setup(Pipeline::Skin)?;
            let img = decode_image(&image)?;
            let mask = load_mask(&mask, &img)?;
            let (c, tone) = classify_skin(&img, &mask, &setup.scale, &setup.skin, setup.two_stage)?;
            print_json(&Output::new(&c, Some(&tone)));
        }
        Command::Hair {
            image,
            mask,
            common,
        } => {
            let cfg = common.run_config()?;
            let setup = cfg.setup(Pipeline::Hair)?;
            let img = decode_image(&image)?;
            let mask = load_mask(&mask, &img)?;
            let c = classify_hair(&img, &mask, &setup.scale, setup.seed)?;
            print_json(&Output::new(&c, None));
        }
        Command::Iris {
            image,
            landmarks,
            common,
        } => {
            let cfg = common.run_config()?;
            let setup = cfg.setup(Pipeline::Iris)?;
            let img = decode_image(&image)?;
            let lm = Landmarks::load(&landmarks)?;
            let c = classify_iris(&img, &lm, &setup.scale)?;
            print_json(&Output::new(&c, None));
        }
        Command::Undertone {
            image,
            common,
            undertone,
        } => {
            let mut cfg = common.run_config()?;
            undertone.apply(&mut cfg);
            let setup = cfg.setup(Pipeline::Undertone)?;
            let img = decode_image(&image)?;
            let c = match setup.strategy {
                UndertoneStrategy::DeltaE => {
                    classify_undertone(&img, &setup.thresholds, &setup.refs, setup.close_radius)?
                }
                UndertoneStrategy::Cosine => {
                    let (mean, _) = vein_mean(&img, &setup.thresholds, setup.close_radius)?;
                    classify_undertone_cosine(mean, &setup.refs)?
                }
            };
            print_json(&Output::new(&c, None));
        }
        Command::Evaluate {
            manifest,
            pipeline,
            report,
            jobs,
            common,
            skin,
            undertone,
        } => {
            let mut cfg = common.run_config()?;
            skin.apply(&mut cfg);
            undertone.apply(&mut cfg);
            let setup = cfg.setup(pipeline)?;
            let eval = evaluate_corpus(&manifest, &setup, jobs as usize)?;
            if let Some(p) = &report {
                eval.write_report(p)?;
            }
            emit(&format!(
                "{}failures {}\n",
                eval.metrics()?.to_table(),
                eval.failures()
            ));
        }
        Command::GenFixtures {
            out,
            kind,
            count,
            noise,
            seed,
        } => {
            let set = generate_fixtures(
                &out,
                &FixtureSpec {
                    kind,
                    count,
                    noise,
                    seed,
                },
            )?;
            emit(&format!(
                "wrote {} {kind} images; manifest {}\n",
                set.labels.len(),
                set.manifest.display()
            ));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    // a panic is a pipeline failure, not a distinct exit status
    match panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(3),
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_input_error() {
        2
    } else {
        3
    }
}
