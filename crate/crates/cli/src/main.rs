//! `mfs`: fractal-signature texture analysis and terrain classification.

mod corpus;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mfs_core::blanket::{area_curve, AreaVariant, DEFAULT_DELTA_MAX};
use mfs_core::classifier::{train_model, ClassifierModel, ModelConfig};
use mfs_core::gray_image::{extract_tiles, load_image, save_image, TileSpec, DEFAULT_TILE_SIZE};
use mfs_core::signature::fd_curve;
use mfs_core::synth;

use crate::corpus::{write_corpus, Corpus};

const NUMBER_FORMAT: &str = "\
Real numbers are printed in the shortest decimal form that parses back to the \
identical double (for example 2.0, 31.5, 0.18424139854155155). All logarithms \
are base 2. Every command is deterministic: the same inputs and flags produce \
byte-identical output.";

#[derive(Parser)]
#[command(name = "mfs", version, about = "Blanket-method fractal signatures and minimum-distance texture classification", long_about = None, after_help = NUMBER_FORMAT)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Area and fractal-dimension curve of one PGM image, as CSV `delta,area,fd`.
    Signature {
        image: PathBuf,
        #[command(flatten)]
        curve: CurveArgs,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cut a PGM image into square tiles written as `<stem>_y<Y>_x<X>.pgm`.
    Tiles {
        image: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
        tile_size: usize,
        /// Offset between tiles [default: tile size].
        #[arg(long)]
        stride: Option<usize>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model from `<corpus>/<label>/*.pgm` and print per-class gray statistics.
    Train {
        corpus: PathBuf,
        #[command(flatten)]
        curve: CurveArgs,
        /// Expected tile side [default: taken from the corpus, which must be uniform].
        #[arg(long)]
        tile_size: Option<usize>,
        /// Model JSON output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify tiles against a trained model.
    Classify {
        model: PathBuf,
        #[arg(required = true)]
        tiles: Vec<PathBuf>,
        /// `text`, or `csv` with columns tile,predicted,tie,rank,label,distance.
        #[arg(long, default_value = "text", value_parser = ["text", "csv"])]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a labeled corpus and report the distance matrix and accuracy.
    Evaluate {
        model: PathBuf,
        corpus: PathBuf,
        /// Also write the distance matrix as CSV (rows: training classes).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic PGM textures.
    Synth {
        #[command(subcommand)]
        kind: SynthKind,
    },
}

#[derive(Args, Clone, Copy)]
struct CurveArgs {
    /// Number of blanket iterations (at least 2).
    #[arg(long, default_value_t = DEFAULT_DELTA_MAX)]
    delta_max: usize,
    /// Fractal-area formula: `quotient` (Vol/2δ) or `difference` ((Vol_δ − Vol_δ−1)/2).
    #[arg(long, default_value_t = AreaVariant::Difference)]
    variant: AreaVariant,
}

impl CurveArgs {
    fn validate(self) -> Result<Self> {
        if self.delta_max < 2 {
            bail!("--delta-max must be at least 2 (got {})", self.delta_max);
        }
        Ok(self)
    }
}

#[derive(Subcommand)]
enum SynthKind {
    /// Flat field.
    Constant {
        #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
        width: usize,
        #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
        height: usize,
        #[arg(long)]
        level: i64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Flat field plus uniform per-pixel noise.
    Noise {
        #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
        width: usize,
        #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
        height: usize,
        #[arg(long)]
        level: i64,
        #[arg(long, default_value_t = 3)]
        amplitude: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Checkerboard with square cells of `period` pixels.
    Checkerboard {
        #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
        width: usize,
        #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
        height: usize,
        #[arg(long, default_value_t = 4)]
        period: usize,
        #[arg(long, default_value_t = 0)]
        lo: u8,
        #[arg(long, default_value_t = 255)]
        hi: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Diamond-square fractional Brownian surface (size 2^k + 1).
    Fbm {
        #[arg(long, default_value_t = 257)]
        size: usize,
        #[arg(long)]
        hurst: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Three-class corpus (noise, board, fbm) laid out as `<out>/<label>/*.pgm`.
    Corpus {
        #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
        tile_size: usize,
        /// Tiles per class.
        #[arg(long, default_value_t = 4)]
        tiles: u64,
        /// First seed; tile k of every class uses seed + k.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Signature { image, curve, out } => cmd_signature(&image, curve, out.as_deref()),
        Command::Tiles {
            image,
            tile_size,
            stride,
            out,
        } => cmd_tiles(&image, tile_size, stride.unwrap_or(tile_size), &out),
        Command::Train {
            corpus,
            curve,
            tile_size,
            out,
        } => cmd_train(&corpus, curve, tile_size, &out),
        Command::Classify {
            model,
            tiles,
            format,
            out,
        } => cmd_classify(&model, &tiles, format == "csv", out.as_deref()),
        Command::Evaluate { model, corpus, out } => cmd_evaluate(&model, &corpus, out.as_deref()),
        Command::Synth { kind } => cmd_synth(kind),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<ClassifierModel> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    ClassifierModel::from_json(&text).with_context(|| format!("parsing model {}", path.display()))
}

fn cmd_signature(image: &Path, curve: CurveArgs, out: Option<&Path>) -> Result<()> {
    let curve = curve.validate()?;
    let img = load_image(image).with_context(|| format!("loading {}", image.display()))?;
    let area = area_curve(&img, curve.delta_max, curve.variant)?;
    let fd = fd_curve(&area)?;

    let mut csv = String::from("delta,area,fd\n");
    for (k, a) in area.values().iter().enumerate() {
        let delta = k + 1;
        match fd.at(delta) {
            Some(f) => writeln!(csv, "{delta},{a:?},{f:?}")?,
            None => writeln!(csv, "{delta},{a:?},")?,
        }
    }
    emit(out, &csv)
}

fn cmd_tiles(image: &Path, tile_size: usize, stride: usize, out: &Path) -> Result<()> {
    let spec = TileSpec::new(tile_size, stride)?;
    let img = load_image(image).with_context(|| format!("loading {}", image.display()))?;
    let tiles = extract_tiles(&img, spec)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let stem = image.file_stem().and_then(|s| s.to_str()).unwrap_or("tile");
    for tile in &tiles {
        let path = out.join(format!("{stem}_y{:05}_x{:05}.pgm", tile.y, tile.x));
        save_image(&tile.image, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "{} tiles of {tile_size}x{tile_size} written to {}",
        tiles.len(),
        out.display()
    );
    Ok(())
}

fn cmd_train(corpus: &Path, curve: CurveArgs, tile_size: Option<usize>, out: &Path) -> Result<()> {
    let curve = curve.validate()?;
    let corpus = Corpus::load(corpus)?;
    let found = corpus.tile_size()?;
    let tile_size = match tile_size {
        Some(t) if t != found => bail!("corpus tiles are {found}x{found}, --tile-size is {t}"),
        _ => found,
    };
    let config = ModelConfig {
        delta_max: curve.delta_max,
        variant: curve.variant,
        tile_size,
    };
    let model = train_model(&corpus.classes, config)?;
    fs::write(out, model.to_json()).with_context(|| format!("writing {}", out.display()))?;

    println!("label,mean_of_means,mean_of_stds,n_tiles");
    for (class, (label, mean, std)) in model.classes().iter().zip(model.class_stats_table()) {
        println!("{label},{mean:?},{std:?},{}", class.n_tiles);
    }
    Ok(())
}

fn cmd_classify(model: &Path, tiles: &[PathBuf], csv: bool, out: Option<&Path>) -> Result<()> {
    let model = load_model(model)?;
    let mut report = String::new();
    if csv {
        report.push_str("tile,predicted,tie,rank,label,distance\n");
    }
    for path in tiles {
        let tile = load_image(path).with_context(|| format!("loading {}", path.display()))?;
        let result = model
            .classify_tile(&tile)
            .with_context(|| format!("classifying {}", path.display()))?;
        let name = path.display();
        if csv {
            for (rank, (label, d)) in result.ranked().into_iter().enumerate() {
                writeln!(
                    report,
                    "{name},{},{},{},{label},{d}",
                    result.predicted,
                    result.tie,
                    rank + 1
                )?;
            }
        } else {
            let tie = if result.tie { " (tie)" } else { "" };
            writeln!(report, "{name}: {}{tie}", result.predicted)?;
            for (label, d) in result.ranked() {
                writeln!(report, "  {label:<16} {d}")?;
            }
        }
    }
    emit(out, &report)
}

fn cmd_evaluate(model: &Path, corpus: &Path, out: Option<&Path>) -> Result<()> {
    let model = load_model(model)?;
    let corpus = Corpus::load(corpus)?;
    let eval = model.evaluate(&corpus.classes)?;
    let m = &eval.matrix;

    let width = m
        .rows
        .iter()
        .chain(&m.cols)
        .map(|l| l.len())
        .max()
        .unwrap_or(0)
        .max(22);
    let mut text = String::from("mean distance (rows: training classes, columns: test classes)\n");
    write!(text, "{:<width$}", "")?;
    for c in &m.cols {
        write!(text, " {c:>width$}")?;
    }
    text.push('\n');
    for (r, row) in m.rows.iter().enumerate() {
        write!(text, "{row:<width$}")?;
        for cell in &m.cells[r] {
            write!(text, " {:>width$}", format!("{cell:?}"))?;
        }
        text.push('\n');
    }

    text.push_str("\ntile assignments (rows: predicted class, columns: true class)\n");
    write!(text, "{:<width$}", "")?;
    for c in &m.cols {
        write!(text, " {c:>width$}")?;
    }
    text.push('\n');
    for (r, row) in m.rows.iter().enumerate() {
        write!(text, "{row:<width$}")?;
        for n in &m.counts[r] {
            write!(text, " {n:>width$}")?;
        }
        text.push('\n');
    }

    text.push_str("\nnearest class by mean distance\n");
    for (test, assigned) in &m.assignments {
        let mark = if test == assigned { "ok" } else { "MISMATCH" };
        writeln!(text, "  {test} -> {assigned} [{mark}]")?;
    }
    writeln!(
        text,
        "\naccuracy: {}/{} = {:?}",
        eval.n_correct, eval.n_tiles, eval.accuracy
    )?;
    print!("{text}");

    if let Some(path) = out {
        let mut csv = String::from("training");
        for c in &m.cols {
            write!(csv, ",{c}")?;
        }
        csv.push('\n');
        for (r, row) in m.rows.iter().enumerate() {
            csv.push_str(row);
            for cell in &m.cells[r] {
                write!(csv, ",{cell:?}")?;
            }
            csv.push('\n');
        }
        emit(Some(path), &csv)?;
    }
    Ok(())
}

fn cmd_synth(kind: SynthKind) -> Result<()> {
    let (img, out) = match kind {
        SynthKind::Constant {
            width,
            height,
            level,
            out,
        } => (synth::constant_image(width, height, level)?, out),
        SynthKind::Noise {
            width,
            height,
            level,
            amplitude,
            seed,
            out,
        } => (
            synth::noisy_constant(width, height, level, amplitude, seed)?,
            out,
        ),
        SynthKind::Checkerboard {
            width,
            height,
            period,
            lo,
            hi,
            out,
        } => (synth::checkerboard(width, height, period, lo, hi)?, out),
        SynthKind::Fbm {
            size,
            hurst,
            seed,
            out,
        } => (
            synth::fbm_surface(&synth::FbmSpec::new(size, hurst, seed)?)?,
            out,
        ),
        SynthKind::Corpus {
            tile_size,
            tiles,
            seed,
            out,
        } => {
            if tiles == 0 {
                bail!("--tiles must be at least 1");
            }
            let classes = synth::three_class_corpus(tile_size, seed..seed + tiles)?;
            let n = write_corpus(&out, &classes)?;
            println!("{n} tiles written to {}", out.display());
            return Ok(());
        }
    };
    save_image(&img, &out).with_context(|| format!("writing {}", out.display()))
}
