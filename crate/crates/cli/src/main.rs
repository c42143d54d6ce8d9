//! `dielink`: score a directory of coin images, derive plots and groups from a
//! results file, or run the HTTP service.
//!
//! Exit codes: 0 success, 1 runtime or service failure, 2 bad usage or fewer
//! than two images, 3 undecodable images, 4 malformed results file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dielink_core::analytics::{build_curve, cluster, embed_2d, RankedPairs};
use dielink_core::imaging::{prepare, NormalizedImage, QualityWarning};
use dielink_core::notations::{self, CsvError, NotationRow, Note};
use dielink_core::scoring::{score_dataset, DistanceMatrix, PairScore, ScoreOptions};
use rayon::prelude::*;

const IMAGE_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png", "tif", "tiff", "bmp"];

#[derive(Parser)]
#[command(name = "dielink", version, about = "Die-link candidate ranking for coin photographs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every pair of images in a directory and write the results CSV.
    Score {
        /// Directory of coin images (jpg, png, tif, bmp); not recursive.
        dir: PathBuf,
        /// Output file, or a directory to receive notations_<dirname>.csv.
        /// Defaults to notations_<dirname>.csv in the working directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed of the robust fitting; equal seeds give identical files.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Distance curve of a results CSV as rank,distance lines; prints the knee.
    Curve {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// 2D embedding of a results CSV as name,x,y lines.
    Embed {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Provisional single-linkage groups as name,cluster_id lines.
    Cluster {
        csv: PathBuf,
        /// Pairs at or below this distance are chained together; in [0, 1].
        #[arg(long)]
        threshold: f64,
        /// Output file (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service until interrupted.
    Serve {
        /// TOML file; DIELINK_BIND, DIELINK_DATA_DIR, DIELINK_TOKEN and
        /// DIELINK_WORKERS override its values.
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Decode(Vec<String>),
    Csv(PathBuf, CsvError),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl Failure {
    fn report(&self) -> ExitCode {
        match self {
            Failure::Usage(m) => {
                eprintln!("error: {m}");
                ExitCode::from(2)
            }
            Failure::Decode(files) => {
                eprintln!("error: {} image(s) could not be decoded:", files.len());
                for f in files {
                    eprintln!("  {f}");
                }
                ExitCode::from(3)
            }
            Failure::Csv(path, e) => {
                eprintln!("error: {}: {e}", path.display());
                ExitCode::from(4)
            }
            Failure::Runtime(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score { dir, out, seed, jobs } => score(&dir, out.as_deref(), seed, jobs),
        Command::Curve { csv, out } => curve(&csv, &out),
        Command::Embed { csv, out } => embed(&csv, &out),
        Command::Cluster { csv, threshold, out } => clusters(&csv, threshold, out.as_deref()),
        Command::Serve { config } => serve(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Failure::Usage(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| anyhow::anyhow!(e))?.path();
        let hidden = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with('.'));
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && is_image && !hidden {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn output_path(dir: &Path, out: Option<&Path>) -> Result<PathBuf, Failure> {
    let dir_name = std::fs::canonicalize(dir)
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .ok_or_else(|| Failure::Usage(format!("cannot name results for {}", dir.display())))?;
    let file = notations::file_name(&dir_name);
    Ok(match out {
        None => PathBuf::from(file),
        Some(p) if p.is_dir() => p.join(file),
        Some(p) => p.to_owned(),
    })
}

fn score(dir: &Path, out: Option<&Path>, seed: u64, jobs: Option<usize>) -> Result<(), Failure> {
    let files = image_files(dir)?;
    if files.len() < 2 {
        return Err(Failure::Usage(format!(
            "{} holds {} image(s); at least 2 are needed",
            dir.display(),
            files.len()
        )));
    }
    let out_path = output_path(dir, out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(anyhow::Error::from)?;

    let decoded: Vec<Result<NormalizedImage, String>> = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
                let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
                prepare(&name, &bytes).map_err(|e| format!("{}: {e}", path.display()))
            })
            .collect()
    });
    let failed: Vec<String> = decoded.iter().filter_map(|r| r.as_ref().err().cloned()).collect();
    if !failed.is_empty() {
        return Err(Failure::Decode(failed));
    }
    let images: Vec<NormalizedImage> = decoded.into_iter().filter_map(Result::ok).collect();
    for img in &images {
        for w in &img.warnings {
            match w {
                QualityWarning::SegmentationFallback => {
                    eprintln!("warning: {}: coin outline not found, using the whole image", img.source_name)
                }
                QualityWarning::SmallCoin { extent } => {
                    eprintln!("warning: {}: coin is only {extent} px across", img.source_name)
                }
            }
        }
    }

    let matrix = pool
        .install(|| score_dataset(&images, &ScoreOptions::with_seed(seed)))
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let ranked = dielink_core::analytics::rank_pairs(&matrix);
    let rows: Vec<NotationRow> = ranked
        .entries
        .iter()
        .map(|s| NotationRow {
            name1: s.name1.clone(),
            name2: s.name2.clone(),
            distance: s.distance,
            note: Note::NotEvaluated,
            comment: String::new(),
        })
        .collect();
    std::fs::write(&out_path, notations::to_bytes(&rows))
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", out_path.display()))?;

    let (min, max) = ranked
        .entries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.distance), hi.max(s.distance)));
    println!("{} pairs from {} images", rows.len(), images.len());
    println!(
        "distance min {} max {}",
        notations::format_distance(min),
        notations::format_distance(max)
    );
    println!("wrote {}", out_path.display());
    Ok(())
}

fn read_rows(csv: &Path) -> Result<Vec<NotationRow>, Failure> {
    let file = std::fs::File::open(csv).map_err(|e| anyhow::anyhow!("cannot open {}: {e}", csv.display()))?;
    notations::read_notations(std::io::BufReader::new(file)).map_err(|e| Failure::Csv(csv.to_owned(), e))
}

fn pair_scores(rows: Vec<NotationRow>) -> Vec<PairScore> {
    rows.into_iter()
        .map(|r| PairScore {
            alignable: r.distance < dielink_core::scoring::UNALIGNABLE_DISTANCE,
            name1: r.name1,
            name2: r.name2,
            distance: r.distance,
            transform: None,
        })
        .collect()
}

fn matrix_from(csv: &Path) -> Result<DistanceMatrix, Failure> {
    let scores = pair_scores(read_rows(csv)?);
    let mut names: Vec<String> = scores
        .iter()
        .flat_map(|s| [s.name1.clone(), s.name2.clone()])
        .collect();
    names.sort();
    names.dedup();
    if names.len() < 2 {
        return Err(Failure::Usage(format!(
            "{} describes {} coin(s); at least 2 are needed",
            csv.display(),
            names.len()
        )));
    }
    DistanceMatrix::new(names, scores).map_err(|e| {
        Failure::Csv(
            csv.to_owned(),
            CsvError::Malformed {
                line: 0,
                message: format!("not a complete set of pairs: {e}"),
            },
        )
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()).into())
}

fn curve(csv: &Path, out: &Path) -> Result<(), Failure> {
    let ranked = RankedPairs::from_scores(pair_scores(read_rows(csv)?));
    let curve = build_curve(&ranked);
    let mut text = String::from("rank,distance\n");
    for p in &curve.points {
        text.push_str(&format!("{},{}\n", p.rank, notations::format_distance(p.distance)));
    }
    write_text(out, &text)?;
    match curve.knee_rank {
        Some(k) => println!("knee rank {k} of {}", curve.points.len()),
        None => println!("no knee in {} points", curve.points.len()),
    }
    Ok(())
}

fn embed(csv: &Path, out: &Path) -> Result<(), Failure> {
    let matrix = matrix_from(csv)?;
    let mut text = String::from("name,x,y\n");
    for p in embed_2d(&matrix) {
        text.push_str(&format!("{},{:.6},{:.6}\n", csv_field(&p.coin_name), p.x, p.y));
    }
    write_text(out, &text)?;
    println!("{} coins embedded", matrix.n_coins());
    Ok(())
}

fn clusters(csv: &Path, threshold: f64, out: Option<&Path>) -> Result<(), Failure> {
    let matrix = matrix_from(csv)?;
    let labels = cluster(&matrix, threshold).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut text = String::from("name,cluster_id\n");
    for l in &labels {
        text.push_str(&format!("{},{}\n", csv_field(&l.coin_name), l.cluster_id));
    }
    let groups = labels.iter().map(|l| l.cluster_id).max().map_or(0, |m| m + 1);
    match out {
        Some(path) => write_text(path, &text)?,
        None => print!("{text}"),
    }
    eprintln!("{groups} provisional group(s) at threshold {threshold}");
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn serve(config: &Path) -> Result<(), Failure> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    let config = dielink_service::Config::load(config).map_err(anyhow::Error::from)?;
    let runtime = tokio::runtime::Runtime::new().map_err(anyhow::Error::from)?;
    runtime.block_on(async {
        let server = dielink_service::Server::bind(&config)
            .await
            .map_err(anyhow::Error::from)?;
        let addr = server.local_addr().map_err(anyhow::Error::from)?;
        tracing::info!(%addr, data_dir = %config.data_dir.display(), "listening");
        println!("listening on {addr}");
        server
            .run(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(anyhow::Error::from)?;
        Ok(())
    })
}
