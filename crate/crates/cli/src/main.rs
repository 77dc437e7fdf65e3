mod commands;
mod config;

use clap::Parser;
use config::{validate_config, ConfigError, Format, RunConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Output of one command: a table plus an optional JSON summary.
pub struct Artifact {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub summary: Option<serde_json::Value>,
}

enum Failure {
    Config(ConfigError),
    Core(im_lab::Error),
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Core(e) if e.is_resource_guard() => 3,
            Failure::Core(e) if is_input_error(e) => 2,
            _ => 1,
        }
    }

    fn report(&self) -> serde_json::Value {
        let (error, detail) = match self {
            Failure::Config(e) => (format!("invalid {}", e.field), e.detail.clone()),
            Failure::Core(e) if e.is_resource_guard() => ("resource guard".to_string(), e.to_string()),
            Failure::Core(e) if is_input_error(e) => ("invalid input".to_string(), e.to_string()),
            Failure::Core(e) => ("computation failed".to_string(), e.to_string()),
            Failure::Io(e) => ("io".to_string(), e.clone()),
        };
        serde_json::json!({ "error": error, "detail": detail })
    }
}

fn is_input_error(e: &im_lab::Error) -> bool {
    use im_lab::Error::*;
    matches!(
        e,
        NonUnitary { .. }
            | DimensionMismatch(_)
            | UnsupportedDimension(_)
            | DeltaOutOfRange(_)
            | NonTracePreserving(_)
            | NotNormalized(_)
            | NotADensityMatrix(_)
            | POutOfRange(_)
            | OddL(_)
            | InvalidArgument(_)
    )
}

impl From<im_lab::Error> for Failure {
    fn from(e: im_lab::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, body: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, body).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn render(art: &Artifact, format: Format) -> Result<Vec<u8>, Failure> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Failure::Io(e.to_string());
            w.write_record(&art.columns).map_err(io)?;
            for row in &art.rows {
                w.write_record(row).map_err(io)?;
            }
            w.into_inner().map_err(|e| Failure::Io(e.to_string()))
        }
        Format::Json => {
            let rows: Vec<serde_json::Map<String, serde_json::Value>> = art
                .rows
                .iter()
                .map(|r| {
                    art.columns
                        .iter()
                        .zip(r)
                        .map(|(c, v)| {
                            let val = v
                                .parse::<i64>()
                                .map(serde_json::Number::from)
                                .ok()
                                .or_else(|| v.parse::<f64>().ok().and_then(serde_json::Number::from_f64));
                            (c.to_string(), val.map_or_else(|| v.clone().into(), serde_json::Value::Number))
                        })
                        .collect()
                })
                .collect();
            let doc = serde_json::json!({ "columns": art.columns, "rows": rows });
            let mut s = serde_json::to_vec_pretty(&doc).expect("json");
            s.push(b'\n');
            Ok(s)
        }
    }
}

fn run(cfg: RunConfig) -> Result<(), Failure> {
    let cfg = validate_config(cfg)?;
    if let Some(n) = std::env::var("IM_LAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Ignored if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let started = std::time::SystemTime::now();
    let art = commands::dispatch(&cfg)?;
    let out = cfg.out.clone().expect("validated");
    write_file(&out, &render(&art, cfg.format.expect("validated"))?)?;

    let echo = serde_json::to_vec_pretty(&cfg).expect("config serializes");
    write_file(&sidecar(&out, ".config.json"), &echo)?;
    if let Some(summary) = &art.summary {
        write_file(&sidecar(&out, ".summary.json"), &serde_json::to_vec_pretty(summary).expect("json"))?;
    }
    let secs = |t: std::time::SystemTime| t.duration_since(std::time::UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    let meta = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix": secs(started),
        "finished_unix": secs(std::time::SystemTime::now()),
        "threads": rayon::current_num_threads(),
    });
    write_file(&sidecar(&out, ".meta.json"), &serde_json::to_vec_pretty(&meta).expect("json"))?;
    Ok(())
}

fn main() -> ExitCode {
    let cfg = match RunConfig::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = serde_json::json!({ "error": "invalid arguments", "detail": e.to_string().trim() });
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    match run(cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.report());
            ExitCode::from(f.exit_code())
        }
    }
}
