use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use liecomm::cartan::{seeded_frame, FrameRecord};
use liecomm::rotate::{RootPolicy, TraceRecord};
use liecomm::solver::{
    solve_commutator, verify_certificate, CertificateRecord, CommutatorCertificate, SolveConfig,
    CERTIFICATE_TOL,
};
use liecomm::{build_algebra, AlgebraSpec, Element, LieAlgebra, LieError};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_DIMENSION: u8 = 3;
const EXIT_MAX_ITER: u8 = 4;
const EXIT_CERTIFICATE: u8 = 5;

#[derive(Parser)]
#[command(
    name = "liecomm",
    version,
    about = "Regular commutator preimages in compact Lie algebras"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write algebra metadata and a seeded random pair A, B.
    Generate {
        #[command(flatten)]
        algebra: AlgebraArgs,
        /// Output directory for meta.json, A.json and B.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded Cartan frame (CSA basis, roots, root planes).
    Decompose {
        #[command(flatten)]
        algebra: AlgebraArgs,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve [X, Y_A] = A, [X, Y_B] = B and write a certificate and trace.
    Solve(SolveArgs),
    /// Re-check a certificate using brackets and the centralizer of X only.
    Verify {
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Residual bound relative to max(1, |target|).
        #[arg(long, default_value_t = CERTIFICATE_TOL)]
        tol: f64,
    },
}

#[derive(Args)]
struct AlgebraArgs {
    /// `su:N`, `so:N` or `sum:<spec>+<spec>`.
    #[arg(long)]
    spec: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    algebra: AlgebraArgs,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 1e-7)]
    tol_a: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol_b: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = Policy::MaxDecrease)]
    policy: Policy,
    /// Output directory for certificate.json and the trace.
    #[arg(long)]
    out: PathBuf,
    /// Trace format.
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    MaxDecrease,
    First,
    Random,
}

impl From<Policy> for RootPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::MaxDecrease => RootPolicy::MaxDecrease,
            Policy::First => RootPolicy::First,
            Policy::Random => RootPolicy::Random,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Jsonl,
    Csv,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn fail(code: u8) -> impl FnOnce(anyhow::Error) -> Failure {
    move |error| Failure { code, error }
}

type Outcome = std::result::Result<u8, Failure>;

#[derive(Serialize)]
struct Meta {
    spec: String,
    seed: u64,
    dim: usize,
    rank: usize,
    positive_roots: usize,
}

#[derive(Serialize)]
struct Decomposition {
    spec: String,
    seed: u64,
    dim: usize,
    rank: usize,
    positive_roots: usize,
    /// `dim == rank + 2 * positive_roots`.
    dimension_identity: bool,
    frame: FrameRecord,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate { algebra, out } => generate(&algebra, &out),
        Command::Decompose { algebra, out } => decompose(&algebra, out.as_deref()),
        Command::Solve(args) => solve(&args),
        Command::Verify {
            certificate,
            a,
            b,
            tol,
        } => verify(&certificate, &a, &b, tol),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_algebra(spec: &str) -> std::result::Result<LieAlgebra, Failure> {
    let spec: AlgebraSpec = spec
        .parse()
        .map_err(|e: LieError| fail(EXIT_INPUT)(anyhow!(e)))?;
    build_algebra(&spec).map_err(|e| fail(EXIT_INPUT)(anyhow!(e)))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> std::result::Result<(), Failure> {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(fail(EXIT_INPUT))
}

fn create_dir(path: &Path) -> std::result::Result<(), Failure> {
    fs::create_dir_all(path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(fail(EXIT_INPUT))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Reads an element file; parse failures map to `EXIT_INPUT`, wrong length to
/// `dimension_code`.
fn read_element(
    g: &LieAlgebra,
    path: &Path,
    dimension_code: u8,
) -> std::result::Result<Element, Failure> {
    let coords: Vec<f64> = read_json(path).map_err(fail(EXIT_INPUT))?;
    g.element(coords)
        .with_context(|| format!("element in {}", path.display()))
        .map_err(fail(dimension_code))
}

fn generate(args: &AlgebraArgs, out: &Path) -> Outcome {
    let g = load_algebra(&args.spec)?;
    let spec = g.spec();
    let meta = Meta {
        spec: spec.to_string(),
        seed: args.seed,
        dim: spec.dim(),
        rank: spec.rank(),
        positive_roots: (spec.dim() - spec.rank()) / 2,
    };
    let pair = g.seeded_elements(args.seed, 2);
    create_dir(out)?;
    write_file(&out.join("meta.json"), &to_json(&meta))?;
    write_file(&out.join("A.json"), &to_json(&pair[0].to_vec()))?;
    write_file(&out.join("B.json"), &to_json(&pair[1].to_vec()))?;
    println!(
        "{}: dim {} rank {} positive roots {}",
        meta.spec, meta.dim, meta.rank, meta.positive_roots
    );
    Ok(0)
}

fn decompose(args: &AlgebraArgs, out: Option<&Path>) -> Outcome {
    let g = load_algebra(&args.spec)?;
    let frame = seeded_frame(&g, args.seed).map_err(|e| fail(EXIT_VERIFY_FAILED)(anyhow!(e)))?;
    let record = frame.record();
    let identity = g.dim() == record.rank + 2 * record.positive_roots;
    let output = Decomposition {
        spec: g.spec().to_string(),
        seed: args.seed,
        dim: g.dim(),
        rank: record.rank,
        positive_roots: record.positive_roots,
        dimension_identity: identity,
        frame: record,
    };
    let json = to_json(&output);
    match out {
        Some(path) => write_file(path, &json)?,
        None => print!("{json}"),
    }
    eprintln!(
        "{} = {} + 2*{}: {}",
        output.dim,
        output.rank,
        output.positive_roots,
        if identity { "ok" } else { "FAILED" }
    );
    Ok(if identity { 0 } else { EXIT_VERIFY_FAILED })
}

fn write_trace(
    dir: &Path,
    format: Format,
    trace: &[TraceRecord],
) -> std::result::Result<(), Failure> {
    let (name, contents) = match format {
        Format::Json => ("trace.json", to_json(&trace)),
        Format::Jsonl => {
            let mut s = String::new();
            for r in trace {
                s.push_str(&serde_json::to_string(r).expect("serializable"));
                s.push('\n');
            }
            ("trace.jsonl", s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in trace {
                w.serialize(r).map_err(|e| fail(EXIT_INPUT)(anyhow!(e)))?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| fail(EXIT_INPUT)(anyhow!(e.to_string())))?;
            (
                "trace.csv",
                String::from_utf8(bytes).expect("csv output is utf-8"),
            )
        }
    };
    write_file(&dir.join(name), &contents)
}

fn solve(args: &SolveArgs) -> Outcome {
    let g = load_algebra(&args.algebra.spec)?;
    let a = read_element(&g, &args.a, EXIT_DIMENSION)?;
    let b = read_element(&g, &args.b, EXIT_DIMENSION)?;
    let cfg = SolveConfig {
        tol_a: args.tol_a,
        tol_b: args.tol_b,
        max_iter: args.max_iter,
        policy: args.policy.into(),
        rng_seed: args.algebra.seed,
        ..SolveConfig::default()
    };
    create_dir(&args.out)?;
    let solution = match solve_commutator(&g, &a, &b, &cfg) {
        Ok(s) => s,
        Err(LieError::MaxIterationsExceeded(partial)) => {
            let trace: Vec<TraceRecord> = partial.trace.iter().map(|s| s.record()).collect();
            write_trace(&args.out, args.format, &trace)?;
            return Err(fail(EXIT_MAX_ITER)(anyhow!(
                "no convergence within {} iterations; partial trace written",
                args.max_iter
            )));
        }
        Err(e @ LieError::CertificateInvalid { .. }) => {
            return Err(fail(EXIT_CERTIFICATE)(anyhow!(e)))
        }
        Err(e @ LieError::InvalidSpec(_)) => return Err(fail(EXIT_INPUT)(anyhow!(e))),
        Err(e) => return Err(fail(EXIT_VERIFY_FAILED)(anyhow!(e))),
    };
    let cert = &solution.certificate;
    let trace: Vec<TraceRecord> = solution.descent.trace().map(|s| s.record()).collect();
    write_file(&args.out.join("certificate.json"), &to_json(&cert.record()))?;
    write_trace(&args.out, args.format, &trace)?;

    let report = verify_certificate(&g, &a, &b, cert, CERTIFICATE_TOL)
        .map_err(|e| fail(EXIT_CERTIFICATE)(anyhow!(e)))?;
    println!(
        "{}: {} steps, residual_A {:e}, residual_B {:e}, regularity margin {:e}",
        cert.algebra_spec,
        trace.len(),
        cert.residual_a,
        cert.residual_b,
        cert.regularity_margin
    );
    if !report.passed() {
        return Err(fail(EXIT_CERTIFICATE)(anyhow!(
            "certificate failed verification"
        )));
    }
    Ok(0)
}

fn verify(cert_path: &Path, a_path: &Path, b_path: &Path, tol: f64) -> Outcome {
    let record: CertificateRecord = read_json(cert_path).map_err(fail(EXIT_INPUT))?;
    let g = load_algebra(&record.algebra_spec)?;
    let cert = CommutatorCertificate::from_record(&g, &record)
        .context("certificate")
        .map_err(fail(EXIT_INPUT))?;
    let a = read_element(&g, a_path, EXIT_INPUT)?;
    let b = read_element(&g, b_path, EXIT_INPUT)?;
    let report =
        verify_certificate(&g, &a, &b, &cert, tol).map_err(|e| fail(EXIT_INPUT)(anyhow!(e)))?;
    let mut stdout = std::io::stdout().lock();
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        writeln!(
            stdout,
            "{status} {} {:e} (bound {:e})",
            c.name, c.value, c.bound
        )
        .expect("stdout");
    }
    Ok(if report.passed() {
        0
    } else {
        EXIT_VERIFY_FAILED
    })
}
