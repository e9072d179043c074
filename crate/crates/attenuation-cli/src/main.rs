//! Command line front end: p-values, confidence sets, confidence curves,
//! and the Monte Carlo coverage harness.
//!
//! Exit codes: 0 success, 2 usage or domain errors, 1 numerical or I/O
//! failures. All output is a pure function of the flags and config files.

use std::path::PathBuf;
use std::process::ExitCode;

use attenuation::simulation::{coverage_csv, run_coverage, CoverageRecord, SimConfig};
use attenuation::{
    confidence_curve, confidence_set, curve_to_csv, pvalue, ConfidenceCurve, ConfidenceSet,
    EstimateSet, Method, Probability, SetKind, StudyDesign,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "attenuation",
    version,
    about = "Inference for correlations corrected for attenuation due to measurement error"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// P-value for a hypothesized corrected correlation
    Pvalue(PvalueArgs),
    /// Confidence set for the corrected correlation
    Ci(CiArgs),
    /// Confidence curve over a grid of hypothesized values, written as CSV
    Cc(CcArgs),
    /// Monte Carlo coverage study driven by a JSON config
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Inference method: corr, free, cronbach, or hs
    #[arg(long)]
    method: Method,

    /// Estimates r1,rel2,rel3: the observed correlation and the two
    /// nuisance estimates on the method's native scale (correlations for
    /// corr/free, reliabilities for cronbach/hs)
    #[arg(long, value_name = "R1,R2,R3", value_parser = parse_triple, allow_hyphen_values = true)]
    r: [f64; 3],

    /// Sample sizes: one shared value or N1,N2,N3
    #[arg(long, value_name = "N1[,N2,N3]", value_parser = parse_sizes)]
    n: Sizes,

    /// Testlet counts k2,k3 behind the two alphas (cronbach only)
    #[arg(long, value_name = "K2,K3", value_parser = parse_pair)]
    k: Option<(u32, u32)>,

    /// Interpret rel2,rel3 as reliabilities even for corr/free
    /// (their square roots enter as correlations)
    #[arg(long)]
    reliabilities: bool,
}

#[derive(Args)]
struct PvalueArgs {
    #[command(flatten)]
    est: EstimateArgs,

    /// Hypothesized corrected correlation
    #[arg(long, allow_hyphen_values = true)]
    rho: f64,
}

#[derive(Args)]
struct CiArgs {
    #[command(flatten)]
    est: EstimateArgs,

    /// Confidence level
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Args)]
struct CcArgs {
    #[command(flatten)]
    est: EstimateArgs,

    /// Number of grid points spanning [-1, 1]
    #[arg(long, default_value_t = 200)]
    grid: usize,

    /// Output CSV path
    #[arg(long)]
    out: PathBuf,

    /// Also write a minimal SVG plot of the curve
    #[arg(long)]
    svg: Option<PathBuf>,

    /// Level of the horizontal rule in the SVG
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON study description (cells, reps, level, methods, seed)
    #[arg(long)]
    config: PathBuf,

    /// Output CSV path
    #[arg(long)]
    out: PathBuf,

    /// Override the seed from the config
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for the replicate loop (0 = automatic)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy)]
enum Sizes {
    Same(u32),
    Each(u32, u32, u32),
}

fn parse_triple(text: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(format!(
            "expected three comma-separated values, got {}",
            parts.len()
        ));
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("`{part}`: {e}"))?;
    }
    Ok(out)
}

fn parse_sizes(text: &str) -> Result<Sizes, String> {
    let parts: Vec<&str> = text.split(',').collect();
    let parse = |part: &str| -> Result<u32, String> {
        part.trim()
            .parse::<u32>()
            .map_err(|e| format!("`{part}`: {e}"))
    };
    match parts.as_slice() {
        [n] => Ok(Sizes::Same(parse(n)?)),
        [n1, n2, n3] => Ok(Sizes::Each(parse(n1)?, parse(n2)?, parse(n3)?)),
        _ => Err(format!(
            "expected one or three sample sizes, got {}",
            parts.len()
        )),
    }
}

fn parse_pair(text: &str) -> Result<(u32, u32), String> {
    let parts: Vec<&str> = text.split(',').collect();
    if let [a, b] = parts.as_slice() {
        let a = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
        let b = b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?;
        Ok((a, b))
    } else {
        Err(format!(
            "expected two comma-separated values, got {}",
            parts.len()
        ))
    }
}

struct Failure {
    message: String,
    code: u8,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            message: message.into(),
            code: 2,
        }
    }

    fn runtime(message: impl Into<String>) -> Failure {
        Failure {
            message: message.into(),
            code: 1,
        }
    }
}

impl From<attenuation::Error> for Failure {
    fn from(e: attenuation::Error) -> Failure {
        use attenuation::Error::*;
        let code = match e {
            NonConvergence { .. }
            | DegenerateSample
            | NonpositiveVariance { .. }
            | NegativeChiSquaredArgument { .. }
            | NoNuisanceProgram { .. } => 1,
            _ => 2,
        };
        Failure {
            message: e.to_string(),
            code,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::runtime(e.to_string())
    }
}

/// Seven significant digits; plain decimal up to 1e7, scientific beyond.
fn sig7(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if mag >= 7 {
        return format!("{x:.6e}");
    }
    let decimals = (6 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn build_inputs(args: &EstimateArgs) -> Result<(EstimateSet, StudyDesign), Failure> {
    let [r1, mut rel2, mut rel3] = args.r;
    if args.reliabilities && !args.method.takes_reliabilities() {
        rel2 = rel2.sqrt();
        rel3 = rel3.sqrt();
    }
    let est = EstimateSet::new(r1, rel2, rel3);
    if args.k.is_some() && args.method != Method::Cronbach {
        return Err(Failure::usage(
            "the --k flag applies only to the cronbach method",
        ));
    }
    let (n1, n2, n3) = match args.n {
        Sizes::Same(n) => (n, n, n),
        Sizes::Each(n1, n2, n3) => (n1, n2, n3),
    };
    let design = match args.k {
        Some((k2, k3)) => StudyDesign::with_testlets(n1, n2, n3, k2, k3),
        None => StudyDesign::new(n1, n2, n3),
    };
    Ok((est, design))
}

fn parse_level(level: f64) -> Result<Probability, Failure> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Failure::usage(format!(
            "level must lie strictly between 0 and 1, got {level}"
        )));
    }
    Ok(Probability::new(level).expect("checked above"))
}

fn cmd_pvalue(args: &PvalueArgs) -> Result<(), Failure> {
    let (est, design) = build_inputs(&args.est)?;
    let result = pvalue(args.rho, &est, &design, args.est.method)?;
    println!("{}", sig7(result.p.value()));
    Ok(())
}

fn set_line(set: &ConfidenceSet) -> String {
    if set.kind == SetKind::Empty {
        return "empty,,".into();
    }
    let mut parts = vec![set.kind.to_string()];
    for &(lo, hi) in &set.endpoints {
        parts.push(sig7(lo));
        parts.push(sig7(hi));
    }
    parts.join(",")
}

fn cmd_ci(args: &CiArgs) -> Result<(), Failure> {
    let (est, design) = build_inputs(&args.est)?;
    let level = parse_level(args.level)?;
    let set = confidence_set(&est, &design, args.est.method, level)?;
    println!("{}", set_line(&set));
    Ok(())
}

fn curve_svg(curve: &ConfidenceCurve, level: f64) -> String {
    let (w, h) = (640.0, 400.0);
    let (ml, mr, mt, mb) = (50.0, 15.0, 15.0, 40.0);
    let px = |rho: f64| ml + (rho + 1.0) / 2.0 * (w - ml - mr);
    let py = |cc: f64| mt + (1.0 - cc) * (h - mt - mb);
    let points = curve
        .grid
        .iter()
        .zip(&curve.cc)
        .map(|(rho, cc)| format!("{:.1},{:.1}", px(*rho), py(*cc)))
        .collect::<Vec<_>>()
        .join(" ");
    let rule = py(level);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"{ml}\" y=\"{mt}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        w - ml - mr,
        h - mt - mb
    ));
    for (rho, label) in [(-1.0, "-1"), (0.0, "0"), (1.0, "1")] {
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{label}</text>\n",
            px(rho),
            h - mb + 16.0
        ));
    }
    for (cc, label) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{label}</text>\n",
            ml - 6.0,
            py(cc) + 4.0
        ));
    }
    svg.push_str(&format!(
        "  <line x1=\"{ml}\" y1=\"{rule:.1}\" x2=\"{:.1}\" y2=\"{rule:.1}\" \
         stroke=\"#a33\" stroke-dasharray=\"5,4\"/>\n",
        w - mr
    ));
    svg.push_str(&format!(
        "  <polyline points=\"{points}\" fill=\"none\" stroke=\"#246\" stroke-width=\"1.5\"/>\n"
    ));
    svg.push_str("</svg>\n");
    svg
}

fn cmd_cc(args: &CcArgs) -> Result<(), Failure> {
    let (est, design) = build_inputs(&args.est)?;
    let level = parse_level(args.level)?;
    let curve = confidence_curve(&est, &design, args.est.method, args.grid)?;
    std::fs::write(&args.out, curve_to_csv(&curve))?;
    if let Some(svg_path) = &args.svg {
        std::fs::write(svg_path, curve_svg(&curve, level.value()))?;
    }
    Ok(())
}

fn summarize(records: &[CoverageRecord], methods: &[Method]) -> String {
    let mut out = String::new();
    for &method in methods {
        let sel: Vec<&CoverageRecord> = records.iter().filter(|rec| rec.method == method).collect();
        let count = sel.len() as f64;
        let mean = sel.iter().map(|rec| rec.coverage()).sum::<f64>() / count;
        let var = sel
            .iter()
            .map(|rec| (rec.coverage() - mean).powi(2))
            .sum::<f64>()
            / count;
        let failures: u32 = sel.iter().map(|rec| rec.failures).sum();
        let truncations: u32 = sel.iter().map(|rec| rec.truncations).sum();
        out.push_str(&format!(
            "{method}: mean coverage {}, sd {}, failures {failures}, truncations {truncations}\n",
            sig7(mean),
            sig7(var.sqrt()),
        ));
    }
    out
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::usage(format!("{}: {e}", args.config.display())))?;
    let mut config: SimConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let records = match args.threads {
        Some(t) if t > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Failure::runtime(e.to_string()))?
            .install(|| run_coverage(&config))?,
        _ => run_coverage(&config)?,
    };
    std::fs::write(&args.out, coverage_csv(&records))?;
    print!("{}", summarize(&records, &config.methods));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Pvalue(args) => cmd_pvalue(args),
        Command::Ci(args) => cmd_ci(args),
        Command::Cc(args) => cmd_cc(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
