#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod exit;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use convspec::asymptotics::{gelation_profile, llt_profile, small_counts_convergence, tv_to_qn};
use convspec::diagnostics::condition_diagnostics;
use convspec::exact::{
    general_recursion_residual, ln_partition_function, poisson_recursion_residual, spectrum_law_bruteforce,
    t_distribution, ExactEngine,
};
use convspec::export::{pmf_csv, profile_csv, samples_csv, spectrum_law_csv, table_csv, to_json, Meta};
use convspec::samplers::{sample_many_exact, sample_spectrum_rejection, Rejection, SamplerState, RNG_NAME};
use convspec::trees::{rooted_tree_counts, unrooted_tree_counts};
use convspec::{limit_laws, otter_constants, parse_model_spec, Family, Model, ModelSpec, TreeCounts};
use serde::Serialize;

/// Environment variable naming the directory used when `--out` is absent.
const OUT_DIR_ENV: &str = "CONVSPEC_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] convspec::Error),
    #[error("{0}")]
    Usage(String),
    #[error("rejection sampler accepted nothing in {tries} tries")]
    Exhausted { tries: u64 },
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "convspec", version, about = "Exact laws and limit checks for conditioned component spectra")]
struct Cli {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model family: poisson-power, forest-unlabelled-unrooted,
    /// forest-unlabelled-rooted, forest-labelled-unrooted, forest-labelled-rooted.
    #[arg(long, global = true, default_value = "poisson-power", conflicts_with = "model_file")]
    model: String,
    /// TOML model file; replaces the family flags.
    #[arg(long, global = true)]
    model_file: Option<PathBuf>,
    /// Convergence exponent q (power-law family).
    #[arg(long, global = true, default_value_t = 1.5)]
    q: f64,
    /// Amplitude of the power-law means.
    #[arg(long = "A", global = true, default_value_t = 1.0)]
    amplitude: f64,
    /// Truncation tolerance for infinite-support laws.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Tilting parameter x.
    #[arg(long, global = true)]
    tilt: Option<f64>,
    /// Tree-count horizon for forest families.
    #[arg(long = "model-horizon", global = true)]
    model_horizon: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct OutputArgs {
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; `-` for stdout. Defaults to stdout, or to a file in
    /// $CONVSPEC_OUT_DIR when that is set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TvKind {
    /// Full conditional law against the limit law `Q_n`.
    Qn,
    /// First `b` counts against independent ones.
    SmallCounts,
    /// Largest, smallest, count and connectivity against their limits.
    Gelation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Exact,
    Rejection,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Law of the weighted tail sum over sizes b+1..n, on 0..=n.
    Dist {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        b: usize,
    },
    /// Full conditional law of the spectrum by enumeration (n <= 40).
    Spectrum {
        #[arg(long)]
        n: usize,
    },
    /// Conditional law of the number of size-j components.
    Marginal {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        j: usize,
    },
    /// Laws of the largest and smallest component sizes and the component count.
    Corollary {
        #[arg(long)]
        n: usize,
    },
    /// Limit laws of the small part, the component count and connectivity.
    Limits {
        #[arg(long, default_value_t = 1e-8)]
        delta: f64,
        /// Largest total weight tabulated.
        #[arg(long, default_value_t = 100)]
        cap: usize,
        /// Largest component count tabulated.
        #[arg(long, default_value_t = 50)]
        count_cap: usize,
    },
    /// Local limit profile at the given l values.
    VerifyLlt {
        #[arg(long, value_delimiter = ',', required = true)]
        l: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        b: usize,
        /// n = factor * l.
        #[arg(long, default_value_t = 1)]
        factor: usize,
    },
    /// Total variation profiles against the limit laws.
    VerifyTv {
        #[arg(long, value_enum, default_value = "qn")]
        kind: TvKind,
        #[arg(long, value_delimiter = ',', required = true)]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        #[arg(long, default_value_t = 3)]
        b: usize,
    },
    /// Residual of the point-probability recursion.
    VerifyRecursion {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        b: usize,
        /// Exit with the verification code when the residual is not below this.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Random spectra, one row per sample.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "exact")]
        method: Method,
        /// Per-sample try limit for the rejection sampler.
        #[arg(long, default_value_t = 10_000_000)]
        max_tries: u64,
    },
    /// Rooted and unrooted unlabelled tree counts.
    Trees {
        #[arg(long, default_value_t = 30)]
        horizon: usize,
    },
    /// Finite-range estimates of the regularity conditions.
    Diagnostics {
        #[arg(long, default_value_t = 200)]
        jmax: usize,
        #[arg(long, default_value_t = 10)]
        smax: usize,
    },
    /// Partition function c_m for m = 1..=n (Poisson families).
    PartitionFn {
        #[arg(long)]
        n: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Dist { .. } => "dist",
            Command::Spectrum { .. } => "spectrum",
            Command::Marginal { .. } => "marginal",
            Command::Corollary { .. } => "corollary",
            Command::Limits { .. } => "limits",
            Command::VerifyLlt { .. } => "verify-llt",
            Command::VerifyTv { .. } => "verify-tv",
            Command::VerifyRecursion { .. } => "verify-recursion",
            Command::Sample { .. } => "sample",
            Command::Trees { .. } => "trees",
            Command::Diagnostics { .. } => "diagnostics",
            Command::PartitionFn { .. } => "partition-fn",
        }
    }
}

fn resolve_model(args: &ModelArgs) -> Result<Model> {
    let mut spec = match &args.model_file {
        Some(path) => {
            let src = std::fs::read_to_string(path)
                .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            parse_model_spec(&src)?
        }
        None => {
            let family: Family = args.model.parse()?;
            match family {
                Family::PoissonPower => ModelSpec::poisson_power(args.q, args.amplitude),
                Family::CustomTable => {
                    return Err(CliError::Usage("custom-table models need --model-file".into()));
                }
                f => ModelSpec::forest(f),
            }
        }
    };
    if let Some(t) = args.tau {
        spec = spec.with_tau(t);
    }
    if let Some(x) = args.tilt {
        spec = spec.with_tilt(x);
    }
    if let Some(h) = args.model_horizon {
        spec = spec.with_horizon(h);
    }
    Ok(Model::new(spec)?)
}

/// Rendered artifact plus the facts for the summary line.
struct Artifact {
    body: String,
    summary: String,
    fingerprint: String,
    tau: Option<f64>,
}

fn render<T: Serialize>(format: Format, meta: &Meta, csv: impl FnOnce() -> String, data: &T) -> Result<String> {
    Ok(match format {
        Format::Csv => csv(),
        Format::Json => to_json(meta, data)?,
    })
}

fn pmf_rows(laws: &[&convspec::Pmf], len: usize) -> Vec<Vec<String>> {
    (0..len)
        .map(|k| {
            let mut row = vec![k.to_string()];
            row.extend(laws.iter().map(|l| format!("{:e}", l.prob(k))));
            row
        })
        .collect()
}

fn run(cli: &Cli) -> Result<Artifact> {
    if let Command::Trees { horizon } = cli.command {
        return trees(cli.output.format, horizon);
    }
    let model = resolve_model(&cli.model)?;
    let mut a = run_model(cli, &model)?;
    a.fingerprint = model.fingerprint().to_string();
    a.tau = Some(model.tau());
    Ok(a)
}

fn artifact(body: String, summary: String) -> Artifact {
    Artifact { body, summary, fingerprint: "-".into(), tau: None }
}

fn run_model(cli: &Cli, model: &Model) -> Result<Artifact> {
    let format = cli.output.format;
    let fp = model.fingerprint().to_string();
    let tau = model.tau();
    let meta = |kind: &str, tol: f64| Meta::new(kind, &fp, tol);

    match &cli.command {
        Command::Dist { n, b } => {
            let law = t_distribution(model, *b, *n)?;
            let meta = meta("tail-sum-law", tau).with_n(*n).with("b", b);
            let body = render(format, &meta, || pmf_csv(&meta, "value", &law), &law)?;
            Ok(artifact(body, format!("b={b} n={n} tail={:e}", law.tail())))
        }
        Command::Spectrum { n } => {
            let law = spectrum_law_bruteforce(model, *n)?;
            let meta = meta("spectrum-law", tau);
            let body = render(format, &meta, || spectrum_law_csv(&meta, &law), &law)?;
            Ok(artifact(body, format!("n={n} spectra={}", law.entries.len())))
        }
        Command::Marginal { n, j } => {
            let law = ExactEngine::new(model, *n)?.conditional_marginal(*j)?;
            let meta = meta("marginal", tau).with_n(*n).with("j", j);
            let body = render(format, &meta, || pmf_csv(&meta, "count", &law), &law)?;
            Ok(artifact(body, format!("n={n} j={j} mean={:.6}", law.mean())))
        }
        Command::Corollary { n } => {
            let e = ExactEngine::new(model, *n)?;
            let largest = e.largest_component_law()?;
            let smallest = e.smallest_component_law()?;
            let count = e.component_count_law(*n)?;
            let meta = meta("corollary", tau).with_n(*n);
            #[derive(Serialize)]
            struct Laws<'a> {
                largest: &'a convspec::Pmf,
                smallest: &'a convspec::Pmf,
                count: &'a convspec::Pmf,
            }
            let data = Laws { largest: &largest, smallest: &smallest, count: &count };
            let rows = pmf_rows(&[&largest, &smallest, &count], n + 1);
            let body = render(
                format,
                &meta,
                || table_csv(&meta, &["value", "largest", "smallest", "count"], &rows),
                &data,
            )?;
            Ok(artifact(body, format!("n={n} P[connected]={:.6}", largest.prob(*n))))
        }
        Command::Limits { delta, cap, count_cap } => {
            let l = limit_laws(model, *delta, *cap, *count_cap)?;
            let meta = meta("limit-laws", *delta)
                .with("truncation", l.truncation)
                .with("truncation_error", format!("{:e}", l.truncation_error))
                .with("rho_connect", format!("{:e}", l.rho_connect))
                .with("rho_bracket", format!("{:e}..{:e}", l.rho_bracket.0, l.rho_bracket.1))
                .with_uncovered(l.total_weight.tail().max(l.count.tail()));
            let rows = pmf_rows(&[&l.total_weight, &l.count], cap.max(count_cap) + 1);
            let body = render(format, &meta, || table_csv(&meta, &["value", "total_weight", "count"], &rows), &l)?;
            Ok(artifact(body, format!("rho_connect={:.12} J={}", l.rho_connect, l.truncation)))
        }
        Command::VerifyLlt { l, b, factor } => {
            if *factor == 0 {
                return Err(CliError::Usage("--factor must be >= 1".into()));
            }
            let triples: Vec<_> = l.iter().map(|&l| (*b, l * factor, l)).collect();
            let prof = llt_profile(model, &triples)?;
            let meta = meta("llt-profile", tau).with("quantity", &prof.profile.quantity);
            let rows: Vec<Vec<String>> = prof
                .points
                .iter()
                .map(|p| {
                    vec![
                        p.b.to_string(),
                        p.n.to_string(),
                        p.l.to_string(),
                        format!("{:e}", p.prob),
                        format!("{:e}", p.h),
                        format!("{:e}", p.h_max_b),
                        format!("{:e}", p.h_sup),
                        format!("{:e}", p.error),
                    ]
                })
                .collect();
            let header = ["b", "n", "l", "probability", "h", "h_max_b", "h_sup", "error_bar"];
            let body = render(format, &meta, || table_csv(&meta, &header, &rows), &prof)?;
            Ok(artifact(body, format!("decreasing={}", prof.profile.strictly_decreasing()),))
        }
        Command::VerifyTv { kind, ns, delta, b } => match kind {
            TvKind::Qn => {
                let p = tv_to_qn(model, ns, *delta)?;
                let meta = meta("tv-to-qn", *delta);
                let body = render(format, &meta, || profile_csv(&meta, &p), &p)?;
                Ok(artifact(body, format!("decreasing={}", p.strictly_decreasing())))
            }
            TvKind::SmallCounts => {
                let s = small_counts_convergence(model, ns, *b)?;
                let meta = meta("small-counts", tau).with("b", b);
                let body = render(format, &meta, || profile_csv(&meta, &s.profile), &s)?;
                Ok(artifact(body, format!("decreasing={}", s.profile.strictly_decreasing())))
            }
            TvKind::Gelation => {
                let g = gelation_profile(model, ns, *delta, *b)?;
                let meta = meta("gelation", *delta)
                    .with("b", b)
                    .with("rho_connect", format!("{:e}", g.limits.rho_connect));
                let profiles = [&g.giant, &g.smallest, &g.count, &g.connect];
                let mut rows = Vec::new();
                for (i, &n) in ns.iter().enumerate() {
                    let mut row = vec![n.to_string()];
                    for p in profiles {
                        row.push(format!("{:e}", p.values[i]));
                        row.push(format!("{:e}", p.error_bars[i]));
                    }
                    row.push(format!("{:e}", g.connect_prob[i]));
                    rows.push(row);
                }
                let header = [
                    "n",
                    "giant",
                    "giant_error",
                    "smallest",
                    "smallest_error",
                    "count",
                    "count_error",
                    "connect",
                    "connect_error",
                    "connect_probability",
                ];
                let body = render(format, &meta, || table_csv(&meta, &header, &rows), &g)?;
                let all = profiles.iter().all(|p| p.strictly_decreasing());
                Ok(artifact(body, format!("decreasing={all}")))
            }
        },
        Command::VerifyRecursion { n, b, tol } => {
            let (which, residual) = if model.family().is_poisson() {
                ("poisson", poisson_recursion_residual(model, *b, *n)?)
            } else {
                ("general", general_recursion_residual(model, *b, *n)?)
            };
            let meta = meta("recursion-residual", *tol).with_n(*n).with("b", b);
            #[derive(Serialize)]
            struct Residual<'a> {
                identity: &'a str,
                residual: f64,
            }
            let rows = vec![vec![which.to_string(), format!("{residual:e}")]];
            let body = render(
                format,
                &meta,
                || table_csv(&meta, &["identity", "residual"], &rows),
                &Residual { identity: which, residual },
            )?;
            if !(residual < *tol) {
                write_output(cli, &body)?;
                return Err(CliError::Verify(format!("{which} residual {residual:e} >= {tol:e}")));
            }
            Ok(artifact(body, format!("{which} residual={residual:e}")))
        }
        Command::Sample { n, count, seed, method, max_tries } => {
            let samples = match method {
                Method::Exact => sample_many_exact(&ExactEngine::new(model, *n)?, *seed, *count)?,
                Method::Rejection => {
                    let mut st = SamplerState::new(*seed);
                    let mut out = Vec::with_capacity(*count);
                    for _ in 0..*count {
                        match sample_spectrum_rejection(model, *n, &mut st, *max_tries)? {
                            Rejection::Accepted { spectrum, .. } => out.push(spectrum),
                            Rejection::Exhausted { tries } => return Err(CliError::Exhausted { tries }),
                        }
                    }
                    out
                }
            };
            let method_name = match method {
                Method::Exact => "exact",
                Method::Rejection => "rejection",
            };
            let meta = meta("samples", tau)
                .with_n(*n)
                .with("seed", seed)
                .with("rng", RNG_NAME)
                .with("method", method_name);
            let body = render(format, &meta, || samples_csv(&meta, *n, &samples), &samples)?;
            Ok(artifact(body, format!("n={n} count={count} seed={seed} method={method_name}")))
        }
        Command::Diagnostics { jmax, smax } => {
            let r = condition_diagnostics(model, *jmax, *smax)?;
            let meta = meta("diagnostics", tau);
            let mut rows = vec![
                vec!["l_hat".into(), format!("{:e}", r.l_hat)],
                vec!["g_hat".into(), format!("{:e}", r.g_hat)],
                vec!["g_q_hat".into(), format!("{:e}", r.g_q_hat)],
                vec!["p0_hat".into(), format!("{:e}", r.p0_hat)],
            ];
            for (beta, l, v) in &r.growth {
                rows.push(vec![format!("growth[beta={beta},l={l}]"), format!("{v:e}")]);
            }
            for (j, v) in &r.eps_hat {
                rows.push(vec![format!("eps_hat[{j}]"), format!("{v:e}")]);
            }
            for (i, v) in r.l_s.iter().enumerate() {
                rows.push(vec![format!("l_s[{}]", i + 2), format!("{v:e}")]);
            }
            let mut meta = meta;
            for f in &r.flags {
                meta = meta.with("flag", f);
            }
            let body = render(format, &meta, || table_csv(&meta, &["quantity", "value"], &rows), &r)?;
            Ok(artifact(body, format!("flags={}", r.flags.len())))
        }
        Command::PartitionFn { n } => {
            let mut rows = Vec::with_capacity(*n);
            let mut data = Vec::with_capacity(*n);
            for m in 1..=*n {
                let ln_c = ln_partition_function(model, m)?;
                rows.push(vec![m.to_string(), format!("{:e}", ln_c.exp()), format!("{ln_c:e}")]);
                data.push((m, ln_c.exp(), ln_c));
            }
            let meta = meta("partition-function", tau);
            let body = render(format, &meta, || table_csv(&meta, &["n", "c_n", "ln_c_n"], &rows), &data)?;
            Ok(artifact(body, format!("n={n}")))
        }
        Command::Trees { .. } => unreachable!("handled above"),
    }
}

fn trees(format: Format, horizon: usize) -> Result<Artifact> {
    if horizon == 0 {
        return Err(CliError::Usage("--horizon must be >= 1".into()));
    }
    let r = rooted_tree_counts(horizon);
    let m = unrooted_tree_counts(&r)?;
    let mut meta = Meta::new("tree-counts", "-", 0.0);
    let mut summary = format!("horizon={horizon}");
    if let Ok(o) = TreeCounts::compute(horizon).and_then(|c| otter_constants(&c, 1e-6)) {
        meta = meta.with("rho", format!("{:.12}", o.rho));
        summary.push_str(&format!(" rho={:.10}", o.rho));
    }
    let rows: Vec<Vec<String>> = (0..horizon)
        .map(|i| vec![(i + 1).to_string(), r[i].to_string(), m[i].to_string()])
        .collect();
    let data: Vec<(usize, String, String)> =
        (0..horizon).map(|i| (i + 1, r[i].to_string(), m[i].to_string())).collect();
    let body = render(format, &meta, || table_csv(&meta, &["j", "rooted", "unrooted"], &rows), &data)?;
    Ok(artifact(body, summary))
}

fn destination(cli: &Cli) -> Option<PathBuf> {
    match &cli.output.out {
        Some(p) if p.as_os_str() == "-" => None,
        Some(p) => Some(p.clone()),
        None => std::env::var_os(OUT_DIR_ENV).map(|dir| {
            let ext = match cli.output.format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            PathBuf::from(dir).join(format!("{}.{ext}", cli.command.name()))
        }),
    }
}

fn write_output(cli: &Cli, body: &str) -> Result<()> {
    match destination(cli) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)
                    .map_err(|source| CliError::Io { path: parent.display().to_string(), source })?;
            }
            std::fs::write(&path, body).map_err(|source| CliError::Io { path: path.display().to_string(), source })
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = run(&cli).and_then(|a| write_output(&cli, &a.body).map(|_| a));
    let took = start.elapsed().as_secs_f64();
    let name = cli.command.name();
    match result {
        Ok(a) => {
            let tau = a.tau.map(|t| format!(" tau={t:e}")).unwrap_or_default();
            eprintln!("convspec {name}: ok fingerprint={}{tau} {} time={took:.3}s", a.fingerprint, a.summary);
            ExitCode::from(exit::OK)
        }
        Err(e) => {
            let code = exit::code(&e);
            eprintln!("convspec {name}: error (exit {code}): {e} time={took:.3}s");
            ExitCode::from(code)
        }
    }
}
