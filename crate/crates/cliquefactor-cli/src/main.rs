//! CLI driver: graph generation, jumbledness audits, spectral gap, factor
//! search, template construction, benchmark sweeps, and SVG reports.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cliquefactor::absorber::{build_template, verify_template, VerifyMode};
use cliquefactor::graph::{
    generate_graph, jumbledness_audit, spectral_lambda, AuditStrategy, Graph, GraphKind, GraphSpec,
};
use cliquefactor::pipeline::{find_clique_factor, ParameterProfile, PipelineError};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "cliquefactor", about = "K_r-factors in pseudorandom graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a graph and emit it as JSON.
    Gen(GenArgs),
    /// Empirical (p,β)-bijumbledness audit of a graph.
    Audit(AuditArgs),
    /// Second adjacency eigenvalue of a regular graph.
    Spectral(GraphArg),
    /// Search for a K_r-factor.
    Factor(FactorArgs),
    /// Build and verify a flexibility template.
    Template(TemplateArgs),
    /// Sweep (n, p, seed) and record success rates and runtimes as CSV.
    Bench(BenchArgs),
    /// Render a bench CSV as an SVG plot.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// gnp | random-regular | paley | complete
    #[arg(long)]
    kind: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArg {
    /// Graph JSON file ({"n":…, "edges":[[u,v],…]}).
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Density the audit measures discrepancy against.
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FactorArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 3)]
    r: usize,
    /// Profile JSON; defaults are derived from (n, r) when absent.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Retry budget override.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TemplateArgs {
    #[arg(long)]
    t: usize,
    #[arg(long, default_value_t = 40)]
    max_deg: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 3)]
    r: usize,
    /// Comma-separated vertex counts.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Comma-separated densities.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Gen(a) => {
            let kind = match a.kind.as_str() {
                "gnp" => GraphKind::Gnp { n: a.n, p: a.p.ok_or_else(|| anyhow!("gnp needs --p"))? },
                "random-regular" => {
                    GraphKind::RandomRegular { n: a.n, d: a.d.ok_or_else(|| anyhow!("random-regular needs --d"))? }
                }
                "paley" => GraphKind::Paley { n: a.n },
                "complete" => GraphKind::Complete { n: a.n },
                other => bail!("unknown kind {other}"),
            };
            let g = generate_graph(&GraphSpec { kind, seed: a.seed })?;
            emit(&g.to_json(), a.out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Audit(a) => {
            let g = load_graph(&a.graph)?;
            let strategy = if g.n() <= 16 {
                AuditStrategy::ExhaustiveSmall
            } else {
                AuditStrategy::Sampled { k: a.samples, seed: a.seed }
            };
            let audit = jumbledness_audit(&g, a.p, &strategy)?;
            emit(&serde_json::to_value(&audit)?, a.out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Spectral(a) => {
            let g = load_graph(&a.graph)?;
            let lambda = spectral_lambda(&g)?;
            println!("{lambda}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Factor(a) => {
            let g = load_graph(&a.graph)?;
            let mut profile = match &a.profile {
                Some(path) => serde_json::from_str::<ParameterProfile>(
                    &std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
                )?,
                None => ParameterProfile::default_for(g.n(), a.r),
            };
            if let Some(seed) = a.seed {
                profile.seed = seed;
            }
            if let Some(budget) = a.budget {
                profile.retry_budget = budget;
            }
            match find_clique_factor(&g, &profile) {
                Ok(cert) => {
                    emit(&cert.to_json(), a.out.as_deref())?;
                    Ok(ExitCode::SUCCESS)
                }
                Err(e @ (PipelineError::PhaseFailed { .. } | PipelineError::Infeasible)) => {
                    eprintln!("{e}");
                    Ok(ExitCode::from(2))
                }
                Err(e) => Err(e.into()),
            }
        }
        Cmd::Template(a) => {
            let tpl = build_template(a.t, a.max_deg, a.seed)?;
            let report = verify_template(&tpl, &VerifyMode::Exhaustive)?;
            let mut v = tpl.to_json();
            v["verified"] = serde_json::json!(report.ok);
            v["subsets_checked"] = serde_json::json!(report.checked);
            emit(&v, a.out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bench(a) => {
            let csv = bench(&a)?;
            match &a.out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Report(a) => {
            let csv = std::fs::read_to_string(&a.csv)?;
            let svg = render_report(&csv)?;
            std::fs::write(&a.out, svg)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_graph(path: &std::path::Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    Ok(Graph::from_json(&v)?)
}

fn emit(v: &serde_json::Value, out: Option<&std::path::Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

/// One row per (n, p): success rate and mean runtime over the seeds. Seeds
/// run concurrently; inputs are immutable.
fn bench(a: &BenchArgs) -> Result<String> {
    let mut out = String::from("n,p,seeds,successes,rate,mean_ms\n");
    for &n in &a.n {
        for &p in &a.p {
            let results: Vec<(bool, u128)> = std::thread::scope(|scope| {
                let handles: Vec<_> = (0..a.seeds)
                    .map(|seed| {
                        scope.spawn(move || {
                            let g = generate_graph(&GraphSpec { kind: GraphKind::Gnp { n, p }, seed })
                                .expect("gnp generation cannot fail for valid n, p");
                            let mut profile = ParameterProfile::default_for(n, a.r);
                            profile.seed = seed;
                            let start = Instant::now();
                            let ok = find_clique_factor(&g, &profile).is_ok();
                            (ok, start.elapsed().as_millis())
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("bench worker panicked")).collect()
            });
            let successes = results.iter().filter(|r| r.0).count();
            let mean_ms = results.iter().map(|r| r.1).sum::<u128>() as f64 / results.len().max(1) as f64;
            out += &format!(
                "{n},{p},{},{successes},{:.3},{mean_ms:.1}\n",
                a.seeds,
                successes as f64 / a.seeds.max(1) as f64
            );
        }
    }
    Ok(out)
}

/// Static SVG: success-rate bars with runtime labels, one bar per CSV row.
fn render_report(csv: &str) -> Result<String> {
    let rows: Vec<Vec<String>> = csv
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|s| s.trim().to_string()).collect())
        .collect();
    if rows.is_empty() {
        bail!("csv has no data rows");
    }
    let bar_w = 64.0;
    let gap = 18.0;
    let chart_h = 220.0;
    let width = 60.0 + rows.len() as f64 * (bar_w + gap) + 20.0;
    let height = chart_h + 90.0;
    let mut s = String::new();
    let mut w = |line: String| s.push_str(&line);
    w(format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" font-family=\"monospace\" font-size=\"11\">\n"
    ));
    w(format!("<text x=\"10\" y=\"18\" font-size=\"14\">factor success rate</text>\n"));
    for frac in [0.0f64, 0.5, 1.0] {
        let y = 30.0 + chart_h * (1.0 - frac);
        w(format!(
            "<line x1=\"50\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ccc\"/>\n",
            width - 10.0
        ));
        w(format!("<text x=\"14\" y=\"{:.1}\">{frac:.1}</text>\n", y + 4.0));
    }
    for (i, row) in rows.iter().enumerate() {
        let rate: f64 = row.get(4).and_then(|v| v.parse().ok()).unwrap_or(0.0);
        let mean_ms = row.get(5).cloned().unwrap_or_default();
        let x = 60.0 + i as f64 * (bar_w + gap);
        let h = chart_h * rate;
        let y = 30.0 + chart_h - h;
        w(format!(
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w:.1}\" height=\"{h:.1}\" fill=\"#4878a8\"/>\n"
        ));
        w(format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">n={} p={}</text>\n",
            x + bar_w / 2.0,
            30.0 + chart_h + 16.0,
            row.first().cloned().unwrap_or_default(),
            row.get(1).cloned().unwrap_or_default()
        ));
        w(format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{mean_ms} ms</text>\n",
            x + bar_w / 2.0,
            30.0 + chart_h + 32.0
        ));
        w(format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{rate:.2}</text>\n",
            x + bar_w / 2.0,
            (y - 4.0).max(28.0)
        ));
    }
    w("</svg>\n".to_string());
    Ok(s)
}
