//! The `ndcg` command-line tool.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 violated
//! assumption, 4 I/O error.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::datagen::{calibrate_scorer, ingest_click_log, QueryDataset, ScorerSpec};
use crate::discount::Feasibility;
use crate::error::{Error, Result};
use crate::experiments::{
    convergence_curve, distinguish, nonconvergence_test, NamedScorer, RunOptions, Verdict, Winner,
};
use crate::limits::{limit, AssumptionCheck};
use crate::metrics::{ndcg, GradeSet};

#[derive(Debug, Parser)]
#[command(name = "ndcg", version, about = "NDCG convergence experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Mean NDCG per scorer over a grid of sizes.
    Curve,
    /// Closed-form limit of NDCG for the configured world.
    Limit,
    /// Flip rates between two scorers over a geometric grid.
    Distinguish,
    /// High/low NDCG frequencies under a summable discount.
    Nonconverge,
    /// Click-log CSV to per-query labelled datasets.
    Ingest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Curve => "curve",
            Command::Limit => "limit",
            Command::Distinguish => "distinguish",
            Command::Nonconverge => "nonconverge",
            Command::Ingest => "ingest",
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::AssumptionViolated(_) | Error::DegenerateDataset => 3,
        Error::Io { .. } => 4,
        Error::InvalidParameter(_)
        | Error::ResourceLimit { .. }
        | Error::Parse { .. }
        | Error::Config(_) => 2,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    log::info!(
        "{}: loaded {} (seed {})",
        cli.command.name(),
        path.display(),
        cfg.seed
    );
    fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    let opts = RunOptions {
        master_seed: cfg.seed,
        threads: cli.threads,
    };
    let ctx = Ctx {
        cfg: &cfg,
        out: &cli.out,
        opts,
    };
    match cli.command {
        Command::Curve => ctx.curve(),
        Command::Limit => ctx.limit(),
        Command::Distinguish => ctx.distinguish(),
        Command::Nonconverge => ctx.nonconverge(),
        Command::Ingest => ctx.ingest(),
    }
}

#[derive(Serialize)]
struct Manifest<'a, S: Serialize> {
    command: &'static str,
    version: &'static str,
    seed: u64,
    discount: String,
    feasibility: Feasibility,
    outputs: Vec<String>,
    summary: S,
    config: &'a RunConfig,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    opts: RunOptions,
}

impl Ctx<'_> {
    fn scorers(&self) -> Vec<NamedScorer> {
        if self.cfg.scorers.is_empty() {
            vec![NamedScorer::new("canonical", ScorerSpec::Canonical)]
        } else {
            self.cfg.scorers.clone()
        }
    }

    fn named(&self, name: Option<&String>, fallback: usize) -> Result<NamedScorer> {
        match name {
            Some(n) => self.cfg.scorer(n).cloned(),
            None => self
                .scorers()
                .get(fallback)
                .cloned()
                .ok_or_else(|| Error::Config(format!("need at least {} scorers", fallback + 1))),
        }
    }

    fn manifest<S: Serialize>(&self, command: Command, outputs: &[&str], summary: S) -> Result<()> {
        let feasibility = self.cfg.discount.classify();
        if let Some(w) = &feasibility.warning {
            log::warn!("{w}");
        }
        let m = Manifest {
            command: command.name(),
            version: env!("CARGO_PKG_VERSION"),
            seed: self.cfg.seed,
            discount: self.cfg.discount.to_string(),
            feasibility,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            summary,
            config: self.cfg,
        };
        let mut text =
            serde_json::to_string_pretty(&m).map_err(|e| Error::invalid(e.to_string()))?;
        text.push('\n');
        self.write("manifest.json", text.as_bytes())
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    fn write_csv<R: Serialize>(&self, name: &str, rows: &[R]) -> Result<()> {
        let path = self.out.join(name);
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| csv_err(&path, e))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::io(&path, e.into_error()))?;
        self.write(name, &bytes)
    }

    fn curve(&self) -> Result<()> {
        let world = self.cfg.world()?;
        let section = self.cfg.section(&self.cfg.curve, "curve")?;
        let scorers = self.scorers();
        let measure = self.cfg.measure();
        log::info!(
            "curve: {} scorers, {} sizes, {} trials, discount {}",
            scorers.len(),
            section.n_grid.len(),
            section.trials,
            measure.discount
        );
        let points = convergence_curve(
            world,
            &scorers,
            &measure,
            &section.n_grid,
            section.trials,
            self.opts,
        )?;
        let skipped: usize = points.iter().map(|p| p.skipped).sum();
        if skipped > 0 {
            log::warn!("curve: {skipped} degenerate prefixes skipped");
        }
        self.write_csv("curve.csv", &points)?;
        #[derive(Serialize)]
        struct Summary {
            points: usize,
            skipped: usize,
        }
        let summary = Summary {
            points: points.len(),
            skipped,
        };
        self.manifest(Command::Curve, &["curve.csv"], summary)
    }

    fn limit(&self) -> Result<()> {
        let world = self.cfg.world()?;
        let opts = self
            .cfg
            .limit
            .clone()
            .unwrap_or(crate::config::LimitConfig {
                scorer: None,
                calibration_n: 1_000_000,
                bins: 200,
            });
        let scorer = self.named(opts.scorer.as_ref(), 0)?;
        let calibrated = !scorer.spec.is_order_preserving();
        let spec = if calibrated {
            log::info!(
                "limit: calibrating '{}' on {} items in {} bins",
                scorer.name,
                opts.calibration_n,
                opts.bins
            );
            calibrate_scorer(
                world,
                &scorer.spec,
                opts.calibration_n,
                opts.bins,
                self.cfg.seed,
            )?
        } else {
            world.clone()
        };
        log::info!("limit: discount {}", self.cfg.discount);
        let result = limit(&spec, &self.cfg.discount)?;
        #[derive(Serialize)]
        struct LimitReport<'a> {
            value: Option<f64>,
            theorem: &'static str,
            assumptions: &'a [AssumptionCheck],
            quadrature_error_bound: f64,
            #[serde(skip_serializing_if = "Option::is_none")]
            note: Option<&'a str>,
            scorer: &'a str,
            calibrated: bool,
            discount: String,
        }
        let report = LimitReport {
            value: result.value,
            theorem: result.theorem.tag(),
            assumptions: &result.assumptions,
            quadrature_error_bound: result.quadrature_error_bound,
            note: result.note.as_deref(),
            scorer: &scorer.name,
            calibrated,
            discount: self.cfg.discount.to_string(),
        };
        let mut text =
            serde_json::to_string_pretty(&report).map_err(|e| Error::invalid(e.to_string()))?;
        text.push('\n');
        self.write("limit.json", text.as_bytes())?;
        match result.value {
            Some(v) => log::info!("limit: {v} ({})", result.theorem.tag()),
            None => log::info!("limit: none ({})", result.theorem.tag()),
        }
        self.manifest(Command::Limit, &["limit.json"], &report)
    }

    fn distinguish(&self) -> Result<()> {
        let world = self.cfg.world()?;
        let section = self.cfg.section(&self.cfg.distinguish, "distinguish")?;
        let pair = match &section.pair {
            Some([a, b]) => [self.cfg.scorer(a)?.clone(), self.cfg.scorer(b)?.clone()],
            None => [self.named(None, 0)?, self.named(None, 1)?],
        };
        log::info!(
            "distinguish: f0 = '{}', f1 = '{}', N in [{}, {}], {} trials",
            pair[0].name,
            pair[1].name,
            section.grid.n_min,
            section.grid.n_max,
            section.trials
        );
        let report = distinguish(
            world,
            &pair,
            &self.cfg.measure(),
            section.grid,
            section.trials,
            self.opts,
        )?;
        self.write_csv("distinguish.csv", &report.rows)?;
        log::info!("distinguish: winner {}", report.winner.as_str());
        #[derive(Serialize)]
        struct Summary<'a> {
            f0: &'a str,
            f1: &'a str,
            winner: Winner,
            decay_slope: Option<f64>,
            trials: usize,
            degenerate: usize,
        }
        let summary = Summary {
            f0: &pair[0].name,
            f1: &pair[1].name,
            winner: report.winner,
            decay_slope: report.decay_slope,
            trials: report.trials,
            degenerate: report.degenerate,
        };
        self.manifest(Command::Distinguish, &["distinguish.csv"], summary)
    }

    fn nonconverge(&self) -> Result<()> {
        let world = self.cfg.world()?;
        let section = self.cfg.section(&self.cfg.nonconverge, "nonconverge")?;
        let scorer = self.named(section.scorer.as_ref(), 0)?;
        log::info!(
            "nonconverge: scorer '{}', {} sizes, {} trials",
            scorer.name,
            section.n_grid.len(),
            section.trials
        );
        let report = nonconvergence_test(
            world,
            &scorer,
            &self.cfg.measure(),
            &section.n_grid,
            section.trials,
            section.thresholds,
            self.opts,
        )?;
        self.write_csv("nonconverge.csv", &report.rows)?;
        log::info!("nonconverge: {:?}", report.verdict);
        #[derive(Serialize)]
        struct Summary<'a> {
            scorer: &'a str,
            verdict: Verdict,
            sd_not_shrinking: bool,
        }
        let summary = Summary {
            scorer: &report.scorer,
            verdict: report.verdict,
            sd_not_shrinking: report.sd_not_shrinking,
        };
        self.manifest(Command::Nonconverge, &["nonconverge.csv"], summary)
    }

    fn ingest(&self) -> Result<()> {
        let section = self.cfg.section(&self.cfg.ingest, "ingest")?;
        log::info!("ingest: reading {}", section.path.display());
        let queries = ingest_click_log(
            &section.path,
            section.thresholds,
            section.score_columns.as_deref(),
        )?;
        let dir = self.out.join("queries");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let gs = GradeSet::new(vec![2.0, 1.0, 0.0], crate::metrics::Gain::Identity)?;
        let columns: Vec<String> = queries
            .first()
            .map(|q| q.datasets.iter().map(|(n, _)| n.clone()).collect())
            .unwrap_or_default();

        let mut summary = csv::WriterBuilder::new().from_writer(Vec::new());
        let mut header = vec!["query_id", "file", "items", "grade_2", "grade_1", "grade_0"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        header.extend(columns.iter().map(|c| format!("ndcg_{c}")));
        let summary_path = self.out.join("ingest.csv");
        summary
            .write_record(&header)
            .map_err(|e| csv_err(&summary_path, e))?;

        let mut used = HashSet::new();
        let mut outputs = vec!["ingest.csv".to_string()];
        for q in &queries {
            let file = unique_file_name(&q.query_id, &mut used);
            self.write(&format!("queries/{file}"), &query_csv(q)?)?;
            let count = |g: f64| {
                q.datasets[0]
                    .1
                    .grades()
                    .iter()
                    .filter(|&&x| x == g)
                    .count()
                    .to_string()
            };
            let mut record = vec![
                q.query_id.clone(),
                format!("queries/{file}"),
                q.doc_ids.len().to_string(),
                count(2.0),
                count(1.0),
                count(0.0),
            ];
            for (_, data) in &q.datasets {
                record.push(
                    match ndcg(data, &self.cfg.discount, &gs, self.cfg.tie_break) {
                        Ok(v) => v.to_string(),
                        Err(Error::DegenerateDataset) => String::new(),
                        Err(e) => return Err(e),
                    },
                );
            }
            summary
                .write_record(&record)
                .map_err(|e| csv_err(&summary_path, e))?;
            outputs.push(format!("queries/{file}"));
        }
        let bytes = summary
            .into_inner()
            .map_err(|e| Error::io(&summary_path, e.into_error()))?;
        self.write("ingest.csv", &bytes)?;
        log::info!("ingest: {} queries", queries.len());
        let refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
        #[derive(Serialize)]
        struct Summary {
            queries: usize,
            items: usize,
        }
        let summary = Summary {
            queries: queries.len(),
            items: queries.iter().map(|q| q.doc_ids.len()).sum(),
        };
        self.manifest(Command::Ingest, &refs, summary)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

fn query_csv(q: &QueryDataset) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "doc_id".to_string(),
        "timestamp".into(),
        "clicks".into(),
        "grade".into(),
    ];
    header.extend(q.datasets.iter().map(|(n, _)| n.clone()));
    let path = PathBuf::from(&q.query_id);
    w.write_record(&header).map_err(|e| csv_err(&path, e))?;
    let grades = q.datasets[0].1.grades();
    for (i, doc) in q.doc_ids.iter().enumerate() {
        let mut rec = vec![
            doc.clone(),
            q.timestamps[i].to_string(),
            q.clicks[i].to_string(),
            grades[i].to_string(),
        ];
        rec.extend(q.datasets.iter().map(|(_, d)| d.scores()[i].to_string()));
        w.write_record(&rec).map_err(|e| csv_err(&path, e))?;
    }
    w.into_inner().map_err(|e| Error::io(&path, e.into_error()))
}

fn unique_file_name(query_id: &str, used: &mut HashSet<String>) -> String {
    let stem: String = query_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    let stem = if stem.is_empty() {
        "query".to_string()
    } else {
        stem
    };
    let mut name = format!("{stem}.csv");
    let mut k = 2;
    while !used.insert(name.clone()) {
        name = format!("{stem}_{k}.csv");
        k += 1;
    }
    name
}
