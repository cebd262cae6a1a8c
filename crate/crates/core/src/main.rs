use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zil_graph::autodiff::grad_check;
use zil_graph::graph::{to_dot, Activation, GraphSpec};
use zil_graph::harness::{
    run_ablation_suite, run_benchmark, run_equivalence_suite, ExperimentConfig, OutputFormat, SuiteResult,
};
use zil_graph::leveller::level;
use zil_graph::zoo::{build_model, Family, Model, ModelFile, ModelSpec};
use zil_graph::{Error, Graph};

const GRAD_CHECK_TOLERANCE: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "zil-graph", version, about = "Exact inference learning on computational graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a zoo model and write it as JSON.
    Build {
        #[arg(long)]
        family: Family,
        /// Comma-separated dimensions, e.g. 4,16,1.
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, default_value = "tanh")]
        activation: Activation,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a graph (or model) file as Graphviz DOT.
    ExportDot {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Insert identity vertices so the graph becomes levelled.
    Level {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the levelled graph as DOT.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Compare BP gradients with central finite differences.
    GradCheck {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Z-IL versus BP divergence table.
    Equiv(RunArgs),
    /// Divergence of each Z-IL ablation from BP.
    Ablate(RunArgs),
    /// Timing of BP, IL and Z-IL.
    Bench(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    #[arg(long)]
    tolerance: Option<f64>,
}

impl RunArgs {
    fn resolve(&self, base: ExperimentConfig) -> zil_graph::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => base,
        };
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(p) = &self.out {
            cfg.output = Some(p.clone());
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if let Some(t) = self.tolerance {
            cfg.tolerance = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: serde::Serialize>(value: &T, path: Option<&Path>) -> zil_graph::Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Accepts a model file or a bare graph specification.
fn read_graph(path: &Path) -> zil_graph::Result<(Graph, Option<Model>)> {
    let text = fs::read_to_string(path)?;
    if let Ok(file) = serde_json::from_str::<ModelFile>(&text) {
        let m = Model::from_file(&file)?;
        return Ok((m.graph.clone(), Some(m)));
    }
    let spec: GraphSpec = serde_json::from_str(&text)?;
    Ok((Graph::from_spec(&spec)?, None))
}

fn emit_suite(res: &SuiteResult, cfg: &ExperimentConfig) -> zil_graph::Result<bool> {
    let mut w = sink(cfg.output.as_deref())?;
    match cfg.format {
        OutputFormat::Csv => res.write_csv(&mut w)?,
        OutputFormat::Json => res.write_json(&mut w)?,
    }
    w.flush()?;
    for r in res.failures() {
        eprintln!(
            "FAIL {} seed {} {} {}: divergence {:e}, expected {:?}",
            r.model, r.seed, r.graph, r.algorithm, r.divergence, r.expected
        );
    }
    eprintln!("{} rows, {} failing", res.rows.len(), res.failures().count());
    Ok(res.all_pass())
}

fn run(cli: Cli) -> zil_graph::Result<bool> {
    match cli.cmd {
        Cmd::Build { family, dims, activation, seed, out } => {
            let m = build_model(&ModelSpec::new(family, dims, activation, seed))?;
            write_json(&m.to_file(), out.as_deref())?;
            Ok(true)
        }
        Cmd::ExportDot { input, out } => {
            let (g, _) = read_graph(&input)?;
            let mut w = sink(out.as_deref())?;
            w.write_all(to_dot(&g).as_bytes())?;
            w.flush()?;
            Ok(true)
        }
        Cmd::Level { input, out, dot } => {
            let (g, model) = read_graph(&input)?;
            let (lv, report) = level(&g);
            eprintln!("{}", report.summary());
            match model {
                Some(m) => {
                    write_json(&ModelFile { graph: lv.to_spec(), params: m.params, target: m.target }, out.as_deref())?
                }
                None => write_json(&lv.to_spec(), out.as_deref())?,
            }
            if let Some(p) = dot {
                fs::write(p, to_dot(&lv))?;
            }
            Ok(true)
        }
        Cmd::GradCheck { input, step, out } => {
            let (g, model) = read_graph(&input)?;
            let m = model.ok_or_else(|| Error::BadSpec("grad-check needs a model file with parameters".into()))?;
            let gc = grad_check(&g, &m.params, m.target, step)?;
            gc.write_csv(sink(out.as_deref())?)?;
            eprintln!("max relative error {:e}", gc.max_rel_error);
            Ok(gc.max_rel_error < GRAD_CHECK_TOLERANCE)
        }
        Cmd::Equiv(args) => {
            let cfg = args.resolve(ExperimentConfig::default())?;
            emit_suite(&run_equivalence_suite(&cfg)?, &cfg)
        }
        Cmd::Ablate(args) => {
            let cfg = args.resolve(ExperimentConfig::default())?;
            emit_suite(&run_ablation_suite(&cfg)?, &cfg)
        }
        Cmd::Bench(args) => {
            let cfg = args.resolve(ExperimentConfig::bench_default())?;
            let res = run_benchmark(&cfg)?;
            let mut w = sink(cfg.output.as_deref())?;
            match cfg.format {
                OutputFormat::Csv => res.write_csv(&mut w)?,
                OutputFormat::Json => res.write_json(&mut w)?,
            }
            w.flush()?;
            for (a, b) in res.il_over_zil.iter().zip(&res.zil_over_bp) {
                eprintln!("IL/Z-IL {a:.2}x, Z-IL/BP {b:.2}x");
            }
            if !res.ratios_hold() {
                eprintln!("warning: timing ratios outside the expected range");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
