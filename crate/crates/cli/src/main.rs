//! `graphsig` command-line driver.
//!
//! Every stage reads the same JSON config; flags given on the command line
//! take precedence over it. Exit codes: 0 success, 1 usage or config error,
//! 2 data error, 3 numerical error, 4 verification failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use graphsig::graph::DisconnectedPolicy;
use graphsig::io::{read_graph, read_signal, write_sampling, write_signal, write_spectrum, SamplingMeta};
use graphsig::pipeline::{cmd_experiment, cmd_features, cmd_graph, cmd_solve, cmd_verify, PipelineConfig};
use graphsig::sampling::{sample_uniform, PuyParams, RecoveryOperator, SamplingSet};
use graphsig::sobolev::{SolverMethod, SolverOptions};
use graphsig::spectral::eigendecompose;
use graphsig::synthetic::{write_dataset, SyntheticOptions};
use graphsig::verify::VerifyOptions;
use graphsig::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "graphsig", version, about = "Background/foreground classification of video instances by graph signal recovery")]
struct Cli {
    /// Work directory for stage outputs; overrides the config value.
    #[arg(long, global = true, env = "GRAPHSIG_WORKDIR")]
    workdir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract instance features into <workdir>/features.bin.
    ///
    /// Instances on a sequence's first frame have no predecessor for
    /// optical flow; they are skipped and listed in skipped_masks.txt.
    Features {
        #[arg(long)]
        config: PathBuf,
    },
    /// Build the k-NN instance graph into <workdir>/graph.txt.
    ///
    /// The graph file holds a `# nodes=N` header and one `i j w` line per
    /// undirected edge. graph_report.json records σ, the edge count and any
    /// bridging edges added to connect components.
    Graph {
        #[arg(long)]
        config: PathBuf,
        /// Neighbour count; capped at N-1.
        #[arg(long)]
        k: Option<usize>,
        /// Fail instead of bridging a disconnected graph.
        #[arg(long)]
        no_connect: bool,
    },
    /// Recover class scores on every node from a partial labelling.
    ///
    /// Labels are a CSV with columns node_id,class[,sampled]. Node ids are
    /// 0-based indices unless a feature file supplies named ids. The output
    /// CSV holds node_id, one score column per class and the decided class.
    Solve {
        /// Takes solver settings and default file locations from this config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Graph file; defaults to <workdir>/graph.txt with --config.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        labels: PathBuf,
        /// Feature file whose node ids name the label rows.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run the cross-validation experiment and write results, summary and
    /// best-density CSVs to the work directory.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Master seed for every trial.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated sampling densities in (0, 1].
        #[arg(long, value_delimiter = ',')]
        densities: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Check the recovery, conditioning, eigenvalue, solver, labelling and
    /// metric properties on generated instances.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100)]
        recovery_instances: usize,
        #[arg(long, default_value_t = 200)]
        perturbation_instances: usize,
        /// Break the symmetry of one perturbation matrix; the run must fail.
        #[arg(long)]
        inject_asymmetric_psi: bool,
    },
    /// Write the Laplacian spectrum of a graph as index,lambda[,u0..] CSV.
    Spectral {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Append eigenvector entries to each row.
        #[arg(long)]
        vectors: bool,
    },
    /// Draw ceil(density*N) nodes without replacement.
    Sample {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a scalar signal from its values on a node subset.
    ///
    /// The input is a node_id,value CSV listing only the sampled nodes.
    Recover {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        signal: PathBuf,
        #[arg(long, value_enum, default_value_t = RecoverMethod::Chen)]
        method: RecoverMethod,
        /// Bandwidth for the spectral methods.
        #[arg(long)]
        rho: Option<usize>,
        /// Fidelity weight for the regularized method.
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a generated two-sequence dataset and a config for it.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        frames: usize,
    },
}

#[derive(Args, Debug, Default)]
struct SolverArgs {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Relative residual tolerance of the iterative paths.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl SolverArgs {
    fn apply(&self, opts: &mut SolverOptions) {
        if let Some(e) = self.epsilon {
            opts.epsilon = e;
        }
        if let Some(b) = self.beta {
            opts.beta = b;
        }
        if let Some(m) = self.method {
            opts.method = m.into();
        }
        if let Some(t) = self.tol {
            opts.tol = t;
        }
        if let Some(m) = self.max_iter {
            opts.max_iter = m;
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Closed,
    Iterative,
    Reduced,
    Auto,
}

impl From<MethodArg> for SolverMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Closed => SolverMethod::Closed,
            MethodArg::Iterative => SolverMethod::Iterative,
            MethodArg::Reduced => SolverMethod::Reduced,
            MethodArg::Auto => SolverMethod::Auto,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RecoverMethod {
    /// Exact recovery on the leading eigenvectors.
    Chen,
    /// Least squares on the leading eigenvectors.
    Lsq,
    /// Fidelity plus Laplacian smoothness.
    Puy,
}

fn load_config(path: &Path, workdir: &Option<PathBuf>) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(w) = workdir {
        cfg.workdir = w.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Features { config } => {
            let cfg = load_config(&config, &cli.workdir)?;
            let s = cmd_features(&cfg)?;
            println!("features: {} nodes x {} dims -> {}", s.rows, s.cols, s.path.display());
            if !s.skipped.is_empty() {
                println!("skipped {} first-frame masks", s.skipped.len());
            }
        }
        Command::Graph { config, k, no_connect } => {
            let mut cfg = load_config(&config, &cli.workdir)?;
            if let Some(k) = k {
                cfg.graph.k = k;
            }
            if no_connect {
                cfg.graph.disconnected = DisconnectedPolicy::Error;
            }
            cfg.validate()?;
            let s = cmd_graph(&cfg)?;
            println!(
                "graph: {} nodes, {} edges, k={}, sigma={:.6} -> {}",
                s.nodes,
                s.edges,
                s.k,
                s.bandwidth.sigma,
                s.path.display()
            );
            if !s.bridges.is_empty() {
                println!("joined {} components with {} bridging edges", s.components_before, s.bridges.len());
            }
        }
        Command::Solve { config, graph, labels, features, out, solver } => {
            let cfg = config.as_deref().map(|c| load_config(c, &cli.workdir)).transpose()?;
            let mut opts = cfg.as_ref().map(|c| c.solver).unwrap_or_default();
            solver.apply(&mut opts);
            opts.params().validate()?;
            let graph = match (graph, &cfg) {
                (Some(g), _) => g,
                (None, Some(c)) => c.graph_path(),
                (None, None) => return Err(Error::Config("--graph is required without --config".into())),
            };
            let features = features.or_else(|| cfg.as_ref().map(|c| c.features_path()).filter(|p| p.exists()));
            let outcome = cmd_solve(&opts, &graph, &labels, features.as_deref(), &out)?;
            println!("solve: {:?} on {} nodes -> {}", outcome.method, outcome.recovered.labels.len(), out.display());
        }
        Command::Experiment { config, seed, densities, trials, solver } => {
            let mut cfg = load_config(&config, &cli.workdir)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = densities {
                cfg.plan.densities = d;
            }
            if let Some(t) = trials {
                cfg.plan.trials_per_density = t;
            }
            solver.apply(&mut cfg.solver);
            cfg.validate()?;
            let out = cmd_experiment(&cfg)?;
            println!("experiment: {} nodes, {} labeled, {} trials", out.nodes, out.labeled, out.report.trials.len());
            for s in out.report.summary() {
                println!("{} density={} F={:.4}", s.sequence, s.density, s.mean_f_measure);
            }
            for b in out.report.best() {
                println!("best {} density={} F={:.4}", b.sequence, b.density, b.mean_f_measure);
            }
            println!("results written to {}", cfg.workdir.display());
        }
        Command::Verify { config, seed, recovery_instances, perturbation_instances, inject_asymmetric_psi } => {
            let cfg_seed = match &config {
                Some(c) => load_config(c, &cli.workdir)?.seed,
                None => 0,
            };
            let opts = VerifyOptions {
                seed: seed.unwrap_or(cfg_seed),
                recovery_instances,
                perturbation_instances,
                inject_asymmetric_psi,
            };
            cmd_verify(&opts, |results| {
                for r in results {
                    println!("{}", r.line());
                    for f in r.failures.iter().take(5) {
                        println!("    {f}");
                    }
                }
            })?;
        }
        Command::Spectral { graph, out, vectors } => {
            let g = read_graph(&graph)?;
            let basis = eigendecompose(&g.laplacian())?;
            write_spectrum(&out, &basis, vectors)?;
            println!("spectral: {} eigenvalues -> {}", basis.n(), out.display());
        }
        Command::Sample { nodes, density, seed, out } => {
            let s = sample_uniform(nodes, density, seed)?;
            write_sampling(&out, &s, &SamplingMeta { seed: Some(seed), density: Some(density) })?;
            println!("sample: {} of {} nodes -> {}", s.len(), nodes, out.display());
        }
        Command::Recover { graph, signal, method, rho, eta, out } => {
            let g = read_graph(&graph)?;
            let n = g.n_nodes();
            let values = read_signal(&signal, n, None)?;
            let (idx, y_s): (Vec<usize>, Vec<f64>) =
                values.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).unzip();
            let s = SamplingSet::new(idx, n)?;
            let l = g.laplacian();
            let rho = rho.unwrap_or(s.len());
            let (op, basis) = match method {
                RecoverMethod::Chen => (RecoveryOperator::ChenExact { rho }, Some(eigendecompose(&l)?)),
                RecoverMethod::Lsq => (RecoveryOperator::LeastSquares { rho }, Some(eigendecompose(&l)?)),
                RecoverMethod::Puy => (RecoveryOperator::PuyRegularized(PuyParams::new(eta)), None),
            };
            let f = op.recover(&l, basis.as_ref(), &s, &y_s)?;
            write_signal(&out, &f, None)?;
            println!("recover: {} samples -> {} nodes -> {}", s.len(), n, out.display());
        }
        Command::Synth { out, seed, frames } => {
            let opts = SyntheticOptions { seed, frames, ..Default::default() };
            let cfg = write_dataset(&out, &opts)?;
            println!("synthetic dataset -> {}", cfg.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    info!("{:?}", cli.command);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
