use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use refab::exactdecomp::{count_decompositions, Infeasibility, DEFAULT_BUDGET};
use refab::gadgets::{anti_edge, fake_edge, search_absorber, verify_absorber, SearchBudget};
use refab::pipeline::{decompose, leftover_experiment, rows_to_csv, success_rate, PipelineConfig, Strategy};
use refab::refinery::export::export_refiner;
use refab::refinery::multi::build_multi_refiner;
use refab::refinery::omni::build_omni_absorber;
use refab::refinery::refinedown::refine_down_r2;
use refab::refinery::sparsify::edge_sparsify;
use refab::refinery::{multiplicity_reduction, verify_omni_absorber, verify_refiner, VerifyConfig};
use refab::rmh::{build_rmh, verify_rmh};
use refab::{find_decomposition, is_divisible, verify_decomposition, IidPool, MultiHypergraph, SearchOutcome, Vertex};

const AFTER_HELP: &str = "\
EXAMPLES:
    $ design decompose --n 13 --q 3 --strategy hybrid --seed 1 --emit k13.json
    Triangle decomposition of K_13, verified before it is written.

    $ design divcheck graph.jsonl --q 3
    Divisibility report of a JSON-lines hypergraph.

    $ design omni verify --in x.jsonl --n 60 --q 3
    Build an omni-absorber for x inside K_60 and check it over every divisible L.

    $ design experiment --n 21 --p 0.3 --trials 20 > leftover.csv

GRAPH FILES:
    One header line {\"n\":N,\"r\":R}, then one {\"iid\":I,\"verts\":[..]} per edge instance.

EXIT STATUS:
    0   success (for decompose: a verified decomposition)
    1   construction failed or a check did not pass
    2   the input is not divisible
    3   a search budget ran out

ENVIRONMENT:
    REFAB_CONFIG
        Path of a JSON pipeline configuration used when --config is not
        given. Missing fields take their defaults.
";

#[derive(Parser, Debug)]
#[command(name = "design", version, about = "Clique decompositions, gadgets, refiners and omni-absorbers")]
#[command(after_help = AFTER_HELP)]
struct Cli {
    /// Pipeline configuration (JSON)
    #[arg(long, global = true, env = "REFAB_CONFIG", value_name = "FILE")]
    config: Option<PathBuf>,

    /// Write the JSON result here instead of stdout
    #[arg(long, global = true, value_name = "FILE")]
    emit: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check K_q^r-divisibility of a graph file
    Divcheck {
        file: PathBuf,
        #[arg(long)]
        q: usize,
    },
    /// Exact clique decomposition by exact cover
    DecomposeExact {
        file: PathBuf,
        #[arg(long)]
        q: usize,
        /// Count decompositions instead of returning one
        #[arg(long)]
        count: bool,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
    /// Rainbow matching hypergraphs
    #[command(subcommand)]
    Rmh(RmhCommand),
    /// Anti-edge and fake-edge gadgets on the root {0, .., r-1}
    Gadget {
        kind: GadgetArg,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        r: usize,
    },
    /// Absorbers for a small graph L
    #[command(subcommand)]
    Absorber(AbsorberCommand),
    /// Refiners of a graph X
    Refiner {
        kind: RefinerArg,
        #[command(flatten)]
        input: RefinerInput,
    },
    /// Omni-absorbers of a simple graph X inside a complete host
    Omni {
        action: OmniArg,
        #[arg(long = "in", value_name = "X.jsonl")]
        input: PathBuf,
        #[arg(long)]
        q: usize,
        /// Vertex count of the complete host (defaults to 60)
        #[arg(long)]
        n: Option<u32>,
        /// Host graph file, instead of K_n
        #[arg(long, value_name = "FILE")]
        host: Option<PathBuf>,
    },
    /// Decompose K_n^r into K_q^r
    Decompose {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeated reserve-and-pack runs on K_n, as CSV
    Experiment {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 3)]
        q: usize,
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, default_value_t = 0.3)]
        p: f64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Subcommand, Debug)]
enum RmhCommand {
    Build {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        m: usize,
        /// Check every L ⊆ X as well
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Subcommand, Debug)]
enum AbsorberCommand {
    Search {
        file: PathBuf,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 12)]
        max_new: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GadgetArg {
    Anti,
    Fake,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RefinerArg {
    Mrl,
    Sparsify,
    Refinedown,
    Build,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OmniArg {
    Build,
    Verify,
}

#[derive(Args, Debug)]
struct RefinerInput {
    #[arg(long)]
    q: usize,
    #[arg(long = "in", value_name = "X.jsonl")]
    input: PathBuf,
    /// JSON list of vertices (defaults to every vertex)
    #[arg(long, value_name = "Y.json")]
    y: Option<PathBuf>,
}

struct Failure {
    code: u8,
    msg: String,
}

fn fail(code: u8, e: impl Display) -> Failure {
    Failure { code, msg: e.to_string() }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| fail(1, format!("{}: {e}", path.display())))
}

fn read_graph(path: &Path) -> Result<MultiHypergraph, Failure> {
    MultiHypergraph::parse(&read(path)?).map_err(|e| fail(1, format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, Failure> {
    match path {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| fail(1, format!("{}: {e}", p.display()))),
        None => Ok(PipelineConfig::default()),
    }
}

struct Out(Option<PathBuf>);

impl Out {
    fn json(&self, value: &impl Serialize) -> Outcome {
        let text = serde_json::to_string_pretty(value).map_err(|e| fail(1, e))?;
        self.text(&(text + "\n"))
    }

    fn text(&self, text: &str) -> Outcome {
        match &self.0 {
            Some(p) => std::fs::write(p, text).map_err(|e| fail(1, format!("{}: {e}", p.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let cfg = load_config(cli.config.as_deref())?;
    let out = Out(cli.emit);
    match cli.command {
        Command::Divcheck { file, q } => {
            let g = read_graph(&file)?;
            let rep = is_divisible(&g, q).map_err(|e| fail(1, e))?;
            out.json(&rep)?;
            if !rep.divisible {
                return Err(fail(2, "not divisible"));
            }
        }
        Command::DecomposeExact { file, q, count, budget } => {
            let g = read_graph(&file)?;
            if count {
                let c = count_decompositions(&g, q, budget, 100_000).map_err(|e| fail(1, e))?;
                out.json(&json!({ "count": c.count, "capped": c.capped }))?;
                if c.capped {
                    return Err(fail(3, format!("count stopped at the cap {budget}")));
                }
                return Ok(());
            }
            match find_decomposition(&g, q, budget).map_err(|e| fail(1, e))? {
                SearchOutcome::Found(d) => {
                    if !verify_decomposition(&g, q, &d, &g.iid_set()) {
                        return Err(fail(1, "solver output failed verification"));
                    }
                    out.json(&d.cliques)?;
                }
                SearchOutcome::Infeasible(Infeasibility::Divisibility(v)) => {
                    return Err(fail(
                        2,
                        format!("degree {} of {:?} is not a multiple of {}", v.degree, v.set, v.modulus),
                    ))
                }
                SearchOutcome::Infeasible(Infeasibility::Exhausted { nodes }) => {
                    return Err(fail(1, format!("no decomposition exists ({nodes} nodes)")))
                }
                SearchOutcome::Indeterminate { nodes } => {
                    return Err(fail(3, format!("budget exhausted after {nodes} nodes")))
                }
            }
        }
        Command::Rmh(RmhCommand::Build { q, m, verify }) => {
            let xs: Vec<Vertex> = (0..m as Vertex).collect();
            let inst = build_rmh(&xs, q, m as Vertex).map_err(|e| fail(1, e))?;
            let mut value = inst.to_json();
            if verify {
                let ok = verify_rmh(&inst, 20).map_err(|e| fail(1, e))?;
                value["verified"] = json!(ok);
                out.json(&value)?;
                if !ok {
                    return Err(fail(1, "matching check failed"));
                }
                return Ok(());
            }
            out.json(&value)?;
        }
        Command::Gadget { kind, q, r } => {
            let root: Vec<Vertex> = (0..r as Vertex).collect();
            let g = match kind {
                GadgetArg::Anti => anti_edge(&root, q, r as Vertex),
                GadgetArg::Fake => fake_edge(&root, q, r as Vertex),
            }
            .map_err(|e| fail(1, e))?;
            out.json(&g.to_json())?;
        }
        Command::Absorber(AbsorberCommand::Search { file, q, max_new }) => {
            let l = read_graph(&file)?;
            let budget = SearchBudget { max_new, ..cfg.omni.absorber.clone() };
            let found = search_absorber(&l, q, &budget).map_err(|e| match e {
                refab::gadgets::GadgetError::NotDivisible => fail(2, e),
                refab::gadgets::GadgetError::Indeterminate { .. } => fail(3, e),
                e => fail(1, e),
            })?;
            let mut value = found.gadget.to_json();
            value["extra_vertices"] = json!(found.extra_vertices);
            value["nodes"] = json!(found.nodes);
            value["verified"] = json!(verify_absorber(&l, &found.gadget, q));
            out.json(&value)?;
        }
        Command::Refiner { kind, input } => refiner(kind, &input, &cfg, &out)?,
        Command::Omni { action, input, q, n, host } => {
            let x = read_graph(&input)?;
            let g = match host {
                Some(p) => read_graph(&p)?,
                None => MultiHypergraph::complete(n.unwrap_or(60).max(x.n()), x.r()),
            };
            let built = build_omni_absorber(&g, &x, q, &cfg.omni).map_err(|e| fail(1, e))?;
            let vcfg = VerifyConfig::default();
            let certificate = export_refiner(built.omni.as_refiner(), &vcfg).map_err(|e| fail(1, e))?;
            let mut value = json!({ "audit": built.audit, "certificate": certificate });
            if let OmniArg::Verify = action {
                let rep = verify_omni_absorber(&built.omni, &vcfg);
                let ok = rep.ok;
                value["verify"] = json!(rep);
                out.json(&value)?;
                if !ok {
                    return Err(fail(1, "omni-absorber failed verification"));
                }
                return Ok(());
            }
            out.json(&value)?;
        }
        Command::Decompose { n, q, r, strategy, seed } => {
            let mut cfg = cfg;
            cfg.q = q.unwrap_or(cfg.q);
            cfg.r = r.unwrap_or(cfg.r);
            cfg.strategy = strategy.unwrap_or(cfg.strategy);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let g = MultiHypergraph::complete(n, cfg.r);
            let run = decompose(&g, cfg.q, &cfg).map_err(|e| fail(e.exit_code() as u8, e))?;
            let verified = verify_decomposition(&g, cfg.q, &run.decomposition, &g.iid_set());
            eprintln!("K_{n}^{}: {} blocks via {:?}, verified = {verified}", cfg.r, run.blocks().len(), run.route);
            if !verified {
                return Err(fail(1, "decomposition failed verification"));
            }
            if out.0.is_some() {
                out.json(&json!({ "n": n, "q": cfg.q, "r": cfg.r, "verified": verified, "run": run }))?;
            } else {
                Out(None).json(&run.blocks())?;
            }
        }
        Command::Experiment { n, q, r, p, trials, seed } => {
            let rows = leftover_experiment(n, q, r, p, trials, seed, &cfg).map_err(|e| fail(e.exit_code() as u8, e))?;
            out.text(&rows_to_csv(&rows).map_err(|e| fail(1, e))?)?;
            eprintln!("success rate {:.3} over {trials} trials", success_rate(&rows));
        }
    }
    Ok(())
}

fn refiner(kind: RefinerArg, input: &RefinerInput, cfg: &PipelineConfig, out: &Out) -> Outcome {
    let x = read_graph(&input.input)?;
    let y: BTreeSet<Vertex> = match &input.y {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| fail(1, format!("{}: {e}", p.display())))?,
        None => (0..x.n()).collect(),
    };
    let q = input.q;
    let mut pool = IidPool::after([&x]);
    let multi = &cfg.omni.multi;
    let (rf, audit) = match kind {
        RefinerArg::Mrl => (multiplicity_reduction(&x, q, &mut pool).map_err(|e| fail(1, e))?, json!(null)),
        RefinerArg::Sparsify => {
            let s = edge_sparsify(&x, &y, q, &multi.sparsify, &mut pool).map_err(|e| fail(1, e))?;
            (s.refiner, json!({ "audit": s.audit, "partition": s.partition }))
        }
        RefinerArg::Refinedown => {
            let d = refine_down_r2(&x, &y, q, &multi.refine_down, &mut pool).map_err(|e| fail(1, e))?;
            (d.refiner, json!(d.audit))
        }
        RefinerArg::Build => {
            let m = build_multi_refiner(&x, &y, q, multi, &mut pool).map_err(|e| fail(1, e))?;
            (m.refiner, json!(m.audit))
        }
    };
    let vcfg = VerifyConfig::default();
    let rep = verify_refiner(&rf, &vcfg);
    let certificate = export_refiner(&rf, &vcfg).map_err(|e| fail(1, e))?;
    let ok = rep.ok;
    out.json(&json!({ "audit": audit, "verify": rep, "certificate": certificate }))?;
    if !ok {
        return Err(fail(1, "refiner failed verification"));
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("design: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
