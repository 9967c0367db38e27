use std::fs;
use std::io::{self, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jtree::bench::{self, BenchSpec, Execution, NetworkSpec};
use jtree::incremental::build_by_edits;
use jtree::{io as jio, run_preset, session, verify, Error, PresetName};

#[derive(Parser)]
#[command(name = "jtree", version, about = "Build and check junction trees of belief networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a junction tree from a network file (`-` reads stdin)
    Build {
        network: PathBuf,
        #[arg(long, default_value = "E")]
        preset: PresetName,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the trace as JSON lines; it replays from an empty session
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the resulting graph file
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Write a Graphviz rendering
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Print the run report as JSON instead of text
        #[arg(long)]
        json: bool,
    },
    /// Check a graph file; exits nonzero if it is not a junction tree
    Check {
        graph: PathBuf,
        /// Also require clusters to be the maximal cliques of a chordal graph
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        json: bool,
    },
    /// Run a benchmark spec file and print the results table
    Bench {
        spec: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Generate a random network
    Gen {
        /// Read the network spec from a JSON file instead of the flags
        #[arg(long, conflicts_with_all = ["variables", "arcs"])]
        spec: Option<PathBuf>,
        #[arg(long, short = 'n', default_value_t = 25)]
        variables: usize,
        #[arg(long, short = 'm', default_value_t = 45)]
        arcs: usize,
        #[arg(long, default_value_t = 2)]
        card_min: u32,
        #[arg(long, default_value_t = 4)]
        card_max: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Render a graph file as Graphviz
    Dot { graph: PathBuf },
    /// Serve the session protocol on stdio, or on a TCP address
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
}

fn read(path: &Path) -> Result<String, Error> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

fn write(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn build(
    network: &Path,
    preset: PresetName,
    seed: u64,
    trace: Option<&Path>,
    output: Option<&Path>,
    dot: Option<&Path>,
    json: bool,
) -> Result<ExitCode, Error> {
    let net = jio::parse_network(&read(network)?)?;
    let (g, report) = if preset.is_incremental() {
        let run = bench::incremental_build(&net, preset, seed)?;
        let r = serde_json::json!({ "preset": preset, "seed": seed, "cost": run.cost.to_string(), "restores": run.restores });
        (run.graph, r)
    } else {
        let mut g = build_by_edits(&net)?;
        let r = run_preset(&mut g, &preset.preset(), seed)?;
        (g, serde_json::to_value(r)?)
    };
    let check = verify::check_junction_tree(&g);
    if let Some(p) = trace {
        write(Some(p), &jio::trace_to_string(g.trace()))?;
    }
    if let Some(p) = output {
        write(Some(p), &jio::serialize_graph(&g))?;
    }
    if let Some(p) = dot {
        write(Some(p), &jio::export_dot(&g))?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("preset {preset} seed {seed}");
        println!("cost {}", g.cost());
        println!("clusters {} edges {}", g.cluster_count(), g.edge_count());
    }
    if !check.pass {
        eprintln!("error: result is not a junction tree: {:?}", check.witnesses);
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn check(graph: &Path, strict: bool, json: bool) -> Result<ExitCode, Error> {
    let g = jio::parse_graph(&read(graph)?)?;
    let mut reports = vec![
        verify::check_family_property(&g),
        verify::check_path_property(&g),
        verify::check_separator_subsets(&g),
        verify::check_junction_tree(&g),
    ];
    if strict {
        reports.push(verify::check_chordal_embedding(&g));
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    } else {
        for r in &reports {
            println!("{} {}", if r.pass { "PASS" } else { "FAIL" }, r.property);
            for w in &r.witnesses {
                println!("  {w}");
            }
        }
        println!("cost {}", g.cost());
    }
    Ok(if reports.iter().all(|r| r.pass) { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Build { network, preset, seed, trace, output, dot, json } => {
            build(&network, preset, seed, trace.as_deref(), output.as_deref(), dot.as_deref(), json)
        }
        Command::Check { graph, strict, json } => check(&graph, strict, json),
        Command::Bench { spec, output, sequential } => {
            let spec: BenchSpec = serde_json::from_str(&read(&spec)?)?;
            let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
            write(output.as_deref(), &bench::report(&spec.run(exec)?)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen { spec, variables, arcs, card_min, card_max, seed, output } => {
            let spec = match spec {
                Some(p) => serde_json::from_str(&read(&p)?)?,
                None => NetworkSpec::new(variables, arcs, card_min, card_max, seed),
            };
            let net = bench::generate_random_network(&spec)?;
            write(output.as_deref(), &jio::serialize_network(&net))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Dot { graph } => {
            let g = jio::parse_graph(&read(&graph)?)?;
            write(None, &jio::export_dot(&g))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { listen: None } => {
            session::serve(io::stdin().lock(), io::stdout().lock())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { listen: Some(addr) } => {
            let listener = TcpListener::bind(&addr)?;
            eprintln!("listening on {}", listener.local_addr()?);
            session::serve_listener(listener)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

