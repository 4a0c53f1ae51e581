use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coupler_gates::scenario::{self, load_scenario, resolve_device, KINDS};
use coupler_gates::Error;

#[derive(Parser)]
#[command(name = "coupler-gates", version, about = "Tunable-coupler CZ/iSWAP scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and write its artifacts.
    Run {
        scenario: PathBuf,
        /// Device file (default: the scenario's, then $COUPLER_GATES_DEVICE, then bundled).
        #[arg(long)]
        device: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for sweeps (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a scenario (and its device file) without computing anything.
    Validate {
        scenario: PathBuf,
        #[arg(long)]
        device: Option<PathBuf>,
    },
    /// List experiment kinds and the bundled example scenarios.
    ListScenarios,
}

const BUNDLED: [(&str, &str); 8] = [
    ("cz_chevron.json", include_str!("../scenarios/cz_chevron.json")),
    ("zz_scan.json", include_str!("../scenarios/zz_scan.json")),
    ("cz_leakage_scan.json", include_str!("../scenarios/cz_leakage_scan.json")),
    ("cz_tuneup.json", include_str!("../scenarios/cz_tuneup.json")),
    ("cz_qpt.json", include_str!("../scenarios/cz_qpt.json")),
    ("iswap_rb.json", include_str!("../scenarios/iswap_rb.json")),
    ("zz_free_search.json", include_str!("../scenarios/zz_free_search.json")),
    ("predistortion_check.json", include_str!("../scenarios/predistortion_check.json")),
];

fn fail(e: &Error) -> ExitCode {
    let body = serde_json::json!({
        "error": { "kind": e.kind(), "exit_code": e.exit_code(), "message": e.to_string() }
    });
    eprintln!("{body}");
    ExitCode::from(e.exit_code() as u8)
}

fn execute(cli: Cli) -> coupler_gates::Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            device,
            out,
            workers,
            seed,
        } => {
            let loaded = load_scenario(&scenario)?;
            let (dev, _) = resolve_device(device.as_deref(), &loaded)?;
            if let Some(n) = workers {
                if n == 0 {
                    return Err(Error::Argument("--workers must be at least 1".into()));
                }
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Error::Argument(e.to_string()))?;
            }
            let manifest = scenario::run(&loaded, &dev, &out, seed)?;
            println!(
                "ok: {} ({}) wrote {} files to {} in {:.1} s",
                loaded.scenario.name,
                loaded.scenario.experiment.kind(),
                manifest.outputs.len() + 1,
                out.display(),
                manifest.wall_clock_s
            );
        }
        Command::Validate { scenario, device } => {
            let loaded = load_scenario(&scenario)?;
            let (_, path) = resolve_device(device.as_deref(), &loaded)?;
            let report = serde_json::json!({
                "status": "ok",
                "scenario_sha256": loaded.sha256,
                "device": path.map(|p| p.display().to_string()),
                "resolved": loaded.scenario,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::ListScenarios => {
            println!("kinds:");
            for (k, d) in KINDS {
                println!("  {k:<20} {d}");
            }
            println!("bundled scenarios (scenarios/):");
            for (file, text) in BUNDLED {
                let s = scenario::Scenario::from_json(text)?;
                println!("  {file:<26} {:<20} {}", s.experiment.kind(), s.description);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
