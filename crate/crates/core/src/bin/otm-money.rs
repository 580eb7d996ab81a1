use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use otm_money::banknote::{wire, Mint};
use otm_money::harness::{list_scenarios, run_scenario, HarnessError, ScenarioConfig};
use otm_money::qsim::{Party, QubitStore};

#[derive(Parser)]
#[command(name = "otm-money", version, about = "Quantum banknote simulator and protocol games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its JSON report.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        zeta: Option<usize>,
        #[arg(long)]
        xi: Option<usize>,
        #[arg(long)]
        n_otm: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        noise_p: Option<f64>,
        #[arg(long)]
        trials: Option<u64>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List scenario names.
    List,
    /// Mint one note and write its classical record.
    MintDemo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        zeta: usize,
        #[arg(long, default_value_t = 2)]
        xi: usize,
    },
    /// Pretty-print a serialized classical record.
    Inspect {
        file: PathBuf,
        #[arg(long, default_value_t = 128)]
        kappa_len: usize,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            seed,
            zeta,
            xi,
            n_otm,
            delta,
            noise_p,
            trials,
            out,
        } => {
            let mut config = ScenarioConfig::for_scenario(&scenario);
            if let Some(v) = seed {
                config.seed = v;
            }
            if let Some(v) = zeta {
                config.zeta = v;
            }
            if let Some(v) = xi {
                config.xi = v;
            }
            if let Some(v) = n_otm {
                config.n_otm = v;
            }
            if let Some(v) = delta {
                config.delta = v;
            }
            if let Some(v) = noise_p {
                config.noise_p = v;
            }
            config.trials = trials;
            run(&config, out)
        }
        Command::List => {
            for name in list_scenarios() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::MintDemo { out, seed, zeta, xi } => mint_demo(&out, seed, zeta, xi),
        Command::Inspect { file, kappa_len } => inspect(&file, kappa_len),
    }
}

fn run(config: &ScenarioConfig, out: Option<PathBuf>) -> ExitCode {
    let report = match run_scenario(config) {
        Ok(r) => r,
        Err(e @ (HarnessError::UnknownScenario(_) | HarnessError::InvalidConfig(_))) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let json = report.to_json();
    match out {
        Some(path) => {
            if let Err(e) = fs::write(&path, json + "\n") {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => println!("{json}"),
    }
    for a in report.failed_assertions() {
        eprintln!("assertion failed: {} ({})", a.name, a.detail);
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn mint_demo(out: &PathBuf, seed: u64, zeta: usize, xi: usize) -> ExitCode {
    let config = ScenarioConfig {
        zeta,
        xi,
        ..ScenarioConfig::default()
    };
    let params = config.note_params();
    let result = (|| -> Result<Vec<u8>, Box<dyn std::error::Error>> {
        let mut mint = Mint::with_capacity(&seed.to_be_bytes(), params.clone(), 1)?;
        let mut store = QubitStore::new(seed, config.noise_p)?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut note = mint.issue(&mut store, Party(1), &mut rng)?;
        let pk = mint.public_key();
        otm_money::banknote::verify(&mut store, Party(1), &mut note, params.xi, &pk, &mut rng);
        eprintln!("mint root {} depth {}", pk.root, pk.depth);
        Ok(note.to_wire())
    })();
    match result.and_then(|bytes| fs::write(out, bytes).map_err(Into::into)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn inspect(file: &PathBuf, kappa_len: usize) -> ExitCode {
    let bytes = match fs::read(file) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return ExitCode::from(1);
        }
    };
    let note = match wire::decode(&bytes, kappa_len) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let revealed: Vec<serde_json::Value> = note
        .revealed()
        .iter()
        .map(|(k, (bit, kappa))| {
            serde_json::json!({
                "index": k,
                "bit": u8::from(*bit),
                "kappa": hex::encode(kappa.as_bytes()),
            })
        })
        .collect();
    let summary = serde_json::json!({
        "bytes": bytes.len(),
        "note_id": note.note_id().to_hex(),
        "zeta": note.zeta(),
        "unopened": note.unopened().iter().collect::<Vec<_>>(),
        "revealed": revealed,
        "signature_indices": note
            .signatures()
            .iter()
            .map(|pair| [pair[0].index, pair[1].index])
            .collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("plain data"));
    ExitCode::SUCCESS
}
