use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mackrl_harness::config::config_to_json;
use mackrl_harness::{
    cmd_oracle, cmd_sweep, cmd_train, cmd_verify, default_config, format_oracle, parse_values,
    HarnessError, Suite,
};

#[derive(Parser)]
#[command(
    name = "mackrl",
    version,
    about = "Train and check common-knowledge policy trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write its manifest, metric CSV and checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print exact optimal returns of each policy class.
    Oracle {
        #[arg(long, default_value = "matrix")]
        env: String,
        #[arg(long)]
        ck_fraction: f64,
    },
    /// Run invariant checks; exits nonzero if any fails.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
    },
    /// Print the default config of an environment and algorithm as JSON.
    Defaults {
        #[arg(long, default_value = "matrix")]
        env: String,
        #[arg(long, default_value = "mackrl")]
        algorithm: String,
    },
    /// Train one run per (value, seed) and summarise final returns.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted path into the config, or a field name that occurs once.
        #[arg(long)]
        param: String,
        /// Comma-separated values or a JSON array.
        #[arg(long)]
        values: String,
        /// Comma-separated seeds.
        #[arg(long, default_value = "0,1,2,3,4", value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let run = cmd_train(&config, seed, &out)?;
            println!(
                "{}: final evaluation return {:.6} after {} steps",
                run.run_id, run.final_return, run.env_steps
            );
        }
        Command::Oracle { env, ck_fraction } => {
            if env != "matrix" {
                return Err(HarnessError::Usage(format!(
                    "--env {env}: only the matrix game has an oracle"
                )));
            }
            print!("{}", format_oracle(ck_fraction, &cmd_oracle(ck_fraction)?));
        }
        Command::Verify { suite } => {
            if !cmd_verify(suite, std::io::stdout().lock())? {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Defaults { env, algorithm } => {
            println!("{}", config_to_json(&default_config(&env, &algorithm)?));
        }
        Command::Sweep {
            config,
            param,
            values,
            seeds,
            out,
        } => {
            let values = parse_values(&values)?;
            for p in cmd_sweep(&config, &param, &values, &seeds, &out)? {
                println!(
                    "{} = {}: mean {:.6} +- {:.6} (median {:.6}, {} seeds)",
                    p.param, p.value, p.mean, p.stderr, p.median, p.seeds
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
