use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gaitkit::commands::{
    cmd_authenticate, cmd_enroll, cmd_eval, cmd_preprocess, cmd_synth, cmd_train_cnn, load_config,
};
use gaitkit::eval::Protocol;
use gaitkit::Result;

#[derive(Parser)]
#[command(name = "gaitkit", version, about = "Gait authentication from inertial recordings")]
struct Cli {
    /// Pipeline configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed for training and synthesis.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Use the accelerometer only.
    #[arg(long, global = true)]
    no_gyro: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic walks, one recording per subject and walk.
    Synth {
        /// Comma separated subject seeds.
        #[arg(long, value_delimiter = ',', required = true)]
        subjects: Vec<u64>,
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        #[arg(long, default_value_t = 1)]
        walks: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract normalized walking cycles into a dataset file.
    Preprocess {
        #[arg(required = true)]
        recordings: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Write the template match metric per recording into this directory.
        #[arg(long)]
        dump_phi: Option<PathBuf>,
    },
    /// Train the feature network on a cycle dataset.
    TrainCnn {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Enroll a target user against an impostor bank.
    Enroll {
        #[arg(long)]
        cnn: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        subject: Option<String>,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decide whether a recording belongs to the enrolled user.
    Authenticate {
        #[arg(long)]
        cnn: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        recording: PathBuf,
    },
    /// Run an evaluation protocol and print a CSV table.
    Eval {
        /// features, ncycles, gyro, osvm-grid, pca-sweep, enroll-size or sprt
        #[arg(long)]
        protocol: String,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        cnn: Option<PathBuf>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<String> {
    let force = cli.force;
    let cfg = || load_config(cli.config.as_deref(), cli.seed, cli.no_gyro);
    match cli.command {
        Command::Synth { subjects, duration, walks, out } => {
            cmd_synth(&subjects, walks, cli.seed.unwrap_or(0), duration, &out, force)
        }
        Command::Preprocess { recordings, out, dump_phi } => {
            cmd_preprocess(&recordings, &cfg()?, &out, dump_phi.as_deref(), force)
        }
        Command::TrainCnn { dataset, out } => cmd_train_cnn(&dataset, &cfg()?, &out, force),
        Command::Enroll { cnn, target, subject, bank, out } => {
            cmd_enroll(&target, subject.as_deref(), &cnn, &bank, &cfg()?, &out, force)
        }
        Command::Authenticate { cnn, profile, recording } => cmd_authenticate(&recording, &profile, &cnn, &cfg()?),
        Command::Eval { protocol, dataset, cnn, target, out } => {
            let protocol: Protocol = protocol.parse()?;
            cmd_eval(&dataset, protocol, cnn.as_deref(), target.as_deref(), &cfg()?, out.as_deref(), force)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
