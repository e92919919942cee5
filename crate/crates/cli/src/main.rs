use std::path::PathBuf;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, Command};
use fcms_cli::config::KEYS;
use fcms_cli::run::EXIT_CONFIG;
use fcms_cli::{run, RunConfig, Subcommand};

fn command() -> Command {
    let mut cmd = Command::new("fcms")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Feedback-coupled memory system simulator")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in Subcommand::ALL {
        let mut sc = Command::new(sub.name()).about(sub.about()).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key = value file applied before flags")
                .value_parser(clap::value_parser!(PathBuf)),
        );
        for (key, default, help) in KEYS {
            sc = sc.arg(
                Arg::new(*key)
                    .long(key.replace('_', "-"))
                    .value_name("VALUE")
                    .help(format!("{help} [default: {default}]"))
                    .action(ArgAction::Set),
            );
        }
        cmd = cmd.subcommand(sc);
    }
    cmd
}

fn main() -> ExitCode {
    let matches = command().get_matches();
    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let sub: Subcommand = name.parse().expect("registered subcommand");

    let overrides: Vec<(String, String)> = KEYS
        .iter()
        .filter(|(key, _, _)| sub_matches.value_source(key) == Some(ValueSource::CommandLine))
        .filter_map(|(key, _, _)| {
            sub_matches
                .get_one::<String>(key)
                .map(|v| (key.to_string(), v.clone()))
        })
        .collect();
    let file = sub_matches.get_one::<PathBuf>("config");

    let cfg = match RunConfig::load(file.map(PathBuf::as_path), &overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("fcms: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(sub, &cfg) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.unexpected_divergence {
                eprintln!(
                    "fcms: trajectory diverged at step {}",
                    outcome.metadata.diverged_at.unwrap_or_default()
                );
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("fcms: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
