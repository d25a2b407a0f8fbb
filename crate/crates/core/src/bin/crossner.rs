use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches};
use crossner::pipeline::{self, Command, Settings, COMMANDS};

fn cli() -> clap::Command {
    let mut app = clap::Command::new("crossner")
        .about("Cross-lingual named entity recognition toolkit")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("verbose")
                .short('v')
                .long("verbose")
                .action(ArgAction::Count)
                .global(true)
                .help("More log output on standard error (repeatable)"),
        );
    for command in COMMANDS {
        let mut sub = clap::Command::new(command.name())
            .about(command.about())
            .arg(
                Arg::new("config")
                    .short('c')
                    .long("config")
                    .value_name("FILE")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("key = value configuration file; flags override it"),
            )
            .arg(
                Arg::new("set")
                    .short('s')
                    .long("set")
                    .value_name("KEY=VALUE")
                    .action(ArgAction::Append)
                    .help("Override any configuration key"),
            );
        for (key, help) in command.keys() {
            let mut arg = Arg::new(key).long(key).value_name("VALUE").help(help);
            if key.contains('_') {
                arg = arg.alias(key.replace('_', "-"));
            }
            sub = sub.arg(arg);
        }
        app = app.subcommand(sub);
    }
    app
}

fn settings(command: Command, m: &ArgMatches) -> crossner::Result<Settings> {
    let mut s = match m.get_one::<PathBuf>("config") {
        Some(p) => Settings::read(p)?,
        None => Settings::new(),
    };
    if let Some(sets) = m.get_many::<String>("set") {
        for a in sets {
            s.apply(a)?;
        }
    }
    for (key, _) in command.keys() {
        if let Some(v) = m.get_one::<String>(key) {
            s.set(key, v);
        }
    }
    Ok(s)
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match matches.get_count("verbose") {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let command: Command = name.parse().expect("registered subcommand");
    let result = settings(command, sub).and_then(|s| {
        pipeline::configure_workers(&s)?;
        pipeline::run(command, &s)
    });
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
