mod args;
mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use manifest::Outputs;

fn out_dir(cmd: &Command) -> PathBuf {
    match cmd {
        Command::Plan(a) => a.out.clone(),
        Command::Run(a) => a.out.clone().unwrap_or_else(|| a.plan_dir.join("run")),
        Command::Simulate(a) => a.out.clone(),
        Command::Fit(a) => a.out.clone(),
        Command::Effects(a) => a.out.clone(),
        Command::Permtest(a) => a.out.clone(),
        Command::Meta(a) => a.out.clone(),
        Command::Correlate(a) => a.out.clone(),
        Command::Report(a) => a.out.clone(),
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<PathBuf> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global()?;
    }
    let mut out = Outputs::new(&out_dir(&cli.command))?;
    match &cli.command {
        Command::Plan(a) => commands::plan(a, &mut out)?,
        Command::Run(a) => commands::run(a, cli.jobs, &mut out)?,
        Command::Simulate(a) => commands::simulate(a, &mut out)?,
        Command::Fit(a) => commands::fit(a, &mut out)?,
        Command::Effects(a) => commands::effects(a, &mut out)?,
        Command::Permtest(a) => commands::permtest(a, &mut out)?,
        Command::Meta(a) => commands::meta(a, &mut out)?,
        Command::Correlate(a) => commands::correlate(a, &mut out)?,
        Command::Report(a) => commands::report(a, &mut out)?,
    }
    out.finish(cli.command.name(), serde_json::to_value(&cli.command)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match dispatch(&cli) {
        Ok(manifest) => {
            log::info!("wrote {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = e
                .chain()
                .find_map(|c| c.downcast_ref::<fseval_core::Error>())
                .map_or("runtime", |c| c.kind());
            // Some errors already embed their source in the message.
            let mut message = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !message.contains(&cause) {
                    if !message.is_empty() {
                        message.push_str(": ");
                    }
                    message.push_str(&cause);
                }
            }
            let body = serde_json::json!({ "error": { "kind": kind, "message": message } });
            eprintln!("{body}");
            ExitCode::from(1)
        }
    }
}
