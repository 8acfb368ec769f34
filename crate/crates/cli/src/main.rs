mod commands;
mod config;

use clap::Parser;
use config::{Cli, RunConfig};
use serde_json::json;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

fn write_manifest(dir: &Path, body: serde_json::Value) {
    if std::fs::create_dir_all(dir).is_ok() {
        let text = serde_json::to_string_pretty(&body).unwrap_or_default() + "\n";
        if let Err(e) = std::fs::write(dir.join("manifest.json"), text) {
            eprintln!("warning: could not write manifest: {e}");
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let versions = json!({ "lelab": env!("CARGO_PKG_VERSION") });
    let fallback_out = cli.global.out_dir();
    let config = cli.global.merged().and_then(|g| RunConfig::new(g, cli.command.clone()));
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            write_manifest(
                &fallback_out,
                json!({
                    "command": cli.command,
                    "versions": versions,
                    "status": "error",
                    "error": e.to_string(),
                    "exit_code": e.exit_code(),
                    "wall_time_s": start.elapsed().as_secs_f64(),
                }),
            );
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(t) = config.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("warning: thread pool already initialised: {e}");
        }
    }
    let result = commands::run(&config);
    let mut manifest = json!({
        "command": config.command,
        "config": config,
        "versions": versions,
        "threads": config.threads.unwrap_or_else(rayon::current_num_threads),
    });
    let code = match &result {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out.summary).unwrap_or_default());
            manifest["status"] = json!("ok");
            manifest["summary"] = out.summary.clone();
            manifest["outputs"] = json!(out.files);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            manifest["status"] = json!("error");
            manifest["error"] = json!(e.to_string());
            e.exit_code()
        }
    };
    manifest["exit_code"] = json!(code);
    manifest["wall_time_s"] = json!(start.elapsed().as_secs_f64());
    write_manifest(&config.out, manifest);
    ExitCode::from(code as u8)
}
