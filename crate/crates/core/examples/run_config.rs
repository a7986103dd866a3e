// Drives the command runner from an inline TOML config, the same path the
// `fdi-grid` binary takes, and shows a rejected config.

use std::path::Path;

use fdi_grid::io::{error_record, parse_config_str, run_command, Command, Overrides};

const CONFIG: &str = r#"
[system]
preset = "default_10bus"

[episode]
seed = 3

[ppo]
total_env_steps = 1000
"#;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config_str(CONFIG, Path::new("."))?;
    let dir = tempfile::tempdir()?;
    let overrides = Overrides { out: Some(dir.path().to_path_buf()), ..Default::default() };

    for command in [Command::Equilibrium, Command::Simulate, Command::Bruteforce, Command::Train] {
        let report = run_command(command, &config, &overrides)?;
        println!("{}", report.to_record());
    }

    let bad = "[system]\npreset = \"default_10bus\"\nfoo = 1\n";
    match parse_config_str(bad, Path::new(".")) {
        Err(e) => println!("rejected: {}", error_record(None, &e)),
        Ok(_) => println!("bad config unexpectedly accepted"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("command runner failed");
}
