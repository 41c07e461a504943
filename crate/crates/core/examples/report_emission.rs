//! Runs a small experiment from a TOML configuration and writes the report as
//! CSV and JSON, then reads both back.

use surrogate_newton::experiments::{
    emit_report, run_experiment, ConfigFile, ExperimentConfig, ExperimentReport, OutputFormat,
};

const CONFIG: &str = r#"
schema_version = 1
experiment = "concentration"
m = 40
q_grid = [2, 4, 8]
trials = 10
seed = 3
"#;

fn main() -> surrogate_newton::error::Result<()> {
    let cfg = ExperimentConfig::from_file(&ConfigFile::parse(CONFIG)?, None)?;
    let report = run_experiment(&cfg)?;
    let dir = std::env::temp_dir().join("surrogate-newton-example");
    std::fs::create_dir_all(&dir).map_err(|e| surrogate_newton::error::Error::io(&dir, e))?;

    let csv_path = dir.join("concentration.csv");
    let json_path = dir.join("concentration.json");
    emit_report(&report, OutputFormat::Csv, &csv_path)?;
    emit_report(&report, OutputFormat::Json, &json_path)?;
    print!("{}", report.to_csv_string()?);

    let text = std::fs::read_to_string(&json_path).map_err(|e| surrogate_newton::error::Error::io(&json_path, e))?;
    let back = ExperimentReport::parse_json(&text)?;
    println!("JSON round trip equal: {}", back == report);
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}
