//! Parse a configuration document, run it and write summary.json and
//! series.csv to a temporary directory.

use effdiff::{parse_config, run_simulation, Ensemble};

const CONFIG: &str = "
model = inertial
field = taylor-green
sigma = 0.5
tau = 0.1
dt = 0.01
T = 100
paths = 100
seed = 42
snapshots = geometric:16
";

fn main() -> effdiff::Result<()> {
    let cfg = parse_config(CONFIG)?;
    let report = run_simulation(&cfg, &Ensemble::default())?;
    let out = std::env::temp_dir().join("effdiff-config-example");
    report.write_outputs(&out)?;
    println!("{}", serde_json::to_string_pretty(&report.summary_json())?);
    println!("written to {}", out.display());
    Ok(())
}
