//! The built-in oracle checks, as run by `effdiff validate`.

use effdiff::validation::run_validation;
use effdiff::Ensemble;

fn main() -> effdiff::Result<()> {
    for c in run_validation(&Ensemble::default())? {
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    Ok(())
}
