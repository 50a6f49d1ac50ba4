//! A velocity field given as a text description of its split terms.

use effdiff::fields::parse_field_description;
use effdiff::runner::run_simulation_with_field;
use effdiff::{Ensemble, ExperimentConfig};

const CAT_EYE: &str = "
name = cat-eye
term d = 0, 1  e = 1, 0  profile = sin
term d = 1, 0  e = 0, 1  profile = sin
term d = -0.5, 0.5  e = 1, 1  profile = cos
";

fn main() -> effdiff::Result<()> {
    let field = parse_field_description(CAT_EYE)?;
    println!("{} with {} terms, v(1, 2) = {:?}", field.name(), field.n_terms(), field.eval_velocity(&[1.0, 2.0])?);
    let cfg = ExperimentConfig::new("cat-eye", 0.5, 0.01, 200.0, 200, 10);
    let est = run_simulation_with_field(&cfg, &field, &Ensemble::default())?.estimate;
    println!("K = {:.3?}", est.k.rows());
    Ok(())
}
