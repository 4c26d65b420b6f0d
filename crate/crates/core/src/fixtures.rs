//! The bundled two-by-three worked example.

use crate::instance::Instance;
use crate::model::{GroundTruth, PerturbedProblem};

/// Text of the bundled fixture instance.
pub const WORKED_EXAMPLE: &str = include_str!("../fixtures/worked_example.txt");

/// Ground truth and perturbed problem of the bundled example.
pub fn worked_example() -> (GroundTruth, PerturbedProblem) {
    let inst = Instance::parse(WORKED_EXAMPLE).expect("bundled fixture parses");
    (inst.truth.expect("fixture carries the truth"), inst.problem)
}
