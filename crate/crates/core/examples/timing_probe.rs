use std::sync::Arc;
use std::time::Instant;
use rqm::datagen::{generate, GenConfig};
use rqm::oracle::HuberRegressionProblem;
use rqm::diagnostics as diag;

fn main() {
    let data = Arc::new(generate(&GenConfig::new(42, 2000, 10, 4)).unwrap());
    let p = HuberRegressionProblem::new(data, 2.0, 0.1, 0.0, 1).unwrap();
    let t0 = Instant::now();
    // budget 10_000 runs 20_001 evals; certification will fail, that's fine
    let r = diag::reference_solution(&p, 10_000);
    println!("20k iters in {:?} -> {:?}", t0.elapsed(), r.map(|x| x.objective).map_err(|e| e.to_string()));
    let t0 = Instant::now();
    let r = diag::certified_reference(&p, 10_000, 9);
    println!("certified (up to 5.12M iters) in {:?} -> {:?}", t0.elapsed(), r.map(|x| x.objective).map_err(|e| e.to_string()));
}
