//! Every training loss evaluated on a structure and a perturbed copy.

use protgen::cli::loss_report;
use protgen::geom3::RigidTransform;
use protgen::losses::FapeConfig;
use protgen::synthetic;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = synthetic::random_complex(&[20, 14], &mut rng);

    let mut moved = truth.clone();
    moved.transform(&RigidTransform::random(&mut rng, 15.0));
    let other = synthetic::random_complex(&[20, 14], &mut rng);

    let cfg = FapeConfig::default();
    let cases = [("identical", &truth), ("rigidly moved", &moved), ("unrelated", &other)];
    let reports = cases.iter().map(|(_, c)| loss_report(c, &truth, &cfg, 0)).collect::<Result<Vec<_>, _>>().map_err(|e| e.message)?;
    print!("{:<14}", "term");
    for (name, _) in &cases {
        print!("{name:>16}");
    }
    println!();
    for row in 0..reports[0].len() {
        print!("{:<14}", reports[0][row].0);
        for r in &reports {
            match r[row].1 {
                Some(v) => print!("{v:>16.6}"),
                None => print!("{:>16}", "n/a"),
            }
        }
        println!();
    }
    Ok(())
}
