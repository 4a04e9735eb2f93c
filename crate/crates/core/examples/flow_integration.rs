//! Euler integration of the SE(3) flow toward a fixed target under the
//! linear and exponential rotation schedules.

use protgen::flowmatch::{euler_step, sample_prior, FrameSet, ScheduleKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let target = sample_prior(8, &mut rng, 5.0)?;
    let start = sample_prior(8, &mut rng, 10.0)?;
    let steps = 100;
    for sched in [ScheduleKind::Linear, ScheduleKind::Exponential { c: 10.0 }] {
        let mut x: FrameSet = start.clone();
        print!("{sched:?}: rotation gap");
        for k in 0..steps {
            if k % 25 == 0 {
                let gap: f64 = x.iter().zip(target.iter()).map(|(a, b)| a.rotation.angle_to(&b.rotation)).sum::<f64>() / 8.0;
                print!(" t={:.2}:{gap:.3}", k as f64 / steps as f64);
            }
            x = euler_step(&x, &target, k as f64 / steps as f64, 1.0 / steps as f64, sched)?;
        }
        let trans: f64 = x.iter().zip(target.iter()).map(|(a, b)| (a.translation - b.translation).norm()).fold(0.0, f64::max);
        println!("  final max translation error {trans:.2e}");
    }
    Ok(())
}
