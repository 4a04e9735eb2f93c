//! Masked-token corruption and iterative decoding from fully masked to a
//! complete sequence.

use protgen::seqflow::{corrupt_sequence, decode_step, DecodeConfig, Logits, Sequence};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let target: Sequence = "MKTAYIAKQRQISFVKSHFSRQLEERLGLIEVQ".parse()?;
    for t in [0.2, 0.5, 0.8] {
        println!("corrupted at t={t}: {}", corrupt_sequence(&target, t, &mut rng)?);
    }

    // A confident predictor: the target wins each position by 20 logits.
    let logits = Logits::peaked(&target, 20.0);
    let cfg = DecodeConfig::default();
    let mut seq = Sequence::masked(target.len());
    let steps = 10;
    for k in 0..steps {
        let (t, t_next) = (k as f64 / steps as f64, (k + 1) as f64 / steps as f64);
        seq = decode_step(&logits, None, t, t_next, &cfg, &mut rng)?.next;
        println!("t={t_next:.1}  {seq}");
    }
    assert_eq!(seq, target);
    Ok(())
}
