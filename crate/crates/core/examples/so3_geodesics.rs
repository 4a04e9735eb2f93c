//! Rotations as tangent vectors: exp/log, geodesic interpolation and the
//! antipodal failure mode.

use protgen::geom3::{geodesic, so3_exp, so3_log, TangentVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let v = TangentVector::new(0.3, -1.1, 0.7);
    let r = so3_exp(&v)?;
    let back = so3_log(&r)?;
    println!("angle {:.6} rad, roundtrip error {:.2e}", r.angle(), (back.0 - v.0).norm());

    let start = so3_exp(&TangentVector::new(0.0, 0.0, 0.2))?;
    for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let mid = geodesic(&start, &r, s)?;
        println!("s={s:.2}  distance to start {:.4}  to end {:.4}", mid.angle_to(&start), mid.angle_to(&r));
    }

    // A half-turn has no unique logarithm.
    let flip = so3_exp(&TangentVector::new(std::f64::consts::PI, 0.0, 0.0))?;
    match so3_log(&flip) {
        Ok(_) => println!("unexpectedly resolved a half-turn"),
        Err(e) => println!("half-turn: {e}"),
    }
    Ok(())
}
