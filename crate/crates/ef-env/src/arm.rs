//! Two-link arm kinematics in the unit square.

use crate::EnvError;

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * std::f64::consts::PI);
    if a <= -std::f64::consts::PI {
        a += 2.0 * std::f64::consts::PI;
    } else if a > std::f64::consts::PI {
        a -= 2.0 * std::f64::consts::PI;
    }
    a
}

/// Elbow and end-effector positions for joint angles (t1 absolute, t2
/// relative to the first link).
pub fn forward_kinematics(
    anchor: (f64, f64),
    lengths: (f64, f64),
    t1: f64,
    t2: f64,
) -> ((f64, f64), (f64, f64)) {
    let elbow = (anchor.0 + lengths.0 * t1.cos(), anchor.1 + lengths.0 * t1.sin());
    let tip = (
        elbow.0 + lengths.1 * (t1 + t2).cos(),
        elbow.1 + lengths.1 * (t1 + t2).sin(),
    );
    (elbow, tip)
}

/// Closed-form two-link inverse kinematics (elbow-up branch).
pub fn inverse_kinematics(
    anchor: (f64, f64),
    lengths: (f64, f64),
    target: (f64, f64),
) -> Result<(f64, f64), EnvError> {
    let dx = target.0 - anchor.0;
    let dy = target.1 - anchor.1;
    let d2 = dx * dx + dy * dy;
    let (l1, l2) = lengths;
    let c2 = (d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if !(-1.0..=1.0).contains(&c2) {
        return Err(EnvError::Unreachable(target.0, target.1));
    }
    let t2 = c2.acos();
    let t1 = dy.atan2(dx) - (l2 * t2.sin()).atan2(l1 + l2 * c2);
    Ok((wrap_angle(t1), wrap_angle(t2)))
}

pub fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}
