use crate::scalar::Scalar;

/// Advances a vehicle one frame under constant acceleration.
///
/// Velocity never goes negative: a vehicle braking to a halt inside the frame
/// stops at the point where its speed reaches zero.
#[inline]
pub fn step_kinematics<T: Scalar>(x: T, v: T, a: T, dt: T) -> (T, T) {
    advance(x, v, a, dt, T::infinity())
}

/// Same as [`step_kinematics`] with an additional speed cap; a vehicle that
/// reaches `v_cap` inside the frame cruises at `v_cap` for the remainder.
pub fn advance<T: Scalar>(x: T, v: T, a: T, dt: T, v_cap: T) -> (T, T) {
    let zero = T::zero();
    let half = T::lit(0.5);
    let v_free = v + a * dt;
    if a < zero && v_free < zero {
        // halts at t* = -v / a
        (x - v * v / (a + a), zero)
    } else if a > zero && v_free > v_cap {
        let t_cap = ((v_cap - v) / a).max(zero);
        let x_cap = x + v * t_cap + half * a * t_cap * t_cap;
        (x_cap + v_cap * (dt - t_cap), v_cap)
    } else {
        (x + v * dt + half * a * dt * dt, v_free)
    }
}
