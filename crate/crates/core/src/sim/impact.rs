/// Velocities of motor and load immediately after a backlash impact with
/// restitution `epsilon`. Momentum `m v_m + M v_L` is preserved and the
/// relative velocity reverses scaled by `epsilon`.
///
/// The load term of the motor velocity carries `(1 + epsilon)`; a
/// `(1 - epsilon)` factor there loses momentum whenever the load is moving.
pub fn post_impact_velocities(v_m: f64, v_l: f64, motor_inertia: f64, load_inertia: f64, epsilon: f64) -> (f64, f64) {
    let (m, big_m) = (motor_inertia, load_inertia);
    let total = m + big_m;
    let v_m_after = (v_l * (1.0 + epsilon) * big_m + v_m * (m - epsilon * big_m)) / total;
    let v_l_after = (v_l * (big_m - epsilon * m) + v_m * (1.0 + epsilon) * m) / total;
    (v_m_after, v_l_after)
}
