//! Plant and relay parameters, the hysteron relay, the play-type backlash
//! operator and the Coulomb friction law.
//!
//! Units are SI rotary throughout: rad, rad/s, N·m, kg·m².

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default stiction band (rad/s).
pub const DEFAULT_V_STICK: f64 = 1e-4;

/// Two-mass plant with backlash in the link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantParams {
    /// Motor inertia (kg·m²).
    #[serde(rename = "m")]
    pub motor_inertia: f64,
    /// Load inertia (kg·m²).
    #[serde(rename = "M")]
    pub load_inertia: f64,
    /// Motor viscous coefficient (N·m·s/rad).
    #[serde(rename = "d")]
    pub motor_damping: f64,
    /// Load viscous coefficient (N·m·s/rad).
    #[serde(rename = "D")]
    pub load_damping: f64,
    /// Motor Coulomb level (N·m).
    #[serde(rename = "f")]
    pub motor_coulomb: f64,
    /// Load Coulomb level (N·m).
    #[serde(rename = "F")]
    pub load_coulomb: f64,
    /// Half-gap (rad). `null` in JSON stands for an unbounded gap.
    #[serde(serialize_with = "serialize_half_gap", deserialize_with = "deserialize_half_gap")]
    pub beta: f64,
    /// Coefficient of restitution, 0 plastic .. 1 elastic.
    pub epsilon: f64,
    /// Stiction / contact-settling velocity band (rad/s).
    #[serde(default = "default_v_stick")]
    pub v_stick: f64,
}

fn default_v_stick() -> f64 {
    DEFAULT_V_STICK
}

fn serialize_half_gap<S: Serializer>(beta: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if beta.is_finite() {
        s.serialize_some(beta)
    } else {
        s.serialize_none()
    }
}

fn deserialize_half_gap<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl PlantParams {
    /// Two-inertia bench parameters with the motor and load Coulomb levels
    /// both set to 0.05 N·m and the nominal 19.05 mrad gap.
    pub fn table1() -> Self {
        Self {
            motor_inertia: 8.78e-4,
            load_inertia: 8.78e-4,
            motor_damping: 6.20e-2,
            load_damping: 3.60e-2,
            motor_coulomb: 0.05,
            load_coulomb: 0.05,
            beta: 0.019_05 / 2.0,
            epsilon: 1.0,
            v_stick: DEFAULT_V_STICK,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn lumped_inertia(&self) -> f64 {
        self.motor_inertia + self.load_inertia
    }

    pub fn lumped_damping(&self) -> f64 {
        self.motor_damping + self.load_damping
    }

    pub fn lumped_coulomb(&self) -> f64 {
        self.motor_coulomb + self.load_coulomb
    }

    pub fn validate(&self) -> Result<()> {
        positive("plant.m", self.motor_inertia)?;
        positive("plant.M", self.load_inertia)?;
        non_negative("plant.d", self.motor_damping)?;
        non_negative("plant.D", self.load_damping)?;
        non_negative("plant.f", self.motor_coulomb)?;
        non_negative("plant.F", self.load_coulomb)?;
        if self.beta.is_nan() || self.beta < 0.0 {
            return Err(Error::invalid("plant.beta", "must be >= 0 (null for unbounded)"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("plant.epsilon", "must lie in [0, 1]"));
        }
        positive("plant.v_stick", self.v_stick)?;
        Ok(())
    }
}

pub(crate) fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

pub(crate) fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and >= 0, got {v}")))
    }
}

/// One entry of the relay asymmetry schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSegment {
    /// Segment length (s).
    pub duration: f64,
    pub alpha_plus: f64,
    pub alpha_minus: f64,
}

/// Delayed relay (hysteron) with amplitude asymmetry.
///
/// The output is `+alpha_plus * h0` on the positive branch and
/// `-alpha_minus * h0` on the negative one. The schedule is cycled
/// indefinitely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelayConfig {
    /// Switching threshold (rad/s).
    pub e: f64,
    /// Base amplitude (N·m).
    pub h0: f64,
    pub schedule: Vec<ScheduleSegment>,
}

impl RelayConfig {
    /// Relay with a fixed asymmetry pair.
    pub fn constant(e: f64, h0: f64, alpha_plus: f64, alpha_minus: f64) -> Self {
        Self {
            e,
            h0,
            schedule: vec![ScheduleSegment {
                duration: 1.0,
                alpha_plus,
                alpha_minus,
            }],
        }
    }

    pub fn symmetric(e: f64, h: f64) -> Self {
        Self::constant(e, h, 1.0, 1.0)
    }

    /// Alternating `[a, 1]` / `[1, a]` schedule with equal segment lengths.
    pub fn alternating(e: f64, h0: f64, alpha: f64, segment: f64) -> Self {
        Self {
            e,
            h0,
            schedule: vec![
                ScheduleSegment {
                    duration: segment,
                    alpha_plus: alpha,
                    alpha_minus: 1.0,
                },
                ScheduleSegment {
                    duration: segment,
                    alpha_plus: 1.0,
                    alpha_minus: alpha,
                },
            ],
        }
    }

    pub fn cycle_length(&self) -> f64 {
        self.schedule.iter().map(|s| s.duration).sum()
    }

    /// Index into `schedule` of the segment active at time `t`.
    pub fn segment_index_at(&self, t: f64) -> usize {
        if self.schedule.len() == 1 {
            return 0;
        }
        let cycle = self.cycle_length();
        let mut rem = t.max(0.0) % cycle;
        for (i, seg) in self.schedule.iter().enumerate() {
            if rem < seg.duration {
                return i;
            }
            rem -= seg.duration;
        }
        self.schedule.len() - 1
    }

    /// Asymmetry pair `(alpha_plus, alpha_minus)` active at time `t`.
    pub fn alphas_at(&self, t: f64) -> (f64, f64) {
        let seg = self.schedule[self.segment_index_at(t)];
        (seg.alpha_plus, seg.alpha_minus)
    }

    pub fn validate(&self) -> Result<()> {
        positive("controller.e", self.e)?;
        positive("controller.h0", self.h0)?;
        if self.schedule.is_empty() {
            return Err(Error::invalid("controller.schedule", "must not be empty"));
        }
        for (i, seg) in self.schedule.iter().enumerate() {
            positive(&format!("controller.schedule[{i}].duration"), seg.duration)?;
            if !(seg.alpha_plus >= 1.0 && seg.alpha_plus.is_finite()) {
                return Err(Error::invalid(
                    &format!("controller.schedule[{i}].alpha_plus"),
                    "must be >= 1",
                ));
            }
            if !(seg.alpha_minus >= 1.0 && seg.alpha_minus.is_finite()) {
                return Err(Error::invalid(
                    &format!("controller.schedule[{i}].alpha_minus"),
                    "must be >= 1",
                ));
            }
        }
        Ok(())
    }
}

/// Committed branch of the hysteron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Positive,
    Negative,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Positive => 1.0,
            Branch::Negative => -1.0,
        }
    }
}

/// Hysteron memory: the last committed branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HysteronState {
    pub branch: Branch,
}

impl HysteronState {
    /// Initial state for input `z`. Inside the dead band `(-e, e)` the
    /// positive branch is taken.
    pub fn initial(z: f64, e: f64) -> Self {
        let branch = if z <= -e { Branch::Negative } else { Branch::Positive };
        Self { branch }
    }

    /// Advance the memory for input `z`. Thresholds are inclusive.
    pub fn advance(self, z: f64, e: f64) -> Self {
        let branch = if z >= e {
            Branch::Positive
        } else if z <= -e {
            Branch::Negative
        } else {
            self.branch
        };
        Self { branch }
    }

    /// Signed output for base amplitude `h0` and asymmetry pair.
    pub fn output(self, h0: f64, (alpha_plus, alpha_minus): (f64, f64)) -> f64 {
        match self.branch {
            Branch::Positive => alpha_plus * h0,
            Branch::Negative => -alpha_minus * h0,
        }
    }
}

/// One hysteron update: returns the new memory and the relay output (N·m).
pub fn hysteron_step(
    state: HysteronState,
    z: f64,
    cfg: &RelayConfig,
    active_alphas: (f64, f64),
) -> (HysteronState, f64) {
    let next = state.advance(z, cfg.e);
    (next, next.output(cfg.h0, active_alphas))
}

/// Play-type backlash: the load position follows the motor only when a gap
/// boundary is pushed.
pub fn play_step(x_l_prev: f64, x_m_prev: f64, x_m_new: f64, beta: f64) -> Result<f64> {
    let slack = 1e-12 * (1.0 + x_m_prev.abs().max(x_l_prev.abs()));
    if (x_m_prev - x_l_prev).abs() > beta + slack {
        return Err(Error::InconsistentState(format!(
            "|x_m - x_L| = {} exceeds half-gap {beta}",
            (x_m_prev - x_l_prev).abs()
        )));
    }
    Ok(play_clamp(x_l_prev, x_m_new, beta))
}

pub(crate) fn play_clamp(x_l: f64, x_m: f64, beta: f64) -> f64 {
    if beta.is_infinite() {
        x_l
    } else {
        x_l.clamp(x_m - beta, x_m + beta)
    }
}

/// Coulomb friction with a Karnopp stiction band.
///
/// Outside `|v| <= v_stick` the kinetic law `level * sign(v)` applies. Inside
/// the band the friction balances the applied torque up to `level`.
pub fn coulomb_force(v: f64, applied: f64, level: f64, v_stick: f64) -> f64 {
    if v.abs() > v_stick {
        level * v.signum()
    } else if applied == 0.0 {
        0.0
    } else {
        applied.abs().min(level) * applied.signum()
    }
}

/// Contact configuration of the backlash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactMode {
    /// Decoupled motion inside the gap.
    Gap,
    /// Motor pushes the load forward: `x_L = x_m - beta`.
    EngagedLow,
    /// Motor pushes the load backward: `x_L = x_m + beta`.
    EngagedHigh,
}

impl ContactMode {
    /// +1 for `EngagedLow`, -1 for `EngagedHigh`, 0 in the gap. Also the
    /// sign of `x_m - x_L` in contact.
    pub fn side(self) -> f64 {
        match self {
            ContactMode::Gap => 0.0,
            ContactMode::EngagedLow => 1.0,
            ContactMode::EngagedHigh => -1.0,
        }
    }

    pub fn is_engaged(self) -> bool {
        self != ContactMode::Gap
    }

    pub fn label(self) -> &'static str {
        match self {
            ContactMode::Gap => "gap",
            ContactMode::EngagedLow => "engaged_low",
            ContactMode::EngagedHigh => "engaged_high",
        }
    }
}

/// Mechanical state of the two-mass system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimState {
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub x_m: f64,
    #[serde(default)]
    pub v_m: f64,
    #[serde(default, rename = "x_L")]
    pub x_l: f64,
    #[serde(default, rename = "v_L")]
    pub v_l: f64,
    #[serde(default = "gap_mode")]
    pub mode: ContactMode,
}

fn gap_mode() -> ContactMode {
    ContactMode::Gap
}

impl Default for SimState {
    fn default() -> Self {
        Self {
            t: 0.0,
            x_m: 0.0,
            v_m: 0.0,
            x_l: 0.0,
            v_l: 0.0,
            mode: ContactMode::Gap,
        }
    }
}

impl SimState {
    pub fn at_rest(x_m: f64, x_l: f64) -> Self {
        Self {
            x_m,
            x_l,
            ..Self::default()
        }
    }

    /// Relative displacement `x_m - x_L`.
    pub fn delta(&self) -> f64 {
        self.x_m - self.x_l
    }

    pub fn is_finite(&self) -> bool {
        self.x_m.is_finite() && self.v_m.is_finite() && self.x_l.is_finite() && self.v_l.is_finite()
    }

    /// Check the mode/constraint invariants against `beta`.
    pub fn check_consistent(&self, beta: f64) -> Result<()> {
        if !self.is_finite() || !self.t.is_finite() {
            return Err(Error::InconsistentState("non-finite initial state".into()));
        }
        let scale = 1e-12 * (1.0 + self.x_m.abs().max(self.x_l.abs()));
        let delta = self.delta();
        match self.mode {
            ContactMode::Gap => {
                if delta.abs() > beta + scale {
                    return Err(Error::InconsistentState(format!(
                        "gap mode with |x_m - x_L| = {} > beta = {beta}",
                        delta.abs()
                    )));
                }
            }
            mode => {
                if !beta.is_finite() {
                    return Err(Error::InconsistentState("engaged mode requires a finite gap".into()));
                }
                if (delta - mode.side() * beta).abs() > scale {
                    return Err(Error::InconsistentState(format!(
                        "{} requires x_m - x_L = {}, got {delta}",
                        mode.label(),
                        mode.side() * beta
                    )));
                }
                if self.v_m != self.v_l {
                    return Err(Error::InconsistentState(
                        "engaged mode requires equal velocities".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const BETA: f64 = 0.009525;

    fn relay(e: f64, h0: f64) -> RelayConfig {
        RelayConfig::symmetric(e, h0)
    }

    #[test]
    fn hysteron_holds_inside_dead_band() {
        let cfg = relay(0.1, 0.1);
        let mut st = HysteronState {
            branch: Branch::Positive,
        };
        for i in 0..=99 {
            let z = -0.001 * i as f64;
            let (next, out) = hysteron_step(st, z, &cfg, (1.0, 1.0));
            assert_eq!(out, 0.1);
            st = next;
        }
    }

    #[test]
    fn hysteron_switches_at_threshold_with_asymmetric_amplitude() {
        let cfg = relay(0.1, 0.1);
        let st = HysteronState {
            branch: Branch::Positive,
        };
        let (next, out) = hysteron_step(st, -0.1, &cfg, (1.0, 2.0));
        assert_eq!(next.branch, Branch::Negative);
        assert!((out + 0.2).abs() < 1e-15);
    }

    #[test]
    fn hysteron_initial_state() {
        assert_eq!(HysteronState::initial(0.0, 0.1).branch, Branch::Positive);
        assert_eq!(HysteronState::initial(0.05, 0.1).branch, Branch::Positive);
        assert_eq!(HysteronState::initial(-0.05, 0.1).branch, Branch::Positive);
        assert_eq!(HysteronState::initial(-0.1, 0.1).branch, Branch::Negative);
        assert_eq!(HysteronState::initial(0.3, 0.1).branch, Branch::Positive);
    }

    #[test]
    fn play_inside_gap_and_boundary_push() {
        assert_eq!(play_step(0.0, 0.0, 0.005, BETA).unwrap(), 0.0);
        let x_l = play_step(0.0, 0.0, 0.02, BETA).unwrap();
        assert!((x_l - 0.010475).abs() < 1e-15);
        assert_eq!(play_step(0.003, 0.001, 0.001, BETA).unwrap(), 0.003);
    }

    #[test]
    fn play_rejects_inconsistent_state() {
        assert!(matches!(
            play_step(0.0, 0.02, 0.02, BETA),
            Err(Error::InconsistentState(_))
        ));
    }

    #[test]
    fn coulomb_branches() {
        assert_eq!(coulomb_force(1.0, 0.0, 0.05, 1e-4), 0.05);
        assert_eq!(coulomb_force(-1.0, 0.0, 0.05, 1e-4), -0.05);
        assert_eq!(coulomb_force(0.0, 0.03, 0.05, 1e-4), 0.03);
        assert_eq!(coulomb_force(0.0, 0.2, 0.05, 1e-4), 0.05);
        assert_eq!(coulomb_force(0.0, -0.2, 0.05, 1e-4), -0.05);
        assert_eq!(coulomb_force(0.0, 0.0, 0.05, 1e-4), 0.0);
    }

    #[test]
    fn schedule_lookup_cycles() {
        let cfg = RelayConfig::alternating(0.1, 0.12, 2.0, 5.0);
        assert_eq!(cfg.alphas_at(0.0), (2.0, 1.0));
        assert_eq!(cfg.alphas_at(4.999), (2.0, 1.0));
        assert_eq!(cfg.alphas_at(6.0), (1.0, 2.0));
        assert_eq!(cfg.alphas_at(12.0), (2.0, 1.0));
    }

    #[test]
    fn plant_validation() {
        assert!(PlantParams::table1().validate().is_ok());
        let mut p = PlantParams::table1();
        p.epsilon = 1.5;
        assert!(p.validate().is_err());
        p = PlantParams::table1();
        p.motor_inertia = 0.0;
        assert!(p.validate().is_err());
        assert!(PlantParams::table1().with_beta(f64::INFINITY).validate().is_ok());
    }

    #[test]
    fn unbounded_gap_round_trips_through_json() {
        let p = PlantParams::table1().with_beta(f64::INFINITY);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"beta\":null"));
        let back: PlantParams = serde_json::from_str(&s).unwrap();
        assert!(back.beta.is_infinite());
    }

    proptest! {
        #[test]
        fn hysteron_output_is_two_valued_and_rate_independent(
            zs in proptest::collection::vec(-0.5f64..0.5, 1..200),
            ap in 1.0f64..3.0, am in 1.0f64..3.0,
        ) {
            let cfg = relay(0.1, 0.1);
            let mut st = HysteronState::initial(zs[0], cfg.e);
            let mut switches = 0usize;
            let mut crossings = 0usize;
            let mut committed = st.branch;
            for &z in &zs {
                let (next, out) = hysteron_step(st, z, &cfg, (ap, am));
                prop_assert!(out == ap * 0.1 || out == -am * 0.1);
                if next.branch != st.branch { switches += 1; }
                let crossed = (z >= 0.1 && committed == Branch::Negative)
                    || (z <= -0.1 && committed == Branch::Positive);
                if crossed {
                    crossings += 1;
                    committed = if z >= 0.1 { Branch::Positive } else { Branch::Negative };
                }
                st = next;
            }
            prop_assert_eq!(switches, crossings);
            // Repeating every input sample (slower path) does not change the count.
            let mut st2 = HysteronState::initial(zs[0], cfg.e);
            let mut switches2 = 0usize;
            for &z in zs.iter().flat_map(|z| [z, z]) {
                let (next, _) = hysteron_step(st2, z, &cfg, (ap, am));
                if next.branch != st2.branch { switches2 += 1; }
                st2 = next;
            }
            prop_assert_eq!(switches, switches2);
        }

        #[test]
        fn play_is_non_expansive_and_bounded(
            x_l0 in -0.01f64..0.01, steps in proptest::collection::vec(-0.02f64..0.02, 1..100)
        ) {
            let mut x_m = x_l0;
            let mut x_l = x_l0;
            for dx in steps {
                let x_new = x_m + dx;
                let y = play_step(x_l, x_m, x_new, BETA).unwrap();
                prop_assert!((y - x_l).abs() <= dx.abs() + 1e-15);
                prop_assert!((x_new - y).abs() <= BETA + 1e-15);
                x_m = x_new;
                x_l = y;
            }
        }

        #[test]
        fn play_composes_on_monotone_segments(
            x_l0 in -0.009f64..0.009, a in 0.0f64..0.02, b in 0.0f64..0.02, down in any::<bool>()
        ) {
            let s = if down { -1.0 } else { 1.0 };
            let x_m0 = 0.0;
            let x_l0 = x_l0.clamp(-BETA, BETA);
            let mid = x_m0 + s * a;
            let end = mid + s * b;
            let two = play_step(play_step(x_l0, x_m0, mid, BETA).unwrap(), mid, end, BETA).unwrap();
            let one = play_step(x_l0, x_m0, end, BETA).unwrap();
            prop_assert!((two - one).abs() < 1e-15);
        }

        #[test]
        fn coulomb_bounded_and_opposes_motion(
            v in -1.0f64..1.0, applied in -1.0f64..1.0, level in 0.0f64..0.5
        ) {
            let fr = coulomb_force(v, applied, level, 1e-4);
            prop_assert!(fr.abs() <= level);
            if v.abs() > 1e-4 {
                prop_assert!(fr * v >= 0.0);
            }
        }
    }
}
