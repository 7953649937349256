//! Rigid-body quadrotor physics with a noisy, damped motor model.
//!
//! The vehicle is a "+"-configuration quadrotor: rotor 0 on +x, rotor 1 on
//! +y, rotor 2 on -x, rotor 3 on -y, all at `arm_length` from the center of
//! mass. Rotors 0 and 2 spin opposite to rotors 1 and 3, so differential
//! drag torque yaws the body. Each motor tracks its commanded speed through
//! a first-order lag with Gaussian speed noise.
//!
//! Integration is semi-implicit Euler at a fixed sub-step (default 1 ms)
//! below the 100 Hz control period.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Physical parameters of the simulated vehicle.
///
/// Defaults are Hummingbird-class nominals and can all be overridden from
/// the `[vehicle]` config section.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    /// Vehicle mass [kg].
    pub mass: f64,
    /// Diagonal of the body-frame inertia tensor [kg m^2].
    pub inertia_diag: Vector3<f64>,
    /// Rotor arm length [m].
    pub arm_length: f64,
    /// Thrust coefficient k_f [N s^2 / rad^2]; per-rotor thrust is k_f * w^2.
    pub thrust_coeff: f64,
    /// Yaw drag-torque coefficient k_m [N m s^2 / rad^2].
    pub torque_coeff: f64,
    /// Motor first-order lag time constant [s].
    pub motor_time_constant: f64,
    /// Std-dev of the Gaussian speed noise added per motor update [rad/s].
    pub motor_noise_std: f64,
    /// Linear drag force coefficient [N s / m].
    pub linear_drag_coeff: f64,
    /// Angular drag torque coefficient [N m s / rad].
    pub angular_drag_coeff: f64,
    /// Maximum motor speed [rad/s]; commands and responses clamp to [0, w_max].
    pub omega_max: f64,
    /// Gravitational acceleration [m/s^2], acting along world -z.
    pub gravity: f64,
    /// Integrator sub-step [s].
    pub substep_dt: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 0.68,
            inertia_diag: Vector3::new(7.0e-3, 7.0e-3, 1.2e-2),
            arm_length: 0.17,
            thrust_coeff: 8.54858e-6,
            torque_coeff: 1.6e-2 * 8.54858e-6,
            motor_time_constant: 0.05,
            motor_noise_std: 5.0,
            linear_drag_coeff: 0.1,
            angular_drag_coeff: 1.0e-4,
            omega_max: 838.0,
            gravity: 9.81,
            substep_dt: 1.0e-3,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.mass, "vehicle.mass"),
            (self.inertia_diag.x, "vehicle.inertia_x"),
            (self.inertia_diag.y, "vehicle.inertia_y"),
            (self.inertia_diag.z, "vehicle.inertia_z"),
            (self.motor_time_constant, "vehicle.motor_time_constant"),
            (self.omega_max, "vehicle.omega_max"),
            (self.thrust_coeff, "vehicle.thrust_coeff"),
            (self.substep_dt, "vehicle.substep_dt"),
        ];
        for (v, name) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Full kinematic/dynamic state of the vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodyState {
    /// Position [m], world frame.
    pub position: Vector3<f64>,
    /// Velocity [m/s], world frame.
    pub velocity: Vector3<f64>,
    /// Attitude quaternion, rotating body-frame vectors into the world frame.
    pub orientation: UnitQuaternion<f64>,
    /// Angular velocity [rad/s], body frame.
    pub angular_velocity: Vector3<f64>,
    /// Last computed linear acceleration [m/s^2], world frame.
    pub linear_accel: Vector3<f64>,
    /// Last computed angular acceleration [rad/s^2], body frame.
    pub angular_accel: Vector3<f64>,
    /// Actual motor speeds [rad/s].
    pub motor_speeds: [f64; 4],
    /// Simulation time [s].
    pub time: f64,
}

impl RigidBodyState {
    /// State at rest at `position` with identity attitude and stopped motors.
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
            angular_velocity: Vector3::zeros(),
            linear_accel: Vector3::zeros(),
            angular_accel: Vector3::zeros(),
            motor_speeds: [0.0; 4],
            time: 0.0,
        }
    }

    /// Roll, pitch, yaw extracted with the Z-Y-X (yaw-pitch-roll) convention.
    pub fn euler_angles(&self) -> (f64, f64, f64) {
        self.orientation.euler_angles()
    }

    /// Errors with the name of the first non-finite field, if any.
    pub fn check_finite(&self) -> Result<()> {
        let fields: [(&str, &[f64]); 7] = [
            ("position", self.position.as_slice()),
            ("velocity", self.velocity.as_slice()),
            ("orientation", self.orientation.as_ref().coords.as_slice()),
            ("angular_velocity", self.angular_velocity.as_slice()),
            ("linear_accel", self.linear_accel.as_slice()),
            ("angular_accel", self.angular_accel.as_slice()),
            ("motor_speeds", &self.motor_speeds),
        ];
        for (name, values) in fields {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("RigidBodyState.{name}")));
            }
        }
        if !self.time.is_finite() {
            return Err(Error::NonFinite("RigidBodyState.time".into()));
        }
        Ok(())
    }
}

/// Motor speed at which total thrust balances gravity: sqrt(m g / (4 k_f)).
pub fn hover_speed(params: &VehicleParams) -> f64 {
    (params.mass * params.gravity / (4.0 * params.thrust_coeff)).sqrt()
}

/// Advances the four motor speeds over `dt` toward `commanded`.
///
/// Applies the exact first-order lag solution with time constant
/// `motor_time_constant`, then adds zero-mean Gaussian speed noise and
/// clamps into [0, omega_max].
pub fn motor_response(
    commanded: &[f64; 4],
    current: &[f64; 4],
    params: &VehicleParams,
    dt: f64,
    rng: &mut impl Rng,
) -> Result<[f64; 4]> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::Invalid(format!("motor_response dt must be > 0, got {dt}")));
    }
    if commanded.iter().chain(current.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("motor_response input speeds".into()));
    }
    let decay = (-dt / params.motor_time_constant).exp();
    let noise = if params.motor_noise_std > 0.0 {
        Some(Normal::new(0.0, params.motor_noise_std).expect("noise std is finite"))
    } else {
        None
    };
    let mut out = [0.0; 4];
    for i in 0..4 {
        let cmd = commanded[i].clamp(0.0, params.omega_max);
        let mut w = cmd + (current[i] - cmd) * decay;
        if let Some(dist) = &noise {
            w += dist.sample(rng);
        }
        out[i] = w.clamp(0.0, params.omega_max);
    }
    Ok(out)
}

/// Body-frame thrust (along +z) and torque produced by the rotors.
fn body_wrench(motor_speeds: &[f64; 4], params: &VehicleParams) -> (f64, Vector3<f64>) {
    let w2 = [
        motor_speeds[0] * motor_speeds[0],
        motor_speeds[1] * motor_speeds[1],
        motor_speeds[2] * motor_speeds[2],
        motor_speeds[3] * motor_speeds[3],
    ];
    let kf = params.thrust_coeff;
    let thrust = kf * (w2[0] + w2[1] + w2[2] + w2[3]);
    let torque = Vector3::new(
        params.arm_length * kf * (w2[1] - w2[3]),
        params.arm_length * kf * (w2[2] - w2[0]),
        params.torque_coeff * (w2[0] - w2[1] + w2[2] - w2[3]),
    );
    (thrust, torque)
}

/// Integrates the state over `dt` under the commanded motor speeds.
///
/// Internally sub-steps at `params.substep_dt` with semi-implicit Euler,
/// running the motor lag, force/torque evaluation, and quaternion update at
/// every sub-step. The quaternion is renormalized each sub-step and the last
/// computed accelerations are recorded on the returned state.
pub fn step(
    state: &RigidBodyState,
    commanded: &[f64; 4],
    params: &VehicleParams,
    dt: f64,
    rng: &mut impl Rng,
) -> Result<RigidBodyState> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::Invalid(format!("dynamics step dt must be > 0, got {dt}")));
    }
    state.check_finite()?;
    let n_sub = (dt / params.substep_dt).round().max(1.0) as usize;
    let h = dt / n_sub as f64;

    let inv_mass = 1.0 / params.mass;
    let inertia = params.inertia_diag;
    let gravity = Vector3::new(0.0, 0.0, -params.gravity);

    let mut s = state.clone();
    for _ in 0..n_sub {
        s.motor_speeds = motor_response(commanded, &s.motor_speeds, params, h, rng)?;
        let (thrust, torque) = body_wrench(&s.motor_speeds, params);

        let thrust_world = s.orientation * Vector3::new(0.0, 0.0, thrust);
        let drag = params.linear_drag_coeff * s.velocity;
        let accel = (thrust_world - drag) * inv_mass + gravity;

        let omega = s.angular_velocity;
        let inertia_omega = Vector3::new(
            inertia.x * omega.x,
            inertia.y * omega.y,
            inertia.z * omega.z,
        );
        let gyro = omega.cross(&inertia_omega);
        let net_torque = torque - gyro - params.angular_drag_coeff * omega;
        let ang_accel = Vector3::new(
            net_torque.x / inertia.x,
            net_torque.y / inertia.y,
            net_torque.z / inertia.z,
        );

        // Semi-implicit: advance velocities first, then integrate poses with
        // the updated velocities.
        s.velocity += accel * h;
        s.position += s.velocity * h;
        s.angular_velocity += ang_accel * h;

        let q = s.orientation.as_ref();
        let omega_quat = Quaternion::from_parts(0.0, s.angular_velocity);
        let dq = (q * omega_quat) * (0.5 * h);
        s.orientation = UnitQuaternion::from_quaternion(q + dq);

        s.linear_accel = accel;
        s.angular_accel = ang_accel;
        s.time += h;
    }
    s.check_finite()?;
    Ok(s)
}
