//! Run configuration: a line-oriented `section.key = value` text format.
//!
//! Lines are either blank, `# comments`, `[section]` headers (setting the
//! prefix for following bare `key = value` lines), or fully qualified
//! `section.key = value` assignments. Every key has a default; unknown keys
//! are a hard error so typos never silently fall back.

use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::VehicleParams;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::hcm::HcmConfig;
use crate::icm::IcmConfig;
use crate::ppo::PpoConfig;

/// Which intrinsic-reward source the trainer wires in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Ppo,
    PpoIcm,
    PpoHcm,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Ppo => "ppo",
            Algorithm::PpoIcm => "ppo_icm",
            Algorithm::PpoHcm => "ppo_hcm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ppo" => Ok(Algorithm::Ppo),
            "ppo_icm" => Ok(Algorithm::PpoIcm),
            "ppo_hcm" => Ok(Algorithm::PpoHcm),
            other => Err(Error::Config(format!(
                "unknown algorithm `{other}` (expected ppo, ppo_icm, or ppo_hcm)"
            ))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Top-level run settings (`[run]` section).
#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub total_batches: usize,
    pub out_dir: String,
    /// Checkpoint every this many batches (a final checkpoint always lands).
    pub checkpoint_interval: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::PpoHcm,
            seed: 0,
            total_batches: 50,
            out_dir: "out".to_string(),
            checkpoint_interval: 10,
            grid_rows: 100,
            grid_cols: 100,
        }
    }
}

/// The full training/evaluation configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub run: RunSection,
    pub vehicle: VehicleParams,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub icm: IcmConfig,
    pub hcm: HcmConfig,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_contents(&text)
    }

    pub fn from_str_contents(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let full_key = if key.contains('.') || section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            cfg.set(&full_key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.env.validate()?;
        self.ppo.validate()?;
        self.icm.validate()?;
        self.hcm.validate()?;
        if self.run.total_batches == 0 || self.run.checkpoint_interval == 0 {
            return Err(Error::Config(
                "run.total_batches and run.checkpoint_interval must be > 0".into(),
            ));
        }
        if self.run.grid_rows == 0 || self.run.grid_cols == 0 {
            return Err(Error::Config("run.grid_rows and run.grid_cols must be > 0".into()));
        }
        Ok(())
    }

    /// Assigns one `section.key` from its string value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn f64v(key: &str, value: &str) -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("key `{key}`: expected a number, got `{value}`")))
        }
        fn usizev(key: &str, value: &str) -> Result<usize> {
            value.parse::<usize>().map_err(|_| {
                Error::Config(format!("key `{key}`: expected a non-negative integer, got `{value}`"))
            })
        }
        fn u64v(key: &str, value: &str) -> Result<u64> {
            value.parse::<u64>().map_err(|_| {
                Error::Config(format!("key `{key}`: expected a non-negative integer, got `{value}`"))
            })
        }
        fn boolv(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" | "1" => Ok(true),
                "false" | "0" => Ok(false),
                _ => Err(Error::Config(format!(
                    "key `{key}`: expected true/false, got `{value}`"
                ))),
            }
        }

        match key {
            // [run]
            "run.algorithm" => self.run.algorithm = Algorithm::parse(value)?,
            "run.seed" => self.run.seed = u64v(key, value)?,
            "run.total_batches" => self.run.total_batches = usizev(key, value)?,
            "run.out_dir" => self.run.out_dir = value.to_string(),
            "run.checkpoint_interval" => self.run.checkpoint_interval = usizev(key, value)?,
            "run.grid_rows" => self.run.grid_rows = usizev(key, value)?,
            "run.grid_cols" => self.run.grid_cols = usizev(key, value)?,

            // [vehicle]
            "vehicle.mass" => self.vehicle.mass = f64v(key, value)?,
            "vehicle.inertia_x" => self.vehicle.inertia_diag.x = f64v(key, value)?,
            "vehicle.inertia_y" => self.vehicle.inertia_diag.y = f64v(key, value)?,
            "vehicle.inertia_z" => self.vehicle.inertia_diag.z = f64v(key, value)?,
            "vehicle.arm_length" => self.vehicle.arm_length = f64v(key, value)?,
            "vehicle.thrust_coeff" => self.vehicle.thrust_coeff = f64v(key, value)?,
            "vehicle.torque_coeff" => self.vehicle.torque_coeff = f64v(key, value)?,
            "vehicle.motor_time_constant" => self.vehicle.motor_time_constant = f64v(key, value)?,
            "vehicle.motor_noise_std" => self.vehicle.motor_noise_std = f64v(key, value)?,
            "vehicle.linear_drag_coeff" => self.vehicle.linear_drag_coeff = f64v(key, value)?,
            "vehicle.angular_drag_coeff" => self.vehicle.angular_drag_coeff = f64v(key, value)?,
            "vehicle.omega_max" => self.vehicle.omega_max = f64v(key, value)?,
            "vehicle.gravity" => self.vehicle.gravity = f64v(key, value)?,
            "vehicle.substep_dt" => self.vehicle.substep_dt = f64v(key, value)?,

            // [env]
            "env.goal_x" => self.env.goal_position[0] = f64v(key, value)?,
            "env.goal_y" => self.env.goal_position[1] = f64v(key, value)?,
            "env.goal_z" => self.env.goal_position[2] = f64v(key, value)?,
            "env.goal_roll" => self.env.goal_roll = f64v(key, value)?,
            "env.goal_pitch" => self.env.goal_pitch = f64v(key, value)?,
            "env.x_max" => self.env.x_max = f64v(key, value)?,
            "env.y_max" => self.env.y_max = f64v(key, value)?,
            "env.z_max" => self.env.z_max = f64v(key, value)?,
            "env.obstacle_count" => self.env.obstacle_count = usizev(key, value)?,
            "env.obstacle_radius" => self.env.obstacle_radius = f64v(key, value)?,
            "env.obstacle_height" => self.env.obstacle_height = f64v(key, value)?,
            "env.collision_margin" => self.env.collision_margin = f64v(key, value)?,
            "env.alpha_p" => self.env.alpha_p = f64v(key, value)?,
            "env.alpha_a" => self.env.alpha_a = f64v(key, value)?,
            "env.alpha_flight" => self.env.alpha_flight = f64v(key, value)?,
            "env.alpha_yaw" => self.env.alpha_yaw = f64v(key, value)?,
            "env.alpha_nu" => self.env.alpha_nu = f64v(key, value)?,
            "env.alpha_omega" => self.env.alpha_omega = f64v(key, value)?,
            "env.crash_reward" => self.env.crash_reward = f64v(key, value)?,
            "env.max_flight_steps" => self.env.max_flight_steps = usizev(key, value)? as u32,
            "env.spawn_x" => self.env.spawn_position[0] = f64v(key, value)?,
            "env.spawn_y" => self.env.spawn_position[1] = f64v(key, value)?,
            "env.spawn_z" => self.env.spawn_position[2] = f64v(key, value)?,
            "env.init_position_range" => self.env.init_position_range = f64v(key, value)?,
            "env.init_attitude_range" => self.env.init_attitude_range = f64v(key, value)?,
            "env.crash_altitude" => self.env.crash_altitude = f64v(key, value)?,
            "env.control_dt" => self.env.control_dt = f64v(key, value)?,
            "env.corridor_padding" => self.env.corridor_padding = f64v(key, value)?,

            // [ppo]
            "ppo.batch_size" => self.ppo.batch_size = usizev(key, value)?,
            "ppo.minibatch_size" => self.ppo.minibatch_size = usizev(key, value)?,
            "ppo.epochs" => self.ppo.epochs = usizev(key, value)?,
            "ppo.gamma" => self.ppo.gamma = f64v(key, value)?,
            "ppo.lam" => self.ppo.lam = f64v(key, value)?,
            "ppo.clip_eps" => self.ppo.clip_eps = f64v(key, value)?,
            "ppo.c1" => self.ppo.c1 = f64v(key, value)?,
            "ppo.c2" => self.ppo.c2 = f64v(key, value)?,
            "ppo.lr_policy" => self.ppo.lr_policy = f64v(key, value)?,
            "ppo.lr_value_ext" => self.ppo.lr_value_ext = f64v(key, value)?,
            "ppo.lr_value_int" => self.ppo.lr_value_int = f64v(key, value)?,
            "ppo.standard_td" => self.ppo.standard_td = boolv(key, value)?,
            "ppo.hidden" => self.ppo.hidden = usizev(key, value)?,
            "ppo.init_log_std" => self.ppo.init_log_std = f64v(key, value)?,

            // [icm]
            "icm.beta" => self.icm.beta = f64v(key, value)?,
            "icm.eta" => self.icm.eta = f64v(key, value)?,
            "icm.hidden" => self.icm.hidden = usizev(key, value)?,
            "icm.lr" => self.icm.lr = f64v(key, value)?,
            "icm.epochs" => self.icm.epochs = usizev(key, value)?,
            "icm.minibatch" => self.icm.minibatch = usizev(key, value)?,

            // [hcm]
            "hcm.n" => self.hcm.n = usizev(key, value)?,
            "hcm.stride" => self.hcm.stride = usizev(key, value)?,
            "hcm.beta" => self.hcm.beta = f64v(key, value)?,
            "hcm.alpha_curiosity" => self.hcm.alpha_curiosity = f64v(key, value)?,
            "hcm.kappa" => self.hcm.kappa = f64v(key, value)?,
            "hcm.lr" => self.hcm.lr = f64v(key, value)?,
            "hcm.epochs" => self.hcm.epochs = usizev(key, value)?,
            "hcm.minibatch" => self.hcm.minibatch = usizev(key, value)?,
            "hcm.hidden" => self.hcm.hidden = usizev(key, value)?,
            "hcm.heads_ss" => self.hcm.heads_ss = usizev(key, value)?,
            "hcm.heads_sr" => self.hcm.heads_sr = usizev(key, value)?,

            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Renders the resolved configuration back out (written into the run
    /// directory for reproducibility).
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "algorithm = {}", self.run.algorithm);
        let _ = writeln!(s, "seed = {}", self.run.seed);
        let _ = writeln!(s, "total_batches = {}", self.run.total_batches);
        let _ = writeln!(s, "out_dir = {}", self.run.out_dir);
        let _ = writeln!(s, "checkpoint_interval = {}", self.run.checkpoint_interval);
        let _ = writeln!(s, "grid_rows = {}", self.run.grid_rows);
        let _ = writeln!(s, "grid_cols = {}", self.run.grid_cols);
        let _ = writeln!(s, "\n[vehicle]");
        let v = &self.vehicle;
        let _ = writeln!(s, "mass = {}", v.mass);
        let _ = writeln!(s, "inertia_x = {}", v.inertia_diag.x);
        let _ = writeln!(s, "inertia_y = {}", v.inertia_diag.y);
        let _ = writeln!(s, "inertia_z = {}", v.inertia_diag.z);
        let _ = writeln!(s, "arm_length = {}", v.arm_length);
        let _ = writeln!(s, "thrust_coeff = {}", v.thrust_coeff);
        let _ = writeln!(s, "torque_coeff = {}", v.torque_coeff);
        let _ = writeln!(s, "motor_time_constant = {}", v.motor_time_constant);
        let _ = writeln!(s, "motor_noise_std = {}", v.motor_noise_std);
        let _ = writeln!(s, "linear_drag_coeff = {}", v.linear_drag_coeff);
        let _ = writeln!(s, "angular_drag_coeff = {}", v.angular_drag_coeff);
        let _ = writeln!(s, "omega_max = {}", v.omega_max);
        let _ = writeln!(s, "gravity = {}", v.gravity);
        let _ = writeln!(s, "substep_dt = {}", v.substep_dt);
        let _ = writeln!(s, "\n[env]");
        let e = &self.env;
        let _ = writeln!(s, "goal_x = {}", e.goal_position[0]);
        let _ = writeln!(s, "goal_y = {}", e.goal_position[1]);
        let _ = writeln!(s, "goal_z = {}", e.goal_position[2]);
        let _ = writeln!(s, "goal_roll = {}", e.goal_roll);
        let _ = writeln!(s, "goal_pitch = {}", e.goal_pitch);
        let _ = writeln!(s, "x_max = {}", e.x_max);
        let _ = writeln!(s, "y_max = {}", e.y_max);
        let _ = writeln!(s, "z_max = {}", e.z_max);
        let _ = writeln!(s, "obstacle_count = {}", e.obstacle_count);
        let _ = writeln!(s, "obstacle_radius = {}", e.obstacle_radius);
        let _ = writeln!(s, "obstacle_height = {}", e.obstacle_height);
        let _ = writeln!(s, "collision_margin = {}", e.collision_margin);
        let _ = writeln!(s, "alpha_p = {}", e.alpha_p);
        let _ = writeln!(s, "alpha_a = {}", e.alpha_a);
        let _ = writeln!(s, "alpha_flight = {}", e.alpha_flight);
        let _ = writeln!(s, "alpha_yaw = {}", e.alpha_yaw);
        let _ = writeln!(s, "alpha_nu = {}", e.alpha_nu);
        let _ = writeln!(s, "alpha_omega = {}", e.alpha_omega);
        let _ = writeln!(s, "crash_reward = {}", e.crash_reward);
        let _ = writeln!(s, "max_flight_steps = {}", e.max_flight_steps);
        let _ = writeln!(s, "spawn_x = {}", e.spawn_position[0]);
        let _ = writeln!(s, "spawn_y = {}", e.spawn_position[1]);
        let _ = writeln!(s, "spawn_z = {}", e.spawn_position[2]);
        let _ = writeln!(s, "init_position_range = {}", e.init_position_range);
        let _ = writeln!(s, "init_attitude_range = {}", e.init_attitude_range);
        let _ = writeln!(s, "crash_altitude = {}", e.crash_altitude);
        let _ = writeln!(s, "control_dt = {}", e.control_dt);
        let _ = writeln!(s, "corridor_padding = {}", e.corridor_padding);
        let _ = writeln!(s, "\n[ppo]");
        let p = &self.ppo;
        let _ = writeln!(s, "batch_size = {}", p.batch_size);
        let _ = writeln!(s, "minibatch_size = {}", p.minibatch_size);
        let _ = writeln!(s, "epochs = {}", p.epochs);
        let _ = writeln!(s, "gamma = {}", p.gamma);
        let _ = writeln!(s, "lam = {}", p.lam);
        let _ = writeln!(s, "clip_eps = {}", p.clip_eps);
        let _ = writeln!(s, "c1 = {}", p.c1);
        let _ = writeln!(s, "c2 = {}", p.c2);
        let _ = writeln!(s, "lr_policy = {}", p.lr_policy);
        let _ = writeln!(s, "lr_value_ext = {}", p.lr_value_ext);
        let _ = writeln!(s, "lr_value_int = {}", p.lr_value_int);
        let _ = writeln!(s, "standard_td = {}", p.standard_td);
        let _ = writeln!(s, "hidden = {}", p.hidden);
        let _ = writeln!(s, "init_log_std = {}", p.init_log_std);
        let _ = writeln!(s, "\n[icm]");
        let i = &self.icm;
        let _ = writeln!(s, "beta = {}", i.beta);
        let _ = writeln!(s, "eta = {}", i.eta);
        let _ = writeln!(s, "hidden = {}", i.hidden);
        let _ = writeln!(s, "lr = {}", i.lr);
        let _ = writeln!(s, "epochs = {}", i.epochs);
        let _ = writeln!(s, "minibatch = {}", i.minibatch);
        let _ = writeln!(s, "\n[hcm]");
        let h = &self.hcm;
        let _ = writeln!(s, "n = {}", h.n);
        let _ = writeln!(s, "stride = {}", h.stride);
        let _ = writeln!(s, "beta = {}", h.beta);
        let _ = writeln!(s, "alpha_curiosity = {}", h.alpha_curiosity);
        let _ = writeln!(s, "kappa = {}", h.kappa);
        let _ = writeln!(s, "lr = {}", h.lr);
        let _ = writeln!(s, "epochs = {}", h.epochs);
        let _ = writeln!(s, "minibatch = {}", h.minibatch);
        let _ = writeln!(s, "hidden = {}", h.hidden);
        let _ = writeln!(s, "heads_ss = {}", h.heads_ss);
        let _ = writeln!(s, "heads_sr = {}", h.heads_sr);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_both_line_styles() {
        let text = "\n# comment\nrun.seed = 7\n[env]\nalpha_p = 2.5\nx_max = 4 # inline comment\n[ppo]\nppo.gamma = 0.9\n";
        let cfg = RunConfig::from_str_contents(text).unwrap();
        assert_eq!(cfg.run.seed, 7);
        assert_eq!(cfg.env.alpha_p, 2.5);
        assert_eq!(cfg.env.x_max, 4.0);
        assert_eq!(cfg.ppo.gamma, 0.9);
    }

    #[test]
    fn unknown_key_is_an_error_naming_the_key() {
        let err = RunConfig::from_str_contents("env.alpha_q = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpha_q"), "{msg}");
    }

    #[test]
    fn bad_value_is_an_error() {
        assert!(RunConfig::from_str_contents("ppo.gamma = fast\n").is_err());
        assert!(RunConfig::from_str_contents("ppo.gamma = 1.5\n").is_err());
        assert!(RunConfig::from_str_contents("run.algorithm = sac\n").is_err());
    }

    #[test]
    fn render_roundtrips() {
        let mut cfg = RunConfig::default();
        cfg.run.seed = 123;
        cfg.env.alpha_yaw = -0.25;
        cfg.hcm.n = 20;
        let text = cfg.render();
        let parsed = RunConfig::from_str_contents(&text).unwrap();
        assert_eq!(cfg, parsed);
    }
}
