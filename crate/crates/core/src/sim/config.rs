//! Scenario description loaded from TOML. Unknown keys are rejected.
//!
//! Units: meters, seconds, radians, Hz. Vectors are `[x, y]` with x forward
//! and y to the left; the multibody plant uses x only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lipm::{Vec2, GRAVITY};
use crate::swing::AdjustmentConfig;
use crate::tracking::DcmGains;
use crate::whole_body::{Foot, PdGains, PlanarBipedModel, Profile, WholeBodyGains};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantKind {
    Lipm,
    Multibody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    /// Forward advance per step.
    #[serde(default)]
    pub step_length: f64,
    /// Lateral distance between left and right footprints.
    #[serde(default)]
    pub step_width: f64,
    #[serde(default = "default_first_stance")]
    pub first_stance: Foot,
    /// Explicit footprints `u_0, u_1, ...`; overrides the generator.
    #[serde(default)]
    pub footprints: Option<Vec<[f64; 2]>>,
}

fn default_first_stance() -> Foot {
    Foot::Right
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Horizontal CoM; defaults to the planned initial DCM.
    pub com: Option<[f64; 2]>,
    pub com_vel: Option<[f64; 2]>,
    /// Swing foot start; defaults to beside the first stance footprint.
    pub swing_foot: Option<[f64; 2]>,
}

/// Stance foot rectangle used as the CoP region of the active profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FootShape {
    pub heel: f64,
    pub toe: f64,
    pub half_width: f64,
}

impl Default for FootShape {
    fn default() -> Self {
        Self { heel: 0.05, toe: 0.1, half_width: 0.05 }
    }
}

/// Constant push expressed as a fraction of body weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PushConfig {
    pub fraction: f64,
    pub start: f64,
    pub duration: f64,
    /// Normalized internally.
    pub direction: [f64; 2],
}

impl PushConfig {
    /// Push acceleration at time `t` (zero outside the push window).
    pub fn accel_at(&self, t: f64, gravity: f64) -> Vec2 {
        if t >= self.start && t < self.start + self.duration {
            self.accel(gravity)
        } else {
            Vec2::zeros()
        }
    }

    pub fn accel(&self, gravity: f64) -> Vec2 {
        let d = Vec2::new(self.direction[0], self.direction[1]);
        d.normalize() * (self.fraction * gravity)
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Instantaneous DCM jump (CoM velocity kick) at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseConfig {
    pub time: f64,
    pub dcm_offset: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdjustmentOptions {
    pub freeze_fraction: f64,
    pub smoothing: bool,
    pub limit: Option<[f64; 2]>,
}

impl Default for AdjustmentOptions {
    fn default() -> Self {
        let d = AdjustmentConfig::default();
        Self { freeze_fraction: d.freeze_fraction, smoothing: d.smoothing, limit: None }
    }
}

impl AdjustmentOptions {
    pub fn to_config(&self) -> AdjustmentConfig {
        AdjustmentConfig {
            freeze_fraction: self.freeze_fraction,
            smoothing: self.smoothing,
            limit: self.limit.map(|l| Vec2::new(l[0], l[1])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsConfig {
    /// DCM feedback gain.
    pub k_xi: f64,
    pub swing: PdGains,
    pub posture: PdGains,
    pub base: PdGains,
    pub com_height: PdGains,
}

impl Default for GainsConfig {
    fn default() -> Self {
        let wb = WholeBodyGains::default();
        Self { k_xi: 3.0, swing: wb.swing, posture: wb.posture, base: wb.base, com_height: wb.com_height }
    }
}

impl GainsConfig {
    pub fn dcm(&self) -> Result<DcmGains> {
        DcmGains::new(self.k_xi)
    }

    pub fn whole_body(&self) -> WholeBodyGains {
        WholeBodyGains { swing: self.swing, posture: self.posture, base: self.base, com_height: self.com_height }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub plant: PlantKind,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    pub plan: PlanConfig,
    /// Nominal step period before `timing_scale`.
    pub step_period: f64,
    #[serde(default = "default_preview")]
    pub preview: usize,
    pub total_steps: usize,
    #[serde(default = "default_rate")]
    pub control_rate: f64,
    /// Multiplies the step period of both plan and robot.
    #[serde(default = "one")]
    pub timing_scale: f64,
    /// Live landing adjustment on or off.
    #[serde(default = "yes")]
    pub adjustment: bool,
    #[serde(default)]
    pub adjustment_options: AdjustmentOptions,
    #[serde(default)]
    pub gains: GainsConfig,
    /// CoM height of the reduced plant; the multibody plant derives its own.
    #[serde(default = "default_height")]
    pub com_height: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    #[serde(default = "default_apex")]
    pub apex_height: f64,
    /// DCM error that ends a run as diverged.
    #[serde(default = "default_abort")]
    pub abort_radius: f64,
    #[serde(default)]
    pub foot: FootShape,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub disturbance: Option<PushConfig>,
    #[serde(default)]
    pub impulse: Option<ImpulseConfig>,
    #[serde(default)]
    pub model: PlanarBipedModel,
}

fn default_profile() -> Profile {
    Profile::Active
}
fn default_preview() -> usize {
    3
}
fn default_rate() -> f64 {
    1000.0
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_height() -> f64 {
    0.9
}
fn default_gravity() -> f64 {
    GRAVITY
}
fn default_apex() -> f64 {
    0.05
}
fn default_abort() -> f64 {
    5.0
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Returns a copy with the dotted `key` set to `value`.
    pub fn with_value(&self, key: &str, value: f64) -> Result<Self> {
        let mut root = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        let parts: Vec<&str> = key.split('.').collect();
        let (field, path) = parts.split_last().expect("split yields at least one part");
        let mut node = &mut root;
        for part in path {
            node = node.get_mut(*part).ok_or_else(|| Error::Config(format!("unknown key '{key}'")))?;
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("'{key}' does not name a table entry")))?;
        let replacement = match table.get(*field) {
            Some(toml::Value::Integer(_)) => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(Error::Config(format!("'{key}' takes non-negative integers, got {value}")));
                }
                toml::Value::Integer(value as i64)
            }
            Some(toml::Value::Float(_)) => toml::Value::Float(value),
            Some(_) => return Err(Error::Config(format!("'{key}' is not numeric"))),
            None => return Err(Error::Config(format!("unknown key '{key}'"))),
        };
        table.insert((*field).to_string(), replacement);
        let cfg: ScenarioConfig = root.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.control_rate >= 100.0 && self.control_rate.is_finite()) {
            return bad(format!("control_rate {} below 100 Hz", self.control_rate));
        }
        if self.total_steps < 1 {
            return bad("total_steps must be at least 1".into());
        }
        if !(self.step_period > 0.0 && self.timing_scale > 0.0) {
            return bad("step_period and timing_scale must be positive".into());
        }
        if self.preview < 2 {
            return bad(format!("preview {} must be at least 2", self.preview));
        }
        if !(self.com_height > 0.0 && self.gravity > 0.0 && self.abort_radius > 0.0 && self.apex_height >= 0.0) {
            return bad("com_height, gravity and abort_radius must be positive".into());
        }
        if !(self.foot.heel >= 0.0 && self.foot.toe >= 0.0 && self.foot.half_width >= 0.0) {
            return bad("foot extents must be non-negative".into());
        }
        if !(self.adjustment_options.freeze_fraction >= 0.0 && self.adjustment_options.freeze_fraction < 1.0) {
            return bad("freeze_fraction must lie in [0, 1)".into());
        }
        if let Some(p) = &self.disturbance {
            if !(p.fraction >= 0.0 && p.duration >= 0.0 && p.start.is_finite()) {
                return bad("push fraction and duration must be non-negative".into());
            }
            if p.fraction > 0.0 && !(p.direction[0].hypot(p.direction[1]) > 0.0) {
                return bad("push direction must be non-zero".into());
            }
        }
        if let Some(fp) = &self.plan.footprints {
            if fp.len() < 2 {
                return bad("explicit plans need at least two footprints".into());
            }
        }
        self.gains.dcm()?;
        if self.plant == PlantKind::Multibody {
            self.model.validate()?;
            let expects_active = self.profile == Profile::Active;
            if self.model.active_ankles != expects_active {
                return bad(format!("{:?} profile does not match model.active_ankles", self.profile));
            }
        }
        Ok(())
    }

    /// Effective step period.
    pub fn period(&self) -> f64 {
        self.step_period * self.timing_scale
    }

    /// Control cycles per step and the matching time step.
    pub fn cycles_per_step(&self) -> (usize, f64) {
        let t = self.period();
        let cycles = ((t * self.control_rate) - 1e-9).ceil().max(1.0) as usize;
        (cycles, t / cycles as f64)
    }

    fn side(&self, k: usize) -> f64 {
        let first = match self.plan.first_stance {
            Foot::Right => -1.0,
            Foot::Left => 1.0,
        };
        if k.is_multiple_of(2) {
            first
        } else {
            -first
        }
    }

    /// Footprints `u_0..=u_S` for `S = total_steps`. Generated plans close
    /// with the feet side by side.
    pub fn footprints(&self) -> Vec<Vec2> {
        let s = self.total_steps;
        let mut out: Vec<Vec2> = match &self.plan.footprints {
            Some(fp) => fp.iter().map(|p| Vec2::new(p[0], p[1])).collect(),
            None => (0..=s)
                .map(|k| {
                    let x = k.min(s.saturating_sub(1)) as f64 * self.plan.step_length;
                    Vec2::new(x, self.side(k) * self.plan.step_width / 2.0)
                })
                .collect(),
        };
        let last = *out.last().expect("validated non-empty");
        while out.len() < s + 1 {
            out.push(last);
        }
        if self.plant == PlantKind::Multibody {
            for u in &mut out {
                u.y = 0.0;
            }
        }
        out
    }

    pub fn initial_swing_foot(&self) -> Vec2 {
        match self.initial.swing_foot {
            Some(p) => Vec2::new(p[0], if self.plant == PlantKind::Multibody { 0.0 } else { p[1] }),
            None => {
                let u0 = self.footprints()[0];
                let y = if self.plant == PlantKind::Multibody { 0.0 } else { -self.side(0) * self.plan.step_width / 2.0 };
                Vec2::new(u0.x, y)
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.model.total_mass()
    }
}
