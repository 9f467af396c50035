//! Step-period search for the uncontrolled periodic rocking gait.
//!
//! With the CoP pinned to the stance point, one step maps the DCM by
//! `xi1 = (xi0 - u0) e^{omega T} + u0`. Alternating footprints give a
//! periodic orbit when `xi1` is the mirror of `xi0` about the midpoint of
//! the first two footprints.

use crate::error::{Error, Result};
use crate::lipm::{LipmParams, Vec2};

use super::config::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingTune {
    pub step_period: f64,
    /// Fixed-point residual at the returned period (m).
    pub residual: f64,
    pub iterations: usize,
}

fn initial_dcm(config: &ScenarioConfig, omega: f64) -> Vec2 {
    let com = config.initial.com.map_or(Vec2::zeros(), |c| Vec2::new(c[0], c[1]));
    let vel = config.initial.com_vel.map_or(Vec2::zeros(), |v| Vec2::new(v[0], v[1]));
    com + vel / omega
}

/// Signed mirror residual after one uncontrolled step of period `period`.
pub fn periodicity_residual(xi0: f64, width: f64, omega: f64, period: f64) -> f64 {
    xi0 * ((omega * period).exp() + 1.0) - width
}

/// Bisects the step period until the rocking map is periodic. Coordinates
/// are measured from the first stance footprint toward the second.
pub fn tune_step_timing(config: &ScenarioConfig) -> Result<TimingTune> {
    config.validate()?;
    let omega = LipmParams::new(config.com_height, config.gravity)?.omega0();
    let fp = config.footprints();
    let axis = fp[1] - fp[0];
    let width = axis.norm();
    if width == 0.0 {
        return Err(Error::Config("first two footprints coincide".into()));
    }
    let dir = axis / width;
    let xi0 = (initial_dcm(config, omega) - fp[0]).dot(&dir);
    if !(xi0 > 0.0 && xi0 < width / 2.0) {
        return Err(Error::Config(format!(
            "initial DCM {xi0:.4} m from the stance must lie between it and the midpoint ({:.4} m)",
            width / 2.0
        )));
    }
    let g = |t: f64| periodicity_residual(xi0, width, omega, t);
    let (mut lo, mut hi) = (0.0, 0.1);
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let step_period = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    Ok(TimingTune { step_period, residual: g(step_period).abs(), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_closed_form() {
        let text = r#"
plant = "lipm"
step_period = 0.5
total_steps = 20
[plan]
step_width = 0.2
first_stance = "left"
[initial]
com = [0.0, 0.0]
com_vel = [0.0, 0.19]
"#;
        let c = ScenarioConfig::from_toml_str(text).unwrap();
        let tune = tune_step_timing(&c).unwrap();
        let omega = (9.81f64 / 0.9).sqrt();
        let s0 = 0.1 - 0.19 / omega;
        let exact = (0.2 / s0 - 1.0).ln() / omega;
        assert!((tune.step_period - exact).abs() < 1e-14);
        assert!(tune.residual < 1e-4);
    }
}
