//! Peripheral-vision resolution model and the field-of-view geometry behind
//! the two-stage layout.
//!
//! Relative resolution falls off with eccentricity `θ` as `β / (β + θ)`.
//! Extending a perspective image by a linear ratio `k` around its center maps
//! an input FoV `α` to a target FoV `α'` with `tan(α/2) = k · tan(α'/2)`.
//! Angles are exchanged in degrees.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resolution drop-off model. `beta` is the eccentricity (degrees) at which
/// resolution halves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoveationModel {
    beta: f64,
}

impl Default for FoveationModel {
    fn default() -> Self {
        Self { beta: 2.5 }
    }
}

impl FoveationModel {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Relative resolution at eccentricity `theta` degrees, in `(0, 1]`.
    pub fn relative_resolution(&self, theta: f64) -> Result<f64> {
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(Error::Domain(format!("eccentricity must be non-negative, got {theta}")));
        }
        Ok(self.beta / (self.beta + theta))
    }

    /// Minimum resolution needed at `theta2` when the source image, of
    /// resolution `r1`, ends at `theta1`.
    pub fn required_resolution(&self, theta1: f64, theta2: f64, r1: f64) -> Result<ResolutionRequirement> {
        if !(theta1 >= 0.0) || !theta1.is_finite() || !theta2.is_finite() {
            return Err(Error::Domain(format!("theta1 must be non-negative, got {theta1}")));
        }
        if theta2 < theta1 {
            return Err(Error::Domain(format!("theta2 ({theta2}) must not be below theta1 ({theta1})")));
        }
        if !(r1 > 0.0) || !r1.is_finite() {
            return Err(Error::Domain(format!("source resolution must be positive, got {r1}")));
        }
        let r2 = self.beta / (self.beta + theta2 - theta1) * r1;
        Ok(ResolutionRequirement { theta1, theta2, r1, r2 })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRequirement {
    pub theta1: f64,
    pub theta2: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Input FoV (degrees) that a linear extension by `linear_ratio` widens to
/// `alpha_prime` degrees.
pub fn input_fov(linear_ratio: f64, alpha_prime: f64) -> Result<f64> {
    if !(linear_ratio > 0.0 && linear_ratio <= 1.0) {
        return Err(Error::Domain(format!("linear ratio must lie in (0, 1], got {linear_ratio}")));
    }
    if !(alpha_prime > 0.0 && alpha_prime < 180.0) {
        return Err(Error::Domain(format!("target FoV must lie in (0, 180), got {alpha_prime}")));
    }
    Ok(2.0 * (linear_ratio * (alpha_prime / 2.0).to_radians().tan()).atan().to_degrees())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionGeometry {
    pub linear_ratio: f64,
    pub alpha: f64,
    pub alpha_prime: f64,
}

impl ExtensionGeometry {
    pub fn from_ratio(linear_ratio: f64, alpha_prime: f64) -> Result<Self> {
        let alpha = input_fov(linear_ratio, alpha_prime)?;
        Ok(Self { linear_ratio, alpha, alpha_prime })
    }

    pub fn from_fovs(alpha: f64, alpha_prime: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= alpha_prime && alpha_prime < 180.0) {
            return Err(Error::Domain(format!("need 0 < alpha ({alpha}) <= alpha' ({alpha_prime}) < 180")));
        }
        let linear_ratio = (alpha / 2.0).to_radians().tan() / (alpha_prime / 2.0).to_radians().tan();
        Ok(Self { linear_ratio, alpha, alpha_prime })
    }
}

/// Angular bands of the output: original content, stage-one near periphery,
/// stage-two mid periphery. All values are full FoVs in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoveatedLayout {
    pub center_fov: f64,
    pub near_fov: f64,
    pub mid_fov: f64,
}

impl Default for FoveatedLayout {
    fn default() -> Self {
        // 2·atan(½·tan 45°): the FoV that doubles linearly to 90°.
        Self { center_fov: 53.130_102_354_155_98, near_fov: 90.0, mid_fov: 180.0 }
    }
}

impl FoveatedLayout {
    pub fn new(center_fov: f64, near_fov: f64, mid_fov: f64) -> Result<Self> {
        let layout = Self { center_fov, near_fov, mid_fov };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_fov > 0.0 && self.center_fov < self.near_fov && self.near_fov < self.mid_fov && self.mid_fov <= 180.0)
        {
            return Err(Error::Domain(format!(
                "layout must satisfy 0 < center ({}) < near ({}) < mid ({}) <= 180",
                self.center_fov, self.near_fov, self.mid_fov
            )));
        }
        Ok(())
    }

    /// Linear ratio between the original and the near-periphery image side.
    pub fn near_linear_ratio(&self) -> f64 {
        (self.center_fov / 2.0).to_radians().tan() / (self.near_fov / 2.0).to_radians().tan()
    }

    /// Resolution the two-stage system delivers at eccentricity `theta`:
    /// full inside the near band, `r1 / mid_downscale` beyond it.
    pub fn system_resolution(&self, theta: f64, r1: f64, mid_downscale: f64) -> f64 {
        if theta < self.near_fov / 2.0 {
            r1
        } else {
            r1 / mid_downscale
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub theta: f64,
    pub required: f64,
    pub system: f64,
}

/// Default stage-two downscale factor encoded in the system curve.
pub const MID_DOWNSCALE: f64 = 4.0;

/// Required vs. delivered resolution sampled every `step` degrees from the
/// gaze center to the edge of the mid band.
pub fn resolution_profile(model: &FoveationModel, layout: &FoveatedLayout, r1: f64, step: f64) -> Result<Vec<ProfileRow>> {
    resolution_profile_with_downscale(model, layout, r1, step, MID_DOWNSCALE)
}

pub fn resolution_profile_with_downscale(
    model: &FoveationModel,
    layout: &FoveatedLayout,
    r1: f64,
    step: f64,
    mid_downscale: f64,
) -> Result<Vec<ProfileRow>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    if !(mid_downscale >= 1.0) {
        return Err(Error::Domain(format!("downscale must be at least 1, got {mid_downscale}")));
    }
    layout.validate()?;
    let edge = layout.center_fov / 2.0;
    let end = layout.mid_fov / 2.0;
    let count = (end / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|k| {
            let theta = k as f64 * step;
            // Inside the source image the viewer sees the source itself.
            let required = if theta <= edge { r1 } else { model.required_resolution(edge, theta, r1)?.r2 };
            Ok(ProfileRow { theta, required, system: layout.system_resolution(theta, r1, mid_downscale) })
        })
        .collect()
}

/// CSV with header `theta_deg,required,system`.
pub fn profile_csv(rows: &[ProfileRow]) -> String {
    let mut out = String::from("theta_deg,required,system\n");
    for row in rows {
        let _ = writeln!(out, "{},{},{}", row.theta, row.required, row.system);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn relative_resolution_examples() {
        let m = FoveationModel::default();
        assert_eq!(m.relative_resolution(0.0).unwrap(), 1.0);
        assert_eq!(m.relative_resolution(2.5).unwrap(), 0.5);
        assert!((m.relative_resolution(22.5).unwrap() - 0.1).abs() < EPS);
        assert!(m.relative_resolution(-1.0).is_err());
        assert!(FoveationModel::new(0.0).is_err());
    }

    #[test]
    fn required_resolution_examples() {
        let m = FoveationModel::default();
        assert_eq!(m.required_resolution(30.0, 30.0, 7.0).unwrap().r2, 7.0);
        let r = m.required_resolution(26.565, 45.0, 1.0).unwrap().r2;
        assert!((r - 0.119_417_243_850_011_94).abs() < EPS);
        assert!((m.required_resolution(0.0, 2.5, 2.0).unwrap().r2 - 1.0).abs() < EPS);
        assert!(m.required_resolution(10.0, 5.0, 1.0).is_err());
    }

    #[test]
    fn input_fov_examples() {
        assert!((input_fov(0.5, 90.0).unwrap() - 53.130_102_354_155_98).abs() < 1e-9);
        assert!((input_fov(1.0, 90.0).unwrap() - 90.0).abs() < 1e-9);
        // 2·atan(0.5·tan 30°), evaluated independently.
        assert!((input_fov(0.5, 60.0).unwrap() - 32.204_227_503_972_03).abs() < 1e-9);
        assert!(input_fov(0.0, 90.0).is_err());
        assert!(input_fov(1.5, 90.0).is_err());
        assert!(input_fov(0.5, 180.0).is_err());
    }

    #[test]
    fn default_layout_matches_half_extension() {
        let layout = FoveatedLayout::default();
        assert!((layout.center_fov - input_fov(0.5, 90.0).unwrap()).abs() < 1e-12);
        assert!((layout.near_linear_ratio() - 0.5).abs() < 1e-12);
        assert!(FoveatedLayout::new(90.0, 90.0, 180.0).is_err());
    }

    #[test]
    fn profile_examples() {
        let rows = resolution_profile(&FoveationModel::default(), &FoveatedLayout::default(), 1.0, 1.0).unwrap();
        assert_eq!(rows.len(), 91);
        assert_eq!(rows[0].required, 1.0);
        assert_eq!(rows[0].system, 1.0);
        let at45 = rows[45];
        assert_eq!(at45.theta, 45.0);
        assert!((at45.required - 0.1194).abs() < 5e-4);
        assert_eq!(at45.system, 0.25);
        assert!(rows.windows(2).all(|w| w[1].required <= w[0].required));
        assert!(rows.iter().all(|r| r.system >= r.required));
        assert!(resolution_profile(&FoveationModel::default(), &FoveatedLayout::default(), 1.0, 0.0).is_err());
    }

    #[test]
    fn profile_csv_header() {
        let rows = resolution_profile(&FoveationModel::default(), &FoveatedLayout::default(), 1.0, 30.0).unwrap();
        let csv = profile_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("theta_deg,required,system"));
        assert_eq!(lines.next(), Some("0,1,1"));
        assert_eq!(csv.lines().count(), 1 + 4);
    }

    proptest! {
        #[test]
        fn resolution_strictly_decreasing(a in 0.0f64..500.0, d in 1e-6f64..100.0) {
            let m = FoveationModel::default();
            prop_assert!(m.relative_resolution(a + d).unwrap() < m.relative_resolution(a).unwrap());
        }

        #[test]
        fn ratio_round_trip(ratio in 1e-3f64..=1.0, alpha_prime in 1.0f64..179.0) {
            let alpha = input_fov(ratio, alpha_prime).unwrap();
            let geom = ExtensionGeometry::from_fovs(alpha, alpha_prime).unwrap();
            prop_assert!((geom.linear_ratio - ratio).abs() < 1e-9);
        }

        #[test]
        fn required_depends_only_on_offset(t1 in 0.0f64..90.0, gap in 0.0f64..90.0, shift in 0.0f64..45.0, r1 in 0.1f64..10.0) {
            let m = FoveationModel::default();
            let a = m.required_resolution(t1, t1 + gap, r1).unwrap().r2;
            let b = m.required_resolution(t1 + shift, t1 + gap + shift, r1).unwrap().r2;
            prop_assert!((a - b).abs() < 1e-9 * r1);
            prop_assert!(a > 0.0 && a <= r1);
        }
    }
}
