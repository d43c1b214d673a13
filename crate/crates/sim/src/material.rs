//! Surface reflectance models.

use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    OpaqueDiffuse,
    Transparent,
    Mirror,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialModel {
    pub kind: MaterialKind,
    /// Intensity at normal incidence and `reference_distance`.
    pub peak_intensity: f64,
    /// Gaussian width in degrees of the incidence response (transparent and
    /// mirror surfaces).
    #[serde(default = "default_sigma")]
    pub angular_sigma: f64,
    /// Fraction of energy passed through a transparent surface.
    #[serde(default = "default_transmittance")]
    pub transmittance: f64,
    /// Returns weaker than this are not registered.
    #[serde(default)]
    pub detection_floor: f64,
    #[serde(default = "default_reference")]
    pub reference_distance: f64,
    /// Intensity scales with `(reference_distance / range)^range_exponent`;
    /// 0 models range-calibrated intensities.
    #[serde(default = "default_range_exponent")]
    pub range_exponent: f64,
}

fn default_sigma() -> f64 {
    5.0
}

fn default_transmittance() -> f64 {
    0.92
}

fn default_reference() -> f64 {
    1.0
}

fn default_range_exponent() -> f64 {
    2.0
}

/// Energy kept by a mirror bounce.
pub const MIRROR_REFLECTANCE: f64 = 0.9;

impl MaterialModel {
    pub fn opaque() -> Self {
        Self {
            kind: MaterialKind::OpaqueDiffuse,
            peak_intensity: 255.0,
            angular_sigma: default_sigma(),
            transmittance: 0.0,
            detection_floor: 0.0,
            reference_distance: 1.0,
            range_exponent: default_range_exponent(),
        }
    }

    /// Generic transparent surface: peak 120, sigma 5 degrees, floor 20.
    pub fn transparent() -> Self {
        Self {
            kind: MaterialKind::Transparent,
            peak_intensity: 120.0,
            angular_sigma: 5.0,
            transmittance: default_transmittance(),
            detection_floor: 20.0,
            reference_distance: 1.0,
            range_exponent: default_range_exponent(),
        }
    }

    /// Window glass with range-calibrated intensities: a pane between about
    /// 0.6 m and 1.9 m away produces a multi-cell patch inside the detection
    /// band.
    pub fn glass() -> Self {
        Self {
            peak_intensity: 150.0,
            angular_sigma: 6.0,
            detection_floor: 100.0,
            range_exponent: 0.0,
            ..Self::transparent()
        }
    }

    pub fn acrylic() -> Self {
        Self {
            peak_intensity: 145.0,
            angular_sigma: 5.0,
            detection_floor: 90.0,
            transmittance: 0.93,
            ..Self::glass()
        }
    }

    /// Glass seen under a lower receiver threshold (dim outdoor light).
    pub fn glass_low_floor() -> Self {
        Self {
            angular_sigma: 5.0,
            detection_floor: 80.0,
            ..Self::glass()
        }
    }

    /// Silvered glass: a glint near normal incidence, a specular bounce
    /// otherwise.
    pub fn mirror() -> Self {
        Self {
            kind: MaterialKind::Mirror,
            transmittance: 0.0,
            ..Self::glass()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "opaque" => Self::opaque(),
            "transparent" => Self::transparent(),
            "glass" => Self::glass(),
            "acrylic" => Self::acrylic(),
            "glass_low_floor" => Self::glass_low_floor(),
            "mirror" => Self::mirror(),
            _ => return None,
        })
    }

    pub fn validate(&self) -> SimResult<()> {
        let ok = self.peak_intensity >= 0.0
            && self.angular_sigma > 0.0
            && (0.0..=1.0).contains(&self.transmittance)
            && self.detection_floor >= 0.0
            && self.reference_distance > 0.0
            && self.range_exponent >= 0.0
            && self.range_exponent.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SimError::Invalid(format!("invalid material {self:?}")))
        }
    }

    fn falloff(&self, dist: f64) -> f64 {
        let k = self.reference_distance / dist;
        if self.range_exponent == 2.0 {
            k * k
        } else {
            k.powf(self.range_exponent)
        }
    }

    /// Gaussian incidence response for transparent and mirror surfaces.
    pub fn specular_intensity(&self, incidence_deg: f64, dist: f64) -> f64 {
        let z = incidence_deg / self.angular_sigma;
        self.peak_intensity * (-0.5 * z * z).exp() * self.falloff(dist)
    }

    /// Lambertian response for opaque surfaces.
    pub fn diffuse_intensity(&self, incidence_deg: f64, dist: f64) -> f64 {
        self.peak_intensity * incidence_deg.to_radians().cos().max(0.0) * self.falloff(dist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gaussian_examples() {
        let m = MaterialModel::transparent();
        assert_abs_diff_eq!(m.specular_intensity(0.0, 1.0), 120.0);
        let grazing = m.specular_intensity(20.0, 1.0);
        assert_abs_diff_eq!(grazing, 120.0 * (-8.0f64).exp(), epsilon = 1e-12);
        assert!(grazing < m.detection_floor);
        assert_abs_diff_eq!(m.specular_intensity(0.0, 2.0), 30.0);
    }

    #[test]
    fn diffuse_examples() {
        let m = MaterialModel::opaque();
        assert_abs_diff_eq!(m.diffuse_intensity(0.0, 1.0), 255.0);
        assert_abs_diff_eq!(m.diffuse_intensity(60.0, 1.0), 127.5, epsilon = 1e-9);
        assert_eq!(m.diffuse_intensity(90.0, 1.0).max(0.0) < 1e-9, true);
    }

    #[test]
    fn presets_validate() {
        for name in ["opaque", "transparent", "glass", "acrylic", "glass_low_floor", "mirror"] {
            MaterialModel::preset(name).unwrap().validate().unwrap();
        }
        assert!(MaterialModel::preset("velvet").is_none());
        assert!(MaterialModel::transparent().transmittance > 0.9);
    }
}
