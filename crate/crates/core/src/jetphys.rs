//! Physical quantities of an inclined dense jet discharge.
//!
//! Angles are stored in degrees and converted at trigonometric call sites.
//! All densities are in kg/m³, lengths in m and velocities in m/s.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

/// Safety factor of the three-grid convergence index.
pub const GCI_SAFETY_FACTOR: f64 = 1.25;

/// Input column names, in canonical order.
pub const FEATURE_NAMES: [&str; 7] = ["theta", "h_p", "H", "d", "U0", "rho_b", "rho_a"];

/// Output column names, in canonical order.
pub const TARGET_NAMES: [&str; 5] = ["x_m", "z_m", "z_t", "x_r", "x_i"];

/// The seven discharge and ambient parameters of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JetCase {
    /// Discharge inclination above horizontal, degrees.
    pub theta: f64,
    /// Pipe (port) height above the bed.
    pub h_p: f64,
    /// Water depth above the nozzle tip.
    pub depth: f64,
    /// Nozzle diameter.
    pub d: f64,
    /// Discharge velocity.
    pub u0: f64,
    /// Effluent (brine) density.
    pub rho_b: f64,
    /// Ambient density.
    pub rho_a: f64,
}

impl JetCase {
    /// Builds a case and checks every invariant.
    pub fn new(
        theta: f64,
        h_p: f64,
        depth: f64,
        d: f64,
        u0: f64,
        rho_b: f64,
        rho_a: f64,
    ) -> Result<Self> {
        let case = JetCase {
            theta,
            h_p,
            depth,
            d,
            u0,
            rho_b,
            rho_a,
        };
        case.validate()?;
        Ok(case)
    }

    pub fn from_array(values: [f64; 7]) -> Result<Self> {
        let [theta, h_p, depth, d, u0, rho_b, rho_a] = values;
        Self::new(theta, h_p, depth, d, u0, rho_b, rho_a)
    }

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.theta, self.h_p, self.depth, self.d, self.u0, self.rho_b, self.rho_a,
        ]
    }

    /// Bit pattern used for exact duplicate detection.
    pub fn key(&self) -> [u64; 7] {
        self.to_array().map(|v| v.to_bits())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in FEATURE_NAMES.iter().zip(self.to_array()) {
            if !value.is_finite() {
                return Err(Error::Validation(format!("{name} is not finite ({value})")));
            }
            if value <= 0.0 {
                return Err(Error::Validation(format!(
                    "{name} must be strictly positive (got {value})"
                )));
            }
        }
        if self.theta >= 90.0 {
            return Err(Error::Validation(format!(
                "theta must lie in (0, 90) degrees (got {})",
                self.theta
            )));
        }
        if self.rho_b <= self.rho_a {
            return Err(Error::Validation(format!(
                "rho_b > rho_a violated: discharge is not negatively buoyant ({} <= {})",
                self.rho_b, self.rho_a
            )));
        }
        if self.depth < 2.0 * self.h_p {
            return Err(Error::Validation(format!(
                "H >= 2*h_p violated ({} < 2*{})",
                self.depth, self.h_p
            )));
        }
        Ok(())
    }

    pub fn theta_rad(&self) -> f64 {
        self.theta.to_radians()
    }
}

/// Fluxes, Froude number, length scale and regime ratios of a case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    /// Reduced gravity g₀′, m/s².
    pub g0p: f64,
    /// Volume flux, m³/s.
    pub q: f64,
    /// Momentum flux, m⁴/s².
    pub m: f64,
    /// Buoyancy flux, m⁴/s³.
    pub b: f64,
    /// Densimetric Froude number.
    pub fr: f64,
    /// Momentum-buoyancy length scale, m.
    pub l_m: f64,
    /// h_p / L_M, controls bed (Coanda) attachment.
    pub coanda_ratio: f64,
    /// d·Fr / H, controls surface interaction.
    pub shallow_ratio: f64,
}

/// The five characteristic coordinates of a jet trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JetGeometry {
    pub x_m: f64,
    pub z_m: f64,
    pub z_t: f64,
    pub x_r: f64,
    pub x_i: f64,
}

impl JetGeometry {
    pub fn to_array(&self) -> [f64; 5] {
        [self.x_m, self.z_m, self.z_t, self.x_r, self.x_i]
    }

    pub fn from_array([x_m, z_m, z_t, x_r, x_i]: [f64; 5]) -> Self {
        JetGeometry {
            x_m,
            z_m,
            z_t,
            x_r,
            x_i,
        }
    }

    /// Checks positivity and the ordering x_m ≤ x_r ≤ x_i, z_m ≤ z_t.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in TARGET_NAMES.iter().zip(self.to_array()) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Shape(format!("{name} must be positive (got {v})")));
            }
        }
        if self.x_r < self.x_m || self.x_i < self.x_r {
            return Err(Error::Shape(format!(
                "horizontal ordering violated: x_m={}, x_r={}, x_i={}",
                self.x_m, self.x_r, self.x_i
            )));
        }
        if self.z_t < self.z_m {
            return Err(Error::Shape(format!(
                "z_t={} below z_m={}",
                self.z_t, self.z_m
            )));
        }
        Ok(())
    }
}

/// g·|ρ_b − ρ_a|/ρ_a.
pub fn reduced_gravity(rho_b: f64, rho_a: f64) -> Result<f64> {
    if !(rho_a > 0.0) || !rho_b.is_finite() {
        return Err(Error::Domain(format!(
            "ambient density must be positive (rho_a = {rho_a})"
        )));
    }
    Ok(GRAVITY * (rho_b - rho_a).abs() / rho_a)
}

/// Densimetric Froude number U0/√(g₀′·d).
pub fn froude(u0: f64, g0p: f64, d: f64) -> Result<f64> {
    if g0p == 0.0 {
        return Err(Error::Domain(
            "Froude number undefined for neutral buoyancy (g0' = 0)".into(),
        ));
    }
    if !(g0p > 0.0) || !(d > 0.0) {
        return Err(Error::Domain(format!(
            "froude requires g0' > 0 and d > 0 (g0' = {g0p}, d = {d})"
        )));
    }
    Ok(u0 / (g0p * d).sqrt())
}

/// Momentum-buoyancy length scale (π/4)^¼·d·Fr.
pub fn length_scale(d: f64, fr: f64) -> Result<f64> {
    if !(d > 0.0) || !(fr > 0.0) {
        return Err(Error::Domain(format!(
            "length scale requires d > 0 and Fr > 0 (d = {d}, Fr = {fr})"
        )));
    }
    Ok((PI / 4.0).powf(0.25) * d * fr)
}

pub fn derive(case: &JetCase) -> Result<DerivedQuantities> {
    case.validate()?;
    let g0p = reduced_gravity(case.rho_b, case.rho_a)?;
    let q = PI * case.d * case.d * case.u0 / 4.0;
    let m = case.u0 * q;
    let b = g0p * q;
    let fr = froude(case.u0, g0p, case.d)?;
    let l_m = length_scale(case.d, fr)?;
    Ok(DerivedQuantities {
        g0p,
        q,
        m,
        b,
        fr,
        l_m,
        coanda_ratio: case.h_p / l_m,
        shallow_ratio: case.d * fr / case.depth,
    })
}

/// Result of a three-grid convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GciResult {
    /// Observed order of convergence.
    pub p: f64,
    /// GCI of the medium→fine pair (fraction, normalised by the fine value).
    pub gci_mf: f64,
    /// GCI of the coarse→medium pair (fraction, normalised by the medium value).
    pub gci_cm: f64,
    /// gci_mf·r^p / gci_cm; close to 1 inside the asymptotic range.
    pub asymptotic: f64,
}

/// Grid convergence index for solutions on coarse, medium and fine grids
/// with constant refinement ratio `r`.
pub fn gci(f_coarse: f64, f_medium: f64, f_fine: f64, r: f64) -> Result<GciResult> {
    if !(r > 1.0) {
        return Err(Error::Domain(format!("refinement ratio must exceed 1 (r = {r})")));
    }
    let e_cm = f_medium - f_coarse;
    let e_mf = f_fine - f_medium;
    if e_cm == 0.0 || e_mf == 0.0 {
        return Err(Error::Degenerate(
            "successive grid solutions must differ".into(),
        ));
    }
    if e_cm.signum() != e_mf.signum() {
        return Err(Error::Convergence(format!(
            "differences change sign ({e_cm} then {e_mf})"
        )));
    }
    let p = (e_cm.abs() / e_mf.abs()).ln() / r.ln();
    let rp = r.powf(p);
    let denom = rp - 1.0;
    if denom.abs() < 1e-12 || f_fine == 0.0 || f_medium == 0.0 {
        return Err(Error::Degenerate(format!(
            "observed order p = {p} gives r^p - 1 = {denom}"
        )));
    }
    let gci_mf = GCI_SAFETY_FACTOR * (e_mf / f_fine).abs() / denom;
    let gci_cm = GCI_SAFETY_FACTOR * (e_cm / f_medium).abs() / denom;
    Ok(GciResult {
        p,
        gci_mf,
        gci_cm,
        asymptotic: gci_mf * rp / gci_cm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn validation_case() -> JetCase {
        JetCase::new(45.0, 0.07, 0.15, 0.0058, 0.515, 1034.0, 997.0).unwrap()
    }

    #[test]
    fn reduced_gravity_examples() {
        assert!((reduced_gravity(1034.0, 997.0).unwrap() - 0.36406).abs() < 1e-5);
        assert_eq!(reduced_gravity(1000.0, 1000.0).unwrap(), 0.0);
        assert!((reduced_gravity(1059.0, 980.0).unwrap() - 9.81 * 79.0 / 980.0).abs() < 1e-15);
        assert!((reduced_gravity(1059.0, 980.0).unwrap() - 0.79086).abs() < 1e-4);
        assert!(matches!(reduced_gravity(1000.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn froude_examples() {
        assert!((froude(0.515, 0.36406, 0.0058).unwrap() - 11.207).abs() < 1e-3);
        assert_eq!(froude(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert!(matches!(froude(0.515, 0.0, 0.0058), Err(Error::Domain(_))));
    }

    #[test]
    fn length_scale_examples() {
        assert!((length_scale(0.0058, 11.207).unwrap() - 0.06119).abs() < 1e-5);
        assert!((length_scale(1.0, 1.0).unwrap() - 0.94137).abs() < 5e-5);
        assert!((length_scale(0.002, 1.0).unwrap() - 0.0018827).abs() < 1e-7);
    }

    #[test]
    fn derive_validation_case() {
        let q = derive(&validation_case()).unwrap();
        assert!((q.fr - 11.207).abs() < 1e-3);
        assert!((q.l_m - 0.06119).abs() < 1e-5);
        assert!((q.coanda_ratio - 1.144).abs() < 1e-3);
        assert!((q.shallow_ratio - 0.4334).abs() < 1e-4);
        // L_M = M^{3/4}/B^{1/2}
        assert_relative_eq!(q.l_m, q.m.powf(0.75) / q.b.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn derive_rejects_neutral_buoyancy_and_accepts_depth_boundary() {
        let mut c = validation_case();
        c.rho_b = c.rho_a;
        assert!(matches!(derive(&c), Err(Error::Validation(m)) if m.contains("rho_b")));
        let mut c = validation_case();
        c.depth = 2.0 * c.h_p;
        assert!(derive(&c).is_ok());
        c.depth = 1.999 * c.h_p;
        assert!(matches!(derive(&c), Err(Error::Validation(m)) if m.contains("2*h_p")));
    }

    #[test]
    fn gci_table_values() {
        let zm = gci(0.0639, 0.07153, 0.07315, 1.3).unwrap();
        assert!((zm.gci_mf - 0.00746).abs() < 1e-4);
        let xm = gci(0.11197, 0.11893, 0.12236, 1.3).unwrap();
        assert!((xm.gci_mf - 0.0340).abs() < 5e-4);
        assert!((zm.asymptotic - 1.0).abs() < 0.1);
    }

    #[test]
    fn gci_errors() {
        assert!(matches!(gci(1.0, 2.0, 3.0, 2.0), Err(Error::Degenerate(_))));
        assert!(matches!(gci(1.0, 2.0, 1.5, 2.0), Err(Error::Convergence(_))));
        assert!(matches!(gci(1.0, 1.0, 1.5, 2.0), Err(Error::Degenerate(_))));
    }

    fn arb_case() -> impl Strategy<Value = JetCase> {
        (
            5.0..80.0f64,
            0.02..4.0f64,
            0.0..2.0f64,
            0.002..0.39f64,
            0.059..4.96f64,
            1000.0..1059.0f64,
            0.1..20.0f64,
        )
            .prop_map(|(theta, h_p, extra, d, u0, rho_b, drho)| JetCase {
                theta,
                h_p,
                depth: 2.0 * h_p + extra,
                d,
                u0,
                rho_b,
                rho_a: rho_b - drho,
            })
    }

    proptest! {
        #[test]
        fn length_scale_identity(case in arb_case()) {
            let q = derive(&case).unwrap();
            let expected = (PI / 4.0).powf(0.25) * case.d * q.fr;
            prop_assert!(((q.l_m - expected) / expected).abs() < 1e-12);
        }

        #[test]
        fn froude_is_homogeneous(u0 in 0.01..5.0f64, g in 0.01..1.0f64, d in 0.001..0.5f64, k in 0.1..10.0f64) {
            let a = froude(k * u0, g, d).unwrap();
            let b = k * froude(u0, g, d).unwrap();
            prop_assert!(((a - b) / b).abs() < 1e-12);
        }

        #[test]
        fn derive_is_pure(case in arb_case()) {
            let a = derive(&case).unwrap();
            let b = derive(&case).unwrap();
            prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
        }
    }
}
