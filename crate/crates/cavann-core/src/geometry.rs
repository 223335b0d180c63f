//! Cavity geometry, Hermite-Gauss standing-wave modes and lattice placement.
//!
//! Lengths are measured in units of the reference wavelength
//! `λ_ref = 2 L / n_ref`, the plane-mirror wavelength of the reference
//! longitudinal index. All mode shapes are real standing waves with nodes
//! on both mirrors.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{CoreError, Result};

/// Symmetric two-mirror cavity with waist at the coordinate origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    /// Mirror separation L in units of λ_ref.
    pub length: f64,
    /// Mirror radius of curvature over cavity length, R/L.
    pub mirror_ratio: f64,
}

impl CavityGeometry {
    pub fn new(length: f64, mirror_ratio: f64) -> Result<Self> {
        let geom = Self { length, mirror_ratio };
        if !(length > 0.0) {
            return Err(CoreError::Config(format!("cavity length {length} must be positive")));
        }
        let g = 1.0 - 1.0 / mirror_ratio;
        if !(0.0..=1.0).contains(&(g * g)) || !(geom.rayleigh_range_sq() > 0.0) {
            return Err(CoreError::Config(format!(
                "unstable cavity: R/L = {mirror_ratio} gives (1 - L/R)^2 = {:.3}",
                g * g
            )));
        }
        Ok(geom)
    }

    fn rayleigh_range_sq(&self) -> f64 {
        let l = self.length;
        let r = self.mirror_ratio * l;
        l * (2.0 * r - l) / 4.0
    }

    /// Rayleigh range z_R = sqrt(L (2R - L)) / 2 of the symmetric cavity.
    pub fn rayleigh_range(&self) -> f64 {
        self.rayleigh_range_sq().sqrt()
    }

    /// Round-half-trip Gouy phase 2 arctan(L / (2 z_R)).
    pub fn gouy_half_trip(&self) -> f64 {
        2.0 * (self.length / (2.0 * self.rayleigh_range())).atan()
    }
}

/// Resonant wavenumber of the (n, l, m) Hermite-Gauss mode:
/// k = [nπ + (1 + l + m) · 2 arctan(L / 2z_R)] / L.
pub fn resonant_wavenumber(geom: &CavityGeometry, n: u32, l: u32, m: u32) -> Result<f64> {
    if n < 1 {
        return Err(CoreError::Config("longitudinal index n must be >= 1".into()));
    }
    let z_r = geom.rayleigh_range();
    if !z_r.is_finite() || !(z_r > 0.0) {
        return Err(CoreError::Config(format!(
            "unstable cavity: no real Rayleigh range for L = {}, R/L = {}",
            geom.length, geom.mirror_ratio
        )));
    }
    let gouy = geom.gouy_half_trip();
    Ok((n as f64 * PI + (1 + l + m) as f64 * gouy) / geom.length)
}

/// Physicists' Hermite polynomial H_order(t) by forward recurrence.
pub fn hermite(order: u32, t: f64) -> f64 {
    match order {
        0 => 1.0,
        1 => 2.0 * t,
        _ => {
            let mut hm = 1.0;
            let mut hc = 2.0 * t;
            for k in 2..=order {
                let hn = 2.0 * t * hc - 2.0 * (k - 1) as f64 * hm;
                hm = hc;
                hc = hn;
            }
            hc
        }
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// One standing-wave Hermite-Gauss cavity mode.
///
/// Points are `[x, y, z]` with z the cavity axis, x the transverse axis of
/// index `l` and y the transverse axis of index `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HGMode {
    pub n: u32,
    pub l: u32,
    pub m: u32,
    /// Resonant wavenumber (1/λ_ref units).
    pub k: f64,
    pub geometry: CavityGeometry,
}

impl HGMode {
    pub fn resonant(geom: &CavityGeometry, n: u32, l: u32, m: u32) -> Result<Self> {
        let k = resonant_wavenumber(geom, n, l, m)?;
        Ok(Self { n, l, m, k, geometry: *geom })
    }

    /// Mode wavelength 2π/k.
    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k
    }

    /// Waist radius w_0 = sqrt(z_R λ / π) using this mode's own wavelength.
    pub fn waist(&self) -> f64 {
        (self.geometry.rayleigh_range() * self.wavelength() / PI).sqrt()
    }

    /// Transverse normalization constant: unit L² norm of the waist profile,
    /// ∫∫ |envelope(x, y, 0)|² dx dy = 1.
    pub fn normalization(&self) -> f64 {
        let w0 = self.waist();
        let lm = 2f64.powi((self.l + self.m) as i32) * factorial(self.l) * factorial(self.m);
        1.0 / (0.5 * w0 * w0 * PI * lm).sqrt()
    }

    /// Real standing-wave amplitude at a point inside the cavity.
    ///
    /// The longitudinal factor is sin(φ(z, r²) + nπ/2) with
    /// φ = kz + k r² / 2R(z) − (1+l+m) arctan(z/z_R), which places nodes on
    /// both mirrors; for odd n it reduces to ±cos(φ), so the waist center is
    /// an antinode exactly when n is odd.
    pub fn amplitude(&self, point: [f64; 3]) -> f64 {
        let [x, y, z] = point;
        let zr = self.geometry.rayleigh_range();
        let w0 = self.waist();
        let wz = w0 * (1.0 + (z / zr).powi(2)).sqrt();
        let r2 = x * x + y * y;
        // k r²/(2 R(z)) written without the 1/R singularity at z = 0
        let curvature = self.k * r2 * z / (2.0 * (z * z + zr * zr));
        let gouy = (1 + self.l + self.m) as f64 * (z / zr).atan();
        let phase = self.k * z + curvature - gouy;
        let envelope = self.normalization()
            * (w0 / wz)
            * hermite(self.l, std::f64::consts::SQRT_2 * x / wz)
            * hermite(self.m, std::f64::consts::SQRT_2 * y / wz)
            * (-r2 / (wz * wz)).exp();
        envelope * (phase + (self.n % 4) as f64 * FRAC_PI_2).sin()
    }
}

/// Straight line of lattice sites in the x–z plane of the cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticePose {
    pub n_sites: usize,
    /// Site spacing d (λ_ref units).
    pub spacing: f64,
    /// First-site coordinates [x, y, z].
    pub origin: [f64; 3],
    /// In-plane angle from the cavity z-axis, degrees.
    pub angle_deg: f64,
}

impl LatticePose {
    pub fn new(n_sites: usize, spacing: f64, origin: [f64; 3], angle_deg: f64) -> Self {
        Self { n_sites, spacing, origin, angle_deg }
    }

    /// Unit vector along the lattice line.
    pub fn direction(&self) -> [f64; 3] {
        let phi = self.angle_deg.to_radians();
        [phi.sin(), 0.0, phi.cos()]
    }

    /// Position of site `i` (0-based).
    pub fn site_position(&self, i: usize) -> [f64; 3] {
        let dir = self.direction();
        let s = i as f64 * self.spacing;
        [
            self.origin[0] + s * dir[0],
            self.origin[1] + s * dir[1],
            self.origin[2] + s * dir[2],
        ]
    }

    /// Point at signed arclength `s` from site `i` along the lattice line.
    pub fn point_at(&self, i: usize, s: f64) -> [f64; 3] {
        let dir = self.direction();
        let p = self.site_position(i);
        [p[0] + s * dir[0], p[1] + s * dir[1], p[2] + s * dir[2]]
    }

    /// Check that every site lies inside the cavity volume (|z| < L/2).
    pub fn validate(&self, geom: &CavityGeometry) -> Result<()> {
        for i in 0..self.n_sites {
            let z = self.site_position(i)[2];
            if z.abs() >= geom.length / 2.0 {
                return Err(CoreError::Config(format!(
                    "lattice site {i} at z = {z:.3} lies outside the cavity (L/2 = {:.3})",
                    geom.length / 2.0
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> CavityGeometry {
        CavityGeometry::new(50.0, 2.0 / 3.0).unwrap()
    }

    #[test]
    fn rayleigh_range_matches_closed_form() {
        // z_R = L / (2 sqrt 3) for R/L = 2/3
        let g = reference();
        assert!((g.rayleigh_range() - 50.0 / (2.0 * 3f64.sqrt())).abs() < 1e-12);
        assert!((g.gouy_half_trip() - 2.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unstable_geometry_rejected() {
        // R < L/2 has no real waist
        assert!(CavityGeometry::new(50.0, 0.4).is_err());
        assert!(CavityGeometry::new(-1.0, 0.6667).is_err());
        // hand-built unstable struct is caught at the resonance condition
        let bad = CavityGeometry { length: 50.0, mirror_ratio: 0.4 };
        assert!(resonant_wavenumber(&bad, 100, 0, 0).is_err());
    }

    #[test]
    fn plane_mirror_limit_wavenumber() {
        // z_R -> infinity: k = nπ/L, λ_n = 2L/n
        let g = CavityGeometry { length: 50.0, mirror_ratio: 1e12 };
        let k = resonant_wavenumber(&g, 100, 0, 0).unwrap();
        assert!((k - 100.0 * PI / 50.0).abs() < 1e-6);
    }

    #[test]
    fn wavenumber_ordering() {
        let g = reference();
        let k_n = |n| resonant_wavenumber(&g, n, 0, 0).unwrap();
        assert!(k_n(101) > k_n(100));
        let k00 = resonant_wavenumber(&g, 100, 0, 0).unwrap();
        let k10 = resonant_wavenumber(&g, 100, 1, 0).unwrap();
        let k01 = resonant_wavenumber(&g, 100, 0, 1).unwrap();
        assert!(k10 > k00);
        assert!((k10 - k01).abs() < 1e-14);
    }

    #[test]
    fn waist_amplitude_conventions() {
        let g = reference();
        // odd n: antinode at the waist with amplitude C_00
        let odd = HGMode::resonant(&g, 101, 0, 0).unwrap();
        assert!((odd.amplitude([0.0, 0.0, 0.0]).abs() - odd.normalization()).abs() < 1e-12);
        // even n: node at the waist
        let even = HGMode::resonant(&g, 100, 0, 0).unwrap();
        assert!(even.amplitude([0.0, 0.0, 0.0]).abs() < 1e-12);
        // l = 1: zero on the x = 0 axis regardless of n
        let l1 = HGMode::resonant(&g, 101, 1, 0).unwrap();
        assert!(l1.amplitude([0.0, 0.0, 3.7]).abs() < 1e-12);
    }

    #[test]
    fn nodes_on_both_mirrors() {
        let g = reference();
        for (n, l) in [(100u32, 0u32), (101, 0), (137, 2), (199, 1)] {
            let mode = HGMode::resonant(&g, n, l, 0).unwrap();
            for z in [-25.0, 25.0] {
                // on-axis field vanishes at the mirror surface
                assert!(
                    mode.amplitude([0.0, 0.0, z]).abs() < 1e-9,
                    "mode ({n},{l}) amplitude at z = {z} not a node"
                );
            }
        }
    }

    #[test]
    fn amplitude_matches_independent_evaluation_on_grid() {
        // same closed form assembled a different way (complex exponentials)
        let g = reference();
        let mode = HGMode::resonant(&g, 123, 2, 0).unwrap();
        let zr = g.rayleigh_range();
        let w0 = mode.waist();
        for &(x, z) in &[(0.3, -2.0), (-1.1, 5.5), (0.9, -11.0), (1.7, 0.4)] {
            let wz = w0 * (1.0 + (z / zr) * (z / zr)).sqrt();
            let radius_inv = z / (z * z + zr * zr);
            let phase = mode.k * z + 0.5 * mode.k * x * x * radius_inv
                - 3.0 * (z / zr).atan()
                + (mode.n % 4) as f64 * FRAC_PI_2;
            let expect = mode.normalization()
                * (w0 / wz)
                * hermite(2, 2f64.sqrt() * x / wz)
                * (-x * x / (wz * wz)).exp()
                * phase.sin();
            let got = mode.amplitude([x, 0.0, z]);
            assert!((got - expect).abs() < 1e-12, "mismatch at ({x}, {z})");
        }
    }

    #[test]
    fn hermite_recurrence_values() {
        assert_eq!(hermite(0, 0.7), 1.0);
        assert_eq!(hermite(1, 0.7), 1.4);
        assert!((hermite(2, 0.7) - (4.0 * 0.49 - 2.0)).abs() < 1e-14);
        assert!((hermite(3, 0.5) - (8.0 * 0.125 - 12.0 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn pose_site_positions() {
        let pose = LatticePose::new(8, 0.6, [-1.2, 0.0, -3.0], 47.0);
        let p0 = pose.site_position(0);
        assert_eq!(p0, [-1.2, 0.0, -3.0]);
        let p1 = pose.site_position(1);
        let phi = 47f64.to_radians();
        assert!((p1[0] - (-1.2 + 0.6 * phi.sin())).abs() < 1e-14);
        assert!((p1[2] - (-3.0 + 0.6 * phi.cos())).abs() < 1e-14);
        assert!(pose.validate(&reference()).is_ok());
        let far = LatticePose::new(8, 10.0, [0.0, 0.0, 0.0], 0.0);
        assert!(far.validate(&reference()).is_err());
    }
}
