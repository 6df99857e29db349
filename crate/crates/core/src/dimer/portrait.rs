use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fixed::{fixed_points, FixedPoint};
use super::{hamiltonian_unchecked, integrate_dimer_until_singular, DimerParams, DimerState, DimerTrajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitSettings {
    pub phi_points: usize,
    pub z_points: usize,
    /// Orbit starting points `(z, phi)`; empty picks a default fan.
    pub seeds: Vec<(f64, f64)>,
    pub orbit_span: f64,
    pub dtau: f64,
    pub stride: usize,
}

impl Default for PortraitSettings {
    fn default() -> Self {
        Self {
            phi_points: 400,
            z_points: 400,
            seeds: Vec::new(),
            orbit_span: 30.0,
            dtau: 1e-3,
            stride: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub start: (f64, f64),
    pub trajectory: DimerTrajectory,
}

impl Orbit {
    /// True when the phase runs through a full turn instead of librating.
    pub fn is_rotation(&self) -> bool {
        let (lo, hi) = self
            .trajectory
            .states
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.phi), hi.max(s.phi)));
        hi - lo > 2.0 * PI
    }
}

/// `H` on a `(phi, z)` grid plus a handful of integrated orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePortrait {
    pub params: DimerParams,
    pub phis: Vec<f64>,
    /// Cell-centered, so `|z| < 1` everywhere.
    pub zs: Vec<f64>,
    /// `energy[iz * phis.len() + iphi]`.
    pub energy: Vec<f64>,
    pub fixed_points: Vec<FixedPoint>,
    pub orbits: Vec<Orbit>,
}

impl PhasePortrait {
    /// CSV with columns `phi, z, H`.
    pub fn write_grid_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "phi,z,H")?;
        let np = self.phis.len();
        for (iz, z) in self.zs.iter().enumerate() {
            for (ip, phi) in self.phis.iter().enumerate() {
                writeln!(w, "{:.16e},{:.16e},{:.16e}", phi, z, self.energy[iz * np + ip])?;
            }
        }
        Ok(())
    }
}

fn default_seeds(points: &[FixedPoint]) -> Vec<(f64, f64)> {
    let mut seeds: Vec<(f64, f64)> = points.iter().map(|f| ((f.z + 0.05).min(0.99), f.phi())).collect();
    for z in [-0.9, -0.5, 0.0, 0.5, 0.9] {
        seeds.push((z, PI / 2.0));
    }
    seeds
}

pub fn phase_portrait(p: &DimerParams, settings: &PortraitSettings) -> Result<PhasePortrait> {
    if settings.phi_points < 2 || settings.z_points < 2 {
        return Err(Error::InvalidParameter("portrait grid needs at least 2x2 points".into()));
    }
    let phis: Vec<f64> = (0..settings.phi_points)
        .map(|i| -PI + 2.0 * PI * i as f64 / (settings.phi_points - 1) as f64)
        .collect();
    let zs: Vec<f64> = (0..settings.z_points)
        .map(|i| -1.0 + (2.0 * i as f64 + 1.0) / settings.z_points as f64)
        .collect();
    let energy: Vec<f64> = zs
        .par_iter()
        .flat_map_iter(|&z| {
            let root = (1.0 - z * z).sqrt();
            phis.iter().map(move |&phi| hamiltonian_unchecked(z, phi, root, p))
        })
        .collect();
    let points = fixed_points(p);
    let seeds = if settings.seeds.is_empty() {
        default_seeds(&points)
    } else {
        settings.seeds.clone()
    };
    let orbits = seeds
        .par_iter()
        .map(|&(z, phi)| {
            let trajectory = integrate_dimer_until_singular(
                &DimerState::new(z, phi),
                p,
                settings.orbit_span,
                settings.dtau,
                settings.stride,
            )?;
            Ok(Orbit {
                start: (z, phi),
                trajectory,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhasePortrait {
        params: *p,
        phis,
        zs,
        energy,
        fixed_points: points,
        orbits,
    })
}
