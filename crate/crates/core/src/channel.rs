//! User placement, distance-based path loss, SIM-side spatial correlation
//! and correlated Rayleigh channel realizations `G = G̃ R^{1/2}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::{intra_layer_distance, SimGeometry};
use crate::numerics::CMatrix;
use crate::units::{db_to_linear, dbm_to_watts};
use crate::{Error, Result};

/// Propagation scenario around the base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Path loss at the 1 m reference distance, dB.
    pub c0_db: f64,
    pub alpha: f64,
    pub bs_height_m: f64,
    pub inner_radius_m: f64,
    pub outer_radius_m: f64,
    /// Per-user noise power, dBm.
    pub noise_dbm: f64,
    /// Total transmit power budget, dBm.
    pub power_dbm: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            c0_db: -35.0,
            alpha: 3.5,
            bs_height_m: 10.0,
            inner_radius_m: 100.0,
            outer_radius_m: 250.0,
            noise_dbm: -104.0,
            power_dbm: 10.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner_radius_m > 0.0 && self.inner_radius_m < self.outer_radius_m) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < inner_radius < outer_radius, got {} and {}",
                self.inner_radius_m, self.outer_radius_m
            )));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.bs_height_m >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bs_height must be non-negative, got {}",
                self.bs_height_m
            )));
        }
        for (k, v) in [("c0_db", self.c0_db), ("noise_dbm", self.noise_dbm), ("power_dbm", self.power_dbm)] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{k} must be finite")));
            }
        }
        Ok(())
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    pub fn power_watts(&self) -> f64 {
        dbm_to_watts(self.power_dbm)
    }
}

/// Horizontal distances, link distances and path-loss gains per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLayout {
    pub horizontal_distances: Vec<f64>,
    pub link_distances: Vec<f64>,
    pub path_losses: Vec<f64>,
}

impl UserLayout {
    pub fn users(&self) -> usize {
        self.path_losses.len()
    }

    /// Layout with explicit path-loss gains (distances left at zero).
    pub fn from_path_losses(path_losses: Vec<f64>) -> Self {
        let m = path_losses.len();
        Self {
            horizontal_distances: vec![0.0; m],
            link_distances: vec![0.0; m],
            path_losses,
        }
    }
}

/// One channel draw from the output layer to the users.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// M × N.
    pub g: CMatrix,
    pub layout: UserLayout,
    pub seed: u64,
}

/// Linear power gain `C₀ d^{−α}` for a link of `d ≥ 1` meters.
pub fn path_loss(d: f64, cfg: &ScenarioConfig) -> Result<f64> {
    if !(d >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "distance {d} m is below the 1 m reference distance"
        )));
    }
    Ok(db_to_linear(cfg.c0_db) * d.powf(-cfg.alpha))
}

/// Normalized sinc, `sin(πx)/(πx)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Isotropic-scattering correlation `[R]_{n,ñ} = sinc(2 r_{n,ñ}/λ)`.
pub fn correlation_matrix(geom: &SimGeometry) -> CMatrix {
    let n = geom.atoms();
    let lam = geom.wavelength();
    let mut r = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let d = intra_layer_distance(i + 1, j + 1, geom).expect("indices in range");
            let v = Complex64::new(sinc(2.0 * d / lam), 0.0);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

/// Places `users` users uniformly over the annulus area.
///
/// Only the horizontal distance matters, so the angle is not drawn. A
/// collapsed annulus (inner == outer) puts every user on the ring.
pub fn sample_layout<R: Rng + ?Sized>(rng: &mut R, cfg: &ScenarioConfig, users: usize) -> Result<UserLayout> {
    let (r1, r2) = (cfg.inner_radius_m, cfg.outer_radius_m);
    if !(r1 > 0.0 && r1 <= r2) {
        return Err(Error::InvalidArgument(format!("invalid annulus [{r1}, {r2}]")));
    }
    let mut horizontal = Vec::with_capacity(users);
    let mut link = Vec::with_capacity(users);
    let mut losses = Vec::with_capacity(users);
    for _ in 0..users {
        let u: f64 = rng.random();
        let radius = (r1 * r1 + u * (r2 * r2 - r1 * r1)).sqrt().clamp(r1, r2);
        let d = (cfg.bs_height_m * cfg.bs_height_m + radius * radius).sqrt();
        horizontal.push(radius);
        link.push(d);
        losses.push(path_loss(d, cfg)?);
    }
    Ok(UserLayout {
        horizontal_distances: horizontal,
        link_distances: link,
        path_losses: losses,
    })
}

/// Standard circularly-symmetric complex Gaussian with variance `var`.
pub fn cscg<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// i.i.d. rows `CN(0, ρ²_m I)` colored by `R^{1/2}` on the right. Draws
/// are taken row by row.
pub fn sample_correlated<R: Rng + ?Sized>(rng: &mut R, path_losses: &[f64], r_sqrt: &CMatrix) -> CMatrix {
    let n = r_sqrt.nrows();
    let m = path_losses.len();
    let mut g_iid = CMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            g_iid[(i, j)] = cscg(rng, path_losses[i]);
        }
    }
    g_iid * r_sqrt
}

pub fn sample_channel<R: Rng + ?Sized>(
    rng: &mut R,
    layout: &UserLayout,
    r_sqrt: &CMatrix,
    seed: u64,
) -> Result<ChannelRealization> {
    if r_sqrt.nrows() != r_sqrt.ncols() {
        return Err(Error::Dimension("correlation root must be square".into()));
    }
    Ok(ChannelRealization {
        g: sample_correlated(rng, &layout.path_losses, r_sqrt),
        layout: layout.clone(),
        seed,
    })
}
