//! SIM geometry, Rayleigh-Sommerfeld layer coupling and the cascaded
//! wave-domain response `B = Φ^L W^L ⋯ Φ² W² Φ¹ W¹`.
//!
//! Atom and antenna indices in the public functions are 1-based, matching
//! the usual grid notation (`n_x = mod(n−1, n_max)+1`, `n_y = ⌈n/n_max⌉`).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::CMatrix;
use crate::units::wavelength_from_ghz;
use crate::{Error, Result};

/// Physical layout of the metasurface stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimGeometry {
    layers: usize,
    atoms: usize,
    n_max: usize,
    streams: usize,
    thickness: f64,
    element_spacing: f64,
    atom_area: f64,
    wavelength: f64,
    layer_spacing: f64,
}

impl SimGeometry {
    /// Builds and validates a geometry. Lengths are in meters.
    ///
    /// The inter-layer spacing is `thickness / (layers − 1)`; a single-layer
    /// stack uses the full thickness as the antenna-to-layer spacing.
    pub fn new(
        layers: usize,
        atoms: usize,
        streams: usize,
        wavelength: f64,
        thickness: f64,
        element_spacing: f64,
        atom_area: f64,
    ) -> Result<Self> {
        if layers < 1 {
            return Err(Error::Geometry("at least one layer is required".into()));
        }
        let n_max = (atoms as f64).sqrt().round() as usize;
        if n_max * n_max != atoms || atoms == 0 {
            return Err(Error::Geometry(format!(
                "atoms per layer must be a positive perfect square, got {atoms}"
            )));
        }
        if streams < 1 || streams > atoms {
            return Err(Error::Geometry(format!(
                "need 1 <= streams <= atoms, got streams={streams}, atoms={atoms}"
            )));
        }
        for (name, v) in [
            ("wavelength", wavelength),
            ("thickness", thickness),
            ("element_spacing", element_spacing),
            ("atom_area", atom_area),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Geometry(format!("{name} must be positive, got {v}")));
            }
        }
        let layer_spacing = if layers >= 2 {
            thickness / (layers - 1) as f64
        } else {
            thickness
        };
        Ok(Self {
            layers,
            atoms,
            n_max,
            streams,
            thickness,
            element_spacing,
            atom_area,
            wavelength,
            layer_spacing,
        })
    }

    /// Geometry with lengths expressed in carrier wavelengths.
    pub fn from_wavelengths(
        layers: usize,
        atoms: usize,
        streams: usize,
        carrier_ghz: f64,
        thickness_wl: f64,
        element_spacing_wl: f64,
        atom_area_wl_sq: f64,
    ) -> Result<Self> {
        if !(carrier_ghz > 0.0) {
            return Err(Error::Geometry(format!("carrier must be positive, got {carrier_ghz} GHz")));
        }
        let lambda = wavelength_from_ghz(carrier_ghz);
        Self::new(
            layers,
            atoms,
            streams,
            lambda,
            thickness_wl * lambda,
            element_spacing_wl * lambda,
            atom_area_wl_sq * lambda * lambda,
        )
    }

    /// The reference setup: 28 GHz, D = 5λ, r_e = λ/2, s_a = λ²/4.
    pub fn reference(layers: usize, atoms: usize, streams: usize) -> Result<Self> {
        Self::from_wavelengths(layers, atoms, streams, 28.0, 5.0, 0.5, 0.25)
    }

    pub fn layers(&self) -> usize {
        self.layers
    }
    pub fn atoms(&self) -> usize {
        self.atoms
    }
    pub fn n_max(&self) -> usize {
        self.n_max
    }
    pub fn streams(&self) -> usize {
        self.streams
    }
    pub fn thickness(&self) -> f64 {
        self.thickness
    }
    pub fn element_spacing(&self) -> f64 {
        self.element_spacing
    }
    pub fn atom_area(&self) -> f64 {
        self.atom_area
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn layer_spacing(&self) -> f64 {
        self.layer_spacing
    }

    fn check_atom(&self, n: usize) -> Result<()> {
        if n < 1 || n > self.atoms {
            return Err(Error::IndexOutOfRange { index: n, max: self.atoms });
        }
        Ok(())
    }
}

/// Grid coordinates `(n_x, n_y)` of the 1-based atom index `n`.
pub fn atom_grid_index(n: usize, n_max: usize) -> Result<(usize, usize)> {
    if n_max == 0 || n < 1 || n > n_max * n_max {
        return Err(Error::IndexOutOfRange { index: n, max: n_max * n_max });
    }
    Ok(((n - 1) % n_max + 1, n.div_ceil(n_max)))
}

/// Distance between atoms `n` and `ñ` of the same layer.
pub fn intra_layer_distance(n: usize, n_tilde: usize, geom: &SimGeometry) -> Result<f64> {
    geom.check_atom(n)?;
    geom.check_atom(n_tilde)?;
    let (x1, y1) = atom_grid_index(n, geom.n_max)?;
    let (x2, y2) = atom_grid_index(n_tilde, geom.n_max)?;
    let dx = x1 as f64 - x2 as f64;
    let dy = y1 as f64 - y2 as f64;
    Ok(geom.element_spacing * (dx * dx + dy * dy).sqrt())
}

/// Distance from transmit antenna `m` to atom `n` of the first layer.
///
/// The antennas form a half-wavelength ULA along the grid's y axis,
/// centered on the first layer.
pub fn antenna_to_first_layer_distance(m: usize, n: usize, geom: &SimGeometry) -> Result<f64> {
    if m < 1 || m > geom.streams {
        return Err(Error::IndexOutOfRange { index: m, max: geom.streams });
    }
    geom.check_atom(n)?;
    let (nx, ny) = atom_grid_index(n, geom.n_max)?;
    let center = (geom.n_max as f64 + 1.0) / 2.0;
    let antenna_offset = (m as f64 - (geom.streams as f64 + 1.0) / 2.0) * geom.wavelength / 2.0;
    let along = (ny as f64 - center) * geom.element_spacing - antenna_offset;
    let across = (nx as f64 - center) * geom.element_spacing;
    let ds = geom.layer_spacing;
    Ok((along * along + across * across + ds * ds).sqrt())
}

/// Rayleigh-Sommerfeld transmission coefficient over `distance` meters.
pub fn diffraction_coefficient(distance: f64, geom: &SimGeometry) -> Result<Complex64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "propagation distance must be positive, got {distance}"
        )));
    }
    let lambda = geom.wavelength;
    let amplitude = geom.layer_spacing * geom.atom_area / (distance * distance);
    let obliquity = Complex64::new(1.0 / (2.0 * PI * distance), -1.0 / lambda);
    let phase = Complex64::from_polar(1.0, 2.0 * PI * distance / lambda);
    Ok(obliquity * phase * amplitude)
}

/// Per-atom transmission phases of every layer, stored as an `L × N` matrix
/// of angles in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfiguration {
    phases: DMatrix<f64>,
}

/// Reduces an angle into `[0, 2π)`.
pub fn wrap_phase(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

impl PhaseConfiguration {
    /// Canonicalizes every angle modulo 2π.
    pub fn new(phases: DMatrix<f64>) -> Result<Self> {
        if phases.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite phase".into()));
        }
        Ok(Self {
            phases: phases.map(wrap_phase),
        })
    }

    pub fn zeros(layers: usize, atoms: usize) -> Self {
        Self {
            phases: DMatrix::zeros(layers, atoms),
        }
    }

    /// Builds from layer-major angles (`layer 1 atoms..., layer 2 atoms...`).
    pub fn from_layers(layers: usize, atoms: usize, angles: &[f64]) -> Result<Self> {
        if angles.len() != layers * atoms {
            return Err(Error::Dimension(format!(
                "expected {} phases, got {}",
                layers * atoms,
                angles.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(layers, atoms, angles))
    }

    pub fn layers(&self) -> usize {
        self.phases.nrows()
    }
    pub fn atoms(&self) -> usize {
        self.phases.ncols()
    }
    pub fn angles(&self) -> &DMatrix<f64> {
        &self.phases
    }

    /// Angle of atom `n` (0-based) on layer `l` (0-based).
    pub fn angle(&self, l: usize, n: usize) -> f64 {
        self.phases[(l, n)]
    }

    /// Unit-modulus coefficients `e^{jφ}` of layer `l` (0-based).
    pub fn coefficients(&self, l: usize) -> Vec<Complex64> {
        self.phases
            .row(l)
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect()
    }

    /// Layer-major angles.
    pub fn to_layers(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.phases.len());
        for l in 0..self.layers() {
            out.extend(self.phases.row(l).iter());
        }
        out
    }

    /// Adds `delta` (same shape) and re-wraps.
    pub fn shifted(&self, delta: &DMatrix<f64>, scale: f64) -> Self {
        Self {
            phases: self.phases.zip_map(delta, |p, d| wrap_phase(p + scale * d)),
        }
    }
}

/// Propagation matrices `W¹` (antennas to layer 1) and `W², …, W^L`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationStack {
    pub input: CMatrix,
    pub inter_layer: Vec<CMatrix>,
}

impl PropagationStack {
    pub fn layers(&self) -> usize {
        self.inter_layer.len() + 1
    }
    pub fn atoms(&self) -> usize {
        self.input.nrows()
    }
    pub fn streams(&self) -> usize {
        self.input.ncols()
    }

    /// `W^l` for 1-based `l`.
    pub fn matrix(&self, l: usize) -> &CMatrix {
        if l == 1 {
            &self.input
        } else {
            &self.inter_layer[l - 2]
        }
    }
}

/// Inter-layer coupling between adjacent layers (all `l ≥ 2` share it).
pub fn inter_layer_matrix(geom: &SimGeometry) -> Result<CMatrix> {
    let n = geom.atoms;
    let ds = geom.layer_spacing;
    let mut w = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let r = intra_layer_distance(i + 1, j + 1, geom)?;
            let c = diffraction_coefficient((r * r + ds * ds).sqrt(), geom)?;
            w[(i, j)] = c;
            w[(j, i)] = c;
        }
    }
    Ok(w)
}

pub fn build_propagation_stack(geom: &SimGeometry) -> Result<PropagationStack> {
    let mut input = CMatrix::zeros(geom.atoms, geom.streams);
    for n in 0..geom.atoms {
        for m in 0..geom.streams {
            let d = antenna_to_first_layer_distance(m + 1, n + 1, geom)?;
            input[(n, m)] = diffraction_coefficient(d, geom)?;
        }
    }
    let inter = if geom.layers > 1 {
        inter_layer_matrix(geom)?
    } else {
        CMatrix::zeros(0, 0)
    };
    let inter_layer = (1..geom.layers).map(|_| inter.clone()).collect();
    Ok(PropagationStack { input, inter_layer })
}

fn scale_rows(x: &mut CMatrix, coeffs: &[Complex64]) {
    for (i, c) in coeffs.iter().enumerate() {
        for v in x.row_mut(i).iter_mut() {
            *v *= c;
        }
    }
}

fn check_config(stack: &PropagationStack, cfg: &PhaseConfiguration) -> Result<()> {
    if cfg.layers() != stack.layers() || cfg.atoms() != stack.atoms() {
        return Err(Error::Dimension(format!(
            "phase configuration is {}x{} but the stack has {} layers of {} atoms",
            cfg.layers(),
            cfg.atoms(),
            stack.layers(),
            stack.atoms()
        )));
    }
    Ok(())
}

/// Intermediate products `X_l = Φ^l W^l X_{l−1}` for `l = 1..L`
/// (`X_L = B`). Used by the gradient's adjoint pass.
pub fn cascade_intermediates(
    stack: &PropagationStack,
    cfg: &PhaseConfiguration,
) -> Result<Vec<CMatrix>> {
    check_config(stack, cfg)?;
    let mut out = Vec::with_capacity(stack.layers());
    let mut x = stack.input.clone();
    scale_rows(&mut x, &cfg.coefficients(0));
    out.push(x);
    for l in 1..stack.layers() {
        let mut next = &stack.inter_layer[l - 1] * out.last().unwrap();
        scale_rows(&mut next, &cfg.coefficients(l));
        out.push(next);
    }
    Ok(out)
}

/// Overall SIM response `B` (N × M).
pub fn cascade_response(stack: &PropagationStack, cfg: &PhaseConfiguration) -> Result<CMatrix> {
    Ok(cascade_intermediates(stack, cfg)?.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::diag;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom(layers: usize, atoms: usize, streams: usize) -> SimGeometry {
        SimGeometry::reference(layers, atoms, streams).unwrap()
    }

    #[test]
    fn grid_index() {
        assert_eq!(atom_grid_index(1, 3).unwrap(), (1, 1));
        assert_eq!(atom_grid_index(5, 3).unwrap(), (2, 2));
        assert_eq!(atom_grid_index(9, 3).unwrap(), (3, 3));
        assert_eq!(atom_grid_index(4, 3).unwrap(), (1, 2));
        assert!(atom_grid_index(0, 3).is_err());
        assert!(atom_grid_index(10, 3).is_err());
    }

    #[test]
    fn geometry_validation() {
        assert!(SimGeometry::reference(2, 50, 2).is_err());
        assert!(SimGeometry::reference(0, 16, 2).is_err());
        assert!(SimGeometry::reference(2, 4, 5).is_err());
        assert!(SimGeometry::reference(2, 16, 0).is_err());
        let g = geom(4, 49, 4);
        assert!((g.layer_spacing() - g.thickness() / 3.0).abs() < 1e-15);
        let g1 = geom(1, 16, 2);
        assert_eq!(g1.layer_spacing(), g1.thickness());
    }

    #[test]
    fn intra_layer_distances() {
        let g = geom(2, 9, 1);
        let re = g.element_spacing();
        assert_eq!(intra_layer_distance(4, 4, &g).unwrap(), 0.0);
        assert!((intra_layer_distance(1, 2, &g).unwrap() - re).abs() < 1e-15);
        assert!((intra_layer_distance(1, 5, &g).unwrap() - re * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            intra_layer_distance(3, 7, &g).unwrap(),
            intra_layer_distance(7, 3, &g).unwrap()
        );
        assert!(intra_layer_distance(1, 10, &g).is_err());
    }

    #[test]
    fn antenna_distance_centered() {
        let g = geom(2, 9, 1);
        // Atom 5 is the center of the 3x3 grid.
        assert!((antenna_to_first_layer_distance(1, 5, &g).unwrap() - g.layer_spacing()).abs() < 1e-15);
        for n in 1..=9 {
            assert!(antenna_to_first_layer_distance(1, n, &g).unwrap() >= g.layer_spacing());
        }
        assert!(antenna_to_first_layer_distance(2, 1, &g).is_err());
    }

    #[test]
    fn antenna_distance_hand_evaluated() {
        // M=2, N=9 (n_max=3), L=4, D=5λ → d_s = 5λ/3, r_e = λ/2.
        let g = geom(4, 9, 2);
        let lam = g.wavelength();
        assert!((g.layer_spacing() - 5.0 * lam / 3.0).abs() < 1e-15);
        // m=1, n=1: along = (1-2)λ/2 - (1-1.5)λ/2 = -λ/4, across = -λ/2.
        let expect = lam * (1.0f64 / 16.0 + 1.0 / 4.0 + 25.0 / 9.0).sqrt();
        assert!((antenna_to_first_layer_distance(1, 1, &g).unwrap() - expect).abs() < 1e-15);
        // m=2, n=1: along = -λ/2 - λ/4 = -3λ/4.
        let expect = lam * (9.0f64 / 16.0 + 1.0 / 4.0 + 25.0 / 9.0).sqrt();
        assert!((antenna_to_first_layer_distance(2, 1, &g).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn diffraction_unit_case() {
        // λ = 1, d_s = 1 (single layer, D = 1), s_a = 1/4, distance = λ.
        let g = SimGeometry::new(1, 4, 1, 1.0, 1.0, 0.5, 0.25).unwrap();
        let w = diffraction_coefficient(1.0, &g).unwrap();
        assert!((w.re - 0.25 / (2.0 * PI)).abs() < 1e-14);
        assert!((w.im + 0.25).abs() < 1e-14);
        assert!(diffraction_coefficient(0.0, &g).is_err());
        assert!(diffraction_coefficient(-1.0, &g).is_err());
    }

    #[test]
    fn diffraction_modulus_and_wavelength_dependence() {
        let g = geom(3, 16, 2);
        let d = 0.07;
        let w = diffraction_coefficient(d, &g).unwrap();
        let lam = g.wavelength();
        let expect = g.layer_spacing() * g.atom_area() / (d * d)
            * ((1.0 / (2.0 * PI * d)).powi(2) + 1.0 / (lam * lam)).sqrt();
        assert!((w.norm() - expect).abs() < 1e-12 * expect);

        let g2 = SimGeometry::new(3, 16, 2, 2.0 * lam, g.thickness(), g.element_spacing(), g.atom_area()).unwrap();
        let w2 = diffraction_coefficient(d, &g2).unwrap();
        let direct = Complex64::new(1.0 / (2.0 * PI * d), -1.0 / (2.0 * lam))
            * Complex64::from_polar(1.0, 2.0 * PI * d / (2.0 * lam))
            * (g2.layer_spacing() * g2.atom_area() / (d * d));
        assert!((w2 - direct).norm() < 1e-12 * direct.norm());
    }

    #[test]
    fn stack_structure() {
        let g = geom(3, 16, 2);
        let s = build_propagation_stack(&g).unwrap();
        assert_eq!(s.layers(), 3);
        assert_eq!(s.input.shape(), (16, 2));
        let w = &s.inter_layer[0];
        assert_eq!(w.shape(), (16, 16));
        for i in 0..16 {
            assert_eq!(w[(i, i)], w[(0, 0)]);
            for j in 0..16 {
                assert_eq!(w[(i, j)], w[(j, i)]);
            }
        }
        assert_eq!(build_propagation_stack(&g).unwrap(), s);
    }

    #[test]
    fn stack_entrywise_oracle() {
        let g = geom(2, 4, 2);
        let s = build_propagation_stack(&g).unwrap();
        let ds = g.layer_spacing();
        for n in 1..=4 {
            for m in 1..=2 {
                let d = antenna_to_first_layer_distance(m, n, &g).unwrap();
                assert_eq!(s.input[(n - 1, m - 1)], diffraction_coefficient(d, &g).unwrap());
            }
            for k in 1..=4 {
                let r = intra_layer_distance(n, k, &g).unwrap();
                let c = diffraction_coefficient((r * r + ds * ds).sqrt(), &g).unwrap();
                assert_eq!(s.inter_layer[0][(n - 1, k - 1)], c);
            }
        }
    }

    fn random_config(rng: &mut ChaCha8Rng, l: usize, n: usize) -> PhaseConfiguration {
        let v: Vec<f64> = (0..l * n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        PhaseConfiguration::from_layers(l, n, &v).unwrap()
    }

    #[test]
    fn single_layer_zero_phase_is_input_matrix() {
        let g = geom(1, 9, 2);
        let s = build_propagation_stack(&g).unwrap();
        let b = cascade_response(&s, &PhaseConfiguration::zeros(1, 9)).unwrap();
        assert_eq!(b, s.input);
    }

    #[test]
    fn cascade_matches_naive_product() {
        let g = geom(3, 4, 2);
        let s = build_propagation_stack(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = random_config(&mut rng, 3, 4);
        let b = cascade_response(&s, &cfg).unwrap();
        let mut naive = diag(&cfg.coefficients(0)) * &s.input;
        for l in 1..3 {
            naive = diag(&cfg.coefficients(l)) * (&s.inter_layer[l - 1] * naive);
        }
        for (x, y) in b.iter().zip(naive.iter()) {
            assert!((x - y).norm() < 1e-12 * naive.camax().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn global_phase_and_periodicity() {
        let g = geom(3, 9, 2);
        let s = build_propagation_stack(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cfg = random_config(&mut rng, 3, 9);
        let b = cascade_response(&s, &cfg).unwrap();
        let theta = 0.7;
        let mut shift = DMatrix::zeros(3, 9);
        shift.row_mut(1).fill(theta);
        let b2 = cascade_response(&s, &cfg.shifted(&shift, 1.0)).unwrap();
        let rot = Complex64::from_polar(1.0, theta);
        let scale = b.camax();
        for (x, y) in b.iter().zip(b2.iter()) {
            assert!((x * rot - y).norm() < 1e-12 * scale);
        }
        // 2π periodicity.
        let raw = cfg.angles().map(|p| p + 2.0 * PI);
        let b3 = cascade_response(&s, &PhaseConfiguration::new(raw).unwrap()).unwrap();
        for (x, y) in b.iter().zip(b3.iter()) {
            assert!((x - y).norm() < 1e-12 * scale);
        }
    }

    #[test]
    fn phase_wrapping() {
        let cfg = PhaseConfiguration::from_layers(1, 3, &[-0.5, 2.0 * PI, 7.0]).unwrap();
        for &p in cfg.angles().iter() {
            assert!((0.0..2.0 * PI).contains(&p));
        }
        assert!((cfg.angle(0, 0) - (2.0 * PI - 0.5)).abs() < 1e-15);
        assert_eq!(cfg.angle(0, 1), 0.0);
        assert!(wrap_phase(-1e-18) < 2.0 * PI);
        for c in cfg.coefficients(0) {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
        assert!(cascade_response(
            &build_propagation_stack(&geom(2, 4, 1)).unwrap(),
            &PhaseConfiguration::zeros(1, 4)
        )
        .is_err());
    }
}
