//! Entangled-pair inputs, waveplates, analyzers, temporal overlap.
//!
//! The source emits one photon into each spatial port with polarizations
//! entangled as (|HV> + e^{i phi} |VH>)/sqrt(2).  The phase phi selects the
//! spatial exchange symmetry of the pair: phi = 0 gives a bosonic
//! (spatially symmetric) pair, phi = pi a fermionic (antisymmetric) one,
//! and intermediate phases a weighted superposition of the two sectors.
//! A relative arm delay reduces the temporal wave-packet overlap g and
//! interpolates between interfering (g = 1) and distinguishable (g = 0)
//! photons.

use crate::error::{Error, Result};
use crate::fock::{two_port_register, FockState, ModeLabel, Polarization, Port};
use crate::transfer::{embed_block, TransferMatrix};
use crate::Complex;
use std::f64::consts::{FRAC_PI_2, PI};

const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// Pair phase phi, stored reduced to [0, 2pi).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BellPhase {
    phi: f64,
}

impl BellPhase {
    pub fn new(phi: f64) -> Self {
        BellPhase {
            phi: phi.rem_euclid(2.0 * PI),
        }
    }

    pub fn value(self) -> f64 {
        self.phi
    }

    /// e^{i phi} as a complex amplitude.
    pub fn factor(self) -> Complex {
        Complex::from_polar(1.0, self.phi)
    }
}

/// Gaussian wave packet set by the source wavelength and filter bandwidth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WavePacketSpec {
    center_wavelength_nm: f64,
    filter_fwhm_nm: f64,
}

impl WavePacketSpec {
    pub fn new(center_wavelength_nm: f64, filter_fwhm_nm: f64) -> Result<Self> {
        if !center_wavelength_nm.is_finite() || center_wavelength_nm <= 0.0 {
            return Err(Error::Config(format!(
                "center wavelength must be positive, got {center_wavelength_nm}"
            )));
        }
        if !filter_fwhm_nm.is_finite() || filter_fwhm_nm <= 0.0 {
            return Err(Error::Config(format!(
                "filter bandwidth must be positive, got {filter_fwhm_nm}"
            )));
        }
        if filter_fwhm_nm >= 0.2 * center_wavelength_nm {
            return Err(Error::Config(format!(
                "filter bandwidth {filter_fwhm_nm} nm is too wide for the \
                 narrowband overlap model at {center_wavelength_nm} nm"
            )));
        }
        Ok(WavePacketSpec {
            center_wavelength_nm,
            filter_fwhm_nm,
        })
    }

    pub fn center_wavelength_nm(self) -> f64 {
        self.center_wavelength_nm
    }

    pub fn filter_fwhm_nm(self) -> f64 {
        self.filter_fwhm_nm
    }

    /// Angular-frequency standard deviation of the packet in rad/s.
    ///
    /// The wavelength-domain FWHM maps to an angular-frequency FWHM of
    /// 2 pi c d_lambda / lambda^2, then to a Gaussian sigma through
    /// FWHM = 2 sqrt(2 ln 2) sigma.
    pub fn sigma_omega(self) -> f64 {
        let lambda = self.center_wavelength_nm * 1e-9;
        let dlambda = self.filter_fwhm_nm * 1e-9;
        let fwhm_omega = 2.0 * PI * SPEED_OF_LIGHT_M_PER_S * dlambda / (lambda * lambda);
        fwhm_omega / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
    }
}

/// 2x2 unitary polarization operator on the (H, V) basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JonesMatrix {
    m: [[Complex; 2]; 2],
}

impl JonesMatrix {
    /// Builds from explicit entries, rejecting non-unitary operators.
    pub fn from_rows(m: [[Complex; 2]; 2]) -> Result<Self> {
        let j = JonesMatrix { m };
        if !j.is_unitary(1e-12) {
            return Err(Error::Unphysical(
                "polarization operator is not unitary".into(),
            ));
        }
        Ok(j)
    }

    /// Retarder with the given phase delay along a fast axis at angle
    /// theta from H: R(theta) diag(1, e^{i GAMMA}) R(-theta).
    pub fn waveplate(retardance: f64, fast_axis: f64) -> Self {
        let (s, c) = fast_axis.sin_cos();
        let e = Complex::from_polar(1.0, retardance);
        let one = Complex::new(1.0, 0.0);
        let m = [
            [c * c * one + s * s * e, s * c * (one - e)],
            [s * c * (one - e), s * s * one + c * c * e],
        ];
        JonesMatrix { m }
    }

    pub fn quarter(fast_axis: f64) -> Self {
        JonesMatrix::waveplate(FRAC_PI_2, fast_axis)
    }

    pub fn half(fast_axis: f64) -> Self {
        JonesMatrix::waveplate(PI, fast_axis)
    }

    pub fn identity() -> Self {
        let one = Complex::new(1.0, 0.0);
        let zero = Complex::new(0.0, 0.0);
        JonesMatrix {
            m: [[one, zero], [zero, one]],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex {
        self.m[i][j]
    }

    /// self * inner, applied right to left like the optical path.
    pub fn compose(&self, inner: &JonesMatrix) -> JonesMatrix {
        let mut m = [[Complex::new(0.0, 0.0); 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = self.m[i][0] * inner.m[0][j] + self.m[i][1] * inner.m[1][j];
            }
        }
        JonesMatrix { m }
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let col0 = self.m[0][0].norm_sqr() + self.m[1][0].norm_sqr();
        let col1 = self.m[0][1].norm_sqr() + self.m[1][1].norm_sqr();
        let cross = self.m[0][0].conj() * self.m[0][1] + self.m[1][0].conj() * self.m[1][1];
        (col0 - 1.0).abs() < tol && (col1 - 1.0).abs() < tol && cross.norm() < tol
    }

    /// True when the two operators agree up to one global phase.
    pub fn matches_up_to_phase(&self, other: &JonesMatrix, tol: f64) -> bool {
        let mut anchor = (0, 0);
        let mut best = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                if self.m[i][j].norm() > best {
                    best = self.m[i][j].norm();
                    anchor = (i, j);
                }
            }
        }
        if best < tol {
            return false;
        }
        let phase = other.m[anchor.0][anchor.1] / self.m[anchor.0][anchor.1];
        if (phase.norm() - 1.0).abs() > tol {
            return false;
        }
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.m[i][j] * phase - other.m[i][j]).norm());
            }
        }
        worst < tol
    }

    /// The same operator as a mode map for embedding into a register.
    pub fn transfer_matrix(&self) -> TransferMatrix {
        TransferMatrix::new(vec![
            vec![self.m[0][0], self.m[0][1]],
            vec![self.m[1][0], self.m[1][1]],
        ])
        .expect("unitary polarization operator is passive")
    }
}

/// Sector weights of a two-photon polarization state, split by the
/// spatial exchange symmetry the pair forces on the splitter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetryWeights {
    /// Mass on the spatially symmetric (bosonic) sector.
    pub bosonic: f64,
    /// Mass on the spatially antisymmetric (fermionic) sector.
    pub fermionic: f64,
    /// Mass outside the one-photon-per-port sector.
    pub remainder: f64,
}

/// Polarization-entangled pair (|HV> + e^{i phi} |VH>)/sqrt(2), one
/// photon per spatial port, single temporal bin.
pub fn bell_input(phi: BellPhase) -> FockState {
    let register = two_port_register(1).expect("static two-port register");
    let amp = Complex::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    // Register order is (L,H), (L,V), (R,H), (R,V).
    let terms = vec![
        (vec![1, 0, 0, 1], amp),
        (vec![0, 1, 1, 0], amp * phi.factor()),
    ];
    FockState::from_terms(register, terms).expect("pair construction is static")
}

/// Decomposes a two-port polarization state into spatially symmetric and
/// antisymmetric sectors.
///
/// The one-photon-per-port sector splits into three exchange-symmetric
/// states (HH, VV, and the symmetric HV combination) and one
/// antisymmetric state (the HV singlet).  Mass outside that sector, for
/// example two photons in one port, is reported as `remainder`.
pub fn symmetry_weights(state: &FockState) -> Result<SymmetryWeights> {
    let register = two_port_register(1).expect("static two-port register");
    if state.register() != &register {
        return Err(Error::Config(
            "symmetry weights need a state on the plain two-port register".into(),
        ));
    }
    let a_hh = state.amplitude(&[1, 0, 1, 0]);
    let a_vv = state.amplitude(&[0, 1, 0, 1]);
    let a_hv = state.amplitude(&[1, 0, 0, 1]);
    let a_vh = state.amplitude(&[0, 1, 1, 0]);
    let sym = (a_hv + a_vh) * std::f64::consts::FRAC_1_SQRT_2;
    let anti = (a_hv - a_vh) * std::f64::consts::FRAC_1_SQRT_2;
    let bosonic = a_hh.norm_sqr() + a_vv.norm_sqr() + sym.norm_sqr();
    let fermionic = anti.norm_sqr();
    Ok(SymmetryWeights {
        bosonic,
        fermionic,
        remainder: (1.0 - bosonic - fermionic).max(0.0),
    })
}

/// Quarter-half-quarter retarder chain tuned to a pure differential
/// phase: Q(pi/4) H(pi/4 + phi/4) Q(pi/4) = diag(1, e^{i phi}) up to a
/// global phase.  Turning the half-wave plate by phi/4 advances the pair
/// phase by phi.
pub fn qhq_phase(phi: BellPhase) -> JonesMatrix {
    let q = JonesMatrix::quarter(std::f64::consts::FRAC_PI_4);
    let h = JonesMatrix::half(std::f64::consts::FRAC_PI_4 + phi.value() / 4.0);
    q.compose(&h).compose(&q)
}

/// Coincidence probability behind polarization analyzers at theta_1
/// (right arm) and theta_2 (left arm):
/// (1/2) |cos(theta_1) sin(theta_2) + e^{i phi} sin(theta_1) cos(theta_2)|^2.
///
/// phi = 0 collapses to (1/2) sin^2(theta_1 + theta_2), phi = pi to
/// (1/2) sin^2(theta_1 - theta_2).
pub fn analyzer_coincidence(phi: BellPhase, theta_1: f64, theta_2: f64) -> f64 {
    let amp = Complex::new(theta_1.cos() * theta_2.sin(), 0.0)
        + phi.factor() * theta_1.sin() * theta_2.cos();
    0.5 * amp.norm_sqr()
}

/// Delays the right arm: each right-port photon moves to the packet
/// g |bin 0> + sqrt(1 - g^2) |bin 1> while left-port photons stay in
/// bin 0.  The register is extended with a second temporal bin on every
/// channel; g = 1 reproduces the input, g = 0 makes the arms fully
/// distinguishable.
pub fn apply_delay(state: &FockState, g: f64) -> Result<FockState> {
    if !(0.0..=1.0).contains(&g) || !g.is_finite() {
        return Err(Error::Config(format!(
            "temporal overlap must lie in [0, 1], got {g}"
        )));
    }
    let mut register = state.register().clone();
    for label in state.register().labels().to_vec() {
        for temporal in [0u8, 1u8] {
            let l = ModeLabel { temporal, ..label };
            if register.position(&l).is_none() {
                register = register.with_mode(l)?;
            }
        }
    }
    let extended = state.embed(&register)?;
    let s = (1.0 - g * g).max(0.0).sqrt();
    let rotation = TransferMatrix::new(vec![
        vec![Complex::new(g, 0.0), Complex::new(-s, 0.0)],
        vec![Complex::new(s, 0.0), Complex::new(g, 0.0)],
    ])?;
    let mut u = TransferMatrix::identity(register.len());
    for label in register.labels().to_vec() {
        if label.port != Port::Right || label.temporal != 0 {
            continue;
        }
        let pair = [label, ModeLabel { temporal: 1, ..label }];
        u = embed_block(&register, &rotation, &pair)?.compose(&u)?;
    }
    crate::fock::evolve(&extended, &u)
}

/// Wave-packet overlap g for a mirror displaced dz from the balance
/// point; the round trip doubles the path difference.
pub fn overlap_from_position(dz_um: f64, packet: &WavePacketSpec) -> f64 {
    let tau = 2.0 * dz_um.abs() * 1e-6 / SPEED_OF_LIGHT_M_PER_S;
    let s = packet.sigma_omega() * tau;
    (-0.5 * s * s).exp()
}

/// Marks every mode a polarization, so Jones operators can be embedded
/// per port and temporal bin.
pub fn apply_jones(state: &FockState, j: &JonesMatrix, port: Port) -> Result<FockState> {
    let register = state.register().clone();
    let block = j.transfer_matrix();
    let mut u = TransferMatrix::identity(register.len());
    let mut touched = false;
    for label in register.labels().to_vec() {
        if label.port != port || label.polarization != Polarization::H {
            continue;
        }
        let partner = ModeLabel {
            polarization: Polarization::V,
            ..label
        };
        if register.position(&partner).is_none() {
            return Err(Error::Config(format!(
                "mode {label} has no V partner in the register"
            )));
        }
        u = embed_block(&register, &block, &[label, partner])?.compose(&u)?;
        touched = true;
    }
    if !touched {
        return Err(Error::Config(format!(
            "register has no {port} modes to act on"
        )));
    }
    crate::fock::evolve(state, &u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{
        coincidence_probability, distribution, two_port_register, FockState, Port,
    };
    use crate::optics::{lossless_bs, Sign};
    use crate::transfer::extend_internal;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn bell_phase_wraps_into_principal_range() {
        assert_relative_eq!(BellPhase::new(2.0 * PI + 1.0).value(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(BellPhase::new(-FRAC_PI_2).value(), 1.5 * PI, epsilon = 1e-12);
        assert_relative_eq!(BellPhase::new(0.0).value(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn wave_packet_rejects_unusable_bandwidths() {
        assert!(WavePacketSpec::new(0.0, 10.0).is_err());
        assert!(WavePacketSpec::new(810.0, 0.0).is_err());
        assert!(WavePacketSpec::new(810.0, -3.0).is_err());
        assert!(WavePacketSpec::new(810.0, 400.0).is_err());
        assert!(WavePacketSpec::new(810.0, 10.0).is_ok());
    }

    #[test]
    fn sigma_omega_matches_frozen_value() {
        let packet = WavePacketSpec::new(810.0, 10.0).unwrap();
        assert_relative_eq!(packet.sigma_omega(), 1.219193980e13, max_relative = 1e-9);
    }

    #[test]
    fn bell_input_places_one_photon_per_port() {
        let phi = BellPhase::new(0.7);
        let state = bell_input(phi);
        assert_eq!(state.register(), &two_port_register(1).unwrap());
        assert_eq!(state.total_photons(), 2);
        let amp = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(state.amplitude(&[1, 0, 0, 1]).re, amp, epsilon = 1e-12);
        assert_relative_eq!(state.amplitude(&[1, 0, 0, 1]).im, 0.0, epsilon = 1e-12);
        let cross = state.amplitude(&[0, 1, 1, 0]);
        assert_relative_eq!(cross.re, amp * 0.7f64.cos(), epsilon = 1e-12);
        assert_relative_eq!(cross.im, amp * 0.7f64.sin(), epsilon = 1e-12);
        assert_eq!(state.amplitude(&[1, 1, 0, 0]), c(0.0, 0.0));
    }

    #[test]
    fn symmetry_weights_follow_half_angle_law() {
        for k in 0..=20 {
            let phi = 2.0 * PI * k as f64 / 20.0;
            let w = symmetry_weights(&bell_input(BellPhase::new(phi))).unwrap();
            let half = phi / 2.0;
            assert_relative_eq!(w.bosonic, half.cos().powi(2), epsilon = 1e-12);
            assert_relative_eq!(w.fermionic, half.sin().powi(2), epsilon = 1e-12);
            assert!(w.remainder < 1e-12);
        }
        let w0 = symmetry_weights(&bell_input(BellPhase::new(0.0))).unwrap();
        assert_relative_eq!(w0.bosonic, 1.0, epsilon = 1e-12);
        let wpi = symmetry_weights(&bell_input(BellPhase::new(PI))).unwrap();
        assert_relative_eq!(wpi.fermionic, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetry_weights_report_mass_outside_the_pair_sector() {
        let register = two_port_register(1).unwrap();
        let bunched = FockState::from_occupation(register.clone(), vec![2, 0, 0, 0]).unwrap();
        let w = symmetry_weights(&bunched).unwrap();
        assert_relative_eq!(w.remainder, 1.0, epsilon = 1e-12);

        let mixed = FockState::from_terms(
            register,
            vec![(vec![1, 0, 1, 0], c(1.0, 0.0)), (vec![0, 2, 0, 0], c(1.0, 0.0))],
        )
        .unwrap();
        let w = symmetry_weights(&mixed).unwrap();
        assert_relative_eq!(w.bosonic, 0.5, epsilon = 1e-12);
        assert_relative_eq!(w.fermionic, 0.0, epsilon = 1e-12);
        assert_relative_eq!(w.remainder, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn symmetry_weights_reject_foreign_registers() {
        let register = two_port_register(2).unwrap();
        let state =
            FockState::from_occupation(register, vec![1, 0, 0, 0, 1, 0, 0, 0]).unwrap();
        assert!(symmetry_weights(&state).is_err());
    }

    #[test]
    fn waveplates_are_unitary() {
        for k in 0..8 {
            let theta = PI * k as f64 / 8.0;
            assert!(JonesMatrix::quarter(theta).is_unitary(1e-12));
            assert!(JonesMatrix::half(theta).is_unitary(1e-12));
            assert!(JonesMatrix::waveplate(0.9, theta).is_unitary(1e-12));
        }
        let bad = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.5, 0.0)]];
        assert!(JonesMatrix::from_rows(bad).is_err());
    }

    #[test]
    fn half_wave_plate_rotates_by_twice_the_axis_angle() {
        let h = JonesMatrix::half(PI / 8.0);
        let expected = [
            [
                c((PI / 4.0).cos(), 0.0),
                c((PI / 4.0).sin(), 0.0),
            ],
            [
                c((PI / 4.0).sin(), 0.0),
                c(-(PI / 4.0).cos(), 0.0),
            ],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(h.get(i, j).re, expected[i][j].re, epsilon = 1e-12);
                assert_relative_eq!(h.get(i, j).im, 0.0, epsilon = 1e-12);
            }
        }
        assert!(h.matches_up_to_phase(&JonesMatrix::from_rows(expected).unwrap(), 1e-12));
    }

    #[test]
    fn qhq_yields_a_pure_differential_phase() {
        for k in 0..=12 {
            let phi = 2.0 * PI * k as f64 / 12.0;
            let j = qhq_phase(BellPhase::new(phi));
            assert!(j.is_unitary(1e-12));
            let target = JonesMatrix::from_rows([
                [c(1.0, 0.0), c(0.0, 0.0)],
                [c(0.0, 0.0), Complex::from_polar(1.0, phi)],
            ])
            .unwrap();
            assert!(
                j.matches_up_to_phase(&target, 1e-10),
                "phi = {phi} not diagonal"
            );
        }
    }

    #[test]
    fn qhq_on_one_arm_converts_the_pair_phase() {
        for phi in [0.0, PI / 3.0, PI, 4.9] {
            let j = qhq_phase(BellPhase::new(phi));
            let register = two_port_register(1).unwrap();
            let pair = [
                ModeLabel {
                    port: Port::Left,
                    polarization: Polarization::H,
                    temporal: 0,
                },
                ModeLabel {
                    port: Port::Left,
                    polarization: Polarization::V,
                    temporal: 0,
                },
            ];
            let u = embed_block(&register, &j.transfer_matrix(), &pair).unwrap();
            let rotated = crate::fock::evolve(&bell_input(BellPhase::new(0.0)), &u).unwrap();
            let target = bell_input(BellPhase::new(phi));
            assert_relative_eq!(rotated.fidelity(&target).unwrap(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn apply_jones_matches_manual_embedding() {
        let j = qhq_phase(BellPhase::new(1.3));
        let state = bell_input(BellPhase::new(0.0));
        let via_helper = apply_jones(&state, &j, Port::Left).unwrap();
        let target = bell_input(BellPhase::new(1.3));
        assert_relative_eq!(via_helper.fidelity(&target).unwrap(), 1.0, epsilon = 1e-10);
        assert!(apply_jones(&state, &j, Port::Loss(0)).is_err());
    }

    #[test]
    fn analyzer_coincidence_reduces_to_angle_sum_laws() {
        for i in 0..10 {
            for j in 0..10 {
                let t1 = PI * i as f64 / 10.0;
                let t2 = PI * j as f64 / 10.0;
                assert_relative_eq!(
                    analyzer_coincidence(BellPhase::new(0.0), t1, t2),
                    0.5 * (t1 + t2).sin().powi(2),
                    epsilon = 1e-12
                );
                assert_relative_eq!(
                    analyzer_coincidence(BellPhase::new(PI), t1, t2),
                    0.5 * (t1 - t2).sin().powi(2),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn analyzer_coincidence_matches_the_projection_oracle() {
        for phi in [0.0, PI / 3.0, PI, 1.5 * PI] {
            let state = bell_input(BellPhase::new(phi));
            let a_hv = state.amplitude(&[1, 0, 0, 1]);
            let a_vh = state.amplitude(&[0, 1, 1, 0]);
            for i in 0..10 {
                for j in 0..10 {
                    let t1 = PI * i as f64 / 10.0 + 0.05;
                    let t2 = PI * j as f64 / 10.0 + 0.11;
                    // Projection onto cos|H> + sin|V> in each arm; the left
                    // analyzer sits at theta_2, the right one at theta_1.
                    let amp = a_hv * t2.cos() * t1.sin() + a_vh * t2.sin() * t1.cos();
                    assert_relative_eq!(
                        analyzer_coincidence(BellPhase::new(phi), t1, t2),
                        amp.norm_sqr(),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn analyzer_outcomes_sum_to_one() {
        let phi = BellPhase::new(2.1);
        for i in 0..8 {
            for j in 0..8 {
                let t1 = PI * i as f64 / 8.0 + 0.03;
                let t2 = PI * j as f64 / 8.0 + 0.07;
                let total = analyzer_coincidence(phi, t1, t2)
                    + analyzer_coincidence(phi, t1 + FRAC_PI_2, t2)
                    + analyzer_coincidence(phi, t1, t2 + FRAC_PI_2)
                    + analyzer_coincidence(phi, t1 + FRAC_PI_2, t2 + FRAC_PI_2);
                assert_relative_eq!(total, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn singlet_blocks_parallel_analyzers() {
        for k in 0..16 {
            let theta = PI * k as f64 / 16.0;
            let p = analyzer_coincidence(BellPhase::new(PI), theta, theta);
            assert!(p.abs() < 1e-12, "theta = {theta} leaked {p}");
        }
    }

    #[test]
    fn delay_extends_the_register_and_preserves_norm() {
        let state = bell_input(BellPhase::new(0.4));
        for g in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let delayed = apply_delay(&state, g).unwrap();
            assert_eq!(delayed.register().len(), 8);
            assert_eq!(delayed.total_photons(), 2);
            let norm: f64 = delayed.terms().map(|(_, a)| a.norm_sqr()).sum();
            assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
        }
        let unit = apply_delay(&state, 1.0).unwrap();
        let embedded = state.embed(unit.register()).unwrap();
        assert_relative_eq!(unit.fidelity(&embedded).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn delay_rejects_overlap_outside_the_unit_interval() {
        let state = bell_input(BellPhase::new(0.0));
        assert!(apply_delay(&state, -0.1).is_err());
        assert!(apply_delay(&state, 1.1).is_err());
        assert!(apply_delay(&state, f64::NAN).is_err());
    }

    #[test]
    fn delayed_pair_on_a_balanced_splitter_interpolates_coincidence() {
        let splitter = lossless_bs(std::f64::consts::FRAC_1_SQRT_2, Sign::Plus).unwrap();
        for g in [0.0, 0.3, 0.6, 1.0] {
            let delayed = apply_delay(&bell_input(BellPhase::new(0.0)), g).unwrap();
            let u = extend_internal(
                &splitter,
                &[Port::Left, Port::Right],
                delayed.register(),
            )
            .unwrap();
            let out = crate::fock::evolve(&delayed, &u).unwrap();
            let p = coincidence_probability(&distribution(&out));
            assert_relative_eq!(p, 0.5 * (1.0 - g * g), epsilon = 1e-10);
        }
    }

    #[test]
    fn overlap_curve_matches_frozen_fixtures() {
        let packet = WavePacketSpec::new(810.0, 10.0).unwrap();
        assert_relative_eq!(overlap_from_position(0.0, &packet), 1.0, epsilon = 1e-15);
        assert_relative_eq!(
            overlap_from_position(14.475901726, &packet),
            0.5,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            overlap_from_position(10.236008274, &packet).powi(2),
            0.5,
            epsilon = 1e-9
        );
        let g20 = overlap_from_position(20.0, &packet);
        let g30 = overlap_from_position(30.0, &packet);
        assert!(g20 * g20 > 0.05 && g30 * g30 < 0.05);
        assert_relative_eq!(
            overlap_from_position(-7.5, &packet),
            overlap_from_position(7.5, &packet),
            epsilon = 1e-15
        );
        let mut last = 1.0;
        for k in 1..=40 {
            let g = overlap_from_position(k as f64, &packet);
            assert!(g < last);
            last = g;
        }
    }
}
