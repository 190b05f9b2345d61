//! Synthetic experiments: position scans, polarization fringes, Poisson
//! count synthesis, and curve fitting.
//!
//! A scan moves the retroreflecting mirror of one arm, which sweeps the
//! temporal overlap g through a Gaussian, and records the coincidence
//! level behind the sample normalized to the fully distinguishable
//! (g = 0) baseline.  Every probability runs through the full mode
//! engine; the closed-form coincidence expressions exist only as an
//! independent cross-check and are never substituted for it.

use crate::error::{Error, Result};
use crate::fock::{coincidence_probability, distribution, evolve, FockDistribution, Port};
use crate::optim::lm_multistart;
use crate::rng::poisson_count;
use crate::states::{
    analyzer_coincidence, apply_delay, bell_input, overlap_from_position, BellPhase,
    WavePacketSpec,
};
use crate::tmm::{stack_response, LayerStack};
use crate::transfer::{extend_internal, TransferMatrix};
use crate::Complex;
use rayon::prelude::*;
use serde::Serialize;

/// Spatial exchange symmetry a pair forces at the sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Symmetry {
    Bosonic,
    Fermionic,
}

impl Symmetry {
    pub fn sign(self) -> f64 {
        match self {
            Symmetry::Bosonic => 1.0,
            Symmetry::Fermionic => -1.0,
        }
    }
}

/// Closed-form coincidence probability for a symmetric two-port sample:
/// P = |t|^4 + |r|^4 + s * 2 Re(t^2 conj(r)^2) g^2 with s = +1 for a
/// bosonic pair and -1 for a fermionic one.
pub fn analytic_coincidence(t: Complex, r: Complex, symmetry: Symmetry, g: f64) -> Result<f64> {
    analytic_pair_coincidence(t, r, r, phase_of(symmetry), g)
}

fn phase_of(symmetry: Symmetry) -> BellPhase {
    match symmetry {
        Symmetry::Bosonic => BellPhase::new(0.0),
        Symmetry::Fermionic => BellPhase::new(std::f64::consts::PI),
    }
}

/// Closed-form coincidence probability for a general passive two-port
/// sample and pair phase phi: the interfering fraction g^2 sees the
/// two-photon amplitude t^2 + cos(phi)-weighted r_l r_r exchange term,
/// the distinguishable remainder adds classically.
pub fn analytic_pair_coincidence(
    t: Complex,
    r_left: Complex,
    r_right: Complex,
    phi: BellPhase,
    g: f64,
) -> Result<f64> {
    TransferMatrix::new(vec![vec![t, r_right], vec![r_left, t]])?;
    if !(0.0..=1.0).contains(&g) || !g.is_finite() {
        return Err(Error::Config(format!(
            "temporal overlap must lie in [0, 1], got {g}"
        )));
    }
    let rho = r_left * r_right;
    let classical = t.norm_sqr() * t.norm_sqr() + rho.norm_sqr();
    let exchange = 2.0 * (t * t * rho.conj()).re;
    let p = classical + phi.value().cos() * exchange * g * g;
    Ok(p.clamp(0.0, 1.0))
}

/// Two-port sample under test: either an explicit scattering matrix or
/// a multilayer stack resolved through the thin-film model.
#[derive(Clone, Debug)]
pub enum Sample {
    Matrix(TransferMatrix),
    Stack(LayerStack),
}

impl Sample {
    /// Spatial scattering matrix of the sample in the beam basis.
    pub fn matrix(&self) -> Result<TransferMatrix> {
        match self {
            Sample::Matrix(m) => {
                if m.nrows() != 2 || m.ncols() != 2 {
                    return Err(Error::Config(format!(
                        "sample matrix must be 2x2, got {}x{}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                Ok(m.clone())
            }
            Sample::Stack(stack) => stack_response(stack)?.transfer_matrix(),
        }
    }
}

/// One mirror-position scan: geometry, pair phase, sample, noise model.
#[derive(Clone, Debug)]
pub struct ScanConfig {
    pub positions_um: Vec<f64>,
    pub phi: BellPhase,
    pub sample: Sample,
    pub packet: WavePacketSpec,
    /// Mean coincidence counts at the distinguishable baseline.
    pub reference_counts: f64,
    pub rng_seed: u64,
    pub noise: bool,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.positions_um.is_empty() {
            return Err(Error::Config("scan needs at least one position".into()));
        }
        for pair in self.positions_um.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(Error::Config(format!(
                    "positions must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if self.positions_um.iter().any(|z| !z.is_finite()) {
            return Err(Error::Config("positions must be finite".into()));
        }
        if self.noise && !(self.reference_counts > 0.0) {
            return Err(Error::Config(format!(
                "reference counts must be positive when noise is on, got {}",
                self.reference_counts
            )));
        }
        Ok(())
    }
}

/// One scan point; counts and shot error appear only when noise is on.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScanPoint {
    pub position_um: f64,
    pub probability: f64,
    pub normalized: f64,
    pub counts: Option<u64>,
    pub shot_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    /// Exact coincidence probability at g = 0, the normalization level.
    pub baseline_probability: f64,
    /// Echo of the reference level when counts were synthesized.
    pub reference_counts: Option<f64>,
}

/// Output distribution of a delayed pair sent through a two-port sample.
///
/// Lossy samples are dilated first, so absorbed photons land in loss
/// modes instead of being discarded.
pub fn engine_distribution(
    sample: &TransferMatrix,
    phi: BellPhase,
    g: f64,
) -> Result<FockDistribution> {
    if sample.nrows() != 2 || sample.ncols() != 2 {
        return Err(Error::Config(format!(
            "sample matrix must be 2x2, got {}x{}",
            sample.nrows(),
            sample.ncols()
        )));
    }
    let delayed = apply_delay(&bell_input(phi), g)?;
    let (state, u) = if sample.is_unitary(1e-10) {
        let u = extend_internal(sample, &[Port::Left, Port::Right], delayed.register())?;
        (delayed, u)
    } else {
        let dilated = sample.dilate()?;
        let register = delayed.register().with_loss_pair()?;
        let state = delayed.embed(&register)?;
        let u = extend_internal(
            &dilated,
            &[Port::Left, Port::Right, Port::Loss(0), Port::Loss(1)],
            &register,
        )?;
        (state, u)
    };
    Ok(distribution(&evolve(&state, &u)?))
}

/// Coincidence probability through the full engine path.
pub fn engine_coincidence(sample: &TransferMatrix, phi: BellPhase, g: f64) -> Result<f64> {
    Ok(coincidence_probability(&engine_distribution(sample, phi, g)?))
}

/// Runs a mirror-position scan.  Points are computed in parallel; noise
/// draws are keyed by (seed, point index) so the schedule cannot change
/// the output.
pub fn hom_scan(config: &ScanConfig) -> Result<ScanResult> {
    config.validate()?;
    let matrix = config.sample.matrix()?;
    let baseline = engine_coincidence(&matrix, config.phi, 0.0)?;
    if baseline <= 1e-15 {
        return Err(Error::Config(
            "baseline coincidence probability vanishes; the normalized scan is undefined".into(),
        ));
    }
    let points = config
        .positions_um
        .par_iter()
        .enumerate()
        .map(|(index, &position_um)| {
            let g = overlap_from_position(position_um, &config.packet);
            let probability = engine_coincidence(&matrix, config.phi, g)?;
            let normalized = probability / baseline;
            let (counts, shot_error) = if config.noise {
                let n = synthesize_counts(
                    probability,
                    baseline,
                    config.reference_counts,
                    config.rng_seed,
                    index as u64,
                );
                (Some(n), Some((n as f64).sqrt()))
            } else {
                (None, None)
            };
            Ok(ScanPoint {
                position_um,
                probability,
                normalized,
                counts,
                shot_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult {
        points,
        baseline_probability: baseline,
        reference_counts: config.noise.then_some(config.reference_counts),
    })
}

/// Poisson counts with mean reference * (prob / baseline), deterministic
/// in (seed, index) regardless of evaluation order.
pub fn synthesize_counts(
    prob: f64,
    baseline_prob: f64,
    reference_counts: f64,
    seed: u64,
    index: u64,
) -> u64 {
    let mean = reference_counts * prob / baseline_prob;
    if !mean.is_finite() {
        return 0;
    }
    poisson_count(mean, seed, index)
}

/// CSV serialization of a scan, one row per point.  Counts columns are
/// left empty when the scan was noiseless.
pub fn scan_csv(result: &ScanResult) -> String {
    let mut out = String::from("position_um,probability,normalized,counts,shot_error\n");
    for p in &result.points {
        let counts = p.counts.map(|n| n.to_string()).unwrap_or_default();
        let shot = p.shot_error.map(|e| e.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.position_um, p.probability, p.normalized, counts, shot
        ));
    }
    out
}

/// Analyzer fringe: coincidence vs theta_1 at fixed theta_2.
pub fn polarization_scan(phi: BellPhase, theta2: f64, theta1_grid: &[f64]) -> Vec<(f64, f64)> {
    theta1_grid
        .iter()
        .map(|&t1| (t1, analyzer_coincidence(phi, t1, theta2)))
        .collect()
}

/// Fringe of a pair mixed with an unpolarized background: the entangled
/// fraction (1 - lambda) keeps its fringe, the background contributes a
/// flat 1/4 floor, so the fitted visibility drops to 1 - lambda.
pub fn polarization_scan_mixed(
    phi: BellPhase,
    theta2: f64,
    theta1_grid: &[f64],
    lambda_mix: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(0.0..=1.0).contains(&lambda_mix) {
        return Err(Error::Config(format!(
            "mixing fraction must lie in [0, 1], got {lambda_mix}"
        )));
    }
    Ok(theta1_grid
        .iter()
        .map(|&t1| {
            let ideal = analyzer_coincidence(phi, t1, theta2);
            (t1, (1.0 - lambda_mix) * ideal + lambda_mix * 0.25)
        })
        .collect())
}

/// Fitted fringe A + B cos(2(theta - theta_0)) with B >= 0.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub visibility: f64,
}

/// Least-squares fringe fit.  The model is linear in
/// (A, B cos 2theta_0, B sin 2theta_0), so the fit is exact and
/// deterministic; a rank-deficient grid is a fit failure, a flat curve
/// is simply zero visibility.
pub fn fit_sinusoid(curve: &[(f64, f64)]) -> Result<SinusoidFit> {
    if curve.len() < 6 {
        return Err(Error::Config(format!(
            "fringe fit needs at least 6 points, got {}",
            curve.len()
        )));
    }
    let span = curve.iter().map(|&(t, _)| t).fold(f64::NEG_INFINITY, f64::max)
        - curve.iter().map(|&(t, _)| t).fold(f64::INFINITY, f64::min);
    if span < std::f64::consts::PI - 1e-9 {
        return Err(Error::Config(format!(
            "fringe grid must cover a full period (span pi), got span {span:.6}"
        )));
    }
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for &(theta, y) in curve {
        let basis = nalgebra::Vector3::new(1.0, (2.0 * theta).cos(), (2.0 * theta).sin());
        ata += basis * basis.transpose();
        atb += basis * y;
    }
    let solved = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::FitFailure("fringe grid is rank-deficient".into()))?;
    let offset = solved[0];
    let amplitude = solved[1].hypot(solved[2]);
    if !(offset.is_finite() && amplitude.is_finite()) || offset <= 0.0 {
        return Err(Error::FitFailure(format!(
            "degenerate fringe fit: offset {offset}"
        )));
    }
    Ok(SinusoidFit {
        offset,
        amplitude,
        phase: 0.5 * solved[2].atan2(solved[1]),
        visibility: amplitude / offset,
    })
}

/// Fringe visibility (max - min)/(max + min) of the fitted sinusoid.
pub fn visibility(curve: &[(f64, f64)]) -> Result<f64> {
    Ok(fit_sinusoid(curve)?.visibility)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BellTestResult {
    pub v1: f64,
    pub v2: f64,
    pub s: f64,
    pub non_classical: bool,
}

/// S = sqrt(2) (V1 + V2); values above 2 are non-classical.
pub fn bell_parameter(v1: f64, v2: f64) -> Result<BellTestResult> {
    for (name, v) in [("V1", v1), ("V2", v2)] {
        if !(0.0..=1.0 + 1e-9).contains(&v) {
            return Err(Error::Config(format!(
                "{name} must be a visibility in [0, 1], got {v}"
            )));
        }
    }
    let (v1, v2) = (v1.min(1.0), v2.min(1.0));
    let s = std::f64::consts::SQRT_2 * (v1 + v2);
    Ok(BellTestResult {
        v1,
        v2,
        s,
        non_classical: s > 2.0,
    })
}

/// Fringe visibilities in the H/V basis (theta_2 = 0) and the D/A basis
/// (theta_2 = pi/4) for a pair mixed with an unpolarized background.
pub fn bell_visibilities(phi: BellPhase, lambda_mix: f64) -> Result<(f64, f64)> {
    let grid: Vec<f64> = (0..=32)
        .map(|k| std::f64::consts::PI * k as f64 / 32.0)
        .collect();
    let v1 = visibility(&polarization_scan_mixed(phi, 0.0, &grid, lambda_mix)?)?;
    let v2 = visibility(&polarization_scan_mixed(
        phi,
        std::f64::consts::FRAC_PI_4,
        &grid,
        lambda_mix,
    )?)?;
    Ok((v1, v2))
}

/// Gaussian feature fit y(z) = b + a exp(-(z - z0)^2 / (2 w^2)).
/// Width is `None` when the curve carried no feature to size.
#[derive(Clone, Debug, Serialize)]
pub struct HomFit {
    pub baseline: f64,
    pub amplitude: f64,
    pub center_um: f64,
    pub width_um: Option<f64>,
    pub baseline_se: f64,
    pub amplitude_se: f64,
    pub center_se: f64,
    pub width_se: Option<f64>,
    pub chi2: f64,
}

impl HomFit {
    /// Fitted normalized level at the feature center.
    pub fn extremum(&self) -> f64 {
        self.baseline + self.amplitude
    }
}

fn gaussian_model(p: &[f64], z: f64) -> f64 {
    let d = z - p[2];
    p[0] + p[1] * (-d * d / (2.0 * p[3] * p[3])).exp()
}

/// Fits the Gaussian feature model to a scan.
///
/// Noisy scans are fitted on counts / reference with shot-noise weights;
/// noiseless scans on the exact normalized level.  Four deterministic
/// starts perturb the data-derived guess; the lowest chi-squared
/// converged fit wins, earlier starts win ties.
pub fn fit_hom_curve(result: &ScanResult) -> Result<HomFit> {
    if result.points.len() < 8 {
        return Err(Error::Config(format!(
            "feature fit needs at least 8 points, got {}",
            result.points.len()
        )));
    }
    let data: Vec<(f64, f64, f64)> = result
        .points
        .iter()
        .map(|p| match (p.counts, result.reference_counts) {
            (Some(n), Some(reference)) => (
                p.position_um,
                n as f64 / reference,
                (n as f64).sqrt().max(1.0) / reference,
            ),
            _ => (p.position_um, p.normalized, 1.0),
        })
        .collect();
    let y_min = data.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
    let y_max = data.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
    if y_max - y_min < 1e-9 {
        let mean = data.iter().map(|d| d.1).sum::<f64>() / data.len() as f64;
        let chi2 = data
            .iter()
            .map(|&(_, y, s)| ((y - mean) / s).powi(2))
            .sum::<f64>();
        let mid = 0.5 * (data[0].0 + data[data.len() - 1].0);
        return Ok(HomFit {
            baseline: mean,
            amplitude: 0.0,
            center_um: mid,
            width_um: None,
            baseline_se: 0.0,
            amplitude_se: 0.0,
            center_se: 0.0,
            width_se: None,
            chi2,
        });
    }
    let b0 = 0.5 * (data[0].1 + data[data.len() - 1].1);
    let peak = data
        .iter()
        .enumerate()
        .max_by(|a, b| {
            (a.1 .1 - b0)
                .abs()
                .partial_cmp(&(b.1 .1 - b0).abs())
                .unwrap()
        })
        .map(|(i, _)| i)
        .unwrap();
    let a0 = data[peak].1 - b0;
    let z0 = data[peak].0;
    let span = data[data.len() - 1].0 - data[0].0;
    // Half-width estimate: walk outward until the excursion halves.
    let mut w0 = span / 8.0;
    for step in 1..data.len() {
        let reach = [peak.checked_sub(step), Some(peak + step)];
        if let Some(i) = reach
            .into_iter()
            .flatten()
            .find(|&i| i < data.len() && (data[i].1 - b0).abs() < 0.5 * a0.abs())
        {
            w0 = ((data[i].0 - z0).abs() / (2.0 * std::f64::consts::LN_2).sqrt()).max(span / 50.0);
            break;
        }
    }
    let residuals = move |p: &[f64]| -> Vec<f64> {
        data.iter()
            .map(|&(z, y, s)| (gaussian_model(p, z) - y) / s)
            .collect()
    };
    let starts = vec![
        vec![b0, a0, z0, w0],
        vec![b0, a0, z0, 0.5 * w0],
        vec![b0, a0, z0, 2.0 * w0],
        vec![b0, 0.5 * a0, z0, 1.5 * w0],
    ];
    let fit = lm_multistart(&residuals, &starts, 400)?;
    let amplitude = fit.params[1];
    let feature = amplitude.abs() >= 1e-9;
    Ok(HomFit {
        baseline: fit.params[0],
        amplitude,
        center_um: fit.params[2],
        width_um: feature.then(|| fit.params[3].abs()),
        baseline_se: fit.standard_error(0),
        amplitude_se: fit.standard_error(1),
        center_se: fit.standard_error(2),
        width_se: feature.then(|| fit.standard_error(3)),
        chi2: fit.chi2,
    })
}

/// Feature orientation of a normalized scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ExtremumKind {
    Dip,
    Peak,
}

/// Classical bound on the normalized coincidence extremum.
pub fn classical_limit(kind: ExtremumKind) -> f64 {
    match kind {
        ExtremumKind::Dip => 0.5,
        ExtremumKind::Peak => 1.5,
    }
}

/// True when a fitted extremum crosses its classical limit.
pub fn beats_classical_limit(kind: ExtremumKind, extremum: f64) -> bool {
    match kind {
        ExtremumKind::Dip => extremum < classical_limit(kind),
        ExtremumKind::Peak => extremum > classical_limit(kind),
    }
}
