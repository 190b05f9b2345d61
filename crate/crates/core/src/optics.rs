//! Beamsplitter models: lossless two-port splitters, the ideal
//! half-amplitude lossy splitter, and the standing-wave absorber composite.

use crate::error::{Error, Result};
use crate::transfer::TransferMatrix;
use crate::Complex;

/// Sign choice in the reflection amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Target amplitudes (t, r) for a two-port sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamsplitterSpec {
    pub t: Complex,
    pub r: Complex,
}

impl BeamsplitterSpec {
    pub fn new(t: Complex, r: Complex) -> Result<Self> {
        let power = t.norm_sqr() + r.norm_sqr();
        if power > 1.0 + 1e-10 {
            return Err(Error::Unphysical(format!(
                "|t|^2 + |r|^2 = {power:.12} exceeds 1"
            )));
        }
        Ok(BeamsplitterSpec { t, r })
    }

    /// True for unit total power with the quadrature phase between r and t.
    pub fn is_lossless(&self) -> bool {
        let power = self.t.norm_sqr() + self.r.norm_sqr();
        if (power - 1.0).abs() >= 1e-10 {
            return false;
        }
        if self.t.norm() < 1e-12 || self.r.norm() < 1e-12 {
            return true;
        }
        let rel = (self.r / self.t).arg().abs();
        (rel - std::f64::consts::FRAC_PI_2).abs() < 1e-9
    }

    pub fn matrix(&self) -> Result<TransferMatrix> {
        TransferMatrix::new(vec![vec![self.t, self.r], vec![self.r, self.t]])
    }
}

/// Lossless symmetric splitter: t real, r = sign * i * sqrt(1 - t^2).
pub fn lossless_bs(t_mag: f64, sign: Sign) -> Result<TransferMatrix> {
    if !(0.0..=1.0).contains(&t_mag) {
        return Err(Error::Config(format!("transmission magnitude {t_mag} outside [0, 1]")));
    }
    let t = Complex::new(t_mag, 0.0);
    let r = Complex::new(0.0, sign.value() * (1.0 - t_mag * t_mag).sqrt());
    TransferMatrix::new(vec![vec![t, r], vec![r, t]])
}

/// Ideal lossy splitter with t = +-r = 0.5.
pub fn lossy_bs(sign: Sign) -> TransferMatrix {
    let t = Complex::new(0.5, 0.0);
    let r = Complex::new(0.5 * sign.value(), 0.0);
    TransferMatrix::new(vec![vec![t, r], vec![r, t]])
        .expect("half-amplitude splitter is passive")
}

/// Survival amplitudes of the two standing-wave modes: the cosine wave
/// (symmetric port combination) and the sine wave (antisymmetric).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QswChannel {
    pub s_c: Complex,
    pub s_s: Complex,
}

impl QswChannel {
    pub fn new(s_c: Complex, s_s: Complex) -> Result<Self> {
        for (name, s) in [("cosine", s_c), ("sine", s_s)] {
            if s.norm() > 1.0 + 1e-10 {
                return Err(Error::Unphysical(format!(
                    "{name} survival amplitude {:.12} exceeds 1",
                    s.norm()
                )));
            }
        }
        Ok(QswChannel { s_c, s_s })
    }
}

/// Port-basis matrix of "split into standing waves, attenuate each, and
/// recombine": with the basis change B = (1/sqrt 2)[[1,1],[1,-1]], the
/// composite B' diag(s_C, s_S) B reduces to
/// [[(s_C+s_S)/2, (s_C-s_S)/2], [(s_C-s_S)/2, (s_C+s_S)/2]].
pub fn qsw_composite(channel: QswChannel) -> TransferMatrix {
    let half_sum = (channel.s_c + channel.s_s) * 0.5;
    let half_diff = (channel.s_c - channel.s_s) * 0.5;
    TransferMatrix::new(vec![
        vec![half_sum, half_diff],
        vec![half_diff, half_sum],
    ])
    .expect("attenuated standing-wave composite is passive")
}
