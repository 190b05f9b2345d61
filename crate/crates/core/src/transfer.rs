//! Mode transfer matrices, loss dilation, and register embedding.

use crate::error::{Error, Result};
use crate::fock::{ModeLabel, ModeRegister, Port};
use crate::rng::{uniform, Philox};
use crate::Complex;
use nalgebra::DMatrix;

/// Slack allowed on the largest singular value of a passive map before it
/// is rejected as gain.
pub const SINGULAR_TOL: f64 = 1e-10;

/// Linear map between optical mode amplitudes.
///
/// Rows index output modes, columns input modes: out_i = sum_j M[i][j] in_j.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    m: DMatrix<Complex>,
}

impl TransferMatrix {
    /// Build from a row-major nested list. Rejects gain (singular value
    /// above 1 by more than the tolerance); values inside the tolerance
    /// band are accepted as rounding.
    pub fn new(rows: Vec<Vec<Complex>>) -> Result<Self> {
        let nr = rows.len();
        if nr == 0 {
            return Err(Error::Config("empty transfer matrix".into()));
        }
        let nc = rows[0].len();
        if rows.iter().any(|r| r.len() != nc) {
            return Err(Error::Config("ragged transfer matrix".into()));
        }
        let m = DMatrix::from_fn(nr, nc, |i, j| rows[i][j]);
        Self::from_matrix(m)
    }

    pub fn from_matrix(m: DMatrix<Complex>) -> Result<Self> {
        let tm = TransferMatrix { m };
        let sigma = tm.max_singular_value();
        if sigma > 1.0 + SINGULAR_TOL {
            return Err(Error::Unphysical(format!(
                "transfer matrix has gain: max singular value {sigma:.3e}"
            )));
        }
        Ok(tm)
    }

    /// Identity on `n` modes.
    pub fn identity(n: usize) -> Self {
        TransferMatrix { m: DMatrix::identity(n, n) }
    }

    pub fn nrows(&self) -> usize {
        self.m.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.m.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex> {
        &self.m
    }

    pub fn max_singular_value(&self) -> f64 {
        self.m
            .clone()
            .singular_values()
            .iter()
            .fold(0.0f64, |acc, s| acc.max(*s))
    }

    /// True when the max-abs entry of U†U - I is below `tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_residual() < tol
    }

    /// Max-abs entry of U†U - I; large for non-square or lossy maps.
    pub fn unitarity_residual(&self) -> f64 {
        if self.m.nrows() != self.m.ncols() {
            return f64::INFINITY;
        }
        let n = self.m.nrows();
        let gram = self.m.adjoint() * &self.m;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { Complex::new(1.0, 0.0) } else { Complex::new(0.0, 0.0) };
                worst = worst.max((gram[(i, j)] - expect).norm());
            }
        }
        worst
    }

    pub fn compose(&self, inner: &TransferMatrix) -> Result<TransferMatrix> {
        if self.ncols() != inner.nrows() {
            return Err(Error::Config(format!(
                "cannot compose {}x{} after {}x{}",
                self.nrows(),
                self.ncols(),
                inner.nrows(),
                inner.ncols()
            )));
        }
        Ok(TransferMatrix { m: &self.m * &inner.m })
    }

    /// Unitary dilation of a passive map.
    ///
    /// Embeds an m x m matrix M in a 2m x 2m unitary
    ///   [ M              (I - MM†)^1/2 ]
    ///   [ (I - M†M)^1/2  -M†           ]
    /// with the Hermitian square roots taken through the singular value
    /// decomposition M = W S V†. The extra m modes are loss channels. The
    /// top-left block holds M exactly; singular values within rounding
    /// slack above 1 are clamped to 1.
    pub fn dilate(&self) -> Result<TransferMatrix> {
        let n = self.m.nrows();
        if n != self.m.ncols() {
            return Err(Error::Config("dilation needs a square matrix".into()));
        }
        let svd = self.m.clone().svd(true, true);
        let w = svd.u.as_ref().ok_or_else(|| Error::Config("svd failed".into()))?;
        let vt = svd.v_t.as_ref().ok_or_else(|| Error::Config("svd failed".into()))?;
        let mut defect = DMatrix::<Complex>::zeros(n, n);
        for (k, s) in svd.singular_values.iter().enumerate() {
            let mut s = *s;
            if s > 1.0 {
                if s <= 1.0 + SINGULAR_TOL {
                    s = 1.0;
                } else {
                    return Err(Error::Unphysical(format!(
                        "cannot dilate a matrix with gain: singular value {s:.3e}"
                    )));
                }
            }
            defect[(k, k)] = Complex::new((1.0 - s * s).sqrt(), 0.0);
        }
        let d_l = w * &defect * w.adjoint();
        let d_r = vt.adjoint() * &defect * vt;
        let mut big = DMatrix::<Complex>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                big[(i, j)] = self.m[(i, j)];
                big[(i, n + j)] = d_l[(i, j)];
                big[(n + i, j)] = d_r[(i, j)];
                big[(n + i, n + j)] = -self.m[(j, i)].conj();
            }
        }
        let out = TransferMatrix { m: big };
        if !out.is_unitary(1e-10) {
            return Err(Error::Unphysical("dilation failed to produce a unitary".into()));
        }
        Ok(out)
    }
}

/// Embed a block acting on the named register modes, identity elsewhere.
pub fn embed_block(
    register: &ModeRegister,
    block: &TransferMatrix,
    modes: &[ModeLabel],
) -> Result<TransferMatrix> {
    let n = register.len();
    if block.nrows() != modes.len() || block.ncols() != modes.len() {
        return Err(Error::Config(format!(
            "block is {}x{} but {} modes were named",
            block.nrows(),
            block.ncols(),
            modes.len()
        )));
    }
    let mut index = Vec::with_capacity(modes.len());
    for label in modes {
        let i = register
            .position(label)
            .ok_or_else(|| Error::Config(format!("mode {label} not in register")))?;
        index.push(i);
    }
    let mut m = DMatrix::<Complex>::identity(n, n);
    for (bi, &gi) in index.iter().enumerate() {
        m[(gi, gi)] = Complex::new(0.0, 0.0);
        for (bj, &gj) in index.iter().enumerate() {
            m[(gi, gj)] = block.get(bi, bj);
        }
    }
    TransferMatrix::from_matrix(m)
}

/// Extend a map over spatial ports to the full register.
///
/// `m` is indexed by `ports` (row/column k belongs to ports[k]); the
/// extension acts identically on every (polarization, temporal) channel
/// and as identity on ports the map does not reference:
/// entry ((p,pol,t),(p',pol',t')) = m[p,p'] when pol=pol' and t=t'.
pub fn extend_internal(
    m: &TransferMatrix,
    ports: &[Port],
    register: &ModeRegister,
) -> Result<TransferMatrix> {
    if m.nrows() != ports.len() || m.ncols() != ports.len() {
        return Err(Error::Config(format!(
            "port map is {}x{} but {} ports were named",
            m.nrows(),
            m.ncols(),
            ports.len()
        )));
    }
    for (i, p) in ports.iter().enumerate() {
        if ports[..i].contains(p) {
            return Err(Error::Config(format!("port {p:?} listed twice")));
        }
        if !register.labels().iter().any(|l| l.port == *p) {
            return Err(Error::Config(format!("register has no modes on port {p:?}")));
        }
    }

    // Channels = (polarization, temporal) pairs seen on any referenced port;
    // each referenced port must carry every channel or photons would have
    // nowhere to go.
    let mut channels: Vec<(crate::fock::Polarization, u8)> = Vec::new();
    for label in register.labels() {
        if ports.contains(&label.port) {
            let ch = (label.polarization, label.temporal);
            if !channels.contains(&ch) {
                channels.push(ch);
            }
        }
    }
    for &(pol, temporal) in &channels {
        for p in ports {
            let want = ModeLabel { port: *p, polarization: pol, temporal };
            if register.position(&want).is_none() {
                return Err(Error::Config(format!("register missing mode {want}")));
            }
        }
    }

    let mut full = DMatrix::<Complex>::identity(register.len(), register.len());
    for &(pol, temporal) in &channels {
        let index: Vec<usize> = ports
            .iter()
            .map(|p| {
                register
                    .position(&ModeLabel { port: *p, polarization: pol, temporal })
                    .expect("checked above")
            })
            .collect();
        for (bi, &gi) in index.iter().enumerate() {
            full[(gi, gi)] = Complex::new(0.0, 0.0);
            for (bj, &gj) in index.iter().enumerate() {
                full[(gi, gj)] = m.get(bi, bj);
            }
        }
    }
    TransferMatrix::from_matrix(full)
}

/// Draw a Haar-distributed unitary from a seeded stream (QR of a complex
/// Gaussian matrix with the phase convention fixed on the R diagonal).
pub fn haar_unitary(n: usize, rng: &mut Philox) -> DMatrix<Complex> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        let u1 = uniform(rng).max(1e-300);
        let u2 = uniform(rng);
        let rad = (-2.0 * u1.ln()).sqrt();
        let ang = 2.0 * std::f64::consts::PI * u2;
        Complex::new(rad * ang.cos(), rad * ang.sin())
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Draw a random passive matrix: Haar unitaries around singular values
/// uniform in [0, 1].
pub fn random_passive(n: usize, rng: &mut Philox) -> DMatrix<Complex> {
    let w = haar_unitary(n, rng);
    let v = haar_unitary(n, rng);
    let mut s = DMatrix::<Complex>::zeros(n, n);
    for k in 0..n {
        s[(k, k)] = Complex::new(uniform(rng), 0.0);
    }
    w * s * v.adjoint()
}
