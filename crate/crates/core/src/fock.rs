//! Few-photon Fock states on labeled optical modes.
//!
//! States are sparse maps from occupation vectors to complex amplitudes.
//! Evolution under a unitary mode map uses the permanent formula
//! <n|U|m> = Per(U[S(n), S(m)]) / sqrt(prod n_i! prod m_j!), where S(v)
//! repeats each mode index by its occupation. A second, independent
//! evolution route expands the substituted creation-operator polynomial
//! term by term; the two must agree and tests hold them to that.

use crate::error::{Error, Result};
use crate::transfer::TransferMatrix;
use crate::Complex;
use std::collections::BTreeMap;
use std::fmt;

/// Hard capacity: exact amplitudes stay cheap and tests stay fast.
pub const MAX_PHOTONS: u8 = 4;
/// Hard capacity on register width.
pub const MAX_MODES: usize = 16;

/// Amplitudes below this are dropped from sparse states.
const PRUNE_TOL: f64 = 1e-14;

const FACTORIAL: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];

/// Spatial channel of a mode: two external ports plus numbered loss ports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Port {
    Left,
    Right,
    Loss(u8),
}

impl Port {
    pub fn is_loss(self) -> bool {
        matches!(self, Port::Loss(_))
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Port::Left => write!(f, "L"),
            Port::Right => write!(f, "R"),
            Port::Loss(k) => write!(f, "loss{k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::H => write!(f, "H"),
            Polarization::V => write!(f, "V"),
        }
    }
}

/// One optical mode: spatial port, polarization, temporal bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub port: Port,
    pub polarization: Polarization,
    pub temporal: u8,
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.port, self.polarization, self.temporal)
    }
}

/// Ordered set of unique mode labels; occupation vectors index into it.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ModeRegister {
    labels: Vec<ModeLabel>,
}

impl ModeRegister {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_labels(labels: impl IntoIterator<Item = ModeLabel>) -> Result<Self> {
        let mut reg = Self::new();
        for label in labels {
            reg = reg.with_mode(label)?;
        }
        Ok(reg)
    }

    /// Copy of this register with one more mode, kept in sorted order.
    pub fn with_mode(&self, label: ModeLabel) -> Result<Self> {
        if self.position(&label).is_some() {
            return Err(Error::Config(format!("duplicate mode {label}")));
        }
        if self.labels.len() >= MAX_MODES {
            return Err(Error::Capacity(format!("register limited to {MAX_MODES} modes")));
        }
        let mut labels = self.labels.clone();
        let at = labels.partition_point(|l| *l < label);
        labels.insert(at, label);
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.labels
    }

    pub fn position(&self, label: &ModeLabel) -> Option<usize> {
        self.labels.binary_search(label).ok()
    }

    pub fn indices_where(&self, mut pred: impl FnMut(&ModeLabel) -> bool) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| pred(l).then_some(i))
            .collect()
    }

    /// Register with a pair of loss ports added for every (polarization,
    /// temporal) channel present on the external ports.
    pub fn with_loss_pair(&self) -> Result<Self> {
        let mut reg = self.clone();
        let mut channels = Vec::new();
        for label in &self.labels {
            if !label.port.is_loss() {
                let ch = (label.polarization, label.temporal);
                if !channels.contains(&ch) {
                    channels.push(ch);
                }
            }
        }
        for (polarization, temporal) in channels {
            for k in 0..2u8 {
                let label = ModeLabel { port: Port::Loss(k), polarization, temporal };
                if reg.position(&label).is_none() {
                    reg = reg.with_mode(label)?;
                }
            }
        }
        Ok(reg)
    }
}

/// Register holding ports L and R for each polarization and `temporal_bins`
/// temporal labels.
pub fn two_port_register(temporal_bins: u8) -> Result<ModeRegister> {
    if temporal_bins == 0 {
        return Err(Error::Config("register needs at least one temporal bin".into()));
    }
    let mut labels = Vec::new();
    for port in [Port::Left, Port::Right] {
        for polarization in [Polarization::H, Polarization::V] {
            for temporal in 0..temporal_bins {
                labels.push(ModeLabel { port, polarization, temporal });
            }
        }
    }
    ModeRegister::from_labels(labels)
}

/// Pure few-photon state: sparse complex amplitudes over occupation vectors.
#[derive(Clone, Debug)]
pub struct FockState {
    register: ModeRegister,
    terms: BTreeMap<Vec<u8>, Complex>,
}

impl FockState {
    /// Build and normalize. All occupation vectors must have the register's
    /// length and share one total photon number of at most four.
    pub fn from_terms(
        register: ModeRegister,
        terms: impl IntoIterator<Item = (Vec<u8>, Complex)>,
    ) -> Result<Self> {
        let mut map: BTreeMap<Vec<u8>, Complex> = BTreeMap::new();
        for (occ, amp) in terms {
            if occ.len() != register.len() {
                return Err(Error::Config(format!(
                    "occupation vector has {} entries for a {}-mode register",
                    occ.len(),
                    register.len()
                )));
            }
            *map.entry(occ).or_insert(Complex::new(0.0, 0.0)) += amp;
        }
        let mut total: Option<u16> = None;
        for occ in map.keys() {
            let t: u16 = occ.iter().map(|&k| k as u16).sum();
            if t > MAX_PHOTONS as u16 {
                return Err(Error::Capacity(format!(
                    "{t} photons exceed the {MAX_PHOTONS}-photon limit"
                )));
            }
            match total {
                None => total = Some(t),
                Some(prev) if prev != t => {
                    return Err(Error::Config(
                        "occupation vectors mix different total photon numbers".into(),
                    ))
                }
                _ => {}
            }
        }
        let norm2: f64 = map.values().map(|a| a.norm_sqr()).sum();
        if norm2 < 1e-24 {
            return Err(Error::Config("state has no amplitude".into()));
        }
        let scale = 1.0 / norm2.sqrt();
        let terms: BTreeMap<Vec<u8>, Complex> = map
            .into_iter()
            .map(|(occ, a)| (occ, a * scale))
            .filter(|(_, a)| a.norm() >= PRUNE_TOL)
            .collect();
        Ok(FockState { register, terms })
    }

    /// Basis state with the given occupation.
    pub fn from_occupation(register: ModeRegister, occ: Vec<u8>) -> Result<Self> {
        Self::from_terms(register, [(occ, Complex::new(1.0, 0.0))])
    }

    pub fn register(&self) -> &ModeRegister {
        &self.register
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u8>, &Complex)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, occ: &[u8]) -> Complex {
        self.terms.get(occ).copied().unwrap_or(Complex::new(0.0, 0.0))
    }

    pub fn total_photons(&self) -> u8 {
        self.terms
            .keys()
            .next()
            .map(|occ| occ.iter().sum())
            .unwrap_or(0)
    }

    /// Squared overlap |<self|other>|^2; the registers must match.
    pub fn fidelity(&self, other: &FockState) -> Result<f64> {
        if self.register != other.register {
            return Err(Error::Config("fidelity needs a common register".into()));
        }
        let mut ip = Complex::new(0.0, 0.0);
        for (occ, a) in &self.terms {
            if let Some(b) = other.terms.get(occ) {
                ip += a.conj() * b;
            }
        }
        Ok(ip.norm_sqr())
    }

    /// Re-express on a wider register; every current mode must exist there
    /// and the new modes start unoccupied.
    pub fn embed(&self, wider: &ModeRegister) -> Result<FockState> {
        let mut map = Vec::with_capacity(self.register.len());
        for label in self.register.labels() {
            let at = wider
                .position(label)
                .ok_or_else(|| Error::Config(format!("target register lacks mode {label}")))?;
            map.push(at);
        }
        let terms = self.terms.iter().map(|(occ, amp)| {
            let mut wide = vec![0u8; wider.len()];
            for (i, &k) in occ.iter().enumerate() {
                wide[map[i]] = k;
            }
            (wide, *amp)
        });
        FockState::from_terms(wider.clone(), terms)
    }
}

/// All occupation vectors of `modes` entries summing to `total`.
fn compositions(total: u8, modes: usize) -> Vec<Vec<u8>> {
    fn rec(left: u8, slot: usize, modes: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if slot + 1 == modes {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k);
            rec(left - k, slot + 1, modes, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(modes);
    rec(total, 0, modes, &mut cur, &mut out);
    out
}

/// Mode index repeated by its occupation: S((0,2,1)) = [1,1,2].
fn repeated_indices(occ: &[u8]) -> Vec<usize> {
    let mut idx = Vec::new();
    for (i, &k) in occ.iter().enumerate() {
        for _ in 0..k {
            idx.push(i);
        }
    }
    idx
}

fn occupation_factorial(occ: &[u8]) -> f64 {
    occ.iter().map(|&k| FACTORIAL[k as usize]).product()
}

/// Permanent of the submatrix u[rows x cols] by direct expansion along the
/// first row (at most 4! terms at this crate's photon cap).
fn permanent(u: &TransferMatrix, rows: &[usize], cols: &[usize]) -> Complex {
    fn rec(u: &TransferMatrix, rows: &[usize], cols: &[usize], depth: usize, used: u32) -> Complex {
        if depth == rows.len() {
            return Complex::new(1.0, 0.0);
        }
        let mut acc = Complex::new(0.0, 0.0);
        for (c, &col) in cols.iter().enumerate() {
            if used & (1 << c) == 0 {
                let v = u.get(rows[depth], col);
                if v.norm_sqr() > 0.0 {
                    acc += v * rec(u, rows, cols, depth + 1, used | (1 << c));
                }
            }
        }
        acc
    }
    rec(u, rows, cols, 0, 0)
}

fn check_evolution_input(state: &FockState, u: &TransferMatrix) -> Result<()> {
    let n = state.register().len();
    if u.nrows() != n || u.ncols() != n {
        return Err(Error::Config(format!(
            "map is {}x{} but the register has {n} modes",
            u.nrows(),
            u.ncols()
        )));
    }
    if !u.is_unitary(1e-9) {
        return Err(Error::Unphysical(
            "evolution map is not unitary; dilate lossy maps first".into(),
        ));
    }
    Ok(())
}

fn collect_state(register: &ModeRegister, out: BTreeMap<Vec<u8>, Complex>) -> Result<FockState> {
    let norm2: f64 = out.values().map(|a| a.norm_sqr()).sum();
    if (norm2 - 1.0).abs() > 1e-9 {
        return Err(Error::Unphysical(format!(
            "evolution lost norm: output probability {norm2:.12}"
        )));
    }
    FockState::from_terms(register.clone(), out)
}

/// Evolve a state through a unitary mode map via permanents.
pub fn evolve(state: &FockState, u: &TransferMatrix) -> Result<FockState> {
    check_evolution_input(state, u)?;
    let n = state.register().len();
    let outputs = compositions(state.total_photons(), n);
    let mut out: BTreeMap<Vec<u8>, Complex> = BTreeMap::new();
    for (occ_in, amp) in state.terms() {
        let cols = repeated_indices(occ_in);
        let in_fact = occupation_factorial(occ_in);
        for occ_out in &outputs {
            let rows = repeated_indices(occ_out);
            let per = permanent(u, &rows, &cols);
            if per.norm_sqr() == 0.0 {
                continue;
            }
            let a = amp * per / (occupation_factorial(occ_out) * in_fact).sqrt();
            *out.entry(occ_out.clone()).or_insert(Complex::new(0.0, 0.0)) += a;
        }
    }
    collect_state(state.register(), out)
}

/// Evolve by substituting each creation operator with its image and
/// expanding the resulting polynomial. Independent of `evolve`; kept as a
/// cross-check route.
pub fn evolve_by_substitution(state: &FockState, u: &TransferMatrix) -> Result<FockState> {
    check_evolution_input(state, u)?;
    let n = state.register().len();
    let mut out: BTreeMap<Vec<u8>, Complex> = BTreeMap::new();
    for (occ_in, amp) in state.terms() {
        let mut poly: BTreeMap<Vec<u8>, Complex> = BTreeMap::new();
        poly.insert(vec![0u8; n], amp / occupation_factorial(occ_in).sqrt());
        for (j, &count) in occ_in.iter().enumerate() {
            for _ in 0..count {
                let mut next: BTreeMap<Vec<u8>, Complex> = BTreeMap::new();
                for (mono, coeff) in &poly {
                    for i in 0..n {
                        let uij = u.get(i, j);
                        if uij.norm_sqr() == 0.0 {
                            continue;
                        }
                        let mut grown = mono.clone();
                        grown[i] += 1;
                        *next.entry(grown).or_insert(Complex::new(0.0, 0.0)) += coeff * uij;
                    }
                }
                poly = next;
            }
        }
        for (mono, coeff) in poly {
            let weight = coeff * occupation_factorial(&mono).sqrt();
            *out.entry(mono).or_insert(Complex::new(0.0, 0.0)) += weight;
        }
    }
    collect_state(state.register(), out)
}

/// Photon-number statistics of a state.
#[derive(Clone, Debug)]
pub struct FockDistribution {
    register: ModeRegister,
    probs: BTreeMap<Vec<u8>, f64>,
}

impl FockDistribution {
    fn new_unchecked(register: ModeRegister, probs: BTreeMap<Vec<u8>, f64>) -> Self {
        FockDistribution { register, probs }
    }

    pub fn register(&self) -> &ModeRegister {
        &self.register
    }

    pub fn probs(&self) -> impl Iterator<Item = (&Vec<u8>, f64)> {
        self.probs.iter().map(|(occ, &p)| (occ, p))
    }

    pub fn probability(&self, occ: &[u8]) -> f64 {
        self.probs.get(occ).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Born-rule distribution of a normalized state.
pub fn distribution(state: &FockState) -> FockDistribution {
    let probs = state
        .terms()
        .map(|(occ, amp)| (occ.clone(), amp.norm_sqr()))
        .collect();
    FockDistribution::new_unchecked(state.register().clone(), probs)
}

/// Sum out every mode not listed in `keep` (register indices).
pub fn marginal(dist: &FockDistribution, keep: &[usize]) -> Result<FockDistribution> {
    if keep.is_empty() {
        return Err(Error::Config("marginal must keep at least one mode".into()));
    }
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != keep.len() {
        return Err(Error::Config("marginal keep-list repeats a mode".into()));
    }
    let labels: Result<Vec<ModeLabel>> = sorted
        .iter()
        .map(|&i| {
            dist.register
                .labels()
                .get(i)
                .copied()
                .ok_or_else(|| Error::Config(format!("mode index {i} out of range")))
        })
        .collect();
    let register = ModeRegister::from_labels(labels?)?;
    let mut probs: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    for (occ, p) in dist.probs() {
        let kept: Vec<u8> = sorted.iter().map(|&i| occ[i]).collect();
        *probs.entry(kept).or_insert(0.0) += p;
    }
    Ok(FockDistribution::new_unchecked(register, probs))
}

/// Mass of the occupations matching `pred`, plus the renormalized
/// distribution over them. Zero mass yields an empty distribution.
pub fn conditional(
    dist: &FockDistribution,
    pred: impl Fn(&[u8]) -> bool,
) -> (f64, FockDistribution) {
    let mut mass = 0.0;
    let mut kept: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    for (occ, p) in dist.probs() {
        if pred(occ) {
            mass += p;
            kept.insert(occ.clone(), p);
        }
    }
    if mass <= 0.0 {
        return (0.0, FockDistribution::new_unchecked(dist.register.clone(), BTreeMap::new()));
    }
    for p in kept.values_mut() {
        *p /= mass;
    }
    (mass, FockDistribution::new_unchecked(dist.register.clone(), kept))
}

/// Photons an occupation puts on ports matching `pred`.
pub fn photons_on(register: &ModeRegister, occ: &[u8], pred: impl Fn(Port) -> bool) -> u8 {
    register
        .labels()
        .iter()
        .zip(occ)
        .filter(|(l, _)| pred(l.port))
        .map(|(_, &k)| k)
        .sum()
}

/// Joint detection probability: at least one photon on port L and at least
/// one on port R, any polarization or temporal bin.
pub fn coincidence_probability(dist: &FockDistribution) -> f64 {
    dist.probs()
        .filter(|(occ, _)| {
            photons_on(&dist.register, occ, |p| p == Port::Left) >= 1
                && photons_on(&dist.register, occ, |p| p == Port::Right) >= 1
        })
        .map(|(_, p)| p)
        .fold(0.0, |acc, p| acc + p)
}

/// Distribution of the total photon count on loss ports.
pub fn loss_histogram(dist: &FockDistribution) -> BTreeMap<u8, f64> {
    let mut hist = BTreeMap::new();
    for (occ, p) in dist.probs() {
        let lost = photons_on(&dist.register, occ, Port::is_loss);
        *hist.entry(lost).or_insert(0.0) += p;
    }
    hist
}
