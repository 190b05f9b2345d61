//! Flag parsing and settings resolution.
//!
//! Each command folds its flags and the optional `--config` JSON file
//! (flags win) into a fully explicit, serializable settings object; that
//! object goes into the run manifest verbatim, so a rerun needs no
//! external files.  Sample presets and material names are resolved to
//! concrete matrices or inline layer indices at this stage.

use antihom::fock::{ModeLabel, Polarization, Port};
use antihom::optics::{lossless_bs, lossy_bs, qsw_composite, BeamsplitterSpec, QswChannel, Sign};
use antihom::tmm::{stack_from_entries, DesignTemplate, LayerEntry, MaterialTable, Param};
use antihom::transfer::TransferMatrix;
use antihom::{Complex, Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

/// Radians, with "pi" shorthand: "pi", "-pi", "0.5pi", "2pi".
pub fn parse_phi(raw: &str) -> Result<f64> {
    let s = raw.trim();
    let parsed = if let Some(mult) = s.strip_suffix("pi") {
        match mult {
            "" | "+" => Some(PI),
            "-" => Some(-PI),
            other => other.parse::<f64>().ok().map(|m| m * PI),
        }
    } else {
        s.parse::<f64>().ok()
    };
    parsed.ok_or_else(|| Error::Config(format!("cannot parse phase {raw:?}")))
}

/// Complex amplitude "re" or "re,im".
pub fn parse_complex(raw: &str) -> Result<Complex> {
    let parts: Vec<&str> = raw.split(',').collect();
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("cannot parse amplitude {raw:?}")))
    };
    match parts.as_slice() {
        [re] => Ok(Complex::new(parse(re)?, 0.0)),
        [re, im] => Ok(Complex::new(parse(re)?, parse(im)?)),
        _ => Err(Error::Config(format!("cannot parse amplitude {raw:?}"))),
    }
}

pub fn parse_occupation(raw: &str) -> Result<Vec<u8>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<u8>()
                .map_err(|_| Error::Config(format!("cannot parse occupation {raw:?}")))
        })
        .collect()
}

/// A phase in a JSON settings file: a number or a "pi" shorthand string.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PhiValue {
    Number(f64),
    Text(String),
}

impl PhiValue {
    pub fn resolve(&self) -> Result<f64> {
        match self {
            PhiValue::Number(v) => Ok(*v),
            PhiValue::Text(s) => parse_phi(s),
        }
    }
}

fn complex_to_pair(z: Complex) -> [f64; 2] {
    [z.re, z.im]
}

pub fn matrix_to_rows(m: &TransferMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| complex_to_pair(m.get(i, j))).collect())
        .collect()
}

pub fn matrix_from_rows(rows: &[Vec<[f64; 2]>]) -> Result<TransferMatrix> {
    let converted = rows
        .iter()
        .map(|row| row.iter().map(|&[re, im]| Complex::new(re, im)).collect())
        .collect();
    TransferMatrix::new(converted)
}

fn one() -> f64 {
    1.0
}

/// Fully resolved sample: an explicit matrix or an inline-index stack.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleSpec {
    Matrix { matrix: Vec<Vec<[f64; 2]>> },
    Stack {
        layers: Vec<LayerEntry>,
        #[serde(default = "one")]
        ambient_in: f64,
        #[serde(default = "one")]
        ambient_out: f64,
    },
}

impl SampleSpec {
    pub fn from_matrix(m: &TransferMatrix) -> SampleSpec {
        SampleSpec::Matrix {
            matrix: matrix_to_rows(m),
        }
    }

    /// Core sample for the given source wavelength.
    pub fn resolve(&self, wavelength_nm: f64) -> Result<antihom::experiment::Sample> {
        match self {
            SampleSpec::Matrix { matrix } => {
                Ok(antihom::experiment::Sample::Matrix(matrix_from_rows(matrix)?))
            }
            SampleSpec::Stack {
                layers,
                ambient_in,
                ambient_out,
            } => Ok(antihom::experiment::Sample::Stack(stack_from_entries(
                layers,
                None,
                wavelength_nm,
                *ambient_in,
                *ambient_out,
            )?)),
        }
    }
}

/// Replace material names with inline indices so the settings object
/// stands alone.
pub fn inline_entries(
    entries: &[LayerEntry],
    materials: Option<&MaterialTable>,
    wavelength_nm: f64,
) -> Result<Vec<LayerEntry>> {
    entries
        .iter()
        .map(|entry| match &entry.material {
            None => Ok(entry.clone()),
            Some(name) => {
                if entry.n.is_some() || entry.k.is_some() {
                    return Err(Error::Config(format!(
                        "layer {name:?} mixes a material name with an inline index"
                    )));
                }
                let table = materials.ok_or_else(|| {
                    Error::Config(format!(
                        "layer references material {name:?} but no --materials table was given"
                    ))
                })?;
                let index = table.index_at(name, wavelength_nm)?;
                Ok(LayerEntry {
                    material: None,
                    n: Some(index.re),
                    k: (index.im != 0.0).then_some(index.im),
                    thickness_nm: entry.thickness_nm,
                })
            }
        })
        .collect()
}

/// A stack file: either a bare JSON list of layers or an object with
/// `layers` and optional ambients.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum StackFile {
    Entries(Vec<LayerEntry>),
    Framed {
        layers: Vec<LayerEntry>,
        #[serde(default = "one")]
        ambient_in: f64,
        #[serde(default = "one")]
        ambient_out: f64,
    },
}

#[derive(Debug, Deserialize)]
struct MatrixFile {
    matrix: Vec<Vec<[f64; 2]>>,
}

pub fn load_stack_file(path: &Path) -> Result<(Vec<LayerEntry>, f64, f64)> {
    let text = read_text(path)?;
    let file: StackFile = serde_json::from_str(&text).map_err(|e| {
        Error::Config(format!("stack file {} does not parse: {e}", path.display()))
    })?;
    Ok(match file {
        StackFile::Entries(layers) => (layers, 1.0, 1.0),
        StackFile::Framed {
            layers,
            ambient_in,
            ambient_out,
        } => (layers, ambient_in, ambient_out),
    })
}

pub fn load_matrix_rows(path: &Path) -> Result<Vec<Vec<[f64; 2]>>> {
    let text = read_text(path)?;
    let file: MatrixFile = serde_json::from_str(&text).map_err(|e| {
        Error::Config(format!("matrix file {} does not parse: {e}", path.display()))
    })?;
    Ok(file.matrix)
}

pub fn load_materials(path: Option<&Path>) -> Result<Option<MaterialTable>> {
    match path {
        None => Ok(None),
        Some(p) => Ok(Some(MaterialTable::from_json(&read_text(p)?)?)),
    }
}

/// Resolve a `--sample` value: a named preset or a JSON file holding a
/// matrix or a stack.
pub fn resolve_sample_flag(
    sample: &str,
    sc: Option<&str>,
    ss: Option<&str>,
    materials: Option<&MaterialTable>,
    wavelength_nm: f64,
) -> Result<SampleSpec> {
    if sample != "qsw" && (sc.is_some() || ss.is_some()) {
        return Err(Error::Config(
            "--sc/--ss apply only to the qsw preset".into(),
        ));
    }
    match sample {
        "lossless50" => Ok(SampleSpec::from_matrix(&lossless_bs(
            FRAC_1_SQRT_2,
            Sign::Plus,
        )?)),
        "lossy-eq6-plus" => Ok(SampleSpec::from_matrix(&lossy_bs(Sign::Plus))),
        "lossy-eq6-minus" => Ok(SampleSpec::from_matrix(&lossy_bs(Sign::Minus))),
        "identity" => Ok(SampleSpec::from_matrix(&TransferMatrix::identity(2))),
        "sin100nm" => Ok(SampleSpec::Stack {
            layers: vec![LayerEntry {
                material: None,
                n: Some(2.1),
                k: None,
                thickness_nm: 100.0,
            }],
            ambient_in: 1.0,
            ambient_out: 1.0,
        }),
        "qsw" => {
            let (Some(sc), Some(ss)) = (sc, ss) else {
                return Err(Error::Config(
                    "the qsw preset needs --sc and --ss amplitudes".into(),
                ));
            };
            let channel = QswChannel::new(parse_complex(sc)?, parse_complex(ss)?)?;
            Ok(SampleSpec::from_matrix(&qsw_composite(channel)))
        }
        path => {
            let text = read_text(Path::new(path))?;
            if let Ok(file) = serde_json::from_str::<MatrixFile>(&text) {
                matrix_from_rows(&file.matrix)?;
                return Ok(SampleSpec::Matrix {
                    matrix: file.matrix,
                });
            }
            let stack: StackFile = serde_json::from_str(&text).map_err(|e| {
                Error::Config(format!(
                    "sample {path:?} is neither a preset, a matrix file, nor a stack file: {e}"
                ))
            })?;
            let (layers, ambient_in, ambient_out) = match stack {
                StackFile::Entries(layers) => (layers, 1.0, 1.0),
                StackFile::Framed {
                    layers,
                    ambient_in,
                    ambient_out,
                } => (layers, ambient_in, ambient_out),
            };
            Ok(SampleSpec::Stack {
                layers: inline_entries(&layers, materials, wavelength_nm)?,
                ambient_in,
                ambient_out,
            })
        }
    }
}

/// Beam path labels for an n-mode matrix file: the first two modes are
/// the left and right ports, the rest internal loss channels.
pub fn linear_mode_labels(n: usize) -> Vec<ModeLabel> {
    (0..n)
        .map(|k| ModeLabel {
            port: match k {
                0 => Port::Left,
                1 => Port::Right,
                other => Port::Loss((other - 2) as u8),
            },
            polarization: Polarization::H,
            temporal: 0,
        })
        .collect()
}

/// Replace material names in a design template with fixed inline
/// indices so the settings object stands alone.
pub fn inline_template(
    template: &DesignTemplate,
    materials: Option<&MaterialTable>,
) -> Result<DesignTemplate> {
    let mut out = template.clone();
    for layer in &mut out.layers {
        let Some(name) = layer.material.take() else {
            continue;
        };
        if layer.n.is_some() || layer.k.is_some() {
            return Err(Error::Config(format!(
                "template layer {name:?} mixes a material name with an inline index"
            )));
        }
        let table = materials.ok_or_else(|| {
            Error::Config(format!(
                "template references material {name:?} but no --materials table was given"
            ))
        })?;
        let index = table.index_at(&name, template.wavelength_nm)?;
        layer.n = Some(Param::Fixed(index.re));
        if index.im != 0.0 {
            layer.k = Some(Param::Fixed(index.im));
        }
    }
    Ok(out)
}

pub fn parse_target(raw: &str) -> Result<BeamsplitterSpec> {
    match raw {
        "eq6-plus" => BeamsplitterSpec::new(Complex::new(0.5, 0.0), Complex::new(0.5, 0.0)),
        "eq6-minus" => BeamsplitterSpec::new(Complex::new(0.5, 0.0), Complex::new(-0.5, 0.0)),
        "lossless50" => BeamsplitterSpec::new(
            Complex::new(FRAC_1_SQRT_2, 0.0),
            Complex::new(0.0, FRAC_1_SQRT_2),
        ),
        other => Err(Error::Config(format!(
            "unknown design target {other:?}; use eq6-plus, eq6-minus, or lossless50"
        ))),
    }
}

// Per-command settings: the fully resolved, manifest-ready form.

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanSettings {
    pub phi: f64,
    pub sample: SampleSpec,
    pub positions_um: Vec<f64>,
    pub wavelength_nm: f64,
    pub filter_fwhm_nm: f64,
    pub reference_counts: f64,
    pub noise: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionSettings {
    pub phi: f64,
    pub sample: SampleSpec,
    pub g: f64,
    pub wavelength_nm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BellScanSettings {
    pub phi: f64,
    pub mix: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StackResponseSettings {
    pub layers: Vec<LayerEntry>,
    pub ambient_in: f64,
    pub ambient_out: f64,
    pub wavelength_nm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StackDesignSettings {
    pub template: antihom::tmm::DesignTemplate,
    pub target: TargetSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetSpec {
    pub t: [f64; 2],
    pub r: [f64; 2],
}

impl TargetSpec {
    pub fn from_amplitudes(b: &BeamsplitterSpec) -> TargetSpec {
        TargetSpec {
            t: complex_to_pair(b.t),
            r: complex_to_pair(b.r),
        }
    }

    pub fn amplitudes(&self) -> Result<BeamsplitterSpec> {
        BeamsplitterSpec::new(
            Complex::new(self.t[0], self.t[1]),
            Complex::new(self.r[0], self.r[1]),
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FockSettings {
    pub matrix: Vec<Vec<[f64; 2]>>,
    pub occupation: Vec<u8>,
}

// Overlay shapes accepted in --config files, merged under flags.

pub fn load_overlay<T: Default + for<'de> Deserialize<'de>>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => serde_json::from_str(&read_text(p)?)
            .map_err(|e| Error::Config(format!("config {} does not parse: {e}", p.display()))),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanOverlay {
    pub phi: Option<PhiValue>,
    pub sample: Option<String>,
    pub sc: Option<String>,
    pub ss: Option<String>,
    pub positions_um: Option<Vec<f64>>,
    pub from_um: Option<f64>,
    pub to_um: Option<f64>,
    pub points: Option<usize>,
    pub wavelength_nm: Option<f64>,
    pub filter_fwhm_nm: Option<f64>,
    pub reference_counts: Option<f64>,
    pub noise: Option<bool>,
    pub seed: Option<u64>,
    pub materials: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionOverlay {
    pub phi: Option<PhiValue>,
    pub sample: Option<String>,
    pub sc: Option<String>,
    pub ss: Option<String>,
    pub g: Option<f64>,
    pub wavelength_nm: Option<f64>,
    pub materials: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellScanOverlay {
    pub phi: Option<PhiValue>,
    pub mix: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackResponseOverlay {
    pub file: Option<String>,
    pub wavelength_nm: Option<f64>,
    pub ambient_in: Option<f64>,
    pub ambient_out: Option<f64>,
    pub materials: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackDesignOverlay {
    pub template: Option<String>,
    pub target: Option<String>,
    pub materials: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockOverlay {
    pub matrix: Option<String>,
    pub occupation: Option<String>,
}

/// Evenly spaced positions, endpoints included.
pub fn position_grid(from_um: f64, to_um: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::Config(format!(
            "a scan needs at least 2 points, got {points}"
        )));
    }
    if !(to_um > from_um) {
        return Err(Error::Config(format!(
            "scan range must be increasing, got {from_um} to {to_um}"
        )));
    }
    Ok((0..points)
        .map(|k| from_um + (to_um - from_um) * k as f64 / (points - 1) as f64)
        .collect())
}
