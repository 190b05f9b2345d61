//! Thin-film multilayer response at normal incidence and stack design.
//!
//! The response comes from the characteristic-matrix method: each layer
//! contributes M_j = [[cos d, -i sin d / n], [-i n sin d, cos d]] with
//! d = 2 pi n thickness / wavelength, multiplied in layer order from the
//! incidence side. Transmission amplitudes are photon-flux normalized, so
//! |t|^2 is the transmitted power fraction for any ambient pair.
//!
//! Port convention, shared by every consumer: port labels follow the
//! transmitted beam, so the scattering matrix in the (L, R) beam basis is
//! [[t, r_right], [r_left, t]] and symmetric stacks reduce to
//! [[t, r], [r, t]] with transmission on the diagonal.

use crate::error::{Error, Result};
use crate::optics::BeamsplitterSpec;
use crate::optim::nelder_mead;
use crate::transfer::TransferMatrix;
use crate::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One homogeneous film: thickness in nm and complex refractive index
/// n + i k with k >= 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Layer {
    pub thickness_nm: f64,
    pub index: Complex,
}

impl Layer {
    pub fn new(thickness_nm: f64, index: Complex) -> Result<Self> {
        if !(thickness_nm > 0.0) {
            return Err(Error::Config(format!("layer thickness {thickness_nm} nm must be > 0")));
        }
        if index.re <= 0.0 {
            return Err(Error::Config(format!("refractive index {} must be > 0", index.re)));
        }
        if index.im < 0.0 {
            return Err(Error::Unphysical(format!(
                "negative extinction {} means gain",
                index.im
            )));
        }
        Ok(Layer { thickness_nm, index })
    }
}

/// Ordered film stack between two transparent ambients at one wavelength.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
    pub ambient_in: f64,
    pub ambient_out: f64,
    pub wavelength_nm: f64,
}

impl LayerStack {
    pub fn new(
        layers: Vec<Layer>,
        ambient_in: f64,
        ambient_out: f64,
        wavelength_nm: f64,
    ) -> Result<Self> {
        if !(wavelength_nm > 0.0) {
            return Err(Error::Config(format!("wavelength {wavelength_nm} nm must be > 0")));
        }
        for (side, n) in [("input", ambient_in), ("output", ambient_out)] {
            if !(n > 0.0) {
                return Err(Error::Config(format!("{side} ambient index {n} must be > 0")));
            }
        }
        Ok(LayerStack { layers, ambient_in, ambient_out, wavelength_nm })
    }

    /// Same films in reverse order with the ambients swapped.
    fn reversed(&self) -> LayerStack {
        LayerStack {
            layers: self.layers.iter().rev().copied().collect(),
            ambient_in: self.ambient_out,
            ambient_out: self.ambient_in,
            wavelength_nm: self.wavelength_nm,
        }
    }
}

/// Two-port amplitudes of a sample; `t` is common to both directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PortScattering {
    pub t: Complex,
    pub r_left: Complex,
    pub r_right: Complex,
}

impl PortScattering {
    pub fn symmetric(t: Complex, r: Complex) -> Self {
        PortScattering { t, r_left: r, r_right: r }
    }

    /// Spatial transfer matrix in the beam basis (see module docs).
    pub fn transfer_matrix(&self) -> Result<TransferMatrix> {
        TransferMatrix::new(vec![
            vec![self.t, self.r_right],
            vec![self.r_left, self.t],
        ])
    }

    /// Outputs for simultaneous coherent illumination of both ports with
    /// unit total power, plus the absorbed fraction.
    pub fn respond(&self, a_l: Complex, a_r: Complex) -> Result<(Complex, Complex, f64)> {
        let power = a_l.norm_sqr() + a_r.norm_sqr();
        if (power - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "illumination power {power:.12} is not normalized"
            )));
        }
        let out_l = self.t * a_l + self.r_right * a_r;
        let out_r = self.r_left * a_l + self.t * a_r;
        let absorbed = 1.0 - out_l.norm_sqr() - out_r.norm_sqr();
        Ok((out_l, out_r, absorbed))
    }
}

fn one_sided_response(stack: &LayerStack) -> (Complex, Complex) {
    let lambda = stack.wavelength_nm;
    let mut m = [
        [Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)],
        [Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)],
    ];
    for layer in &stack.layers {
        let n = layer.index;
        let delta = Complex::new(2.0 * std::f64::consts::PI * layer.thickness_nm / lambda, 0.0) * n;
        let (c, s) = (delta.cos(), delta.sin());
        let i = Complex::new(0.0, 1.0);
        let mj = [[c, -i * s / n], [-i * n * s, c]];
        m = [
            [
                m[0][0] * mj[0][0] + m[0][1] * mj[1][0],
                m[0][0] * mj[0][1] + m[0][1] * mj[1][1],
            ],
            [
                m[1][0] * mj[0][0] + m[1][1] * mj[1][0],
                m[1][0] * mj[0][1] + m[1][1] * mj[1][1],
            ],
        ];
    }
    let n_in = Complex::new(stack.ambient_in, 0.0);
    let n_out = Complex::new(stack.ambient_out, 0.0);
    let b = m[0][0] + m[0][1] * n_out;
    let c = m[1][0] + m[1][1] * n_out;
    let denom = n_in * b + c;
    let r = (n_in * b - c) / denom;
    let t_field = 2.0 * n_in / denom;
    let t = t_field * (stack.ambient_out / stack.ambient_in).sqrt();
    (t, r)
}

/// Flux-normalized amplitude response of a stack from both sides.
pub fn stack_response(stack: &LayerStack) -> Result<PortScattering> {
    let (t, r_left) = one_sided_response(stack);
    let (t_rev, r_right) = one_sided_response(&stack.reversed());
    if (t - t_rev).norm() > 1e-12 {
        return Err(Error::Unphysical(format!(
            "transmission reciprocity violated by {:.3e}",
            (t - t_rev).norm()
        )));
    }
    for (side, r) in [("left", r_left), ("right", r_right)] {
        let total = t.norm_sqr() + r.norm_sqr();
        if total > 1.0 + 1e-10 {
            return Err(Error::Unphysical(format!(
                "{side}-incidence power {total:.12} exceeds 1"
            )));
        }
    }
    Ok(PortScattering { t, r_left, r_right })
}

/// Coherent two-beam illumination of a film stack (equal ambients only, so
/// port powers compare directly).
pub fn coherent_response(
    stack: &LayerStack,
    a_l: Complex,
    a_r: Complex,
) -> Result<(Complex, Complex, f64)> {
    if (stack.ambient_in - stack.ambient_out).abs() > 1e-12 {
        return Err(Error::Config(
            "two-beam response needs the same ambient on both sides".into(),
        ));
    }
    stack_response(stack)?.respond(a_l, a_r)
}

/// Tabulated complex refractive index at one wavelength.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Material {
    pub n: f64,
    pub k: f64,
    pub wavelength_nm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Named material table loaded from JSON.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct MaterialTable(pub BTreeMap<String, Material>);

impl MaterialTable {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|e| Error::Config(format!("materials file does not parse: {e}")))
    }

    /// Complex index of `name`, valid only at the tabulated wavelength
    /// (dispersion is out of scope, so mismatches are rejected).
    pub fn index_at(&self, name: &str, wavelength_nm: f64) -> Result<Complex> {
        let mat = self
            .0
            .get(name)
            .ok_or_else(|| Error::Config(format!("material {name:?} not in the table")))?;
        if (mat.wavelength_nm - wavelength_nm).abs() > 0.5 {
            return Err(Error::Config(format!(
                "material {name:?} is tabulated at {} nm, not {} nm",
                mat.wavelength_nm, wavelength_nm
            )));
        }
        Ok(Complex::new(mat.n, mat.k))
    }
}

/// One stack-file row: a named material or an inline index, plus thickness.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LayerEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    pub thickness_nm: f64,
}

/// Parse a stack description file: a JSON list of layer entries.
pub fn parse_stack_entries(json: &str) -> Result<Vec<LayerEntry>> {
    serde_json::from_str(json)
        .map_err(|e| Error::Config(format!("stack file does not parse: {e}")))
}

fn entry_index(
    entry: &LayerEntry,
    materials: Option<&MaterialTable>,
    wavelength_nm: f64,
) -> Result<Complex> {
    match (&entry.material, entry.n) {
        (Some(name), None) => {
            if entry.k.is_some() {
                return Err(Error::Config(format!(
                    "layer {name:?} mixes a material name with an inline index"
                )));
            }
            let table = materials.ok_or_else(|| {
                Error::Config(format!("layer references material {name:?} but no table was given"))
            })?;
            table.index_at(name, wavelength_nm)
        }
        (None, Some(n)) => Ok(Complex::new(n, entry.k.unwrap_or(0.0))),
        (Some(name), Some(_)) => Err(Error::Config(format!(
            "layer {name:?} mixes a material name with an inline index"
        ))),
        (None, None) => Err(Error::Config("layer gives neither material nor index".into())),
    }
}

/// Resolve stack-file entries into a concrete stack.
pub fn stack_from_entries(
    entries: &[LayerEntry],
    materials: Option<&MaterialTable>,
    wavelength_nm: f64,
    ambient_in: f64,
    ambient_out: f64,
) -> Result<LayerStack> {
    let layers: Result<Vec<Layer>> = entries
        .iter()
        .map(|e| Layer::new(e.thickness_nm, entry_index(e, materials, wavelength_nm)?))
        .collect();
    LayerStack::new(layers?, ambient_in, ambient_out, wavelength_nm)
}

/// A number or the name of a design variable.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Param {
    Fixed(f64),
    Free(String),
}

impl Param {
    fn resolve(&self, values: &BTreeMap<String, f64>) -> Result<f64> {
        match self {
            Param::Fixed(v) => Ok(*v),
            Param::Free(name) => values
                .get(name)
                .copied()
                .ok_or_else(|| Error::Config(format!("design variable {name:?} not declared"))),
        }
    }

    fn free_name(&self) -> Option<&str> {
        match self {
            Param::Fixed(_) => None,
            Param::Free(name) => Some(name),
        }
    }
}

/// Template layer: any of thickness, n, k may be a free variable.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TemplateLayer {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Param>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Param>,
    pub thickness_nm: Param,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

fn default_ambient() -> f64 {
    1.0
}

/// Parametrized stack for the design optimizer.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DesignTemplate {
    pub wavelength_nm: f64,
    #[serde(default = "default_ambient")]
    pub ambient_in: f64,
    #[serde(default = "default_ambient")]
    pub ambient_out: f64,
    pub layers: Vec<TemplateLayer>,
    #[serde(default)]
    pub variables: BTreeMap<String, Bounds>,
}

impl DesignTemplate {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|e| Error::Config(format!("design template does not parse: {e}")))
    }

    /// Concrete stack for one assignment of the design variables.
    pub fn instantiate(
        &self,
        values: &BTreeMap<String, f64>,
        materials: Option<&MaterialTable>,
    ) -> Result<LayerStack> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let thickness = layer.thickness_nm.resolve(values)?;
            let index = match (&layer.material, &layer.n) {
                (Some(name), None) => {
                    if layer.k.is_some() {
                        return Err(Error::Config(format!(
                            "template layer {name:?} mixes a material name with an inline index"
                        )));
                    }
                    let table = materials.ok_or_else(|| {
                        Error::Config(format!(
                            "template references material {name:?} but no table was given"
                        ))
                    })?;
                    table.index_at(name, self.wavelength_nm)?
                }
                (None, Some(n)) => {
                    let k = match &layer.k {
                        Some(p) => p.resolve(values)?,
                        None => 0.0,
                    };
                    Complex::new(n.resolve(values)?, k)
                }
                (Some(name), Some(_)) => {
                    return Err(Error::Config(format!(
                        "template layer {name:?} mixes a material name with an inline index"
                    )))
                }
                (None, None) => {
                    return Err(Error::Config("template layer gives neither material nor index".into()))
                }
            };
            layers.push(Layer::new(thickness, index)?);
        }
        LayerStack::new(layers, self.ambient_in, self.ambient_out, self.wavelength_nm)
    }

    fn referenced_variables(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for layer in &self.layers {
            for p in [Some(&layer.thickness_nm), layer.n.as_ref(), layer.k.as_ref()]
                .into_iter()
                .flatten()
            {
                if let Some(name) = p.free_name() {
                    if !seen.contains(&name) {
                        seen.push(name);
                    }
                }
            }
        }
        seen
    }
}

/// Outcome of a design run.
#[derive(Clone, Debug)]
pub struct DesignResult {
    pub stack: LayerStack,
    pub residual: f64,
    pub values: BTreeMap<String, f64>,
}

/// Rotate (t, r) by a common phase so the anchor amplitude is real and
/// non-negative; only the relative phase carries physics.
fn gauge_align(t: Complex, r: Complex) -> (Complex, Complex) {
    let anchor = if t.norm() > 1e-12 {
        t
    } else if r.norm() > 1e-12 {
        r
    } else {
        return (t, r);
    };
    let phase = anchor / anchor.norm();
    (t / phase, r / phase)
}

/// Gauge-aligned amplitude mismatch, averaged over the two incidence sides
/// (for symmetric stacks this is exactly |t - t0|^2 + |r - r0|^2).
pub fn amplitude_mismatch(resp: &PortScattering, target: &BeamsplitterSpec) -> f64 {
    let (t0, r0) = gauge_align(target.t, target.r);
    let mut total = 0.0;
    for r in [resp.r_left, resp.r_right] {
        let (t, r) = gauge_align(resp.t, r);
        total += 0.5 * ((t - t0).norm_sqr() + (r - r0).norm_sqr());
    }
    total
}

const DESIGN_RESTART_FRACTIONS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
const DESIGN_MAX_ITER: usize = 800;

/// Fit the template's free parameters so its response matches the target
/// amplitudes. Restarts run from a fixed fraction grid of the bounds and
/// the best residual wins, ties going to the earlier restart; the whole
/// procedure is deterministic. A template with no variables is evaluated
/// as-is.
pub fn design_stack(
    template: &DesignTemplate,
    target: &BeamsplitterSpec,
    materials: Option<&MaterialTable>,
) -> Result<DesignResult> {
    let referenced = template.referenced_variables();
    for name in &referenced {
        if !template.variables.contains_key(*name) {
            return Err(Error::Config(format!("design variable {name:?} has no bounds")));
        }
    }
    for name in template.variables.keys() {
        if !referenced.contains(&name.as_str()) {
            return Err(Error::Config(format!("design variable {name:?} is never used")));
        }
    }
    if template.variables.len() > 4 {
        return Err(Error::Config(format!(
            "{} free parameters exceed the supported 4",
            template.variables.len()
        )));
    }

    let names: Vec<String> = template.variables.keys().cloned().collect();
    let assemble = |x: &[f64]| -> BTreeMap<String, f64> {
        names.iter().cloned().zip(x.iter().copied()).collect()
    };
    let evaluate = |x: &[f64]| -> Result<f64> {
        let stack = template.instantiate(&assemble(x), materials)?;
        Ok(amplitude_mismatch(&stack_response(&stack)?, target))
    };

    if names.is_empty() {
        let values = BTreeMap::new();
        let stack = template.instantiate(&values, materials)?;
        let residual = amplitude_mismatch(&stack_response(&stack)?, target);
        return Ok(DesignResult { stack, residual, values });
    }

    template.instantiate(
        &assemble(
            &names
                .iter()
                .map(|n| {
                    let b = template.variables[n];
                    0.5 * (b.min + b.max)
                })
                .collect::<Vec<_>>(),
        ),
        materials,
    )?;

    let bounds: Vec<(f64, f64)> = names
        .iter()
        .map(|n| {
            let b = template.variables[n];
            (b.min, b.max)
        })
        .collect();
    let objective = |x: &[f64]| -> f64 {
        evaluate(x).unwrap_or(f64::INFINITY)
    };

    let runs: Vec<_> = DESIGN_RESTART_FRACTIONS
        .par_iter()
        .map(|frac| {
            let start: Vec<f64> =
                bounds.iter().map(|(lo, hi)| lo + frac * (hi - lo)).collect();
            nelder_mead(&objective, &start, &bounds, DESIGN_MAX_ITER)
        })
        .collect();
    let mut best: Option<crate::optim::SimplexResult> = None;
    for run in runs {
        let run = run?;
        let better = match &best {
            Some(b) => run.value < b.value,
            None => true,
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart ran");
    let values = assemble(&best.x);
    let stack = template.instantiate(&values, materials)?;
    let residual = amplitude_mismatch(&stack_response(&stack)?, target);
    Ok(DesignResult { stack, residual, values })
}
