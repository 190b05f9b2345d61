//! Command implementations.
//!
//! Each `*_cmd` folds flags and the optional config file into a settings
//! object, then hands it to a `run_*` function that does the work and
//! writes the outputs.  `rerun` deserializes a recorded settings object
//! and calls the same `run_*`, so a replay cannot drift from the
//! original code path.

use crate::config;
use crate::say;
use crate::manifest::{self, OutPaths};
use antihom::experiment::{self, ScanConfig};
use antihom::fock::{
    coincidence_probability, distribution, evolve, loss_histogram, photons_on, FockState,
    ModeRegister, Port,
};
use antihom::states::{BellPhase, WavePacketSpec};
use antihom::tmm::{design_stack, stack_from_entries, stack_response, DesignTemplate};
use antihom::{Error, Result};
use serde_json::json;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt::Write as _;
use std::path::PathBuf;

fn write_outputs(paths: &OutPaths, csv: &str, json: &serde_json::Value) -> Result<()> {
    manifest::write_atomic(&paths.csv, csv)?;
    manifest::write_atomic(&paths.json, &manifest::to_json_pretty(json)?)
}

fn announce(paths: &OutPaths) {
    say!(
        "wrote {}, {}, {}",
        paths.csv.display(),
        paths.json.display(),
        paths.manifest.display()
    );
}

// hom-scan

pub fn hom_scan_cmd(args: crate::HomScanArgs) -> Result<()> {
    let overlay: config::ScanOverlay = config::load_overlay(args.config.as_deref())?;
    let phi = match (args.phi, &overlay.phi) {
        (Some(raw), _) => config::parse_phi(&raw)?,
        (None, Some(v)) => v.resolve()?,
        (None, None) => 0.0,
    };
    let wavelength_nm = args.wavelength.or(overlay.wavelength_nm).unwrap_or(810.0);
    let filter_fwhm_nm = args.bandwidth.or(overlay.filter_fwhm_nm).unwrap_or(10.0);
    let cli_range = args.from_um.is_some() || args.to_um.is_some() || args.points.is_some();
    let positions_um = match (&overlay.positions_um, cli_range) {
        (Some(p), false) => p.clone(),
        _ => config::position_grid(
            args.from_um.or(overlay.from_um).unwrap_or(-60.0),
            args.to_um.or(overlay.to_um).unwrap_or(60.0),
            args.points.or(overlay.points).unwrap_or(41),
        )?,
    };
    let materials_path = args
        .materials
        .or_else(|| overlay.materials.as_deref().map(PathBuf::from));
    let materials = config::load_materials(materials_path.as_deref())?;
    let sample_name = args
        .sample
        .or_else(|| overlay.sample.clone())
        .unwrap_or_else(|| "lossless50".into());
    let sample = config::resolve_sample_flag(
        &sample_name,
        args.sc.or_else(|| overlay.sc.clone()).as_deref(),
        args.ss.or_else(|| overlay.ss.clone()).as_deref(),
        materials.as_ref(),
        wavelength_nm,
    )?;
    let settings = config::ScanSettings {
        phi,
        sample,
        positions_um,
        wavelength_nm,
        filter_fwhm_nm,
        reference_counts: args
            .reference_counts
            .or(overlay.reference_counts)
            .unwrap_or(750.0),
        noise: args.noise || overlay.noise.unwrap_or(false),
        seed: args.seed.or(overlay.seed).unwrap_or(0),
    };
    let paths = OutPaths::new(args.out.as_deref(), "hom-scan");
    run_hom_scan(&settings, &paths)
}

pub fn run_hom_scan(settings: &config::ScanSettings, paths: &OutPaths) -> Result<()> {
    let scan = ScanConfig {
        positions_um: settings.positions_um.clone(),
        phi: BellPhase::new(settings.phi),
        sample: settings.sample.resolve(settings.wavelength_nm)?,
        packet: WavePacketSpec::new(settings.wavelength_nm, settings.filter_fwhm_nm)?,
        reference_counts: settings.reference_counts,
        rng_seed: settings.seed,
        noise: settings.noise,
    };
    let result = experiment::hom_scan(&scan)?;
    let fit = experiment::fit_hom_curve(&result).ok();
    let csv = experiment::scan_csv(&result);
    let json = json!({
        "command": "hom-scan",
        "settings": settings,
        "baseline_probability": result.baseline_probability,
        "reference_counts": result.reference_counts,
        "fit": fit,
        "points": result.points,
    });
    write_outputs(paths, &csv, &json)?;
    manifest::write_manifest(paths, "hom-scan", settings.seed, settings)?;
    say!(
        "hom-scan: {} points, baseline probability {:.6}",
        result.points.len(),
        result.baseline_probability
    );
    if let Some(f) = &fit {
        match f.width_um {
            Some(w) => say!(
                "fit: extremum {:.6} at {:+.3} um, width {:.3} um, chi2 {:.3e}",
                f.extremum(),
                f.center_um,
                w,
                f.chi2
            ),
            None => say!("fit: flat at {:.6}", f.baseline),
        }
    }
    announce(paths);
    Ok(())
}

// distribution

pub fn distribution_cmd(args: crate::DistributionArgs) -> Result<()> {
    let overlay: config::DistributionOverlay = config::load_overlay(args.config.as_deref())?;
    let phi = match (args.phi, &overlay.phi) {
        (Some(raw), _) => config::parse_phi(&raw)?,
        (None, Some(v)) => v.resolve()?,
        (None, None) => 0.0,
    };
    let wavelength_nm = args.wavelength.or(overlay.wavelength_nm).unwrap_or(810.0);
    let materials_path = args
        .materials
        .or_else(|| overlay.materials.as_deref().map(PathBuf::from));
    let materials = config::load_materials(materials_path.as_deref())?;
    let sample_name = args
        .sample
        .or_else(|| overlay.sample.clone())
        .unwrap_or_else(|| "lossless50".into());
    let sample = config::resolve_sample_flag(
        &sample_name,
        args.sc.or_else(|| overlay.sc.clone()).as_deref(),
        args.ss.or_else(|| overlay.ss.clone()).as_deref(),
        materials.as_ref(),
        wavelength_nm,
    )?;
    let settings = config::DistributionSettings {
        phi,
        sample,
        g: args.g.or(overlay.g).unwrap_or(1.0),
        wavelength_nm,
    };
    let paths = OutPaths::new(args.out.as_deref(), "distribution");
    run_distribution(&settings, &paths)
}

pub fn run_distribution(settings: &config::DistributionSettings, paths: &OutPaths) -> Result<()> {
    let matrix = settings.sample.resolve(settings.wavelength_nm)?.matrix()?;
    let dist = experiment::engine_distribution(&matrix, BellPhase::new(settings.phi), settings.g)?;
    let register = dist.register().clone();
    let mut outcomes: BTreeMap<(u8, u8, u8), f64> = BTreeMap::new();
    for (occ, p) in dist.probs() {
        let key = (
            photons_on(&register, occ, |q| q == Port::Left),
            photons_on(&register, occ, |q| q == Port::Right),
            photons_on(&register, occ, Port::is_loss),
        );
        *outcomes.entry(key).or_insert(0.0) += p;
    }
    let coincidence = coincidence_probability(&dist);
    let losses = loss_histogram(&dist);
    let mut csv = String::from("n_left,n_right,n_loss,probability\n");
    for (&(nl, nr, nk), &p) in &outcomes {
        writeln!(csv, "{nl},{nr},{nk},{p}").expect("string write");
    }
    let rows: Vec<serde_json::Value> = outcomes
        .iter()
        .map(|(&(nl, nr, nk), &p)| {
            json!({"n_left": nl, "n_right": nr, "n_loss": nk, "probability": p})
        })
        .collect();
    let json = json!({
        "command": "distribution",
        "settings": settings,
        "outcomes": rows,
        "coincidence_probability": coincidence,
        "loss_histogram": losses,
    });
    write_outputs(paths, &csv, &json)?;
    manifest::write_manifest(paths, "distribution", 0, settings)?;
    for (&(nl, nr, nk), &p) in &outcomes {
        say!("P(left={nl}, right={nr}, lost={nk}) = {p:.6}");
    }
    say!("coincidence probability = {coincidence:.6}");
    announce(paths);
    Ok(())
}

// bell-scan

pub fn bell_scan_cmd(args: crate::BellScanArgs) -> Result<()> {
    let overlay: config::BellScanOverlay = config::load_overlay(args.config.as_deref())?;
    let phi = match (args.phi, &overlay.phi) {
        (Some(raw), _) => config::parse_phi(&raw)?,
        (None, Some(v)) => v.resolve()?,
        (None, None) => 0.0,
    };
    let settings = config::BellScanSettings {
        phi,
        mix: args.mix.or(overlay.mix).unwrap_or(0.0),
        points: args.points.or(overlay.points).unwrap_or(37),
    };
    let paths = OutPaths::new(args.out.as_deref(), "bell-scan");
    run_bell_scan(&settings, &paths)
}

pub fn run_bell_scan(settings: &config::BellScanSettings, paths: &OutPaths) -> Result<()> {
    if settings.points < 2 {
        return Err(Error::Config(format!(
            "a fringe scan needs at least 2 points, got {}",
            settings.points
        )));
    }
    let grid: Vec<f64> = (0..settings.points)
        .map(|k| PI * k as f64 / (settings.points - 1) as f64)
        .collect();
    let phi = BellPhase::new(settings.phi);
    let curve_hv = experiment::polarization_scan_mixed(phi, 0.0, &grid, settings.mix)?;
    let curve_da = experiment::polarization_scan_mixed(phi, FRAC_PI_4, &grid, settings.mix)?;
    let v1 = experiment::visibility(&curve_hv)?;
    let v2 = experiment::visibility(&curve_da)?;
    let bell = experiment::bell_parameter(v1, v2)?;
    let mut csv = String::from("theta1_rad,coincidence_hv,coincidence_da\n");
    for ((theta, hv), (_, da)) in curve_hv.iter().zip(&curve_da) {
        writeln!(csv, "{theta},{hv},{da}").expect("string write");
    }
    let json = json!({
        "command": "bell-scan",
        "settings": settings,
        "result": bell,
        "curve_hv": curve_hv,
        "curve_da": curve_da,
    });
    write_outputs(paths, &csv, &json)?;
    manifest::write_manifest(paths, "bell-scan", 0, settings)?;
    say!("V1 = {:.6}", bell.v1);
    say!("V2 = {:.6}", bell.v2);
    say!("S = {:.6}", bell.s);
    say!(
        "{}",
        if bell.non_classical {
            "violates the classical bound S <= 2"
        } else {
            "within the classical bound S <= 2"
        }
    );
    announce(paths);
    Ok(())
}

// stack response

pub fn stack_response_cmd(args: crate::StackResponseArgs) -> Result<()> {
    let overlay: config::StackResponseOverlay = config::load_overlay(args.config.as_deref())?;
    let file = args
        .file
        .or_else(|| overlay.file.as_deref().map(PathBuf::from))
        .ok_or_else(|| Error::Config("stack response needs --file".into()))?;
    let wavelength_nm = args.wavelength.or(overlay.wavelength_nm).unwrap_or(810.0);
    let (layers, file_in, file_out) = config::load_stack_file(&file)?;
    let materials_path = args
        .materials
        .or_else(|| overlay.materials.as_deref().map(PathBuf::from));
    let materials = config::load_materials(materials_path.as_deref())?;
    let settings = config::StackResponseSettings {
        layers: config::inline_entries(&layers, materials.as_ref(), wavelength_nm)?,
        ambient_in: args.ambient_in.or(overlay.ambient_in).unwrap_or(file_in),
        ambient_out: args.ambient_out.or(overlay.ambient_out).unwrap_or(file_out),
        wavelength_nm,
    };
    let paths = OutPaths::new(args.out.as_deref(), "stack-response");
    run_stack_response(&settings, &paths)
}

pub fn run_stack_response(
    settings: &config::StackResponseSettings,
    paths: &OutPaths,
) -> Result<()> {
    let stack = stack_from_entries(
        &settings.layers,
        None,
        settings.wavelength_nm,
        settings.ambient_in,
        settings.ambient_out,
    )?;
    let resp = stack_response(&stack)?;
    let t2 = resp.t.norm_sqr();
    let rl2 = resp.r_left.norm_sqr();
    let rr2 = resp.r_right.norm_sqr();
    let (al, ar) = (1.0 - t2 - rl2, 1.0 - t2 - rr2);
    let mut csv = String::from(
        "t_re,t_im,r_left_re,r_left_im,r_right_re,r_right_im,transmittance,\
         reflectance_left,reflectance_right,absorptance_left,absorptance_right\n",
    );
    writeln!(
        csv,
        "{},{},{},{},{},{},{t2},{rl2},{rr2},{al},{ar}",
        resp.t.re, resp.t.im, resp.r_left.re, resp.r_left.im, resp.r_right.re, resp.r_right.im
    )
    .expect("string write");
    let json = json!({
        "command": "stack-response",
        "settings": settings,
        "t": [resp.t.re, resp.t.im],
        "r_left": [resp.r_left.re, resp.r_left.im],
        "r_right": [resp.r_right.re, resp.r_right.im],
        "transmittance": t2,
        "reflectance_left": rl2,
        "reflectance_right": rr2,
        "absorptance_left": al,
        "absorptance_right": ar,
    });
    write_outputs(paths, &csv, &json)?;
    manifest::write_manifest(paths, "stack-response", 0, settings)?;
    say!(
        "t = {:.6}{:+.6}i  (transmittance {t2:.6})",
        resp.t.re, resp.t.im
    );
    say!(
        "r_left = {:.6}{:+.6}i  (reflectance {rl2:.6}, absorptance {al:.6})",
        resp.r_left.re, resp.r_left.im
    );
    say!(
        "r_right = {:.6}{:+.6}i  (reflectance {rr2:.6}, absorptance {ar:.6})",
        resp.r_right.re, resp.r_right.im
    );
    announce(paths);
    Ok(())
}

// stack design

pub fn stack_design_cmd(args: crate::StackDesignArgs) -> Result<()> {
    let overlay: config::StackDesignOverlay = config::load_overlay(args.config.as_deref())?;
    let template_path = args
        .template
        .or_else(|| overlay.template.as_deref().map(PathBuf::from))
        .ok_or_else(|| Error::Config("stack design needs --template".into()))?;
    let target_name = args
        .target
        .or_else(|| overlay.target.clone())
        .unwrap_or_else(|| "eq6-plus".into());
    let target = config::parse_target(&target_name)?;
    let template = DesignTemplate::from_json(&config::read_text(&template_path)?)?;
    let materials_path = args
        .materials
        .or_else(|| overlay.materials.as_deref().map(PathBuf::from));
    let materials = config::load_materials(materials_path.as_deref())?;
    let settings = config::StackDesignSettings {
        template: config::inline_template(&template, materials.as_ref())?,
        target: config::TargetSpec::from_amplitudes(&target),
    };
    let paths = OutPaths::new(args.out.as_deref(), "stack-design");
    run_stack_design(&settings, &paths)
}

pub fn run_stack_design(settings: &config::StackDesignSettings, paths: &OutPaths) -> Result<()> {
    let target = settings.target.amplitudes()?;
    let design = design_stack(&settings.template, &target, None)?;
    let resp = stack_response(&design.stack)?;
    let mut csv = String::from("name,value\n");
    for (name, value) in &design.values {
        writeln!(csv, "{name},{value}").expect("string write");
    }
    writeln!(csv, "residual,{}", design.residual).expect("string write");
    let layers: Vec<serde_json::Value> = design
        .stack
        .layers
        .iter()
        .map(|l| json!({"thickness_nm": l.thickness_nm, "n": l.index.re, "k": l.index.im}))
        .collect();
    let json = json!({
        "command": "stack-design",
        "settings": settings,
        "values": design.values,
        "residual": design.residual,
        "layers": layers,
        "ambient_in": design.stack.ambient_in,
        "ambient_out": design.stack.ambient_out,
        "wavelength_nm": design.stack.wavelength_nm,
        "achieved": {
            "t": [resp.t.re, resp.t.im],
            "r_left": [resp.r_left.re, resp.r_left.im],
            "r_right": [resp.r_right.re, resp.r_right.im],
        },
    });
    write_outputs(paths, &csv, &json)?;
    manifest::write_manifest(paths, "stack-design", 0, settings)?;
    for (name, value) in &design.values {
        say!("{name} = {value:.3} nm");
    }
    say!("residual = {:.3e}", design.residual);
    say!(
        "achieved t = {:.4}{:+.4}i, r_left = {:.4}{:+.4}i, r_right = {:.4}{:+.4}i",
        resp.t.re, resp.t.im, resp.r_left.re, resp.r_left.im, resp.r_right.re, resp.r_right.im
    );
    announce(paths);
    Ok(())
}

// fock

pub fn fock_cmd(args: crate::FockArgs) -> Result<()> {
    let overlay: config::FockOverlay = config::load_overlay(args.config.as_deref())?;
    let matrix_path = args
        .matrix
        .or_else(|| overlay.matrix.as_deref().map(PathBuf::from))
        .ok_or_else(|| Error::Config("fock needs --matrix".into()))?;
    let occupation_raw = args
        .occupation
        .or_else(|| overlay.occupation.clone())
        .ok_or_else(|| Error::Config("fock needs --occupation".into()))?;
    let settings = config::FockSettings {
        matrix: config::load_matrix_rows(&matrix_path)?,
        occupation: config::parse_occupation(&occupation_raw)?,
    };
    let paths = OutPaths::new(args.out.as_deref(), "fock");
    run_fock(&settings, &paths)
}

pub fn run_fock(settings: &config::FockSettings, paths: &OutPaths) -> Result<()> {
    let m = config::matrix_from_rows(&settings.matrix)?;
    if m.nrows() != m.ncols() {
        return Err(Error::Config(format!(
            "mode map must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.ncols();
    if settings.occupation.len() != n {
        return Err(Error::Config(format!(
            "occupation lists {} modes but the matrix has {n}",
            settings.occupation.len()
        )));
    }
    let dilated = !m.is_unitary(1e-10);
    let (u, dim) = if dilated { (m.dilate()?, 2 * n) } else { (m, n) };
    let register = ModeRegister::from_labels(config::linear_mode_labels(dim))?;
    let mut occ = settings.occupation.clone();
    occ.resize(dim, 0);
    let state = FockState::from_occupation(register, occ)?;
    let dist = distribution(&evolve(&state, &u)?);
    let mut header = String::new();
    for k in 0..dim {
        write!(header, "m{k},").expect("string write");
    }
    let mut csv = format!("{header}probability\n");
    for (occ, p) in dist.probs() {
        let cells: Vec<String> = occ.iter().map(u8::to_string).collect();
        writeln!(csv, "{},{p}", cells.join(",")).expect("string write");
    }
    let rows: Vec<serde_json::Value> = dist
        .probs()
        .map(|(occ, p)| json!({"occupation": occ, "probability": p}))
        .collect();
    let json = json!({
        "command": "fock",
        "settings": settings,
        "dilated": dilated,
        "outcomes": rows,
        "total_mass": dist.total_mass(),
    });
    write_outputs(paths, &csv, &json)?;
    manifest::write_manifest(paths, "fock", 0, settings)?;
    for (occ, p) in dist.probs() {
        let cells: Vec<String> = occ.iter().map(u8::to_string).collect();
        say!("P({}) = {p:.6}", cells.join(","));
    }
    if dilated {
        say!("map was sub-unitary; modes {n}.. are loss channels");
    }
    announce(paths);
    Ok(())
}

// rerun

pub fn rerun_cmd(args: crate::RerunArgs) -> Result<()> {
    let record = manifest::load_manifest(&args.manifest)?;
    let first_output = record.outputs.first().map(PathBuf::from);
    let out = args.out.or(first_output).ok_or_else(|| {
        Error::Config("manifest records no outputs; pass --out".into())
    })?;
    let paths = OutPaths::new(Some(&out), "rerun");
    fn settings<T: for<'de> serde::Deserialize<'de>>(record: &manifest::RunManifest) -> Result<T> {
        serde_json::from_value(record.config.clone()).map_err(|e| {
            Error::Config(format!(
                "manifest settings do not match command {:?}: {e}",
                record.command
            ))
        })
    }
    match record.command.as_str() {
        "hom-scan" => run_hom_scan(&settings(&record)?, &paths),
        "distribution" => run_distribution(&settings(&record)?, &paths),
        "bell-scan" => run_bell_scan(&settings(&record)?, &paths),
        "stack-response" => run_stack_response(&settings(&record)?, &paths),
        "stack-design" => run_stack_design(&settings(&record)?, &paths),
        "fock" => run_fock(&settings(&record)?, &paths),
        other => Err(Error::Config(format!("manifest names unknown command {other:?}"))),
    }
}
