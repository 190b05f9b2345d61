//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line.  Lines are written straight to the stdout handle so
//! they appear even without `--nocapture`.

use antihom::experiment::{
    analytic_coincidence, bell_parameter, bell_visibilities, engine_coincidence,
    engine_distribution, fit_hom_curve, fit_sinusoid, hom_scan, polarization_scan_mixed, Sample,
    ScanConfig, Symmetry,
};
use antihom::fock::{conditional, loss_histogram, photons_on, Port};
use antihom::optics::{lossless_bs, lossy_bs, qsw_composite, QswChannel, Sign};
use antihom::rng::{uniform, Philox};
use antihom::states::{analyzer_coincidence, overlap_from_position, BellPhase, WavePacketSpec};
use antihom::tmm::{stack_response, Layer, LayerStack};
use antihom::transfer::{random_passive, TransferMatrix};
use antihom::Complex;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

fn report(line: &str) {
    use std::io::Write as _;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.write_all(b"\n");
    let _ = out.flush();
}

fn check(n: usize, label: &str, f: impl FnOnce() -> Result<(), String>) {
    match f() {
        Ok(()) => report(&format!("criterion {n} PASS: {label}")),
        Err(msg) => {
            report(&format!("criterion {n} FAIL: {label} ({msg})"));
            panic!("criterion {n} FAIL: {label} ({msg})");
        }
    }
}

fn req(cond: bool, msg: impl Fn() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e(err: antihom::Error) -> String {
    err.to_string()
}

fn normalized_at_full_overlap(sample: &TransferMatrix, phi: f64) -> Result<f64, String> {
    let phi = BellPhase::new(phi);
    let full = engine_coincidence(sample, phi, 1.0).map_err(e)?;
    let base = engine_coincidence(sample, phi, 0.0).map_err(e)?;
    Ok(full / base)
}

fn grid(from: f64, to: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| from + (to - from) * k as f64 / (n - 1) as f64)
        .collect()
}

fn scan_config(noise: bool, seed: u64) -> Result<ScanConfig, String> {
    Ok(ScanConfig {
        positions_um: grid(-60.0, 60.0, 41),
        phi: BellPhase::new(0.0),
        sample: Sample::Matrix(lossless_bs(FRAC_1_SQRT_2, Sign::Plus).map_err(e)?),
        packet: WavePacketSpec::new(810.0, 10.0).map_err(e)?,
        reference_counts: 750.0,
        rng_seed: seed,
        noise,
    })
}

#[test]
fn criterion_01_hom_dip_vanishes() {
    check(1, "lossless 50/50 dip reaches 0", || {
        let m = lossless_bs(FRAC_1_SQRT_2, Sign::Plus).map_err(e)?;
        let v = normalized_at_full_overlap(&m, 0.0)?;
        req(v.abs() < 1e-9, || format!("normalized {v:e}"))
    });
}

#[test]
fn criterion_02_hom_peak_doubles() {
    check(2, "lossless 50/50 peak reaches 2", || {
        let m = lossless_bs(FRAC_1_SQRT_2, Sign::Plus).map_err(e)?;
        let v = normalized_at_full_overlap(&m, PI)?;
        req((v - 2.0).abs() < 1e-9, || format!("normalized {v}"))
    });
}

#[test]
fn criterion_03_absorbing_baseline_is_one_eighth() {
    check(3, "absorbing splitter baseline 0.125 for either symmetry", || {
        for sign in [Sign::Plus, Sign::Minus] {
            for phi in [0.0, PI] {
                let p =
                    engine_coincidence(&lossy_bs(sign), BellPhase::new(phi), 0.0).map_err(e)?;
                req((p - 0.125).abs() < 1e-9, || {
                    format!("sign {sign:?} phi {phi}: baseline {p}")
                })?;
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_04_bosonic_pairs_anti_coalesce() {
    check(4, "bosonic peak: absolute 0.25, normalized 2", || {
        for sign in [Sign::Plus, Sign::Minus] {
            let m = lossy_bs(sign);
            let p = engine_coincidence(&m, BellPhase::new(0.0), 1.0).map_err(e)?;
            req((p - 0.25).abs() < 1e-9, || format!("sign {sign:?}: absolute {p}"))?;
            let v = normalized_at_full_overlap(&m, 0.0)?;
            req((v - 2.0).abs() < 1e-9, || format!("sign {sign:?}: normalized {v}"))?;
        }
        Ok(())
    });
}

#[test]
fn criterion_05_fermionic_pairs_lose_exactly_one_photon() {
    check(5, "fermionic dip: coincidence 0, always one photon absorbed", || {
        for sign in [Sign::Plus, Sign::Minus] {
            let m = lossy_bs(sign);
            let phi = BellPhase::new(PI);
            let p = engine_coincidence(&m, phi, 1.0).map_err(e)?;
            req(p.abs() < 1e-9, || format!("sign {sign:?}: coincidence {p}"))?;
            let hist = loss_histogram(&engine_distribution(&m, phi, 1.0).map_err(e)?);
            let one = hist.get(&1).copied().unwrap_or(0.0);
            req((one - 1.0).abs() < 1e-9, || {
                format!("sign {sign:?}: one-photon loss mass {one}")
            })?;
            let rest: f64 = hist.iter().filter(|(&k, _)| k != 1).map(|(_, &p)| p).sum();
            req(rest.abs() < 1e-9, || format!("sign {sign:?}: stray loss mass {rest:e}"))?;
        }
        Ok(())
    });
}

#[test]
fn criterion_06_bosonic_absorption_is_all_or_nothing() {
    check(6, "bosonic loss {0: 0.5, 2: 0.5}; survivors 1/4, 1/2, 1/4", || {
        let dist = engine_distribution(&lossy_bs(Sign::Plus), BellPhase::new(0.0), 1.0)
            .map_err(e)?;
        let hist = loss_histogram(&dist);
        for (k, want) in [(0u8, 0.5), (2u8, 0.5)] {
            let got = hist.get(&k).copied().unwrap_or(0.0);
            req((got - want).abs() < 1e-9, || format!("loss {k}: mass {got}"))?;
        }
        let one = hist.get(&1).copied().unwrap_or(0.0);
        req(one.abs() < 1e-9, || format!("loss 1: mass {one:e}"))?;

        let register = dist.register().clone();
        let (mass, survivors) =
            conditional(&dist, |occ| photons_on(&register, occ, Port::is_loss) == 0);
        req((mass - 0.5).abs() < 1e-9, || format!("survivor mass {mass}"))?;
        let mut split = [0.0f64; 3];
        for (occ, p) in survivors.probs() {
            let left = photons_on(&register, occ, |q| q == Port::Left);
            split[left as usize] += p;
        }
        for (left, want) in [(0usize, 0.25), (1, 0.5), (2, 0.25)] {
            req((split[left] - want).abs() < 1e-9, || {
                format!("survivors with {left} photons left: {}", split[left])
            })?;
        }
        Ok(())
    });
}

#[test]
fn criterion_07_standing_wave_channels_compose_to_the_splitters() {
    check(7, "qsw (0,1) and (1,0) reproduce the absorbing splitters", || {
        let cases = [
            (0.0, 1.0, lossy_bs(Sign::Minus)),
            (1.0, 0.0, lossy_bs(Sign::Plus)),
        ];
        for (sc, ss, want) in cases {
            let channel =
                QswChannel::new(Complex::new(sc, 0.0), Complex::new(ss, 0.0)).map_err(e)?;
            let got = qsw_composite(channel);
            for i in 0..2 {
                for j in 0..2 {
                    let d = (got.get(i, j) - want.get(i, j)).norm();
                    req(d < 1e-12, || {
                        format!("(sc, ss) = ({sc}, {ss}): entry ({i}, {j}) differs by {d:e}")
                    })?;
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_08_membrane_reflectance_and_dip_floor() {
    check(8, "100 nm n=2.1 film: R near 0.4, dip floor matches closed form", || {
        let stack = LayerStack::new(
            vec![Layer::new(100.0, Complex::new(2.1, 0.0)).map_err(e)?],
            1.0,
            1.0,
            810.0,
        )
        .map_err(e)?;
        let resp = stack_response(&stack).map_err(e)?;
        let r2 = resp.r_left.norm_sqr();
        let t2 = resp.t.norm_sqr();
        req((0.38..=0.42).contains(&r2), || format!("reflectance {r2}"))?;
        let formula = (t2 - r2).powi(2) / (t2 * t2 + r2 * r2);
        let floor = normalized_at_full_overlap(&resp.transfer_matrix().map_err(e)?, 0.0)?;
        req((formula - floor).abs() < 1e-6, || {
            format!("closed form {formula} vs engine {floor}")
        })
    });
}

#[test]
fn criterion_09_engine_agrees_with_the_closed_form() {
    check(9, "200 random samples: engine matches analytic to 1e-9", || {
        let mut rng = Philox::new(0xACCE97, 9);
        let draw = |rng: &mut Philox| {
            let radius = uniform(rng).sqrt();
            let angle = 2.0 * PI * uniform(rng);
            Complex::from_polar(radius, angle)
        };
        for case in 0..200 {
            let channel = QswChannel::new(draw(&mut rng), draw(&mut rng)).map_err(e)?;
            let sample = qsw_composite(channel);
            let t = sample.get(0, 0);
            let r = sample.get(0, 1);
            let g = uniform(&mut rng);
            for (symmetry, phi) in [(Symmetry::Bosonic, 0.0), (Symmetry::Fermionic, PI)] {
                let engine =
                    engine_coincidence(&sample, BellPhase::new(phi), g).map_err(e)?;
                let analytic = analytic_coincidence(t, r, symmetry, g).map_err(e)?;
                req((engine - analytic).abs() < 1e-9, || {
                    format!("case {case} {symmetry:?} g {g}: engine {engine} vs analytic {analytic}")
                })?;
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_10_dilations_are_unitary_and_faithful() {
    check(10, "100 random passive maps dilate cleanly", || {
        let mut rng = Philox::new(0xACCE97, 10);
        for case in 0..100 {
            let n = 2 + case % 3;
            let m = TransferMatrix::from_matrix(random_passive(n, &mut rng)).map_err(e)?;
            let u = m.dilate().map_err(e)?;
            let residual = u.unitarity_residual();
            req(residual < 1e-10, || format!("case {case}: residual {residual:e}"))?;
            for i in 0..n {
                for j in 0..n {
                    let d = (u.get(i, j) - m.get(i, j)).norm();
                    req(d < 1e-12, || {
                        format!("case {case}: top block entry ({i}, {j}) moved by {d:e}")
                    })?;
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_11_bell_machinery() {
    check(11, "ideal visibilities, singlet nulls, phase-flip symmetry", || {
        let (v1, v2) = bell_visibilities(BellPhase::new(0.0), 0.0).map_err(e)?;
        req((v1 - 1.0).abs() < 1e-9 && (v2 - 1.0).abs() < 1e-9, || {
            format!("V1 {v1}, V2 {v2}")
        })?;
        let s = bell_parameter(v1, v2).map_err(e)?.s;
        req((s - 2.0 * SQRT_2).abs() < 1e-9, || format!("S {s}"))?;

        let singlet = BellPhase::new(PI);
        for &theta in &grid(0.0, 2.0 * PI, 41) {
            let p = analyzer_coincidence(singlet, theta, theta);
            req(p.abs() < 1e-12, || format!("singlet P({theta}, {theta}) = {p:e}"))?;
        }

        let sym = BellPhase::new(0.0);
        for &theta1 in &grid(0.0, 2.0 * PI, 41) {
            for theta2 in [0.0, FRAC_PI_2] {
                let a = analyzer_coincidence(sym, theta1, theta2);
                let b = analyzer_coincidence(singlet, theta1, theta2);
                req((a - b).abs() < 1e-9, || {
                    format!("theta2 {theta2}: {a} vs {b}")
                })?;
            }
            let a = analyzer_coincidence(sym, theta1, FRAC_PI_4);
            let b = analyzer_coincidence(singlet, theta1, -FRAC_PI_4);
            req((a - b).abs() < 1e-9, || format!("mirror at pi/4: {a} vs {b}"))?;
            let c = analyzer_coincidence(sym, theta1, -FRAC_PI_4);
            let d = analyzer_coincidence(singlet, theta1, FRAC_PI_4);
            req((c - d).abs() < 1e-9, || format!("mirror at -pi/4: {c} vs {d}"))?;
        }
        Ok(())
    });
}

#[test]
fn criterion_12_interference_region_spans_tens_of_microns() {
    check(12, "half-overlap position for 810/10 nm lies in 10..40 um", || {
        let packet = WavePacketSpec::new(810.0, 10.0).map_err(e)?;
        let excess = |dz: f64| overlap_from_position(dz, &packet).powi(2) - 0.5;
        let (mut lo, mut hi) = (0.0f64, 100.0f64);
        req(excess(lo) > 0.0 && excess(hi) < 0.0, || "bracket failed".into())?;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let dz = 0.5 * (lo + hi);
        req((10.0..=40.0).contains(&dz), || format!("half-overlap at {dz} um"))?;
        let closed_form =
            SPEED_OF_LIGHT_M_PER_S * 2.0f64.ln().sqrt() / (2.0 * packet.sigma_omega()) * 1e6;
        req((dz - closed_form).abs() / closed_form < 1e-6, || {
            format!("bisected {dz} vs closed form {closed_form}")
        })
    });
}

#[test]
fn criterion_13_fits_recover_generating_parameters() {
    check(13, "noiseless fits exact; noisy fits within 3 sigma", || {
        let packet = WavePacketSpec::new(810.0, 10.0).map_err(e)?;
        let width_truth =
            SPEED_OF_LIGHT_M_PER_S / (2.0 * SQRT_2 * packet.sigma_omega()) * 1e6;

        let clean = hom_scan(&scan_config(false, 0)?).map_err(e)?;
        let fit = fit_hom_curve(&clean).map_err(e)?;
        let width = fit.width_um.ok_or("clean fit lost its width")?;
        req((fit.baseline - 1.0).abs() < 1e-6, || format!("baseline {}", fit.baseline))?;
        req((fit.amplitude + 1.0).abs() < 1e-6, || format!("amplitude {}", fit.amplitude))?;
        req(fit.center_um.abs() < 1e-6, || format!("center {:e}", fit.center_um))?;
        req((width - width_truth).abs() / width_truth < 1e-6, || {
            format!("width {width} vs {width_truth}")
        })?;

        let theta_grid = grid(0.0, PI, 25);
        let curve = polarization_scan_mixed(BellPhase::new(0.7), FRAC_PI_4, &theta_grid, 0.1)
            .map_err(e)?;
        let fringe = fit_sinusoid(&curve).map_err(e)?;
        let amp_truth = 0.9 * 0.7f64.cos() / 4.0;
        req((fringe.offset - 0.25).abs() < 1e-6 * 0.25, || {
            format!("fringe offset {}", fringe.offset)
        })?;
        req((fringe.amplitude - amp_truth).abs() < 1e-6 * amp_truth, || {
            format!("fringe amplitude {} vs {amp_truth}", fringe.amplitude)
        })?;

        let mut recovered = 0;
        for seed in 0..100 {
            let noisy = hom_scan(&scan_config(true, seed)?).map_err(e)?;
            let Ok(f) = fit_hom_curve(&noisy) else { continue };
            let Some(w) = f.width_um else { continue };
            let Some(w_se) = f.width_se else { continue };
            let ok = (f.baseline - 1.0).abs() <= 3.0 * f.baseline_se
                && (f.amplitude + 1.0).abs() <= 3.0 * f.amplitude_se
                && f.center_um.abs() <= 3.0 * f.center_se
                && (w - width_truth).abs() <= 3.0 * w_se;
            if ok {
                recovered += 1;
            }
        }
        req(recovered >= 95, || format!("only {recovered}/100 noisy fits within 3 sigma"))
    });
}

#[test]
fn criterion_14_outputs_are_thread_count_invariant() {
    check(14, "manifest replay is byte-identical across thread counts", || {
        let tmp = tempfile::tempdir().map_err(|err| err.to_string())?;
        let run = |threads: &str, args: &[&str]| -> Result<(), String> {
            let out = std::process::Command::new(env!("CARGO_BIN_EXE_antihom"))
                .args(args)
                .env("ANTIHOM_THREADS", threads)
                .current_dir(tmp.path())
                .output()
                .map_err(|err| err.to_string())?;
            req(out.status.success(), || {
                format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
            })
        };
        run(
            "1",
            &["hom-scan", "--noise", "--seed", "3", "--points", "31", "--out", "a"],
        )?;
        run("4", &["rerun", "--manifest", "a.manifest.json", "--out", "b"])?;
        let read = |name: &str| -> Result<String, String> {
            std::fs::read_to_string(tmp.path().join(name)).map_err(|err| err.to_string())
        };
        req(read("a.csv")? == read("b.csv")?, || "CSV outputs differ".into())?;
        req(read("a.json")? == read("b.json")?, || "JSON outputs differ".into())
    });
}
