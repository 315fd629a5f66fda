//! Command runner behind the `polquant` binary: the algebra verification
//! suite, jet/star/classification front ends, the Fedosov residual check and
//! the Toeplitz remainder sweep, each reporting named pass/fail checks.

use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ConfigDocument;
use crate::error::{Error, Result};
use crate::fedosov::{
    classify_quantizable, fedosov_residual, gamma_flat, quantum_jet, quantum_jet_torus_closed,
    star_product, HbarPoly,
};
use crate::report;
use crate::toeplitz::{remainder_sweep, StateChoice};
use crate::trig::TrigPoly;
use crate::weyl::{
    hodge_apply, sample, Geometry, HodgeOp, Truncation, WeylElement, WeylMonomial,
};

/// One named check with its measured worst-case error.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn measured(name: &str, worst: f64, tolerance: f64) -> Self {
        CheckOutcome {
            name: name.to_string(),
            passed: worst <= tolerance,
            detail: format!("max error {worst:.3e} (tolerance {tolerance:.0e})"),
        }
    }
}

/// Outcome of one command invocation.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub command: String,
    pub checks: Vec<CheckOutcome>,
    pub wall_ms: u128,
    pub outputs: Vec<PathBuf>,
}

impl RunSummary {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn print(&self) {
        for check in &self.checks {
            let flag = if check.passed { "PASS" } else { "FAIL" };
            println!("[{flag}] {}: {}", check.name, check.detail);
        }
        println!("{}: {} ms", self.command, self.wall_ms);
    }
}

/// Relative-error helper used throughout the suites.
fn rel(err: f64, scale: f64) -> f64 {
    err / scale.max(1.0)
}

/// The full Hodge-decomposition suite: both identities, the refined Q/P
/// identities, and the vanishing squares, over seeded random elements.
pub fn check_hodge_suite(samples_per_dim: usize, seed: u64) -> Vec<CheckOutcome> {
    let mut worst_full: f64 = 0.0;
    let mut worst_refined: f64 = 0.0;
    let mut worst_squares: f64 = 0.0;
    let trunc = Truncation::new(6, 4);
    for n in [1usize, 2] {
        let geom = Geometry::torus(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
        let opts = sample::SampleOpts::default();
        for _ in 0..samples_per_dim {
            let a = sample::random_weyl(&geom, trunc, &opts, &mut rng);
            let scale = a.max_coeff_norm();
            let lhs = a.try_sub(&hodge_apply(HodgeOp::Pi0, &a)).expect("compatible");
            let rhs = hodge_apply(HodgeOp::Delta, &hodge_apply(HodgeOp::DeltaInv, &a))
                .try_add(&hodge_apply(HodgeOp::DeltaInv, &hodge_apply(HodgeOp::Delta, &a)))
                .expect("compatible");
            worst_full = worst_full.max(rel(lhs.distance(&rhs), scale));
            let lhs_q = a.try_sub(&hodge_apply(HodgeOp::PiQ, &a)).expect("compatible");
            let rhs_q = hodge_apply(HodgeOp::DeltaQ, &hodge_apply(HodgeOp::DeltaQInv, &a))
                .try_add(&hodge_apply(HodgeOp::DeltaQInv, &hodge_apply(HodgeOp::DeltaQ, &a)))
                .expect("compatible");
            worst_refined = worst_refined.max(rel(lhs_q.distance(&rhs_q), scale));
            let lhs_p = a.try_sub(&hodge_apply(HodgeOp::PiP, &a)).expect("compatible");
            let rhs_p = hodge_apply(HodgeOp::DeltaP, &hodge_apply(HodgeOp::DeltaPInv, &a))
                .try_add(&hodge_apply(HodgeOp::DeltaPInv, &hodge_apply(HodgeOp::DeltaP, &a)))
                .expect("compatible");
            worst_refined = worst_refined.max(rel(lhs_p.distance(&rhs_p), scale));
            for op in [
                HodgeOp::Delta,
                HodgeOp::DeltaQ,
                HodgeOp::DeltaP,
                HodgeOp::DeltaInv,
                HodgeOp::DeltaQInv,
                HodgeOp::DeltaPInv,
            ] {
                let sq = hodge_apply(op, &hodge_apply(op, &a));
                worst_squares = worst_squares.max(rel(sq.max_coeff_norm(), scale));
            }
        }
    }
    vec![
        CheckOutcome::measured("hodge-full-decomposition", worst_full, 1e-12),
        CheckOutcome::measured("hodge-refined-decompositions", worst_refined, 1e-12),
        CheckOutcome::measured("differential-squares-vanish", worst_squares, 1e-12),
    ]
}

/// Star associativity order-by-order in ħ on random elements, n ∈ {1, 2}.
pub fn check_star_associativity(samples_per_dim: usize, seed: u64) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    let trunc = Truncation::new(10, 4);
    for n in [1usize, 2] {
        let geom = Geometry::torus(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xA5 + n as u64));
        let opts = sample::SampleOpts { max_sym_degree: 2, max_hpow: 1, ..Default::default() };
        for _ in 0..samples_per_dim {
            let a = sample::random_weyl(&geom, trunc, &opts, &mut rng);
            let b = sample::random_weyl(&geom, trunc, &opts, &mut rng);
            let d = sample::random_weyl(&geom, trunc, &opts, &mut rng);
            let ab_d = a.star(&b).and_then(|ab| ab.star(&d)).expect("compatible");
            let a_bd = b.star(&d).and_then(|bd| a.star(&bd)).expect("compatible");
            worst = worst.max(rel(ab_d.distance(&a_bd), ab_d.max_coeff_norm()));
        }
    }
    CheckOutcome::measured("star-associativity", worst, 1e-9)
}

/// Flat Leibniz rule d(a ⋆ b) = da ⋆ b + a ⋆ db on sections.
pub fn check_flat_leibniz(samples: usize, seed: u64) -> CheckOutcome {
    let geom = Geometry::torus(1);
    let trunc = Truncation::new(10, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1E1B);
    let opts = sample::SampleOpts { max_form_factors: 0, ..Default::default() };
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let a = sample::random_weyl(&geom, trunc, &opts, &mut rng);
        let b = sample::random_weyl(&geom, trunc, &opts, &mut rng);
        let lhs = a.star(&b).expect("compatible").exterior_derivative();
        let rhs = a
            .exterior_derivative()
            .star(&b)
            .and_then(|l| a.star(&b.exterior_derivative()).and_then(|r| l.try_add(&r)))
            .expect("compatible");
        worst = worst.max(rel(lhs.distance(&rhs), lhs.max_coeff_norm()));
    }
    CheckOutcome::measured("flat-leibniz", worst, 1e-10)
}

/// Fibrewise module identity (a ⋆F b) ⊛ s = a ⊛ (b ⊛ s).
pub fn check_module_identity(samples: usize, seed: u64) -> CheckOutcome {
    let geom = Geometry::torus(1);
    let trunc = Truncation::new(14, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x30D);
    let opts = sample::SampleOpts {
        max_form_factors: 0,
        max_sym_degree: 2,
        max_hpow: 1,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for k in [1u32, 3, 7] {
        for _ in 0..samples {
            let a = sample::random_weyl(&geom, trunc, &opts, &mut rng);
            let b = sample::random_weyl(&geom, trunc, &opts, &mut rng);
            let mut s = WeylElement::zero(&geom, trunc);
            for pow in 0..=3 {
                s.add_term(
                    &WeylMonomial::unit(1).with_u(0, pow),
                    sample::random_trig(1, 1, 2, &mut rng),
                );
            }
            let lhs = a
                .star(&b)
                .and_then(|ab| ab.fibrewise_act(&s, k))
                .expect("valid module argument");
            let rhs = b
                .fibrewise_act(&s, k)
                .and_then(|bs| a.fibrewise_act(&bs, k))
                .expect("valid module argument");
            worst = worst.max(rel(lhs.distance(&rhs), lhs.max_coeff_norm()));
        }
    }
    CheckOutcome::measured("fibrewise-module-identity", worst, 1e-10)
}

/// Commutator–action bridge: for α with one ǔ factor,
/// (1/ħ)[α, s]⋆ at ħ = i/k equals (k/i)·(α ⊛F s).
pub fn check_commutator_bridge(samples: usize, seed: u64) -> CheckOutcome {
    let geom = Geometry::torus(1);
    let trunc = Truncation::new(12, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB21D);
    let mut worst: f64 = 0.0;
    for k in [1u32, 4, 9] {
        for _ in 0..samples {
            let mut alpha = WeylElement::zero(&geom, trunc);
            let up = rng.gen_range(0..=2);
            alpha.add_term(
                &WeylMonomial::unit(1).with_u(0, up).with_cu(0, 1),
                sample::random_trig(1, 1, 2, &mut rng),
            );
            let mut s = WeylElement::zero(&geom, trunc);
            for pow in 0..=3 {
                s.add_term(
                    &WeylMonomial::unit(1).with_u(0, pow),
                    sample::random_trig(1, 1, 2, &mut rng),
                );
            }
            let comm = alpha
                .commutator(&s, true)
                .and_then(|c| c.evaluate_hbar(k))
                .expect("structurally divisible by ħ");
            let k_over_i = Complex64::new(0.0, 1.0 / k as f64).finv();
            let action = alpha.fibrewise_act(&s, k).expect("valid module argument").scale(k_over_i);
            worst = worst.max(rel(comm.distance(&action), comm.max_coeff_norm()));
        }
    }
    CheckOutcome::measured("commutator-action-bridge", worst, 1e-12)
}

/// `verify-algebra`: the full weyl-algebra invariant suite.
pub fn run_verify_algebra(cfg: &ConfigDocument) -> Result<RunSummary> {
    let start = Instant::now();
    let mut checks = check_hodge_suite(100, cfg.seed);
    checks.push(check_star_associativity(15, cfg.seed));
    checks.push(check_flat_leibniz(10, cfg.seed));
    checks.push(check_module_identity(6, cfg.seed));
    checks.push(check_commutator_bridge(8, cfg.seed));
    Ok(RunSummary {
        command: "verify-algebra".into(),
        checks,
        wall_ms: start.elapsed().as_millis(),
        outputs: Vec::new(),
    })
}

/// `jet`: print 𝐉_f with the closed-form oracle delta and the flatness
/// residual.
pub fn run_jet(cfg: &ConfigDocument, f: &HbarPoly) -> Result<RunSummary> {
    let start = Instant::now();
    let geom = cfg.build_geometry();
    let trunc = cfg.build_truncation();
    let jet = quantum_jet(f, &geom, trunc)?;
    println!("J_f at total weight <= {}, hbar <= {}:", trunc.max_total_weight, trunc.max_hbar);
    print!("{}", jet.jet);
    let mut checks = vec![CheckOutcome::measured("jet-d-flatness", jet.residual_norm, 1e-9)];
    if matches!(geom.flavor(), crate::weyl::GeometryFlavor::Torus) {
        let closed = quantum_jet_torus_closed(f, &geom, trunc)?;
        let delta = jet.jet.distance(&closed);
        let scale = jet.jet.max_coeff_norm().max(1.0);
        println!("closed-form oracle delta: {:.3e}", delta);
        checks.push(CheckOutcome::measured("jet-oracle-agreement", delta / scale, 1e-10));
    }
    Ok(RunSummary {
        command: "jet".into(),
        checks,
        wall_ms: start.elapsed().as_millis(),
        outputs: Vec::new(),
    })
}

/// `star`: print f ⋆ g to the requested ħ-order.
pub fn run_star(cfg: &ConfigDocument, f: &HbarPoly, g: &HbarPoly, order: u32) -> Result<RunSummary> {
    let start = Instant::now();
    let geom = cfg.build_geometry();
    let prod = star_product(f, g, &geom, order)?;
    println!("f * g to hbar-order {order}:");
    for i in 0..=order {
        println!("  hbar^{i}: {}", prod.coeff(i));
    }
    Ok(RunSummary {
        command: "star".into(),
        checks: Vec::new(),
        wall_ms: start.elapsed().as_millis(),
        outputs: Vec::new(),
    })
}

/// `classify`: print the quantizable-function verdict as JSON.
pub fn run_classify(cfg: &ConfigDocument, f: &HbarPoly) -> Result<RunSummary> {
    let start = Instant::now();
    let geom = cfg.build_geometry();
    let trunc = cfg.build_truncation();
    let verdict = classify_quantizable(f, &geom, trunc)?;
    println!("{}", serde_json::to_string(&verdict).expect("verdict serializes"));
    Ok(RunSummary {
        command: "classify".into(),
        checks: Vec::new(),
        wall_ms: start.elapsed().as_millis(),
        outputs: Vec::new(),
    })
}

/// `fedosov-check`: residual norms on both geometries plus the
/// component-deleted negative control.
pub fn run_fedosov_check(cfg: &ConfigDocument) -> Result<RunSummary> {
    let start = Instant::now();
    let trunc = cfg.build_truncation();
    let mut checks = Vec::new();
    for geom in [Geometry::torus(cfg.dimension), Geometry::local_flat(cfg.dimension)] {
        let label = match geom.flavor() {
            crate::weyl::GeometryFlavor::Torus => "torus",
            crate::weyl::GeometryFlavor::LocalFlat => "local_flat",
        };
        let gamma = gamma_flat(&geom, trunc);
        let res = fedosov_residual(&gamma.total())?;
        println!("residual norm ({label}): {:.3e}", res.max_coeff_norm());
        checks.push(CheckOutcome::measured(
            &format!("fedosov-residual-{label}"),
            res.max_coeff_norm(),
            1e-12,
        ));
        let control = fedosov_residual(&gamma.delta_p_inv_omega)?;
        let nonzero = control.max_coeff_norm() > 0.5;
        checks.push(CheckOutcome {
            name: format!("fedosov-negative-control-{label}"),
            passed: nonzero,
            detail: format!("residual with deleted component {:.3e}", control.max_coeff_norm()),
        });
    }
    Ok(RunSummary {
        command: "fedosov-check".into(),
        checks,
        wall_ms: start.elapsed().as_millis(),
        outputs: Vec::new(),
    })
}

/// `toeplitz-sweep`: run the remainder sweep, write the CSV and optionally
/// the SVG decay plot.
pub fn run_toeplitz_sweep(cfg: &ConfigDocument, f: &TrigPoly) -> Result<RunSummary> {
    let start = Instant::now();
    if cfg.dimension != f.dim() {
        return Err(Error::Config(format!(
            "function dimension {} does not match config dimension {}",
            f.dim(),
            cfg.dimension
        )));
    }
    let template = cfg.build_tau_template()?;
    let states = if cfg.all_classes {
        StateChoice::AllClasses
    } else {
        StateChoice::SingleClass(cfg.m_class.clone().unwrap_or_else(|| vec![0; cfg.dimension]))
    };
    let report_data = remainder_sweep(
        f,
        cfg.n_order,
        &cfg.k_list,
        &states,
        &template,
        cfg.build_grid(),
        cfg.max_deriv_order,
    )?;
    match report_data.fitted_slope {
        Some(s) => println!("fitted_slope={s:.6} max_bound_ratio={:.6}", report_data.max_bound_ratio),
        None => println!("fitted_slope=na max_bound_ratio={:.6}", report_data.max_bound_ratio),
    }
    let mut outputs = Vec::new();
    if let Some(path) = &cfg.out_csv {
        report::write_sweep_csv(&report_data, path)?;
        outputs.push(path.clone());
    } else {
        print!("{}", report::sweep_csv(&report_data));
    }
    if let Some(path) = &cfg.plot_svg {
        report::write_decay_svg(&report_data, path)?;
        outputs.push(path.clone());
    }
    Ok(RunSummary {
        command: "toeplitz-sweep".into(),
        checks: Vec::new(),
        wall_ms: start.elapsed().as_millis(),
        outputs,
    })
}
