use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use speclab::cosine_kernel::{log_det, log_det_dirichlet, mu_checked, PotentialTable, Sign, GATE_STRIDE, GATE_U_MIN};
use speclab::dirac_system::{ab_trajectory_with, integrate, FreePotential, TwoVector};
use speclab::special_functions::chi;
use speclab::spectral_analysis::{
    bound_state, counting_comparison, expansion_grid, find_bound_states, isometric_round_trip, m_weyl_left, projection_defect, scattering_measure,
    scattering_transform, BoundState, BoundStateSpectrum, ExpansionSettings, RoundTrip, TransformSettings, PLANCHEREL_CONSTANT,
};
use speclab::structure_functions::{critical_trace, evaluator_inner, evaluator_norm_critical, set_session_defaults, write_structure_csv, StructureEvaluator};

use super::config::{Command, RunConfig};
use super::report::{all_pass, out_path, write_json, write_with, Check, Checks};
use super::Failure;

/// Runs the command; Ok(false) means some invariant check failed.
pub fn run(cfg: &RunConfig) -> Result<bool, Failure> {
    set_session_defaults(cfg.n, cfg.phi_cache());
    match cfg.command {
        Command::Potential => potential(cfg),
        Command::Structure => structure(cfg),
        Command::BoundStates => bound_states(cfg),
        Command::Scattering => scattering(cfg),
        Command::Expansion => expansion(cfg),
        Command::Verify => verify(cfg),
    }
}

fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64).collect()
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PotentialReport {
    table: String,
    gate_points: Vec<GatePoint>,
    tail_fit: TailFit,
    checks: Checks,
}

#[derive(Serialize)]
struct GatePoint {
    u: f64,
    resolvent: f64,
    finite_difference: f64,
    relative: f64,
}

#[derive(Serialize)]
struct TailFit {
    u_max: f64,
    /// d ln μ / d(−u)
    slope: f64,
    intercept: f64,
}

fn potential(cfg: &RunConfig) -> Result<bool, Failure> {
    let table = speclab::cache::potential_table(cfg.umin, cfg.umax, cfg.usteps, cfg.n, cfg.phi_cache().as_ref())?;
    let csv = out_path(cfg, "potential.csv")?;
    write_with(&csv, |w| table.write_csv(w))?;
    let mut gate = vec![];
    for (i, &u) in table.u_grid.iter().enumerate() {
        if i % GATE_STRIDE == 0 && u >= GATE_U_MIN {
            let m = mu_checked(u, cfg.n).or_else(|e| match e {
                // report the mismatch as a failed check instead of aborting
                speclab::Error::CrossValidation { .. } => Ok(speclab::cosine_kernel::MuEvaluation {
                    u,
                    resolvent: speclab::cosine_kernel::mu_resolvent(u, cfg.n)?.0,
                    finite_difference: speclab::cosine_kernel::mu_finite_difference(u, cfg.n)?,
                    logdet_plus: f64::NAN,
                    logdet_minus: f64::NAN,
                }),
                e => Err(e),
            })?;
            gate.push(GatePoint {
                u,
                resolvent: m.resolvent,
                finite_difference: m.finite_difference,
                relative: (m.resolvent - m.finite_difference).abs() / m.resolvent.abs(),
            });
        }
    }
    let worst = gate.iter().map(|g| g.relative).fold(0.0, f64::max);
    let fit_hi = cfg.umin + 0.25 * (cfg.umax - cfg.umin);
    let (slope, intercept) = table.left_tail_fit(fit_hi)?;
    let mut checks = Checks::new();
    checks.insert("mu_cross_validation".into(), Check::at_most(worst, cfg.tol("mu")));
    checks.insert("left_tail_decay".into(), Check::holds(slope < 0.0));
    let ok = all_pass(&checks);
    write_json(
        cfg,
        "potential.json",
        &PotentialReport {
            table: "potential.csv".into(),
            gate_points: gate,
            tail_fit: TailFit {
                u_max: fit_hi,
                slope,
                intercept,
            },
            checks,
        },
    )?;
    Ok(ok)
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct StructureReport {
    files: Vec<String>,
    checks: Checks,
}

fn a_token(a: f64) -> String {
    format!("{a}")
}

fn structure(cfg: &RunConfig) -> Result<bool, Failure> {
    if cfg.a0.is_empty() {
        return Err(super::UsageError::new("a0", "missing required field").into());
    }
    let energies = grid(0.0, cfg.emax, cfg.esteps);
    let mut files = vec![];
    let (mut wr, mut w1): (f64, f64) = (0.0, 0.0);
    for &a in &cfg.a0 {
        let ev = StructureEvaluator::shared(a)?;
        let rows = critical_trace(&ev, &energies)?;
        for (_, p) in &rows {
            wr = wr.max(rel(p.wronskian, Complex64::i() * p.gamma_refl));
            w1 = w1.max((p.w1 - 1.0).abs());
        }
        let name = format!("structure_a{}.csv", a_token(a));
        let path = out_path(cfg, &name)?;
        write_with(&path, |w| write_structure_csv(&rows, w))?;
        files.push(name);
    }
    let mut checks = Checks::new();
    checks.insert("wronskian".into(), Check::at_most(wr, cfg.tol("wronskian")));
    checks.insert("w1_identity".into(), Check::at_most(w1, cfg.tol("w1")));
    let ok = all_pass(&checks);
    write_json(cfg, "structure.json", &StructureReport { files, checks })?;
    Ok(ok)
}

// ---------------------------------------------------------------------------

/// Table from u0 far enough right to anchor every bound state up to emax.
fn right_table(cfg: &RunConfig, a0: f64) -> Result<PotentialTable, Failure> {
    let u0 = a0.ln();
    let hi = (u0 + 1.0).min(6f64.ln());
    let steps = ((hi - u0) / 0.01).ceil().max(8.0) as usize;
    Ok(speclab::cache::potential_table(u0, hi, steps, cfg.n, cfg.phi_cache().as_ref())?)
}

fn rvm_ratios(spec: &BoundStateSpectrum) -> Vec<Option<f64>> {
    spec.eigenvalues
        .iter()
        .map(|e| counting_comparison(spec, e.abs()).ok().and_then(|c| c.ratio))
        .collect()
}

struct StateChecks {
    states: Vec<BoundState>,
    norm_evaluator: f64,
    norm_trajectory: f64,
    orthogonality: f64,
}

fn state_checks(cfg: &RunConfig, spec: &BoundStateSpectrum, max_states: usize) -> Result<StateChecks, Failure> {
    let pos = spec.positive();
    let mut norm_evaluator: f64 = 0.0;
    for (&e, &nrm) in spec.eigenvalues.iter().zip(&spec.norms) {
        let ne = evaluator_norm_critical(spec.a0, e)?;
        norm_evaluator = norm_evaluator.max((nrm - ne).abs() / nrm);
    }
    let mut states = vec![];
    let mut norm_trajectory: f64 = 0.0;
    if !pos.is_empty() {
        let table = right_table(cfg, spec.a0)?;
        for &e in pos.iter().take(max_states) {
            let bs = bound_state(spec.a0, e, &table)?;
            norm_trajectory = norm_trajectory.max((bs.norm_formula - bs.norm_trajectory).abs() / bs.norm_formula);
            states.push(bs);
        }
    }
    let mut orthogonality: f64 = 0.0;
    for i in 0..states.len() {
        for j in 0..i {
            orthogonality = orthogonality.max(states[i].overlap(&states[j]));
        }
    }
    Ok(StateChecks {
        states,
        norm_evaluator,
        norm_trajectory,
        orthogonality,
    })
}

fn spectrum_checks(cfg: &RunConfig, spec: &BoundStateSpectrum, sc: &StateChecks, checks: &mut Checks) {
    checks.insert("zeros_symmetric".into(), Check::at_most(spec.symmetry_defect(), 1e-8));
    checks.insert("zeros_interlace".into(), Check::holds(spec.interlaces()));
    checks.insert("norm_vs_evaluator".into(), Check::at_most(sc.norm_evaluator, cfg.tol("norm")));
    if !sc.states.is_empty() {
        checks.insert("norm_vs_trajectory".into(), Check::at_most(sc.norm_trajectory, cfg.tol("norm")));
    }
    if sc.states.len() > 1 {
        checks.insert("orthogonality".into(), Check::at_most(sc.orthogonality, cfg.tol("orthogonality")));
    }
}

#[derive(Serialize)]
struct BoundStatesReport<'a> {
    a0: f64,
    eigenvalues: &'a [f64],
    norms: &'a [f64],
    rvm_ratios: Vec<Option<f64>>,
    b_zeros: &'a [f64],
    trajectories: Vec<String>,
    checks: Checks,
}

fn bound_states(cfg: &RunConfig) -> Result<bool, Failure> {
    let a0 = cfg.a0()?;
    let spec = find_bound_states(a0, cfg.emax)?;
    let path = out_path(cfg, "bound_states.csv")?;
    write_with(&path, |w| spec.write_csv(w))?;
    let sc = state_checks(cfg, &spec, usize::MAX)?;
    let mut trajectories = vec![];
    for (k, bs) in sc.states.iter().enumerate() {
        let name = format!("bound_state_{}.csv", k + 1);
        let path = out_path(cfg, &name)?;
        let u0 = a0.ln();
        let steps = ((bs.anchor_u - u0) / 0.005).round() as usize;
        write_with(&path, |w| {
            use std::io::Write;
            writeln!(w, "u,Reα,Imα,Reβ,Imβ")?;
            for u in grid(u0, bs.anchor_u, steps) {
                let t = bs.t_at(u);
                writeln!(w, "{u:.12e},{:.17e},{:.17e},{:.17e},{:.17e}", t.alpha.re, t.alpha.im, t.beta.re, t.beta.im)?;
            }
            Ok(())
        })?;
        trajectories.push(name);
    }
    let mut checks = Checks::new();
    spectrum_checks(cfg, &spec, &sc, &mut checks);
    let ok = all_pass(&checks);
    write_json(
        cfg,
        "bound_states.json",
        &BoundStatesReport {
            a0,
            eigenvalues: &spec.eigenvalues,
            norms: &spec.norms,
            rvm_ratios: rvm_ratios(&spec),
            b_zeros: &spec.b_zeros,
            trajectories,
            checks,
        },
    )?;
    Ok(ok)
}

// ---------------------------------------------------------------------------

fn bump(center: f64, width: f64) -> impl Fn(f64) -> f64 + Sync {
    move |u: f64| (-(u - center).powi(2) / (2.0 * width * width)).exp()
}

#[derive(Serialize)]
struct PlancherelRow {
    name: &'static str,
    lhs: f64,
    rhs: f64,
    defect: f64,
}

#[derive(Serialize)]
struct ScatteringReport {
    a0: f64,
    measure: String,
    trajectory: String,
    plancherel_constant: f64,
    plancherel: Vec<PlancherelRow>,
    checks: Checks,
}

fn plancherel_rows(a0: f64, table: &PotentialTable) -> Result<Vec<PlancherelRow>, Failure> {
    let u0 = a0.ln();
    let (lo, hi) = (u0 - 3.0, u0 - 1.0);
    let b1 = bump(u0 - 2.0, 0.2);
    let b2 = bump(u0 - 1.8, 0.2);
    let tests: [(&'static str, Box<dyn Fn(f64) -> (f64, f64) + Sync>); 2] = [
        ("alpha_bump", Box::new(move |u| (b1(u), 0.0))),
        ("mixed_bump", Box::new(move |u| (bump(u0 - 2.0, 0.2)(u), 0.5 * b2(u)))),
    ];
    let mut rows = vec![];
    for (name, t) in tests.iter() {
        let tr = scattering_transform(a0, t.as_ref(), (lo, hi), table, &TransformSettings::default())?;
        rows.push(PlancherelRow {
            name,
            lhs: tr.lhs,
            rhs: tr.rhs,
            defect: tr.defect(PLANCHEREL_CONSTANT),
        });
    }
    Ok(rows)
}

fn scattering(cfg: &RunConfig) -> Result<bool, Failure> {
    let a0 = cfg.a0()?;
    let u0 = a0.ln();
    if cfg.umin > u0 - 3.0 {
        return Err(super::UsageError::new("umin", format!("must be at most ln(a0) − 3 = {}", u0 - 3.0)).into());
    }
    let meas = scattering_measure(a0, &grid(0.0, cfg.emax, cfg.esteps))?;
    let mpath = out_path(cfg, "scattering_measure.csv")?;
    write_with(&mpath, |w| meas.write_csv(w))?;
    let steps = ((u0 - cfg.umin) / 0.01).ceil() as usize;
    let table = speclab::cache::potential_table(cfg.umin, u0, steps, cfg.n, cfg.phi_cache().as_ref())?;
    // [J; K] at E = energy, integrated from u0 towards −∞
    let p = StructureEvaluator::shared(a0)?.evaluate(Complex64::new(0.5, cfg.energy))?;
    let tr = integrate(u0, cfg.umin, cfg.energy.into(), TwoVector::new(p.j, p.k), &table)?;
    let tpath = out_path(cfg, "scattering_trajectory.csv")?;
    write_with(&tpath, |w| tr.write_csv(w))?;
    let end = tr.end_value();
    let w1_end = (-end.alpha * end.beta.conj()).im;
    let density = meas
        .density
        .iter()
        .zip(&meas.im_m_over_pi)
        .map(|(d, m)| (d - m).abs() / d)
        .fold(0.0, f64::max);
    let plancherel = plancherel_rows(a0, &table)?;
    let mut checks = Checks::new();
    checks.insert("density_equals_im_m".into(), Check::at_most(density, cfg.tol("w1")));
    checks.insert("w1_along_trajectory".into(), Check::at_most((w1_end - 1.0).abs(), cfg.tol("w1")));
    for r in &plancherel {
        checks.insert(format!("plancherel_{}", r.name), Check::at_most(r.defect, cfg.tol("plancherel")));
    }
    let ok = all_pass(&checks);
    write_json(
        cfg,
        "scattering.json",
        &ScatteringReport {
            a0,
            measure: "scattering_measure.csv".into(),
            trajectory: "scattering_trajectory.csv".into(),
            plancherel_constant: PLANCHEREL_CONSTANT,
            plancherel,
            checks,
        },
    )?;
    Ok(ok)
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ExpansionReport {
    u_min: f64,
    anchor_u: f64,
    e_max: f64,
    round_trips: BTreeMap<String, RoundTrip>,
    coefficients: String,
    checks: Checks,
}

type TestFn = Box<dyn Fn(f64) -> Complex64>;

/// F = γ·f̂ for three concentrated test profiles f̂.
fn test_functions() -> Vec<(&'static str, TestFn)> {
    let g = |e: f64| speclab::special_functions::gamma_factor(Complex64::new(0.5, e)).expect("critical line is pole-free");
    vec![
        ("gauss_shift3", Box::new(move |e| g(e) * (-e * e / 8.0).exp() * Complex64::from_polar(1.0, 3.0 * e))),
        ("gauss_offcenter", Box::new(move |e| g(e) * (-(e - 2.0).powi(2) / 4.0).exp() * Complex64::from_polar(1.0, 2.0 * e))),
        ("odd_gauss", Box::new(move |e| g(e) * e * (-e * e / 6.0).exp() * Complex64::from_polar(1.0, 2.5 * e))),
    ]
}

fn expansion(cfg: &RunConfig) -> Result<bool, Failure> {
    let st = ExpansionSettings::default();
    let steps = ((st.anchor_u - st.u_min) / 0.01).round() as usize;
    let table = speclab::cache::potential_table(st.u_min, st.anchor_u, steps, cfg.n, cfg.phi_cache().as_ref())?;
    let g = expansion_grid(&table, &st)?;
    let mut checks = Checks::new();
    let mut round_trips = BTreeMap::new();
    let tests = test_functions();
    for (name, f) in &tests {
        let rt = isometric_round_trip(&g, f.as_ref());
        checks.insert(format!("parseval_{name}"), Check::at_most(rt.parseval_defect, cfg.tol("parseval")));
        checks.insert(format!("round_trip_{name}"), Check::at_most(rt.round_trip_defect, cfg.tol("parseval")));
        round_trips.insert(name.to_string(), rt);
    }
    let f = tests[0].1.as_ref();
    let x = g.forward(f);
    // cosine transform: F(s) → F(1 − s) flips β
    let flipped = g.forward(&|e| f(-e));
    let flip = x
        .alpha
        .iter()
        .zip(&flipped.alpha)
        .chain(x.beta.iter().zip(flipped.beta.iter().map(|b| -b).collect::<Vec<_>>().iter()))
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max)
        / x.alpha.iter().chain(&x.beta).map(|v| v.norm()).fold(0.0, f64::max);
    checks.insert("cosine_flip".into(), Check::at_most(flip, cfg.tol("parseval")));
    if let Ok(a0) = cfg.a0() {
        // truncation to u > ln a0 is the projection onto the a0 space
        let u0 = a0.ln();
        if u0 > st.u_min && u0 < st.anchor_u {
            let n = g.e_nodes.len();
            let nodes = [n / 40, n / 6, n / 3, n / 2];
            let d = projection_defect(&g, f, a0, &nodes)?;
            checks.insert("projection_truncation".into(), Check::at_most(d, cfg.tol("parseval")));
        }
    }
    let path = out_path(cfg, "expansion_coefficients.csv")?;
    write_with(&path, |w| {
        use std::io::Write;
        writeln!(w, "u,Reα,Imα,Reβ,Imβ")?;
        for (i, u) in g.u_grid.iter().enumerate() {
            writeln!(w, "{u:.12e},{:.17e},{:.17e},{:.17e},{:.17e}", x.alpha[i].re, x.alpha[i].im, x.beta[i].re, x.beta[i].im)?;
        }
        Ok(())
    })?;
    let ok = all_pass(&checks);
    write_json(
        cfg,
        "expansion.json",
        &ExpansionReport {
            u_min: st.u_min,
            anchor_u: st.anchor_u,
            e_max: st.e_max,
            round_trips,
            coefficients: "expansion_coefficients.csv".into(),
            checks,
        },
    )?;
    Ok(ok)
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct VerifyReport<'a> {
    a0: f64,
    eigenvalues: &'a [f64],
    norms: &'a [f64],
    rvm_ratios: Vec<Option<f64>>,
    invariant_checks: Checks,
    /// comparisons that are not identities; they do not affect the exit code
    diagnostics: Checks,
}

fn verify(cfg: &RunConfig) -> Result<bool, Failure> {
    let a0 = cfg.a0()?;
    let mut checks = Checks::new();

    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let s = Complex64::new(rng.gen_range(-3.0..4.0), rng.gen_range(-30.0..30.0));
        worst = worst.max((chi(s)? * chi(1.0 - s)? - 1.0).norm());
    }
    checks.insert("chi_identity".into(), Check::at_most(worst, cfg.tol("chi")));

    let e = 1.7;
    let tr = integrate(0.0, 2.0, e.into(), TwoVector::real(1.0, 0.0), &FreePotential)?;
    let end = tr.end_value();
    let rot = (end.alpha - (2.0 * e).cos()).norm().max((end.beta - (2.0 * e).sin()).norm());
    checks.insert("free_rotation".into(), Check::at_most(rot, cfg.tol("free")));
    let m = m_weyl_left(0.0, Complex64::new(3.0, 2.0), &FreePotential)?;
    checks.insert("free_m_function".into(), Check::at_most((m - Complex64::i()).norm(), cfg.tol("free")));

    let lp = log_det(a0, Sign::Plus, cfg.n)?;
    let lm = log_det(a0, Sign::Minus, cfg.n)?;
    let ld = log_det_dirichlet(a0, cfg.n)?;
    checks.insert("logdet_factorization".into(), Check::at_most((lp + lm - ld).abs(), cfg.tol("logdet")));

    let u0 = a0.ln();
    if u0 >= GATE_U_MIN {
        let r = speclab::cosine_kernel::mu_resolvent(u0, cfg.n)?.0;
        let fd = speclab::cosine_kernel::mu_finite_difference(u0, cfg.n)?;
        checks.insert("mu_cross_validation".into(), Check::at_most((r - fd).abs() / r.abs(), cfg.tol("mu")));
    }

    let (pa, pb) = if 2.0 * a0 <= 6.0 { (a0, 2.0 * a0) } else { (a0 / 2.0, a0) };
    let prop = ab_trajectory_with(pa, pb, Complex64::new(0.5, 3.0), cfg.n)?;
    checks.insert("propagation".into(), Check::at_most(prop.relative_error(), cfg.tol("propagation")));

    let ev = StructureEvaluator::shared(a0)?;
    let mut wr: f64 = 0.0;
    for s in [Complex64::new(0.5, 2.0), Complex64::new(0.8, 5.0), Complex64::new(0.3, -7.0), Complex64::new(0.5, 12.5), Complex64::new(1.2, 0.5)] {
        let p = ev.evaluate(s)?;
        wr = wr.max(rel(p.wronskian, Complex64::i() * p.gamma_refl));
    }
    checks.insert("wronskian".into(), Check::at_most(wr, cfg.tol("wronskian")));
    let mut w1: f64 = 0.0;
    for e in grid(0.0, 10.0, 20) {
        w1 = w1.max((ev.evaluate(Complex64::new(0.5, e))?.w1 - 1.0).abs());
    }
    checks.insert("w1_identity".into(), Check::at_most(w1, cfg.tol("w1")));

    // symmetric in (z, w); Hermitian in the pairing w ↦ w̄; positive on the diagonal w = z̄
    let zs = [Complex64::new(0.6, 1.0), Complex64::new(0.7, -2.0), Complex64::new(0.4, 6.0)];
    let refl = |z: Complex64| z.conj();
    let (mut sym, mut herm, mut diag) = (0.0f64, 0.0f64, f64::INFINITY);
    for (i, &z) in zs.iter().enumerate() {
        diag = diag.min(evaluator_inner(a0, z, refl(z))?.re);
        for &w in &zs[..i] {
            let a = evaluator_inner(a0, z, w)?;
            sym = sym.max((a - evaluator_inner(a0, w, z)?).norm() / a.norm());
            let h1 = evaluator_inner(a0, z, refl(w))?;
            let h2 = evaluator_inner(a0, w, refl(z))?;
            herm = herm.max((h1 - h2.conj()).norm() / h1.norm());
        }
    }
    for e in [0.0, 1.0, 5.0] {
        let z = Complex64::new(0.5, e);
        let k = evaluator_inner(a0, z, z.conj())?;
        diag = diag.min(if k.im.abs() <= 1e-9 * k.re.abs() { k.re } else { -1.0 });
    }
    checks.insert("inner_symmetry".into(), Check::at_most(sym, cfg.tol("inner")));
    checks.insert("inner_hermitian".into(), Check::at_most(herm, cfg.tol("inner")));
    checks.insert("inner_positive_diagonal".into(), Check::holds(diag > 0.0));

    let spec = find_bound_states(a0, cfg.emax)?;
    let sc = state_checks(cfg, &spec, 5)?;
    spectrum_checks(cfg, &spec, &sc, &mut checks);

    let mut diagnostics = Checks::new();
    if cfg.emax > 10.0 {
        let mut dev = vec![];
        for t in grid(10.0, cfg.emax, 20) {
            let c = counting_comparison(&spec, t)?;
            dev.push(c.ratio.map_or(f64::INFINITY, |r| (r - 1.0).abs()));
        }
        let worst = dev.iter().copied().fold(0.0, f64::max);
        let top = &dev[dev.len() / 2..];
        let monotone = top.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        diagnostics.insert("density_band".into(), Check::at_most(worst, cfg.tol("density")));
        diagnostics.insert("density_trend".into(), Check::holds(monotone));
    }

    let ok = all_pass(&checks);
    write_json(
        cfg,
        "verify.json",
        &VerifyReport {
            a0,
            eigenvalues: &spec.eigenvalues,
            norms: &spec.norms,
            rvm_ratios: rvm_ratios(&spec),
            invariant_checks: checks,
            diagnostics,
        },
    )?;
    Ok(ok)
}
