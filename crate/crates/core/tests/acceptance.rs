//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Pass `--full` (or `--ignored`) to run the improvement-ratio study at
//! `d1 + d2 = 500` instead of the CI size.

use std::process::ExitCode;

use game_rates::experiments::{run_experiment, ExperimentSpec};
use game_rates::games::{
    bilinear_game, constants, in_between_game, orthogonal_bilinear_game, random_bilinear_game,
    random_monotone_game, AffineVectorField, GameConstants, GameProblem, Provenance,
};
use game_rates::lower_bounds::{
    lagrange_lower_bound, scli_operator, theorem_floor, verify_lower_bound, InstanceKind, MethodPolynomial,
};
use game_rates::rates::{
    bilinear_corollary_bound, gd_spectral_bounds, global_rate, keg_rate_bound, keg_spectral_radius_sq, keg_step_cap,
    GdSpectralBounds,
};
use game_rates::solvers::{
    co_parameters, co_step, gd_step, k_extrapolation_step, og_step, operator_matrix, proximal_step, run,
    solution_set_distance, MethodKind, SolverConfig,
};
use game_rates::spectral::{axpy, norm2, pseudo_inverse, singular_values, solve_linear, ComplexSpectrum, RealMatrix};
use game_rates::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

const TOL: f64 = 1e-9;

type Criterion<'a> = (&'a str, Box<dyn Fn() -> Outcome>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Largest consecutive ratio of a squared series, skipping exact zeros.
fn worst_ratio(series: &[f64]) -> f64 {
    series
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max)
}

fn squared(d: &[f64]) -> Vec<f64> {
    d.iter().map(|x| x * x).collect()
}

fn random_spectrum(rng: &mut ChaCha8Rng, strict: bool) -> ComplexSpectrum {
    let n = rng.random_range(1..8);
    let mut v = Vec::new();
    for _ in 0..n {
        let re: f64 = if strict { rng.random_range(0.01..3.0) } else { rng.random_range(0.0..3.0) };
        if rng.random_bool(0.5) {
            let im: f64 = rng.random_range(0.05..3.0);
            v.push(Complex64::new(re, im));
            v.push(Complex64::new(re, -im));
        } else {
            v.push(Complex64::new(re.max(1e-3), 0.0));
        }
    }
    ComplexSpectrum::new(v)
}

fn monotone_suite() -> Vec<GameProblem> {
    (0..50).map(|s| random_monotone_game(10, 10, 1000 + s).unwrap()).collect()
}

fn c1_bilinear_extragradient() -> Outcome {
    let mut worst_slack = f64::INFINITY;
    for seed in 0..20 {
        let g = random_bilinear_game(10, 10, seed, false).unwrap();
        let sv = singular_values(&g.field().jacobian().clone());
        let (smax, smin) = (sv[0], *sv.last().unwrap());
        let bound = 1.0 - smin * smin / (64.0 * smax * smax);
        assert!((bound - bilinear_corollary_bound(smin, smax).unwrap()).abs() < 1e-15);
        let cfg = SolverConfig { eta: 0.25 / smax, k: 2, max_steps: 400, ..SolverConfig::default() };
        let w0 = gaussian(&mut ChaCha8Rng::seed_from_u64(seed), 20);
        let t = run(MethodKind::KExtrapolation, &g, &cfg, &w0).unwrap();
        let r = worst_ratio(&squared(t.distances.as_ref().unwrap()));
        worst_slack = worst_slack.min(bound + TOL - r);
    }
    outcome(worst_slack >= 0.0, format!("20 games, min slack {worst_slack:.3e}"))
}

fn c2_gradient_diverges() -> Outcome {
    let mut ok = true;
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let g = orthogonal_bilinear_game(6, seed).unwrap();
        let eta = 0.1;
        let cfg = SolverConfig { eta, max_steps: 200, ..SolverConfig::default() };
        let w0 = gaussian(&mut ChaCha8Rng::seed_from_u64(seed), 12);
        let t = run(MethodKind::Gradient, &g, &cfg, &w0).unwrap();
        let d = t.distances.as_ref().unwrap();
        ok &= d.windows(2).all(|w| w[1] > w[0]);
        for w in squared(d).windows(2) {
            worst = worst.max((w[1] / w[0] - (1.0 + eta * eta)).abs());
        }
    }
    outcome(ok && worst <= 1e-10, format!("strictly increasing: {ok}, max |ratio - (1 + eta^2)| {worst:.3e}"))
}

fn c3_gradient_sandwich() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    for _ in 0..200 {
        let s = random_spectrum(&mut rng, true);
        let eta = s.eigenvalues().iter().map(|z| (1.0 / z).re).fold(f64::INFINITY, f64::min);
        let m = eta * s.min_re();
        let exact = s.eigenvalues().iter().map(|z| (1.0 - eta * z).norm_sqr()).fold(0.0, f64::max);
        let inside = exact >= 1.0 - 4.0 * m - TOL && exact <= 1.0 - m + TOL;
        let agrees = match gd_spectral_bounds(&s).unwrap() {
            GdSpectralBounds::Convergent { upper, lower, exact_rho_sq, .. } => {
                (upper - (1.0 - m)).abs() < 1e-12
                    && (lower - (1.0 - 4.0 * m)).abs() < 1e-12
                    && (exact_rho_sq - exact).abs() < 1e-12
            }
            GdSpectralBounds::NonConvergent { .. } => false,
        };
        if !(inside && agrees) {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("200 spectra, {violations} violations"))
}

fn c4_extrapolation_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    for k in 2..=4 {
        for _ in 0..200 {
            let s = random_spectrum(&mut rng, false);
            let eta = 0.25f64.powf(1.0 / (k as f64 - 1.0)) / s.max_abs();
            let cap = keg_step_cap(&s, k).unwrap();
            let eta = eta.min(cap);
            let bound = keg_rate_bound(&s, eta, k).unwrap();
            // Exact radius from the step polynomial, computed here directly.
            let exact = s
                .eigenvalues()
                .iter()
                .map(|&z| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut pow = Complex64::new(1.0, 0.0);
                    for _ in 0..=k {
                        acc += pow;
                        pow *= -eta * z;
                    }
                    acc.norm_sqr()
                })
                .fold(0.0, f64::max);
            let lib = keg_spectral_radius_sq(&s, eta, k).unwrap();
            if bound < exact - TOL || (lib - exact).abs() > 1e-10 {
                violations += 1;
            }
        }
    }
    let eps = 1e-3;
    let g = in_between_game(eps).unwrap();
    let s = g.spectrum().unwrap();
    let eta = 0.25 / s.max_abs();
    let exact = keg_spectral_radius_sq(&s, eta, 2).unwrap();
    let c = constants(&g).unwrap();
    let mu_only = 1.0 - 0.25 * c.mu / c.lipschitz;
    let ex5 = exact <= 1.0 - 1.0 / 64.0 + 1e-3 && (mu_only - (1.0 - eps / 4.0)).abs() < 1e-6;
    outcome(
        violations == 0 && ex5,
        format!("600 spectra, {violations} violations; eps=1e-3 exact {exact:.6}, mu-only {mu_only:.6}"),
    )
}

fn c5_extragradient_global() -> Outcome {
    let mut worst_slack = f64::INFINITY;
    let mut count = 0;
    for (i, g) in monotone_suite().iter().enumerate() {
        let c = constants(g).unwrap();
        if c.mu <= 0.0 {
            continue;
        }
        count += 1;
        let eta = 0.25 / c.lipschitz;
        let q = 1.0 - eta * c.mu - 7.0 / 16.0 * eta * eta * c.gamma * c.gamma;
        assert!((q - global_rate(&c, MethodKind::KExtrapolation, eta).unwrap()).abs() < 1e-15);
        let cfg = SolverConfig { eta, k: 2, max_steps: 300, ..SolverConfig::default() };
        let w0 = gaussian(&mut ChaCha8Rng::seed_from_u64(i as u64), 20);
        let t = run(MethodKind::KExtrapolation, g, &cfg, &w0).unwrap();
        worst_slack = worst_slack.min(q + TOL - worst_ratio(&squared(t.distances.as_ref().unwrap())));
    }
    outcome(count == 50 && worst_slack >= 0.0, format!("{count} strongly monotone fields, min slack {worst_slack:.3e}"))
}

fn c6_optimistic_envelope() -> Outcome {
    let mut suite = monotone_suite();
    suite.extend((0..10).map(|s| random_bilinear_game(10, 10, 500 + s, false).unwrap()));
    let mut worst = f64::NEG_INFINITY;
    for (i, g) in suite.iter().enumerate() {
        let c = constants(g).unwrap();
        let eta = 0.25 / c.lipschitz;
        let q = 1.0 - eta * c.mu - eta * eta * c.gamma * c.gamma / 8.0;
        assert!((q - global_rate(&c, MethodKind::Optimistic, eta).unwrap()).abs() < 1e-15);
        let cfg = SolverConfig { eta, max_steps: 400, ..SolverConfig::default() };
        let w0 = gaussian(&mut ChaCha8Rng::seed_from_u64(i as u64), 20);
        let t = run(MethodKind::Optimistic, g, &cfg, &w0).unwrap();
        let d2 = squared(t.distances.as_ref().unwrap());
        for (step, &x) in d2.iter().enumerate() {
            let env = 2.0 * q.powi(step as i32 + 1) * d2[0];
            worst = worst.max(x / env);
        }
    }
    outcome(worst <= 1.0, format!("{} games, max distance^2 / envelope {worst:.4}", suite.len()))
}

fn consensus_factor(c: &GameConstants) -> f64 {
    let (mu, g, lh) = (c.mu, c.gamma, c.l_h_sq);
    1.0 - mu * mu / (2.0 * lh) - (1.0 + mu / g) * g * g / (2.0 * lh)
}

fn c7_consensus() -> Outcome {
    let mut worst_slack = f64::INFINITY;
    for (i, g) in monotone_suite().iter().enumerate() {
        let c = constants(g).unwrap();
        let alpha = (c.mu + (c.mu * c.mu + 2.0 * c.gamma * c.gamma).sqrt()) / (4.0 * c.l_h_sq);
        let beta = 1.0 / (2.0 * c.l_h_sq);
        let (a, b) = co_parameters(&c).unwrap();
        assert!((a - alpha).abs() < 1e-15 && (b - beta).abs() < 1e-15);
        let q = consensus_factor(&c);
        assert!((q - global_rate(&c, MethodKind::Consensus, 0.0).unwrap()).abs() < 1e-12);
        let cfg = SolverConfig { alpha, beta, max_steps: 300, ..SolverConfig::default() };
        let w0 = gaussian(&mut ChaCha8Rng::seed_from_u64(i as u64), 20);
        let t = run(MethodKind::Consensus, g, &cfg, &w0).unwrap();
        worst_slack = worst_slack.min(q + TOL - worst_ratio(&t.h_values));
    }
    // Hamiltonian gradient descent: bilinear, alpha = 0.
    let mut hgd_ok = true;
    for seed in 0..10 {
        let g = random_bilinear_game(8, 8, 700 + seed, false).unwrap();
        let c = constants(&g).unwrap();
        let want = 1.0 - c.gamma * c.gamma / (2.0 * c.l_h_sq);
        let c0 = GameConstants { mu: 0.0, ..c };
        hgd_ok &= (global_rate(&c0, MethodKind::Consensus, 0.0).unwrap() - want).abs() < 1e-15;
        let cfg = SolverConfig { alpha: 0.0, beta: 1.0 / (2.0 * c.l_h_sq), max_steps: 300, ..SolverConfig::default() };
        let w0 = gaussian(&mut ChaCha8Rng::seed_from_u64(seed), 16);
        let t = run(MethodKind::Consensus, &g, &cfg, &w0).unwrap();
        hgd_ok &= worst_ratio(&t.h_values) <= want + TOL;
    }
    outcome(worst_slack >= 0.0 && hgd_ok, format!("50 fields, min slack {worst_slack:.3e}; HGD special case: {hgd_ok}"))
}

fn c8_lower_bound() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for ratio in [1e-3, 1e-4] {
        let r = verify_lower_bound(ratio, 1.0, 3, InstanceKind::Convex).unwrap();
        let floor = 1.0 - 4.0 * 27.0 / std::f64::consts::PI * ratio;
        let cert = lagrange_lower_bound(&r.points).unwrap();
        let pass = (r.theorem_floor - floor).abs() < 1e-15
            && r.numeric_minimax_rho >= floor - 1e-3
            && cert <= 0.5 * r.numeric_minimax_rho.powi(2) + TOL;
        ok &= pass;
        lines.push(format!("convex mu/L={ratio:e}: rho {:.6} floor {floor:.6}", r.numeric_minimax_rho));
    }
    // The bilinear construction needs k/2 >= 3, so the smallest admissible k is 6.
    let gamma = 1e-2;
    let r = verify_lower_bound(gamma, 1.0, 6, InstanceKind::Bilinear).unwrap();
    let floor = 1.0 - 216.0 / (2.0 * std::f64::consts::PI) * gamma * gamma;
    let pass = (theorem_floor(gamma, 1.0, 6, InstanceKind::Bilinear) - floor).abs() < 1e-15
        && r.numeric_minimax_rho >= floor - 1e-3
        && r.certified_half_rho_sq <= 0.5 * r.numeric_minimax_rho.powi(2) + TOL;
    ok &= pass;
    lines.push(format!("bilinear gamma^2/L^2=1e-4 (k=6): rho {:.6} floor {floor:.6}", r.numeric_minimax_rho));
    outcome(ok, lines.join("; "))
}

fn c9_singular_bilinear() -> Outcome {
    let mut worst_slack = f64::INFINITY;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let a = RealMatrix::new(1, 2, gaussian(&mut rng, 2)).unwrap();
        let g = bilinear_game(&a, &[0.0], &[0.0, 0.0]).unwrap();
        let j = g.field().jacobian().clone();
        let sv = singular_values(&j);
        let smax = sv[0];
        let smin_nz = sv.iter().copied().filter(|&s| s > 1e-12 * smax).fold(f64::INFINITY, f64::min);
        let bound = 1.0 - smin_nz * smin_nz / (64.0 * smax * smax);
        let cfg = SolverConfig { eta: 0.25 / smax, k: 2, max_steps: 300, ..SolverConfig::default() };
        let t = run(MethodKind::KExtrapolation, &g, &cfg, &gaussian(&mut rng, 3)).unwrap();
        let pinv = pseudo_inverse(&j, 1e-12).unwrap();
        let dist: Vec<f64> =
            t.iterates.iter().map(|w| solution_set_distance(&pinv, g.field(), w).unwrap().powi(2)).collect();
        let r = worst_ratio(&squared(&t.field_norms)).max(worst_ratio(&dist));
        worst_slack = worst_slack.min(bound + TOL - r);
    }
    outcome(worst_slack >= 0.0, format!("10 games of size 1x2, min slack {worst_slack:.3e}"))
}

fn c10_improvement_ratio(full: bool) -> Outcome {
    let total = if full { 500 } else { 100 };
    let trials = 500;
    let dir = tempfile::tempdir().unwrap();
    let label = |p: &[(usize, usize)]| p.iter().map(|&(a, b)| format!("{a}vs{b}")).collect::<Vec<_>>().join(",");

    let bal = ExperimentSpec::balance_study(total, trials, 2020, dir.path().join("balance"));
    let r1 = run_experiment(&bal).unwrap();
    let again = run_experiment(&ExperimentSpec { output: dir.path().join("again"), ..bal.clone() }).unwrap();
    let bytes = |p: &std::path::Path| std::fs::read(p).unwrap();
    let deterministic = bytes(&r1.csv_path) == bytes(&again.csv_path)
        && bytes(&r1.manifest_path) == bytes(&again.manifest_path);

    let (d1, d2s): (usize, Vec<usize>) =
        if full { (100, vec![100, 200, 300, 400, 500]) } else { (20, vec![20, 40, 60, 80, 100]) };
    let grow = ExperimentSpec::growth_study(d1, &d2s, trials, 2021, dir.path().join("growth"));
    let r2 = run_experiment(&grow).unwrap();

    let mut schema = true;
    let mut in_unit = true;
    for (spec, r) in [(&bal, &r1), (&grow, &r2)] {
        let csv = std::fs::read_to_string(&r.csv_path).unwrap();
        let mut lines = csv.split('\n');
        schema &= lines.next() == Some(label(&spec.pairs).as_str());
        schema &= csv.lines().count() == trials + 1 && !csv.contains('\r');
        in_unit &= r.columns.iter().flatten().all(|&x| (0.0..=1.0).contains(&x));
    }
    let report = r1.balance.as_ref().map(|b| {
        format!(
            "{} mean {:.4} vs {} mean {:.4}, expected direction {}",
            b.balanced, b.balanced_mean, b.unbalanced, b.unbalanced_mean, b.expected_direction
        )
    });
    let report = report.unwrap_or_else(|| "missing".into());
    outcome(
        schema && in_unit && deterministic && r1.balance.is_some(),
        format!("d1+d2={total}, N={trials}: schema {schema}, ratios in [0,1] {in_unit}, deterministic {deterministic}; {report}"),
    )
}

fn c11_operator_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = rng.random_range(2..9);
        let j = RealMatrix::new(d, d, gaussian(&mut rng, d * d)).unwrap();
        let b = gaussian(&mut rng, d);
        let field = AffineVectorField::new(j.clone(), b.clone()).unwrap();
        let neg: Vec<f64> = b.iter().map(|x| -x).collect();
        let ws = solve_linear(&j, &neg).unwrap();
        let g = GameProblem::new(field.clone(), d, 0, Some(ws.clone()), Provenance::new("random", json!({}), None))
            .unwrap();
        let v = g.field();
        let w = gaussian(&mut rng, d);
        let w_prev = gaussian(&mut rng, d);
        let e = axpy(&w, -1.0, &ws);
        let e_prev = axpy(&w_prev, -1.0, &ws);
        let eta = rng.random_range(0.01..0.5);
        let (alpha, beta) = (rng.random_range(0.0..0.5), rng.random_range(0.0..0.5));
        let mut check = |method: MethodKind, k: usize, next: Vec<f64>| {
            let cfg = SolverConfig { eta, k, alpha, beta, ..SolverConfig::default() };
            let m = operator_matrix(method, &j, &cfg).unwrap();
            let state = if method == MethodKind::Optimistic { [e.clone(), e_prev.clone()].concat() } else { e.clone() };
            let pred = m.matvec(&state).unwrap();
            let got = axpy(&next, -1.0, &ws);
            let err = norm2(&axpy(&pred[..d], -1.0, &got)) / (1.0 + norm2(&got));
            worst = worst.max(err);
        };
        check(MethodKind::Gradient, 1, gd_step(v, &w, eta).unwrap());
        for k in 1..=4 {
            check(MethodKind::KExtrapolation, k, k_extrapolation_step(v, &w, eta, k).unwrap());
        }
        check(MethodKind::Optimistic, 1, og_step(v, &w, &v.eval(&w_prev).unwrap(), eta).unwrap().0);
        check(MethodKind::Consensus, 1, co_step(v, &w, alpha, beta).unwrap());
        check(MethodKind::Proximal, 1, proximal_step(v, &w, eta).unwrap());
        // The same k-extrapolation step through its method polynomial.
        for k in 1..=4 {
            let n = MethodPolynomial::extrapolation(eta, k).unwrap();
            let m = scli_operator(&AffineVectorField::linear(j.clone()).unwrap(), &n).unwrap();
            let got = axpy(&k_extrapolation_step(v, &w, eta, k).unwrap(), -1.0, &ws);
            let err = norm2(&axpy(&m.matvec(&e).unwrap(), -1.0, &got)) / (1.0 + norm2(&got));
            worst = worst.max(err);
        }
    }
    outcome(worst <= 1e-10, format!("50 instances, max relative error {worst:.3e}"))
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        // Listing mode used by test runners.
        return ExitCode::SUCCESS;
    }
    let full = args.iter().any(|a| a == "--full" || a == "--ignored" || a == "--include-ignored");
    let criteria: Vec<Criterion> = vec![
        ("1 bilinear extragradient rate", Box::new(c1_bilinear_extragradient)),
        ("2 gradient method diverges on bilinear", Box::new(c2_gradient_diverges)),
        ("3 gradient spectral sandwich", Box::new(c3_gradient_sandwich)),
        ("4 k-extrapolation bound soundness", Box::new(c4_extrapolation_soundness)),
        ("5 extragradient per-step global certificate", Box::new(c5_extragradient_global)),
        ("6 optimistic envelope", Box::new(c6_optimistic_envelope)),
        ("7 consensus Hamiltonian certificate", Box::new(c7_consensus)),
        ("8 lower-bound consistency", Box::new(c8_lower_bound)),
        ("9 singular bilinear quotient convergence", Box::new(c9_singular_bilinear)),
        ("10 improvement-ratio study", Box::new(move || c10_improvement_ratio(full))),
        ("11 operator equivalence", Box::new(c11_operator_equivalence)),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let o = f();
        println!("[{}] criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
