//! End-to-end acceptance criteria. Runs without the libtest harness so the
//! PASS/FAIL line of every criterion is always printed; exits nonzero if
//! any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saddlecert::minimax::{grid_minimax, weak_duality_check};
use saddlecert::phi::{plus_square_dderiv, DEFAULT_PHI_RESOLUTION};
use saddlecert::quadratic::{
    inner_min, solve_quadratic_game, spectral_decompose, verify_saddle_chain, QuadraticParams,
};
use saddlecert::{Bilinear, ConvexTerm, Domain, Objective, PhiContext, QuadraticGame, QuadraticGameSpec, SolverParams};
use saddlecert_cli::{run, Args, Command};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, format!("took {t:?}, limit {limit:?}"))?;
    Ok(t)
}

fn xy() -> Objective {
    Bilinear::product(DMatrix::from_element(1, 1, 1.0)).unwrap().into()
}

fn unit_interval() -> Domain {
    Domain::cube(1, -1.0, 1.0).unwrap()
}

fn two_point_game() -> Check {
    let start = Instant::now();
    let x = Domain::points(vec![vec![-1.0], vec![1.0]]).unwrap();
    let est = grid_minimax(&xy(), &x, &unit_interval(), 101).map_err(|e| e.to_string())?;
    ensure(est.sup_inf == -1.0, format!("sup_inf = {}", est.sup_inf))?;
    ensure(est.inf_sup == 0.0, format!("inf_sup = {}", est.inf_sup))?;

    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/two_point_game.json");
    let args = Args { command: Command::Gap, problem: fixture, x: None, y: None, resolution: None, trace: None };
    let out = run(&args, &mut std::io::sink());
    let report: serde_json::Value = serde_json::from_str(&out.stdout).map_err(|e| e.to_string())?;
    ensure(out.code == 0, format!("gap exit code {}", out.code))?;
    ensure(report["results"]["sup_inf"].as_f64() == Some(-1.0), "CLI sup_inf")?;
    ensure(report["results"]["inf_sup"].as_f64() == Some(0.0), "CLI inf_sup")?;
    let t = within(start, Duration::from_secs(1))?;
    Ok(format!("sup_inf = -1, inf_sup = 0 exactly, {t:.2?}"))
}

fn weak_duality_suite() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..50 {
        let (d, k) = (rng.random_range(1..3), rng.random_range(1..3));
        let m = DMatrix::from_fn(d, k, |_, _| rng.random_range(-3.0..3.0));
        let a = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f: Objective = Bilinear::new(m, a, b, rng.random_range(-1.0..1.0)).unwrap().into();
        let mut random_box = |n: usize| {
            let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..1.0)).collect();
            let upper = lower.iter().map(|l| l + rng.random_range(0.1..2.0)).collect();
            Domain::cuboid(lower, upper).unwrap()
        };
        let (dx, dy) = (random_box(d), random_box(k));
        let est = grid_minimax(&f, &dx, &dy, 31).map_err(|e| e.to_string())?;
        ensure(weak_duality_check(&est) && est.sup_inf <= est.inf_sup + 1e-9, format!("instance {i}: {est:?}"))?;
        worst = worst.max(est.sup_inf - est.inf_sup);
    }
    let t = within(start, Duration::from_secs(30))?;
    Ok(format!("50/50 instances, max sup_inf - inf_sup = {worst:.3e}, {t:.2?}"))
}

fn phi_closed_form() -> Check {
    let start = Instant::now();
    let ctx = PhiContext::new(xy(), unit_interval(), unit_interval(), 64).map_err(|e| e.to_string())?;
    let at_corner = ctx.phi(&[1.0], &[1.0]).map_err(|e| e.to_string())?;
    let at_saddle = ctx.phi(&[0.0], &[0.0]).map_err(|e| e.to_string())?;
    ensure((at_corner - 4.0 / 3.0).abs() <= 1e-3, format!("phi(1,1) = {at_corner}"))?;
    ensure(at_saddle == 0.0, format!("phi(0,0) = {at_saddle}"))?;
    let t = within(start, Duration::from_secs(5))?;
    Ok(format!("phi(1,1) = {at_corner:.6}, phi(0,0) = 0, {t:.2?}"))
}

/// The bound `b²t` is met with equality whenever `a > 0` and `a + tb > 0`,
/// so the floating-point difference quotient lands on either side of it.
/// Cases above `b²t` are accepted only within the forward rounding error
/// of the quotient, `8ε((|a| + |tb|)² + a²)/t`, and counted.
fn limit_identity() -> Check {
    let pos = |v: f64| v.max(0.0);
    let (mut passed, mut at_boundary) = (0, 0);
    for a in [-2.0_f64, -1.0, 0.0, 1.0, 2.0] {
        for b in [-2.0_f64, -1.0, 0.0, 1.0, 2.0] {
            for t in [1e-2, 1e-3, 1e-4] {
                let quotient = (pos(a + t * b).powi(2) - pos(a).powi(2)) / t;
                let err = (quotient - plus_square_dderiv(a, b)).abs();
                let bound = b * b * t;
                if err > bound {
                    let rounding = 8.0 * f64::EPSILON * ((a.abs() + (t * b).abs()).powi(2) + a * a) / t;
                    let equality_case = a > 0.0 && a + t * b > 0.0;
                    ensure(
                        equality_case && err <= bound + rounding,
                        format!("a = {a}, b = {b}, t = {t}: error {err:e} > {bound:e}"),
                    )?;
                    at_boundary += 1;
                }
                passed += 1;
            }
        }
    }
    ensure(passed == 75, format!("{passed} cases"))?;
    Ok(format!("75/75 cases ({at_boundary} on the equality boundary within rounding)"))
}

fn skew_symmetry() -> Check {
    let bilinear = Bilinear::new(
        DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 0.3, 1.5, -1.0]),
        vec![0.2, -0.4],
        vec![1.0, 0.0, -0.5],
        0.7,
    )
    .unwrap();
    let s = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    let a = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.5, 2.0]);
    let quad = QuadraticGame::new(s, a, ConvexTerm::SumSquares).unwrap();
    let contexts = [
        PhiContext::new(bilinear.into(), Domain::cube(2, -1.0, 1.0).unwrap(), Domain::simplex(3).unwrap(), 8),
        PhiContext::new(
            quad.into(),
            Domain::ball(vec![0.0, 0.0], 1.0).unwrap(),
            Domain::cube(2, -2.0, 2.0).unwrap(),
            8,
        ),
    ];
    let mut worst = 0.0_f64;
    for (i, ctx) in contexts.into_iter().enumerate() {
        let ctx = ctx.map_err(|e| e.to_string())?;
        worst = worst.max(ctx.skew_symmetry_check(100, 50 + i as u64).map_err(|e| e.to_string())?);
    }
    ensure(worst <= 1e-12, format!("max residual {worst:e}"))?;
    Ok(format!("max residual {worst:.3e} over 2 x 100 probes"))
}

fn probe_grid(d: &Domain) -> Vec<Vec<f64>> {
    match d.dim() {
        1 => (0..5).map(|i| vec![-1.0 + 0.5 * i as f64]).collect(),
        _ => (0..5).map(|i| vec![i as f64 / 4.0, 1.0 - i as f64 / 4.0]).collect(),
    }
}

fn phi_solver() -> Check {
    let pennies: Objective = Bilinear::product(DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])).unwrap().into();
    let cases = [
        ("xy", xy(), unit_interval(), vec![1.0], vec![1.0], vec![0.0], vec![0.0]),
        (
            "pennies",
            pennies,
            Domain::simplex(2).unwrap(),
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
        ),
    ];
    let mut summary = Vec::new();
    for (name, f, d, x0, y0, xs, ys) in cases {
        let start = Instant::now();
        let ctx = PhiContext::new(f, d.clone(), d.clone(), DEFAULT_PHI_RESOLUTION).map_err(|e| e.to_string())?;
        let r = ctx.minimize(&x0, &y0, SolverParams::default()).map_err(|e| e.to_string())?;
        ensure(r.converged && r.phi_value <= 1e-8, format!("{name}: phi = {:e}", r.phi_value))?;
        let err = saddlecert::linalg::dist(&r.x_star, &xs).hypot(saddlecert::linalg::dist(&r.y_star, &ys));
        ensure(err <= 1e-3, format!("{name}: distance to saddle {err:e}"))?;
        let probes = probe_grid(&d);
        let mut worst = f64::NEG_INFINITY;
        for u in &probes {
            for v in &probes {
                let c = ctx.variation_inequality_check(&r.x_star, &r.y_star, u, v, 1e-6).map_err(|e| e.to_string())?;
                ensure(c.holds, format!("{name}: variation inequality {c:?}"))?;
                worst = worst.max(c.lhs - c.rhs);
            }
        }
        let t = within(start, Duration::from_secs(60))?;
        summary.push(format!("{name}: phi {:.1e}, dist {err:.1e}, VI slack {worst:.1e}, {t:.2?}", r.phi_value));
    }
    Ok(summary.join("; "))
}

fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).qr().q()
}

/// Quadratic game with `d, k ≤ 4`, PSD `S` that is rank deficient for odd
/// `i`, `A` with columns in `img S`, cycling through the three penalties
/// and both domain kinds.
fn quadratic_instance(rng: &mut ChaCha8Rng, i: usize) -> QuadraticGameSpec {
    let (d, k) = (rng.random_range(1..5), rng.random_range(1..5));
    let mut lambda: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..3.0)).collect();
    if i % 2 == 1 && k > 1 {
        let zeros = rng.random_range(1..k);
        lambda[k - zeros..].iter_mut().for_each(|l| *l = 0.0);
    }
    let q = orthogonal(rng, k);
    let s = &q * DMatrix::from_diagonal(&DVector::from_column_slice(&lambda)) * q.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let sd = spectral_decompose(&s).unwrap();
    let mut a = DMatrix::from_fn(k, d, |_, _| rng.random_range(-1.5..1.5));
    for mut col in a.column_iter_mut() {
        let c: Vec<f64> = col.iter().copied().collect();
        col.copy_from_slice(&sd.range_projection(&c));
    }
    let g = match i % 3 {
        0 => ConvexTerm::Zero,
        1 => ConvexTerm::SumSquares,
        _ => ConvexTerm::Linear((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()),
    };
    let x = if (i / 3).is_multiple_of(2) {
        let lower = (0..d).map(|_| rng.random_range(-1.5..-0.2)).collect();
        let upper = (0..d).map(|_| rng.random_range(0.2..1.5)).collect();
        Domain::cuboid(lower, upper).unwrap()
    } else {
        let center = (0..d).map(|_| rng.random_range(-0.3..0.3)).collect();
        Domain::ball(center, rng.random_range(0.8..1.5)).unwrap()
    };
    QuadraticGameSpec::new(QuadraticGame::new(s, a, g).unwrap(), x).unwrap()
}

fn quadratic_equality() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = QuadraticParams::default();
    let (mut worst_gap, mut worst_chain, mut deficient) = (0.0_f64, 0.0_f64, 0);
    for i in 0..20 {
        let spec = quadratic_instance(&mut rng, i);
        if spec.spectral().rank < spec.game().dim_y() {
            deficient += 1;
        }
        let r = solve_quadratic_game(&spec, params).map_err(|e| format!("game {i}: {e}"))?;
        let gap = (r.value_sup_inf - r.value_inf_sup).abs();
        ensure(gap <= 1e-3 && r.chain_ok, format!("game {i}: gap {gap:e}"))?;
        let chain = verify_saddle_chain(&spec, &r, params.cross_check_resolution, 1e-3).map_err(|e| e.to_string())?;
        ensure(chain.holds, format!("game {i}: chain {chain:?}"))?;
        worst_gap = worst_gap.max(gap);
        worst_chain = worst_chain.max(chain.spread());
    }
    ensure(deficient > 0, "no rank-deficient instance generated")?;
    let t = within(start, Duration::from_secs(600))?;
    Ok(format!(
        "20/20 games ({deficient} rank deficient), max gap {worst_gap:.2e}, max chain spread {worst_chain:.2e}, {t:.2?}"
    ))
}

fn degenerate_detection() -> Check {
    let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let game = QuadraticGame::new(s, DMatrix::identity(2, 2), ConvexTerm::Zero).unwrap();
    let spec = QuadraticGameSpec::new(game, Domain::cube(2, -1.0, 1.0).unwrap()).unwrap();
    let r = inner_min(&spec, &[0.0, 1.0]).map_err(|e| e.to_string())?;
    ensure(r.value == f64::NEG_INFINITY && r.y_min.is_none(), format!("inner_min gave {r:?}"))?;

    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/quadratic_degenerate.json");
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_saddlecert"))
        .arg("solve-quadratic")
        .arg(fixture)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.code() == Some(3), format!("exit code {:?}", out.status.code()))?;
    Ok("inner_min = -inf, S = 0 with A != 0 exits 3".into())
}

fn numerical_plumbing() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_rebuild = 0.0_f64;
    for i in 0..100 {
        let n = 1 + i % 6;
        let lambda: Vec<f64> =
            (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.1..10.0) }).collect();
        let q = orthogonal(&mut rng, n);
        let s = &q * DMatrix::from_diagonal(&DVector::from_column_slice(&lambda)) * q.transpose();
        let s = (&s + s.transpose()) * 0.5;
        let sd = spectral_decompose(&s).map_err(|e| e.to_string())?;
        let v = &sd.eigenvectors;
        let rebuilt = v * DMatrix::from_diagonal(&DVector::from_column_slice(&sd.eigenvalues)) * v.transpose();
        let err = (rebuilt - &s).amax() / sd.eigenvalues[0].max(1.0);
        ensure(err <= 1e-9, format!("matrix {i}: reconstruction {err:e}"))?;
        worst_rebuild = worst_rebuild.max(err);
    }

    let mut worst_grad = 0.0_f64;
    for i in 0..100 {
        let (d, k) = (rng.random_range(1..5), rng.random_range(1..5));
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f: Objective = if i % 2 == 0 {
            let m = DMatrix::from_fn(d, k, |_, _| rng.random_range(-2.0..2.0));
            Bilinear::new(m, vec![0.3; d], vec![-0.2; k], 1.0).unwrap().into()
        } else {
            let b = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
            let s = &b * b.transpose();
            let s = (&s + s.transpose()) * 0.5;
            let a = DMatrix::from_fn(k, d, |_, _| rng.random_range(-2.0..2.0));
            QuadraticGame::new(s, a, ConvexTerm::SumSquares).unwrap().into()
        };
        let an = f.gradients(&x, &y).map_err(|e| e.to_string())?;
        let fd = f.finite_difference_gradients(&x, &y, 1e-5);
        for (p, q) in an.grad_x.iter().chain(&an.grad_y).zip(fd.grad_x.iter().chain(&fd.grad_y)) {
            let rel = (p - q).abs() / p.abs().max(1.0);
            ensure(rel <= 1e-5, format!("instance {i}: gradient {p} vs {q}"))?;
            worst_grad = worst_grad.max(rel);
        }
    }
    Ok(format!("reconstruction {worst_rebuild:.1e}, gradient agreement {worst_grad:.1e} over 100 + 100 instances"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 two-point xy game", two_point_game),
        ("2 weak duality suite", weak_duality_suite),
        ("3 phi closed form", phi_closed_form),
        ("4 limit identity", limit_identity),
        ("5 skew-symmetry", skew_symmetry),
        ("6 phi solver finds saddles", phi_solver),
        ("7 quadratic equality", quadratic_equality),
        ("8 degenerate detection", degenerate_detection),
        ("9 numerical plumbing", numerical_plumbing),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                println!("FAIL criterion {name}: {why}");
                failed.push(name);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
