//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach stdout; the process exits
//! nonzero when any criterion fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use mpec_core::generate::{monotone_lcp, random_affine_instance, random_convex_qp, random_interior_iterate, random_lcp_instance};
use mpec_core::implicit::{direction_subproblem, implicit_solve, lower_directional_derivative, lower_solve, ImplicitParams};
use mpec_core::instances::{problem1, problem2, problem3};
use mpec_core::linalg::{norm_inf, null_space, Mat, Vector};
use mpec_core::matrix_props::{lh_star_is_homeomorphism, lh_star_pair, reduced_lh_blocks};
use mpec_core::model::{
    estimate_multipliers, index_sets, lcp_residual, phi_general, phi_general_gradient, phi_lcp, Iterate, MpecEvaluator,
    MpecInstance,
};
use mpec_core::oracle::{central_slope, enumerate_global, tangent_cone_stationarity, GlobalSolution};
use mpec_core::pipa::{direction_qp, pipa_direction, pipa_solve, PipaParams};
use mpec_core::pipa_lcp::{lcp_pipa_solve, lcp_pipa_solve_observed, LcpPipaParams};
use mpec_core::psqp::{psqp_solve, ratios, KktMpecInstance, PsqpParams};
use mpec_core::report::SolveReport;
use mpec_core::subsolvers::{solve_lcp_by_enumeration, solve_lcp_lemke, solve_qp};
use mpec_core::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fail<E: std::fmt::Debug>(ctx: &str) -> impl FnOnce(E) -> String + '_ {
    move |e| format!("{ctx}: {e:?}")
}

/// Median wall time over `reps` runs of `f`, plus the outcome of the last run.
fn timed<T>(reps: usize, mut f: impl FnMut() -> T) -> (T, Duration) {
    let mut times = Vec::with_capacity(reps);
    let mut out = None;
    for _ in 0..reps {
        let t = Instant::now();
        out = Some(f());
        times.push(t.elapsed());
    }
    times.sort();
    (out.unwrap(), times[reps / 2])
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../instances").join(name)
}

fn v1(x: f64) -> Vector {
    Vector::from_element(1, x)
}

fn problem_two_fixture() -> Check {
    let inst = problem2();
    let u = inst.start.clone().unwrap();
    let params = LcpPipaParams { q_scale: Some(1.0), ..Default::default() };
    let q1 = Mat::identity(1, 1);
    let run = || {
        let phi = phi_lcp(&inst, &u).unwrap();
        let qp = direction_qp(&inst, &u, &q1, &params);
        let dir = pipa_direction(&inst, &u, &q1, &params).unwrap();
        (phi, qp, dir)
    };
    let ((phi, qp, dir), elapsed) = timed(5, run);
    ensure(phi == 2.0, || format!("phi0 = {phi}"))?;
    let row = |m: &Mat, i: usize| m.row(i).iter().copied().collect::<Vec<_>>();
    ensure(qp.c.as_slice() == [3.0, 5.0, 0.0], || format!("linear term {:?}", qp.c.as_slice()))?;
    // 1/2 dx^2: the only nonzero Hessian entry is Q = 1
    ensure(qp.q[(0, 0)] == 1.0 && qp.q.iter().filter(|&&v| v != 0.0).count() == 1, || format!("Hessian {:?}", qp.q))?;
    ensure(row(&qp.ineq_mat, 0) == [-1.0, 0.0, 0.0] && qp.ineq_rhs.as_slice() == [1.0], || "dx >= -1 row".into())?;
    let ball = qp.ball.ok_or("no ball")?;
    ensure(ball.start == 0 && ball.len == 1 && ball.radius_sq == 20.0, || format!("ball {ball:?}"))?;
    ensure(row(&qp.eq_mat, 0) == [1.0, 1.0, -1.0] && qp.eq_rhs[0] == 0.0, || "dx + dy - dw = 0 row".into())?;
    ensure(row(&qp.eq_mat, 1) == [0.0, 1.0, 2.0] && qp.eq_rhs[1] == -1.0, || "dy + 2 dw = -1 row".into())?;
    let again = pipa_direction(&inst, &u, &q1, &params).unwrap();
    let bits = |d: &Iterate| d.stacked().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure(bits(&dir.d) == bits(&again.d), || "direction differs between runs".into())?;
    ensure(elapsed < Duration::from_millis(1), || format!("took {elapsed:?}"))?;
    Ok(format!("phi0 = 2, QP0 exact, dx = {:.6}, {elapsed:?}", dir.d.x[0]))
}

fn problem_three_fixture() -> Check {
    let inst = problem3();
    let x0 = v1(0.0);
    let run = || -> std::result::Result<_, String> {
        let sol = lower_solve(&inst, &x0).map_err(fail("lower solve"))?;
        let mut worst = 0.0_f64;
        for dx in [-1.0, -0.25, 0.0, 0.4, 1.0] {
            let dy = lower_directional_derivative(&inst, &x0, &sol, &v1(dx)).map_err(fail("derivative"))?;
            worst = worst.max((dy[0] - dx.max(0.0)).abs());
        }
        let sub = direction_subproblem(&inst, &x0, &sol, &Mat::from_element(1, 1, 2.0)).map_err(fail("subproblem"))?;
        let stationary = tangent_cone_stationarity(&inst, &x0, &sol, 1e-8).map_err(fail("stationarity"))?;
        let report = implicit_solve(&inst, &x0, &ImplicitParams::default()).map_err(fail("implicit"))?;
        Ok((worst, sub, stationary, report))
    };
    let (out, elapsed) = timed(5, run);
    let (worst, sub, stationary, report) = out?;
    ensure(worst == 0.0, || format!("directional derivative off by {worst:e}"))?;
    ensure((sub.dx[0] - 0.5).abs() <= 1e-10 && (sub.value + 0.25).abs() <= 1e-10, || format!("subproblem dx = {}, value = {}", sub.dx[0], sub.value))?;
    ensure(!stationary, || "x = 0 reported stationary".into())?;
    ensure((report.final_value + 0.25).abs() <= 1e-8 && report.iterations <= 50, || {
        format!("implicit reached {} in {} iterations", report.final_value, report.iterations)
    })?;
    ensure(elapsed < Duration::from_millis(10), || format!("took {elapsed:?}"))?;
    Ok(format!("dx* = 0.5, value -0.25, not stationary, implicit {} iters, {elapsed:?}", report.iterations))
}

fn problem_one_fixture() -> Check {
    let inst = problem1();
    let u = inst.start.clone().unwrap();
    let run = || -> std::result::Result<_, String> {
        let sets = index_sets(&u.y, &u.w, 1e-8 * (1.0 + u.y.amax().max(u.w.amax()))).map_err(fail("index sets"))?;
        let (dfy, dfw) = reduced_lh_blocks(&inst, &u).map_err(fail("LH blocks"))?.ok_or("no degenerate block")?;
        let pair = lh_star_pair(&dfy, &dfw).map_err(fail("pair"))?;
        let homeo = lh_star_is_homeomorphism(&dfy, &dfw).map_err(fail("homeomorphism"))?;
        Ok((sets, pair, homeo))
    };
    let (out, elapsed) = timed(5, run);
    let (sets, pair, homeo) = out?;
    ensure(sets.alpha.is_empty() && sets.beta == [0] && sets.gamma.is_empty(), || format!("{sets:?}"))?;
    ensure(pair.w0 == Mat::from_element(1, 1, 1.0) && pair.w1 == Mat::from_element(1, 1, 1.0), || format!("{pair:?}"))?;
    ensure(homeo, || "LH* not a homeomorphism".into())?;
    ensure(elapsed < Duration::from_millis(1), || format!("took {elapsed:?}"))?;
    Ok(format!("alpha = {{}}, beta = {{1}}, gamma = {{}}, W0 = W1 = [1], homeomorphism, {elapsed:?}"))
}

fn phi_identity() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_identity, mut worst_fd) = (0.0_f64, 0.0_f64);
    let mut points = 0;
    for _ in 0..20 {
        let (n, m, l) = (rng.random_range(1..=3), rng.random_range(1..=6), rng.random_range(0..=2));
        let inst = random_affine_instance(&mut rng, n, m, l);
        for _ in 0..5 {
            let u = random_interior_iterate(&mut rng, inst.dims);
            let sigma = rng.random_range(0.1..0.9);
            let params = PipaParams { sigma, ..Default::default() };
            let qv = params.q_matrix(&inst);
            let dir = pipa_direction(&inst, &u, &qv, &params).map_err(fail("direction"))?;
            let f = inst.lower_residual(&u);
            let expect = -2.0 * f.norm_squared() - (1.0 - sigma) * u.y.dot(&u.w);
            let analytic = phi_general_gradient(&inst, &u).dot(&dir.d);
            let h = 1e-6 / (1.0 + dir.d.stacked().amax());
            let fd = central_slope(|t| phi_general(&inst, &u.step(&dir.d, t)).unwrap(), h);
            worst_identity = worst_identity.max((analytic - expect).abs() / expect.abs());
            worst_fd = worst_fd.max((fd - expect).abs() / expect.abs());
            points += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(points == 100, || format!("{points} points"))?;
    ensure(worst_identity <= 1e-8, || format!("identity relative error {worst_identity:e}"))?;
    ensure(worst_fd <= 1e-4, || format!("finite-difference relative error {worst_fd:e}"))?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("100 points, identity err {worst_identity:.1e}, fd err {worst_fd:.1e}, {elapsed:?}"))
}

struct ArcStats {
    runs: usize,
    steps: usize,
    worst_residual: f64,
    worst_complementarity: f64,
    worst_decrease: f64,
    worst_centrality: f64,
    elapsed: Duration,
}

/// LCP-PIPA on 20 random monotone instances, checking every accepted step.
fn arc_suite() -> std::result::Result<ArcStats, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut s = ArcStats {
        runs: 0,
        steps: 0,
        worst_residual: 0.0,
        worst_complementarity: 0.0,
        worst_decrease: f64::INFINITY,
        worst_centrality: f64::INFINITY,
        elapsed: Duration::ZERO,
    };
    for _ in 0..20 {
        let (n, m) = (rng.random_range(1..=3), rng.random_range(1..=6));
        let inst = random_lcp_instance(&mut rng, n, m);
        let u0 = inst.interior_start().map_err(fail("start"))?;
        let mut err: Option<String> = None;
        lcp_pipa_solve_observed(&inst, &u0, &LcpPipaParams::default(), |ev| {
            let arc = ev.arc;
            let (base, dir) = (&arc.base, &arc.dir);
            let r0 = lcp_residual(&inst, &base.x, &base.y, &base.w).unwrap();
            let mu = base.mu();
            let wy = base.w.dot(&base.y);
            let scale = 1.0 + base.stacked().amax() + dir.stacked().amax();
            for k in 0..10 {
                let tau = k as f64 / 9.0;
                let p = base.step(dir, tau);
                let r = lcp_residual(&inst, &p.x, &p.y, &p.w).unwrap();
                let e = norm_inf(&(&r - &r0 * (1.0 - tau))) / (scale * (1.0 + norm_inf(&r0)));
                s.worst_residual = s.worst_residual.max(e);
                let prod = p.w.component_mul(&p.y);
                let expect = base.w.component_mul(&base.y) * (1.0 - tau)
                    + Vector::from_element(m, tau * arc.sigma * mu)
                    + dir.w.component_mul(&dir.y) * (tau * tau);
                let e = norm_inf(&(prod - expect)) / (scale * scale);
                s.worst_complementarity = s.worst_complementarity.max(e);
            }
            let next = ev.next;
            let nwy = next.w.dot(&next.y);
            s.worst_decrease = s.worst_decrease.min(nwy - (1.0 - ev.tau) * wy);
            let min_prod = next.w.component_mul(&next.y).min();
            s.worst_centrality = s.worst_centrality.min(min_prod - ev.p * next.mu());
            s.steps += 1;
            if ev.tau > ev.bound.tau_max {
                err = Some(format!("tau {} above tau_max {}", ev.tau, ev.bound.tau_max));
            }
        })
        .map_err(fail("LCP-PIPA"))?;
        if let Some(e) = err {
            return Err(e);
        }
        s.runs += 1;
    }
    s.elapsed = start.elapsed();
    Ok(s)
}

fn arc_identities(stats: &std::result::Result<ArcStats, String>) -> Check {
    let s = stats.as_ref().map_err(Clone::clone)?;
    ensure(s.worst_residual <= 1e-12, || format!("residual identity error {:e}", s.worst_residual))?;
    ensure(s.worst_complementarity <= 1e-12, || format!("complementarity identity error {:e}", s.worst_complementarity))?;
    ensure(s.elapsed < Duration::from_secs(10), || format!("took {:?}", s.elapsed))?;
    Ok(format!(
        "{} runs, {} steps, residual err {:.1e}, complementarity err {:.1e}, {:?}",
        s.runs, s.steps, s.worst_residual, s.worst_complementarity, s.elapsed
    ))
}

fn limited_decrease(stats: &std::result::Result<ArcStats, String>) -> Check {
    let s = stats.as_ref().map_err(Clone::clone)?;
    ensure(s.steps > 0, || "no steps taken".into())?;
    ensure(s.worst_decrease >= -1e-12, || format!("w'y fell below (1 - tau) w'y by {:e}", -s.worst_decrease))?;
    ensure(s.worst_centrality >= -1e-12, || format!("centrality violated by {:e}", -s.worst_centrality))?;
    Ok(format!("{} accepted steps, min decrease margin {:.1e}, min centrality margin {:.1e}", s.steps, s.worst_decrease, s.worst_centrality))
}

/// Solver runs used by the dominance and rate criteria.
fn psqp_start(inst: &MpecInstance) -> mpec_core::Result<Vector> {
    let x0 = inst.projected_origin()?;
    let sol = lower_solve(inst, &x0)?;
    Ok(KktMpecInstance::stack_lcp(&sol.iterate(&x0)))
}

fn run_all_solvers(inst: &MpecInstance) -> Vec<(&'static str, mpec_core::Result<SolveReport>)> {
    let x0 = inst.projected_origin();
    vec![
        ("pipa", inst.interior_start().and_then(|u| pipa_solve(inst, &u, &PipaParams::default()))),
        ("pipa-lcp", inst.interior_start().and_then(|u| lcp_pipa_solve(inst, &u, &LcpPipaParams::default()))),
        ("implicit", x0.and_then(|x| implicit_solve(inst, &x, &ImplicitParams::default()))),
        (
            "psqp",
            KktMpecInstance::from_lcp(inst).and_then(|k| psqp_solve(&k, &psqp_start(inst)?, &PsqpParams::default())),
        ),
    ]
}

/// Stationarity of `x` through the tangent-cone test, with the KKT residual
/// as the fallback when the lower level is nondegenerate.
fn certified_stationary(inst: &MpecInstance, x: &Vector, tol: f64) -> std::result::Result<bool, String> {
    let sol = lower_solve(inst, x).map_err(fail("lower solve"))?;
    if tangent_cone_stationarity(inst, x, &sol, tol).map_err(fail("tangent cone"))? {
        return Ok(true);
    }
    if sol.sets.beta.is_empty() {
        let mult = estimate_multipliers(inst, &sol.iterate(x)).map_err(fail("multipliers"))?;
        return Ok(mult.residual <= tol);
    }
    Ok(false)
}

fn oracle_dominance() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_gap = f64::INFINITY;
    let mut converged = [0usize; 4];
    let mut errors = Vec::new();
    for k in 0..50 {
        let (n, m) = (rng.random_range(1..=3), rng.random_range(1..=4));
        let inst = random_lcp_instance(&mut rng, n, m);
        let oracle = enumerate_global(&inst).map_err(fail("oracle"))?;
        ensure(!oracle.approximate(), || format!("instance {k}: approximate oracle"))?;
        for (j, (name, result)) in run_all_solvers(&inst).into_iter().enumerate() {
            let report = match result {
                Ok(r) => r,
                Err(e) => {
                    errors.push(format!("instance {k} {name}: {e}"));
                    continue;
                }
            };
            let gap = report.final_value - oracle.best.value;
            worst_gap = worst_gap.min(gap);
            if gap < -1e-8 {
                return Err(format!("instance {k} {name}: value {} below oracle {}", report.final_value, oracle.best.value));
            }
            if report.status.is_converged() {
                converged[j] += 1;
                let x = Vector::from_vec(report.final_point.x.clone());
                if !certified_stationary(&inst, &x, 1e-6)? {
                    return Err(format!("instance {k} {name}: converged point is not stationary"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(errors.is_empty(), || format!("solver errors: {}", errors.join("; ")))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "50 instances, min gap {worst_gap:.1e}, converged pipa/pipa-lcp/implicit/psqp = {}/{}/{}/{}, {elapsed:?}",
        converged[0], converged[1], converged[2], converged[3]
    ))
}

/// An instance whose oracle solution is strictly complementary with margin
/// and passes the stationarity test.
fn certified(inst: &MpecInstance, g: &GlobalSolution) -> bool {
    let p = &g.best.point;
    let margin = p.y.iter().zip(p.w.iter()).all(|(y, w)| y.max(*w) >= 0.05);
    let slack = inst.upper.slack(&p.x);
    let bound_margin = slack.iter().all(|&s| s == 0.0 || s >= 0.05);
    let second = g.pieces.iter().filter(|q| q.mask != g.best.mask).map(|q| q.value).fold(f64::INFINITY, f64::min);
    margin && bound_margin && !g.approximate() && second > g.best.value + 1e-6
        && certified_stationary(inst, &p.x, 1e-9).unwrap_or(false)
}

fn psqp_rate() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut done = 0;
    let mut worst_final = 0.0_f64;
    let mut max_iters = 0;
    while done < 10 {
        let (n, m) = (rng.random_range(1..=3), rng.random_range(1..=4));
        let inst = random_lcp_instance(&mut rng, n, m);
        let g = enumerate_global(&inst).map_err(fail("oracle"))?;
        if !certified(&inst, &g) {
            continue;
        }
        let star = KktMpecInstance::stack_lcp(&g.best.point);
        let kkt = KktMpecInstance::from_lcp(&inst).map_err(fail("KKT form"))?;
        // perturb x and the nonzero member of each pair
        let mut delta = Vector::zeros(star.len());
        for i in 0..star.len() {
            if i < n || star[i] != 0.0 {
                delta[i] = rng.random_range(-1.0..1.0);
            }
        }
        let radius = rng.random_range(0.5e-2..1e-2);
        let start_point = &star + &delta * (radius / delta.norm());
        let params = PsqpParams { reference: Some(star.iter().copied().collect()), ..Default::default() };
        let report = psqp_solve(&kkt, &start_point, &params).map_err(fail("psqp"))?;
        let rho = ratios(&report);
        ensure(report.status.is_converged(), || format!("status {:?}", report.status))?;
        ensure(!rho.is_empty() && report.iterations <= 10, || format!("{} iterations", report.iterations))?;
        let last = *rho.last().unwrap();
        ensure(last < 0.1, || format!("final ratio {last}"))?;
        ensure(rho.windows(2).skip(1).all(|w| w[1] <= w[0]), || format!("ratios not decreasing: {rho:?}"))?;
        let end = Vector::from_vec(report.final_point.x.iter().chain(&report.final_point.y).chain(&report.final_point.w).copied().collect());
        ensure((&end - &star).norm() <= 1e-8, || format!("ended {:e} from w*", (&end - &star).norm()))?;
        worst_final = worst_final.max(last);
        max_iters = max_iters.max(report.iterations);
        done += 1;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("10 instances, worst final ratio {worst_final:.1e}, at most {max_iters} iterations, {elapsed:?}"))
}

fn subsolver_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0_f64;
    for k in 0..200 {
        let m = rng.random_range(1..=6);
        let (mm, q) = monotone_lcp(&mut rng, m);
        let a = solve_lcp_lemke(&mm, &q).map_err(fail("Lemke"))?.ok_or_else(|| format!("LCP {k}: Lemke ray termination"))?;
        let b = solve_lcp_by_enumeration(&mm, &q, Execution::Sequential).map_err(fail("enumeration"))?;
        let d = norm_inf(&(&a.y - &b.y)).max(norm_inf(&(&a.w - &b.w)));
        ensure(d <= 1e-9, || format!("LCP {k}: Lemke and enumeration differ by {d:e}"))?;
        worst = worst.max(d);
    }
    let mut probes = 0;
    for k in 0..200 {
        let dim = rng.random_range(1..=6);
        let neq = rng.random_range(0..dim);
        let nineq = rng.random_range(0..=6);
        let (p, u0) = random_convex_qp(&mut rng, dim, neq, nineq);
        let sol = solve_qp(&p).map_err(fail("QP"))?;
        let scale = 1.0 + sol.d.amax();
        ensure(p.max_violation(&sol.d) <= 1e-9 * scale, || format!("QP {k}: infeasible answer"))?;
        let z = if neq == 0 { Mat::identity(dim, dim) } else { null_space(&p.eq_mat, 1e-12) };
        let best = p.objective(&sol.d);
        for _ in 0..50 {
            let t = Vector::from_fn(z.ncols(), |_, _| rng.random_range(-2.0..2.0));
            let mix = rng.random_range(0.0..1.0);
            for probe in [&u0 + &z * &t, &u0 * mix + &sol.d * (1.0 - mix)] {
                if p.max_violation(&probe) > 0.0 {
                    continue;
                }
                probes += 1;
                let v = p.objective(&probe);
                ensure(best <= v + 1e-9 * (1.0 + v.abs()), || format!("QP {k}: probe value {v} beats {best}"))?;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("200 LCPs (max diff {worst:.1e}), 200 QPs against {probes} feasible probes, {elapsed:?}"))
}

fn fixture_traces() -> std::result::Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    let push = |out: &mut Vec<(String, Vec<u8>)>, name: String, report: mpec_core::Result<SolveReport>| -> std::result::Result<(), String> {
        let report = report.map_err(fail(&name))?;
        let mut bytes = Vec::new();
        report.write_trace(&mut bytes).map_err(fail("trace"))?;
        bytes.extend(serde_json::to_vec(&report.summary()).map_err(fail("report"))?);
        out.push((name, bytes));
        Ok(())
    };
    for file in ["problem1.json", "problem2.json", "problem3.json"] {
        let inst = MpecInstance::load(fixture(file)).map_err(fail(file))?;
        let n = inst.n();
        let m = inst.m();
        let stored = inst.start.clone().filter(|s| s.is_interior());
        let interior = stored.unwrap_or_else(|| {
            let x = inst.projected_origin().unwrap();
            Iterate::new(x, Vector::from_element(m, 1.0), Vector::from_element(m, 1.0), Vector::zeros(inst.l()))
        });
        push(&mut out, format!("{file} pipa"), pipa_solve(&inst, &interior, &PipaParams::default()))?;
        if inst.is_lcp() {
            push(&mut out, format!("{file} pipa-lcp"), lcp_pipa_solve(&inst, &interior, &LcpPipaParams::default()))?;
            let x0 = inst.start.as_ref().map(|s| s.x.clone()).unwrap_or_else(|| Vector::zeros(n));
            push(&mut out, format!("{file} implicit"), implicit_solve(&inst, &x0, &ImplicitParams::default()))?;
            let kkt = KktMpecInstance::from_lcp(&inst).map_err(fail("KKT form"))?;
            push(&mut out, format!("{file} psqp"), psqp_start(&inst).and_then(|s| psqp_solve(&kkt, &s, &PsqpParams::default())))?;
            let g = enumerate_global(&inst).map_err(fail("oracle"))?;
            let text = format!("{:?} {:?}", g.best.point.stacked().as_slice(), g.best.value.to_bits());
            out.push((format!("{file} oracle"), text.into_bytes()));
        }
    }
    Ok(out)
}

fn determinism() -> Check {
    let first = fixture_traces()?;
    let second = fixture_traces()?;
    ensure(first.len() == second.len(), || "different number of runs".into())?;
    for ((name, a), (_, b)) in first.iter().zip(&second) {
        ensure(a == b, || format!("{name}: output differs between runs"))?;
    }
    let bytes: usize = first.iter().map(|(_, b)| b.len()).sum();
    Ok(format!("{} runs on 3 fixtures byte-identical ({bytes} bytes)", first.len()))
}

fn main() {
    let arcs = arc_suite();
    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        ("problem-2 fixture", Box::new(problem_two_fixture)),
        ("problem-3 fixture", Box::new(problem_three_fixture)),
        ("problem-1 fixture", Box::new(problem_one_fixture)),
        ("phi directional-derivative identity", Box::new(phi_identity)),
        ("arc identities", Box::new(|| arc_identities(&arcs))),
        ("limited decrease and centrality", Box::new(|| limited_decrease(&arcs))),
        ("oracle dominance", Box::new(oracle_dominance)),
        ("psqp local rate", Box::new(psqp_rate)),
        ("sub-solver equivalence", Box::new(subsolver_equivalence)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("C{:<2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("C{:<2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
