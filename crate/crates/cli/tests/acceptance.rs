//! Acceptance suite for the benchmark reproduction: every criterion runs at
//! its stated tolerance against one shared preset run and prints a pass line.
//!
//! Run with `cargo test -p mfg-cli --test acceptance -- --nocapture` to see
//! the per-criterion lines.

use std::path::PathBuf;
use std::sync::OnceLock;

use mfg_cli::config::RunConfig;
use mfg_cli::preset::{run_reproduction_preset, PresetOutcome};
use mfg_core::{terminal_boundary, BoundarySurface, Payoff, PicardSolver};

struct SharedRun {
    outcome: PresetOutcome,
    out_dir: PathBuf,
    _tmp: tempfile::TempDir,
}

static RUN: OnceLock<SharedRun> = OnceLock::new();

fn shared() -> &'static SharedRun {
    RUN.get_or_init(|| {
        let tmp = tempfile::tempdir().expect("temp dir");
        let out_dir = tmp.path().join("artifacts");
        let cfg = RunConfig {
            oracle_check: true,
            ..RunConfig::default()
        };
        let outcome = run_reproduction_preset(cfg, &out_dir).expect("preset run");
        SharedRun {
            outcome,
            out_dir,
            _tmp: tmp,
        }
    })
}

#[test]
fn criterion_1_benchmark_residual_norms() {
    let run = shared();
    let r = &run.outcome.output.diagnostics.residual;
    assert!(
        r.norm_inf <= 1e-3,
        "residual sup-norm {} exceeds 1e-3",
        r.norm_inf
    );
    assert!(
        r.norm_2 <= 5e-4,
        "residual 2-norm {} exceeds 5e-4",
        r.norm_2
    );
    println!(
        "criterion 1 PASS: residual sup-norm {:.3e} <= 1e-3, 2-norm {:.3e} <= 5e-4",
        r.norm_inf, r.norm_2
    );
}

#[test]
fn criterion_2_skorokhod_diagnostics() {
    let run = shared();
    let cfg = &run.outcome.output.config;
    assert_eq!(cfg.diag_paths, 96);
    assert_eq!(cfg.diag_steps, 700);
    let s = &run.outcome.output.diagnostics.skorokhod;
    assert!(s.n_active_steps > 0, "diagnostic batch never reflected");
    assert!(
        s.max_abs_g_active <= 1e-8,
        "max |G| on active set {} exceeds 1e-8",
        s.max_abs_g_active
    );
    assert!(s.min_g >= -1e-10, "min G {} below -1e-10", s.min_g);
    println!(
        "criterion 2 PASS: max |G| active {:.3e} <= 1e-8, min G {:.3e} >= -1e-10 ({} active steps)",
        s.max_abs_g_active, s.min_g, s.n_active_steps
    );
}

#[test]
fn criterion_3_picard_convergence() {
    let run = shared();
    for (n, it) in run.outcome.output.run.iterations.iter().enumerate() {
        let errs = &it.picard_errors;
        let last = *errs.last().unwrap();
        assert!(
            last < 1e-3,
            "game iteration {n}: final Picard error {last} >= 1e-3"
        );
        // Strict decrease over the first three sweeps (or as many as ran).
        for k in 1..errs.len().min(3) {
            assert!(
                errs[k] < errs[k - 1],
                "game iteration {n}: error series not strictly decreasing at sweep {}",
                k + 1
            );
        }
    }
    let finals: Vec<f64> = run
        .outcome
        .output
        .run
        .iterations
        .iter()
        .map(|it| *it.picard_errors.last().unwrap())
        .collect();
    let fmt: Vec<String> = finals.iter().map(|e| format!("{e:.3e}")).collect();
    println!("criterion 3 PASS: final Picard errors {fmt:?} all < 1e-3, early sweeps strictly decreasing");
}

#[test]
fn criterion_4_game_convergence() {
    let run = shared();
    let errs = run.outcome.output.run.game_errors();
    assert_eq!(errs.len(), 5, "expected game errors for n = 1..5");
    // Non-increasing over n = 2..5, with one inversion allowed for MC noise.
    let inversions = errs.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(
        inversions <= 1,
        "game errors {errs:?} have {inversions} inversions"
    );
    let last = *errs.last().unwrap();
    assert!(last < 1e-3, "final game error {last} >= 1e-3");
    let fmt: Vec<String> = errs.iter().map(|e| format!("{e:.3e}")).collect();
    println!("criterion 4 PASS: game errors {fmt:?} non-increasing (<= 1 inversion), final {last:.3e} < 1e-3");
}

#[test]
fn criterion_5_oracle_equivalence() {
    let run = shared();
    let checks = &run.outcome.output.oracle;
    assert_eq!(checks.len(), 3, "expected slices at y = 0.25, 0.5, 1.0");
    for check in checks {
        assert!(
            check.pass,
            "slice y = {}: deviation {:.4e} exceeds two fine steps {:.4e}",
            check.y, check.max_deviation, check.tolerance
        );
    }
    let devs: Vec<String> = checks.iter().map(|c| format!("{:.3e}", c.max_deviation)).collect();
    println!(
        "criterion 5 PASS: oracle deviations {devs:?} within {:.3e}",
        checks[0].tolerance
    );
}

#[test]
fn criterion_6_property_suites() {
    let run = shared();
    let out = &run.outcome.output;
    let grid = &out.run.grid;
    let params = &out.run.params;
    let payoff = Payoff::Sqrt;

    // Terminal pin bit-exact and x̄ strictly increasing in y.
    let pin = BoundarySurface::from_terminal(grid, params, &payoff).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for j in 0..grid.ny() {
        let xbar = terminal_boundary(params, &payoff, grid.y(j)).unwrap();
        assert!(xbar > prev, "x̄ not strictly increasing at j = {j}");
        prev = xbar;
        for it in &out.run.iterations {
            assert_eq!(
                it.boundary.get(grid.l1, j).to_bits(),
                pin.get(grid.l1, j).to_bits(),
                "terminal pin broken at n = {}, j = {j}",
                it.boundary.game_index
            );
        }
    }

    // Shift invariance of beta under b -> b + 1 (dyadic values so that the
    // shift itself is exact in floating point).
    let solver = PicardSolver::new(*params, payoff.clone(), *grid, out.config.quad_rule()).unwrap();
    let mut vals = Vec::with_capacity(grid.nt() * grid.ny());
    for i in 0..grid.nt() {
        for j in 0..grid.ny() {
            vals.push(-4.0 - 0.25 * i as f64 + 0.125 * j as f64);
        }
    }
    let dyadic = BoundarySurface::from_values(grid, vals).unwrap();
    let shifted = dyadic.shifted(1.0);
    let m_dag = &out.driver;
    for i in (0..grid.nt()).step_by(7) {
        for q in (0..=(grid.l1 - i)).step_by(5) {
            for j in (0..grid.ny()).step_by(11) {
                let a = solver.beta(&dyadic, m_dag, i, q, j);
                let b = solver.beta(&shifted, m_dag, i, q, j);
                assert_eq!(a.to_bits(), b.to_bits(), "beta changed under shift");
            }
        }
    }

    // A >= -1e-10 at every node of every Picard update.
    let min_a = out
        .run
        .iterations
        .iter()
        .map(|it| it.min_a)
        .fold(f64::INFINITY, f64::min);
    assert!(min_a >= -1e-10, "min A = {min_a} below -1e-10");

    // Value function within [0, c0 + 5e-3]; exactly c0 at the horizon.
    let b_star = out.run.final_boundary();
    for i in (0..=grid.l1).step_by(15) {
        for j in (0..grid.ny()).step_by(10) {
            for dx in [-3.0, -1.0, -0.25, 0.0, 0.25, 1.0, 3.0] {
                let x = b_star.get(i, j) + dx;
                let u = solver.value(i, x, j, b_star, m_dag).unwrap();
                assert!(
                    (0.0..=params.c0 + 5e-3).contains(&u),
                    "u({i}, {x}, {j}) = {u} outside [0, c0 + 5e-3]"
                );
            }
        }
    }
    for j in 0..grid.ny() {
        let u = solver
            .value(grid.l1, b_star.get(grid.l1, j), j, b_star, m_dag)
            .unwrap();
        assert_eq!(u, params.c0, "u(T, ., y_{j}) must equal c0 exactly");
    }

    // Path-wise control properties on the diagnostic batch.
    for path in &out.diag_paths {
        for w in path.xi.windows(2) {
            assert!(w[1] >= w[0], "xi decreased along a path");
        }
        for &y in &path.y {
            assert!((path.y0_minus..=1.0).contains(&y), "Y left [y0-, 1]");
        }
    }

    // Sample-mean mean field exactly non-decreasing in t, values in [0, 1].
    for it in &out.run.iterations {
        for i in 0..grid.nt() {
            let v = it.mean_field.value(i);
            assert!((0.0..=1.0).contains(&v));
            if i > 0 {
                assert!(
                    v >= it.mean_field.value(i - 1),
                    "mean field decreased at node {i}"
                );
            }
        }
    }

    // Monotonicity audit of every converged surface.
    for it in &out.run.iterations {
        let stats = mfg_core::diagnostics::monotonicity_audit(&it.boundary);
        assert!(
            stats.max_t_violation <= 5e-3 && stats.max_y_violation <= 5e-3,
            "monotonicity violations t = {:.3e}, y = {:.3e} at n = {}",
            stats.max_t_violation,
            stats.max_y_violation,
            it.boundary.game_index
        );
    }

    // Boundary ordering in n: under 1% of nodes below the predecessor by
    // more than 1e-3.
    for w in out.run.iterations.windows(2) {
        let (a, b) = (&w[0].boundary, &w[1].boundary);
        let mut violations = 0usize;
        for i in 0..grid.nt() {
            for j in 0..grid.ny() {
                if b.get(i, j) < a.get(i, j) - 1e-3 {
                    violations += 1;
                }
            }
        }
        let frac = violations as f64 / (grid.nt() * grid.ny()) as f64;
        assert!(frac < 0.01, "ordering violated on {frac:.3} of nodes");
    }

    // Determinism: identical seeds give bit-identical artifacts for any
    // thread count.
    let hashes = |threads: usize, dir: &std::path::Path| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let output = mfg_cli::pipeline::run_pipeline(&out.config).unwrap();
            let manifest = mfg_cli::artifacts::emit_artifacts(&output, dir).unwrap();
            manifest
                .files
                .into_iter()
                .map(|f| (f.path, f.sha256))
                .collect::<Vec<_>>()
        })
    };
    let tmp = tempfile::tempdir().unwrap();
    let h1 = hashes(1, &tmp.path().join("a"));
    let h4 = hashes(4, &tmp.path().join("b"));
    assert_eq!(h1, h4, "artifact hashes differ across thread counts");

    println!("criterion 6 PASS: terminal pin, beta shift-invariance, A floor, value bounds, path properties, monotonicity, ordering, determinism");
}

#[test]
fn criterion_7_figure_data_regeneration() {
    let run = shared();
    let dir = &run.out_dir;
    let cfg = &run.outcome.output.config;
    let final_n = run.outcome.output.run.final_n();
    assert_eq!(final_n, 5, "preset must run the full sweep");
    let surface_rows = (cfg.l1 + 1) * (cfg.l2 + 1);
    let inverse_rows = (cfg.l1 + 1) * (cfg.l3 + 1);

    let check = |name: &str, header: &str, rows: Option<usize>| {
        let text = std::fs::read_to_string(dir.join(name))
            .unwrap_or_else(|e| panic!("missing artifact {name}: {e}"));
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(header), "bad header in {name}");
        let n = lines.count();
        if let Some(expect) = rows {
            assert_eq!(n, expect, "bad row count in {name}");
        } else {
            assert!(n > 0, "{name} is empty");
        }
        n
    };

    check("boundary_n0.csv", "t,y,b", Some(surface_rows));
    check(&format!("boundary_n{final_n}.csv"), "t,y,b", Some(surface_rows));
    check("inverse_n0.csv", "t,x,c", Some(inverse_rows));
    check(&format!("inverse_n{final_n}.csv"), "t,x,c", Some(inverse_rows));
    check("meanfield.csv", "n,t,m", Some(6 * (cfg.l1 + 1)));
    check("convergence.csv", "n,k,err", None);
    check("picard_to_final.csv", "n,k,dist", None);
    check("game_error.csv", "n,err", Some(5));
    check("residual.csv", "t,y,R", Some(cfg.l1 * (cfg.l2 + 1)));
    check(
        "paths/representative.csv",
        "step,t,X,Y,xi,c_along",
        Some(mfg_cli::pipeline::REPRESENTATIVE_STEPS + 1),
    );
    check("active_g.csv", "path,step,t,abs_g", None);
    check("game_summary.csv", "n,picard_iters_used,picard_final_err,game_err", Some(6));

    // The mean-field file must cover every game iteration and the
    // convergence series every n.
    let text = std::fs::read_to_string(dir.join("convergence.csv")).unwrap();
    for n in 0..=5 {
        assert!(
            text.lines().any(|l| l.starts_with(&format!("{n},"))),
            "convergence.csv missing series for n = {n}"
        );
    }

    println!("criterion 7 PASS: all figure series present with expected schemas and node counts");
}
