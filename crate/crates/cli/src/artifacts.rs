//! Artifact emission: CSV series for every plotted quantity, a JSON report
//! of the scalar diagnostics, and a manifest with content hashes.
//!
//! Floats are serialized with 17 significant digits so every file
//! round-trips losslessly; the manifest is written last and lists the
//! SHA-256 of each artifact (timings live only in the manifest, so artifact
//! hashes are reproducible for a fixed seed).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use mfg_core::invert_boundary;

use crate::config::RunConfig;
use crate::pipeline::PipelineOutput;

/// One emitted file.
#[derive(Clone, Debug, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: RunConfig,
    pub timings_ms: crate::pipeline::Timings,
    pub files: Vec<ManifestEntry>,
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

struct Emitter {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Emitter {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir.join("paths"))
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(rel);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        let digest = Sha256::digest(contents.as_bytes());
        let hex: String = digest.iter().fold(String::new(), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        });
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            sha256: hex,
            bytes: contents.len(),
        });
        Ok(())
    }
}

/// Scalar report mirrored into `report.json`.
#[derive(Debug, Serialize)]
struct Report<'a> {
    config: &'a RunConfig,
    residual: ResidualScalars,
    skorokhod: SkorokhodScalars,
    monotonicity: MonotonicityScalars,
    smooth_fit: SmoothFitScalars,
    game: GameScalars,
    oracle: Vec<OracleScalars>,
}

#[derive(Debug, Serialize)]
struct ResidualScalars {
    norm_inf: f64,
    norm_2: f64,
    clamped_nodes: usize,
}

#[derive(Debug, Serialize)]
struct SkorokhodScalars {
    max_abs_g_active: f64,
    min_g: f64,
    n_active_steps: usize,
    empty_active_set: bool,
}

#[derive(Debug, Serialize)]
struct MonotonicityScalars {
    max_t_violation: f64,
    max_y_violation: f64,
}

#[derive(Debug, Serialize)]
struct SmoothFitScalars {
    max_value_gap: f64,
    max_slope_below: f64,
}

#[derive(Debug, Serialize)]
struct GameScalars {
    iterations: usize,
    converged: bool,
    game_errors: Vec<f64>,
    picard_iterations: Vec<usize>,
    picard_final_errors: Vec<f64>,
    min_a: f64,
    clamped_nodes: usize,
    inversion_warned_rows: usize,
}

#[derive(Debug, Serialize)]
struct OracleScalars {
    y: f64,
    max_deviation: f64,
    tolerance: f64,
    pass: bool,
}

/// Writes every artifact of a finished run and returns the manifest.
pub fn emit_artifacts(output: &PipelineOutput, dir: &Path) -> Result<Manifest> {
    let mut em = Emitter::new(dir)?;
    let grid = &output.run.grid;

    // Per-iteration boundary and inverse surfaces.
    for (n, it) in output.run.iterations.iter().enumerate() {
        let mut buf = String::from("t,y,b\n");
        for i in 0..grid.nt() {
            for j in 0..grid.ny() {
                let _ = writeln!(
                    buf,
                    "{},{},{}",
                    fmt_f(grid.t(i)),
                    fmt_f(grid.y(j)),
                    fmt_f(it.boundary.get(i, j))
                );
            }
        }
        em.write(&format!("boundary_n{n}.csv"), &buf)?;

        let (inverse, _) = invert_boundary(&it.boundary);
        let mut buf = String::from("t,x,c\n");
        for i in 0..grid.nt() {
            for k in 0..grid.nx() {
                let _ = writeln!(
                    buf,
                    "{},{},{}",
                    fmt_f(grid.t(i)),
                    fmt_f(grid.x(k)),
                    fmt_f(inverse.get(i, k))
                );
            }
        }
        em.write(&format!("inverse_n{n}.csv"), &buf)?;

        if output.config.dump_iterations {
            for (k, surf) in it.picard_iterates.iter().enumerate() {
                let mut buf = String::from("t,y,b\n");
                for i in 0..grid.nt() {
                    for j in 0..grid.ny() {
                        let _ = writeln!(
                            buf,
                            "{},{},{}",
                            fmt_f(grid.t(i)),
                            fmt_f(grid.y(j)),
                            fmt_f(surf.get(i, j))
                        );
                    }
                }
                em.write(&format!("picard_n{n}_k{k}.csv"), &buf)?;
            }
        }
    }

    // Mean-field curves for every game iteration.
    let mut buf = String::from("n,t,m\n");
    for (n, it) in output.run.iterations.iter().enumerate() {
        for i in 0..grid.nt() {
            let _ = writeln!(buf, "{n},{},{}", fmt_f(grid.t(i)), fmt_f(it.mean_field.value(i)));
        }
    }
    em.write("meanfield.csv", &buf)?;

    // Picard error series and distance-to-final series.
    let mut conv = String::from("n,k,err\n");
    let mut to_final = String::from("n,k,dist\n");
    for (n, it) in output.run.iterations.iter().enumerate() {
        for (k, err) in it.picard_errors.iter().enumerate() {
            let _ = writeln!(conv, "{n},{},{}", k + 1, fmt_f(*err));
        }
        for (k, d) in it.picard_to_final.iter().enumerate() {
            let _ = writeln!(to_final, "{n},{},{}", k + 1, fmt_f(*d));
        }
    }
    em.write("convergence.csv", &conv)?;
    em.write("picard_to_final.csv", &to_final)?;

    // Distances between consecutive game boundaries (n >= 1).
    let mut buf = String::from("n,err\n");
    for (n, err) in output.run.game_errors().iter().enumerate() {
        let _ = writeln!(buf, "{},{}", n + 1, fmt_f(*err));
    }
    em.write("game_error.csv", &buf)?;

    // Per-iteration convergence summary.
    let mut buf = String::from("n,picard_iters_used,picard_final_err,game_err\n");
    for (n, it) in output.run.iterations.iter().enumerate() {
        let _ = writeln!(
            buf,
            "{n},{},{},{}",
            it.picard_errors.len(),
            fmt_f(*it.picard_errors.last().expect("picard ran")),
            fmt_f(it.game_error)
        );
    }
    em.write("game_summary.csv", &buf)?;

    // Residual heatmap over interior time rows.
    let mut buf = String::from("t,y,R\n");
    for i in 0..output.diagnostics.residual.rows {
        for j in 0..output.diagnostics.residual.cols {
            let _ = writeln!(
                buf,
                "{},{},{}",
                fmt_f(grid.t(i)),
                fmt_f(grid.y(j)),
                fmt_f(output.diagnostics.residual.matrix[i * output.diagnostics.residual.cols + j])
            );
        }
    }
    em.write("residual.csv", &buf)?;

    // Representative controlled trajectory.
    em.write(
        "paths/representative.csv",
        &path_csv(&output.representative),
    )?;

    // Active-set gap scatter from the diagnostic batch.
    let mut buf = String::from("path,step,t,abs_g\n");
    for (p, path) in output.diag_paths.iter().enumerate() {
        let gaps = path.gaps();
        let mut prev_xi = 0.0;
        for (step, (&xi, &g)) in path.xi.iter().zip(gaps.iter()).enumerate() {
            if xi - prev_xi > mfg_core::diagnostics::ACTIVE_STEP_TOL {
                let _ = writeln!(
                    buf,
                    "{p},{step},{},{}",
                    fmt_f(path.times[step]),
                    fmt_f(g.abs())
                );
            }
            prev_xi = xi;
        }
    }
    em.write("active_g.csv", &buf)?;

    // Oracle curves, when the cross-check ran.
    for check in &output.oracle {
        let mut buf = String::from("t,b_hat\n");
        for (t, b) in check.solution.t.iter().zip(&check.solution.boundary) {
            let _ = writeln!(buf, "{},{}", fmt_f(*t), fmt_f(*b));
        }
        em.write(&format!("oracle_y{}.csv", check.y), &buf)?;
    }

    // Resolved configuration and the scalar report.
    em.write("config.json", &output.config.to_json())?;
    let report = Report {
        config: &output.config,
        residual: ResidualScalars {
            norm_inf: output.diagnostics.residual.norm_inf,
            norm_2: output.diagnostics.residual.norm_2,
            clamped_nodes: output.diagnostics.residual.clamped_nodes,
        },
        skorokhod: SkorokhodScalars {
            max_abs_g_active: output.diagnostics.skorokhod.max_abs_g_active,
            min_g: output.diagnostics.skorokhod.min_g,
            n_active_steps: output.diagnostics.skorokhod.n_active_steps,
            empty_active_set: output.diagnostics.skorokhod.empty_active_set,
        },
        monotonicity: MonotonicityScalars {
            max_t_violation: output.diagnostics.monotonicity.max_t_violation,
            max_y_violation: output.diagnostics.monotonicity.max_y_violation,
        },
        smooth_fit: SmoothFitScalars {
            max_value_gap: output.diagnostics.smooth_fit.max_value_gap,
            max_slope_below: output.diagnostics.smooth_fit.max_slope_below,
        },
        game: GameScalars {
            iterations: output.run.iterations.len(),
            converged: output.run.converged,
            game_errors: output.run.game_errors(),
            picard_iterations: output
                .run
                .iterations
                .iter()
                .map(|it| it.picard_errors.len())
                .collect(),
            picard_final_errors: output
                .run
                .iterations
                .iter()
                .map(|it| *it.picard_errors.last().expect("picard ran"))
                .collect(),
            min_a: output
                .run
                .iterations
                .iter()
                .map(|it| it.min_a)
                .fold(f64::INFINITY, f64::min),
            clamped_nodes: output.run.iterations.iter().map(|it| it.clamped_nodes).sum(),
            inversion_warned_rows: output
                .run
                .iterations
                .iter()
                .map(|it| it.inversion.warned_rows)
                .sum(),
        },
        oracle: output
            .oracle
            .iter()
            .map(|c| OracleScalars {
                y: c.y,
                max_deviation: c.max_deviation,
                tolerance: c.tolerance,
                pass: c.pass,
            })
            .collect(),
    };
    em.write(
        "report.json",
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;

    // Manifest last: content hashes of everything above.
    let mut entries = em.entries.clone();
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        seed: output.config.seed,
        config: output.config.clone(),
        timings_ms: output.timings,
        files: entries,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join("manifest.json"), &manifest_json)
        .with_context(|| format!("cannot write {}", dir.join("manifest.json").display()))?;
    Ok(manifest)
}

fn path_csv(path: &mfg_core::PathBundle) -> String {
    let mut buf = String::from("step,t,X,Y,xi,c_along\n");
    for step in 0..path.times.len() {
        let _ = writeln!(
            buf,
            "{step},{},{},{},{},{}",
            fmt_f(path.times[step]),
            fmt_f(path.x[step]),
            fmt_f(path.y[step]),
            fmt_f(path.xi[step]),
            fmt_f(path.c_along[step])
        );
    }
    buf
}
