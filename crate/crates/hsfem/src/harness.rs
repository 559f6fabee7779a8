//! Experiment drivers: a filesystem-backed run wrapper, the parameter
//! studies (alpha, nu, P_max) with a front-position summary, and the
//! stiff-limit k-sweep with cross-run comparison metrics.

use std::path::{Path, PathBuf};

use crate::config::{RunConfig, SweepParam, SweepSpec};
use crate::error::{Error, Result};
use crate::fespace::Field;
use crate::mesh::Mesh;
use crate::model::n_max;
use crate::output;
use crate::stepper::{run_observed, RunOutcome, SimState};

/// Largest x >= 0 on the +x axis (y = 0) where the P1 density still reaches
/// the threshold; zero when nowhere does. The trace of the field along the
/// axis is piecewise linear between axis nodes, so the rightmost crossing is
/// located exactly instead of being rounded to the nearest node (nodal
/// rounding cannot certify front orderings finer than one cell). The front
/// threshold used by the studies is half the saturation density.
pub fn front_radius(mesh: &Mesh, n: &Field, threshold: f64) -> Result<f64> {
    n.check_mesh(mesh)?;
    let [x0, x1, y0, y1] = mesh.bbox();
    let tol = 1e-9 * (x1 - x0).max(y1 - y0);
    let mut axis: Vec<(f64, f64)> = mesh
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, p)| p[1].abs() <= tol && p[0] >= -tol)
        .map(|(a, p)| (p[0], n.values()[a]))
        .collect();
    if axis.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "mesh has no nodes on the +x axis (y = 0 not between y0 = {y0} and y1 = {y1}, or ny odd)"
        )));
    }
    axis.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut front = 0.0f64;
    for w in axis.windows(2) {
        let ((xa, va), (xb, vb)) = (w[0], w[1]);
        if va >= threshold {
            front = front.max(xa);
            if vb < threshold {
                // downward crossing inside the segment
                let cut = xa + (xb - xa) * (va - threshold) / (va - vb);
                front = front.max(cut.min(xb));
            }
        }
    }
    if let Some(&(xl, vl)) = axis.last() {
        if vl >= threshold {
            front = front.max(xl);
        }
    }
    Ok(front)
}

/// Run one configuration, writing series, field dumps at the configured
/// cadence and times, the final state, and a metadata echo into `dir`.
/// On a step failure the last good state is persisted before the error is
/// returned.
pub fn run_to_dir(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    run_to_dir_observed(cfg, dir, |_, _| {})
}

/// [`run_to_dir`] with an extra per-state observer (sweep summaries piggyback
/// on the same trajectory instead of re-running it).
pub fn run_to_dir_observed(
    cfg: &RunConfig,
    dir: &Path,
    mut extra: impl FnMut(&Mesh, &SimState),
) -> Result<RunOutcome> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    // dump steps for the requested output times
    let mut time_steps: Vec<usize> = cfg
        .output
        .times
        .iter()
        .map(|t| (t / cfg.model.tau - 1e-9).ceil().max(0.0) as usize)
        .collect();
    time_steps.sort_unstable();
    time_steps.dedup();

    let format = cfg.output.format;
    let every = cfg.output.every;
    let mut dump_err = None;
    let outcome = run_observed(cfg, |mesh: &Mesh, state: &SimState| {
        extra(mesh, state);
        if dump_err.is_some() {
            return;
        }
        let scheduled = state.step > 0 && state.step % every == 0;
        let timed = time_steps.binary_search(&state.step).is_ok();
        if scheduled || timed {
            let stem = dir.join(format!("field_step{:07}", state.step));
            if let Err(e) = output::write_field(mesh, state, &stem, format) {
                dump_err = Some(e);
            }
        }
    })?;
    if let Some(e) = dump_err {
        return Err(e);
    }

    let mesh = &outcome.mesh;
    output::write_series(&outcome.records, &dir.join("series.csv"))?;
    output::write_field(mesh, &outcome.final_state, &dir.join("final"), format)?;

    let mut meta = cfg.echo();
    use std::fmt::Write;
    let _ = writeln!(meta, "# derived");
    let _ = writeln!(meta, "n_max = {:.17}", cfg.model.n_max());
    let _ = writeln!(meta, "h_leg = {:?}", mesh.h_leg());
    let _ = writeln!(meta, "h_diameter = {}", mesh.h_diameter());
    let _ = writeln!(meta, "front_threshold = {:.17}", 0.5 * cfg.model.n_max());
    let _ = writeln!(meta, "h4_min = {:e}", outcome.h4_min);
    let _ = writeln!(meta, "initial_clamped = {}", outcome.initial_clamped);
    let _ = writeln!(meta, "total_snaps = {}", outcome.total_snaps);
    let _ = writeln!(meta, "energy_flagged = {}", outcome.energy_flagged);
    let _ = writeln!(meta, "steps = {}", outcome.final_state.step);
    if let Some(abort) = &outcome.abort {
        let _ = writeln!(meta, "aborted_at_step = {}", abort.step);
        let _ = writeln!(meta, "abort_error = {}", abort.error);
    }
    output::write_text(&dir.join("meta.txt"), &meta)?;

    if let Some(abort) = &outcome.abort {
        return Err(Error::InvalidArgument(format!(
            "run aborted at step {} ({}); last good state persisted in {}",
            abort.step,
            abort.error,
            dir.display()
        )));
    }
    Ok(outcome)
}

/// One row of a parameter study: the front radius per output time.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub value: f64,
    pub t: f64,
    pub front_radius: f64,
}

#[derive(Debug)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub out_dirs: Vec<PathBuf>,
}

/// Run one member per sweep value, dumping fields at the study times and
/// summarising the front position (largest +x-axis radius with density at
/// least half of N_max).
pub fn param_study(spec: &SweepSpec, dir: &Path) -> Result<StudyResult> {
    spec.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let times = if spec.base.output.times.is_empty() {
        vec![0.1, 0.2, 0.3, 0.4]
    } else {
        spec.base.output.times.clone()
    };

    let mut rows = Vec::new();
    let mut out_dirs = Vec::new();
    let mut failure = None;
    for (i, &value) in spec.values.iter().enumerate() {
        let mut cfg = spec.member(i);
        cfg.output.times = times.clone();
        let t_last = times.iter().cloned().fold(0.0f64, f64::max);
        cfg.model.t_final = cfg.model.t_final.max(t_last);

        let member_dir = dir.join(format!("{}_{}", spec.param.name(), value));
        let threshold = 0.5 * n_max(cfg.model.k, cfg.model.p_max);
        let step_of = |t: f64| (t / cfg.model.tau - 1e-9).ceil().max(0.0) as usize;
        let wanted: Vec<usize> = times.iter().map(|&t| step_of(t)).collect();
        let mut fronts: Vec<(f64, f64)> = Vec::new();
        let mut front_err = None;
        let result = run_to_dir_observed(&cfg, &member_dir, |mesh, state| {
            if wanted.contains(&state.step) {
                match front_radius(mesh, &state.n, threshold) {
                    Ok(r) => fronts.push((state.t, r)),
                    Err(e) => front_err = Some(e),
                }
            }
        });
        if let Err(e) = result {
            failure = Some(e);
            break;
        }
        if let Some(e) = front_err {
            failure = Some(e);
            break;
        }
        out_dirs.push(member_dir);
        for (t, r) in fronts {
            rows.push(StudyRow {
                value,
                t,
                front_radius: r,
            });
        }
    }

    let mut csv = String::from("param,value,t,front_radius\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            spec.param.name(),
            row.value,
            row.t,
            row.front_radius
        ));
    }
    output::write_text(&dir.join("front_positions.csv"), &csv)?;

    match failure {
        Some(e) => Err(e),
        None => Ok(StudyResult { rows, out_dirs }),
    }
}

/// One row of the k-sweep table.
#[derive(Debug, Clone)]
pub struct KSweepRow {
    pub k: u32,
    pub h: f64,
    pub complementarity: f64,
    pub grad_p: f64,
    /// max |n - n_ref| sampled on the probe grid (coarsest member's nodes).
    pub max_diff_n: f64,
    /// max |I_h(n^k) - p_ref| on the probe grid.
    pub max_diff_p: f64,
}

#[derive(Debug)]
pub struct KSweepResult {
    pub rows: Vec<KSweepRow>,
    pub t_star: f64,
}

/// Run the k-sweep at a fixed evaluation time t* (the base t_final),
/// comparing every member against the finest (largest k) run on the
/// coarsest member's node set.
pub fn k_sweep(spec: &SweepSpec, dir: &Path) -> Result<KSweepResult> {
    spec.validate()?;
    if spec.param != SweepParam::K {
        return Err(Error::Config("k_sweep needs a k-parameter spec".into()));
    }
    if spec.values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("k sweep values must be strictly ascending".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let t_star = spec.base.model.t_final;

    struct Member {
        k: u32,
        mesh: Mesh,
        state: SimState,
        complementarity: f64,
        grad_p: f64,
    }

    let mut members: Vec<Member> = Vec::new();
    let mut failure = None;
    for i in 0..spec.values.len() {
        let cfg = spec.member(i);
        let member_dir = dir.join(format!("k_{}", cfg.model.k));
        match run_to_dir(&cfg, &member_dir) {
            Ok(outcome) => {
                let (complementarity, grad_p) = {
                    let last = outcome.records.last().expect("completed run has records");
                    (last.complementarity, last.grad_p_norm)
                };
                members.push(Member {
                    k: cfg.model.k,
                    complementarity,
                    grad_p,
                    mesh: outcome.mesh,
                    state: outcome.final_state,
                });
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }

    let mut rows = Vec::new();
    if !members.is_empty() {
        // probe grid: node set of the coarsest member (fewest nodes)
        let probe_idx = members
            .iter()
            .enumerate()
            .min_by_key(|(_, m)| m.mesh.num_nodes())
            .map(|(i, _)| i)
            .unwrap();
        let probe: Vec<[f64; 2]> = members[probe_idx].mesh.nodes().to_vec();
        let reference = members.last().unwrap();
        let ref_n: Vec<f64> = probe
            .iter()
            .map(|p| reference.mesh.eval(reference.state.n.values(), p[0], p[1]))
            .collect::<Result<_>>()?;
        let ref_nk_field = reference
            .state
            .n
            .map(|v| crate::model::pow_ki(v, reference.k));
        let ref_p: Vec<f64> = probe
            .iter()
            .map(|p| reference.mesh.eval(ref_nk_field.values(), p[0], p[1]))
            .collect::<Result<_>>()?;

        for m in &members {
            let mut max_diff_n = 0.0f64;
            let mut max_diff_p = 0.0f64;
            let nk_field = m.state.n.map(|v| crate::model::pow_ki(v, m.k));
            for (i, p) in probe.iter().enumerate() {
                let n_here = m.mesh.eval(m.state.n.values(), p[0], p[1])?;
                let p_here = m.mesh.eval(nk_field.values(), p[0], p[1])?;
                max_diff_n = max_diff_n.max((n_here - ref_n[i]).abs());
                max_diff_p = max_diff_p.max((p_here - ref_p[i]).abs());
            }
            rows.push(KSweepRow {
                k: m.k,
                h: m.mesh.h_diameter(),
                complementarity: m.complementarity,
                grad_p: m.grad_p,
                max_diff_n,
                max_diff_p,
            });
        }
    }

    let mut csv = String::from("k,h,complementarity,grad_p,max_diff_n,max_diff_p\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.k, r.h, r.complementarity, r.grad_p, r.max_diff_n, r.max_diff_p
        ));
    }
    output::write_text(&dir.join("k_sweep.csv"), &csv)?;

    match failure {
        Some(e) => Err(e),
        None => Ok(KSweepResult { rows, t_star }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{InitialDatum, SweepParam};
    use crate::mesh::Diagonal;

    fn desk_cfg() -> RunConfig {
        let mut cfg = RunConfig::reference();
        cfg.mesh.nx = 10;
        cfg.mesh.ny = 10;
        cfg.model.tau = 1e-3;
        cfg.model.t_final = 5e-3;
        cfg.complementarity_every = 1;
        cfg
    }

    #[test]
    fn front_radius_basics() {
        let mesh = Mesh::build_rect(-10.0, 10.0, -10.0, 10.0, 10, 10, Diagonal::SwNe).unwrap();
        // piecewise-linear profile: the nodal trace reproduces it exactly,
        // so the threshold crossing comes out exact
        let n = crate::fespace::nodal_interpolate(&mesh, |x, _| (1.0 - x.abs() / 5.0).max(0.0))
            .unwrap();
        let r = front_radius(&mesh, &n, 0.5).unwrap();
        assert!((r - 2.5).abs() < 1e-12);

        // nodal indicator: the P1 front extends to the half-way crossing
        let ind = crate::fespace::nodal_interpolate(&mesh, |x, y| {
            if x * x + y * y <= 16.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        assert!((front_radius(&mesh, &ind, 0.5).unwrap() - 5.0).abs() < 1e-12);

        let zero = Field::constant(&mesh, 0.0);
        assert_eq!(front_radius(&mesh, &zero, 0.5).unwrap(), 0.0);

        // saturated everywhere: the front is the domain edge
        let one = Field::constant(&mesh, 1.0);
        assert_eq!(front_radius(&mesh, &one, 0.5).unwrap(), 10.0);

        // no y = 0 node row
        let odd = Mesh::build_rect(-10.0, 10.0, -10.0, 10.0, 4, 5, Diagonal::SwNe).unwrap();
        let z = Field::constant(&odd, 0.0);
        assert!(front_radius(&odd, &z, 0.5).is_err());
    }

    #[test]
    fn front_radius_is_monotone_in_time() {
        let mut cfg = desk_cfg();
        cfg.mesh.nx = 20;
        cfg.mesh.ny = 20;
        cfg.model.t_final = 0.02;
        cfg.initial = InitialDatum::Constant(0.3);
        let threshold = 0.5 * cfg.model.n_max();
        let mut fronts = Vec::new();
        run_observed(&cfg, |mesh, state| {
            if state.step % 5 == 0 {
                fronts.push(front_radius(mesh, &state.n, threshold).unwrap());
            }
        })
        .unwrap();
        for w in fronts.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn run_to_dir_writes_the_artifacts() {
        let dir = std::env::temp_dir().join(format!("hsfem_run_{}", std::process::id()));
        std::fs::remove_dir_all(&dir).ok();
        let mut cfg = desk_cfg();
        cfg.output.every = 2;
        cfg.output.times = vec![3e-3];
        run_to_dir(&cfg, &dir).unwrap();
        assert!(dir.join("series.csv").exists());
        assert!(dir.join("final.vtk").exists());
        assert!(dir.join("meta.txt").exists());
        assert!(dir.join("field_step0000002.vtk").exists());
        assert!(dir.join("field_step0000003.vtk").exists());
        let meta = std::fs::read_to_string(dir.join("meta.txt")).unwrap();
        assert!(meta.contains("nu = 0.5"));
        assert!(meta.contains("front_threshold"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn single_k_sweep_is_self_consistent() {
        let dir = std::env::temp_dir().join(format!("hsfem_ksweep_{}", std::process::id()));
        std::fs::remove_dir_all(&dir).ok();
        let mut base = desk_cfg();
        base.model.t_final = 2e-3;
        let spec = SweepSpec {
            param: SweepParam::K,
            values: vec![10.0],
            base,
            nx_schedule: None,
        };
        let result = k_sweep(&spec, &dir).unwrap();
        assert_eq!(result.rows.len(), 1);
        assert_eq!(result.rows[0].max_diff_n, 0.0);
        assert_eq!(result.rows[0].max_diff_p, 0.0);
        assert!(dir.join("k_sweep.csv").exists());
        std::fs::remove_dir_all(&dir).ok();
    }
}
