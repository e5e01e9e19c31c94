//! Run orchestration: the fixed-step time loop (implicit step, then
//! adaptation, then a diagnostics row), plus the on-disk artifacts
//! `run.csv`, `field_final.txt`, and `summary.txt`.
//!
//! The CSV is flushed after every row so a failed run still leaves the
//! rows computed so far on disk. Wall-clock times stay out of the CSV
//! (two runs with the same config must produce byte-identical files);
//! the total goes to `summary.txt` instead.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use hcsolve_core::adaptive::{
    adapt, exterior_indicators, freq_indicator_in_mode, order_indicator_in_mode, AdaptiveState,
};
use hcsolve_core::error::Result;
use hcsolve_core::field::SpectralField;
use hcsolve_core::irk::{gauss_tableau, step, NewtonControl, StageSystem, StepWorkspace};
use hcsolve_core::problems::{assemble_linear, build_rhs, initial_field, relative_error};
use hcsolve_core::sparse_index::build;

use crate::config::RunConfig;

/// One diagnostics row, recorded after the step and any adaptation.
#[derive(Debug, Clone)]
pub struct RunRow {
    pub t: f64,
    pub relative_error: f64,
    /// Expansion-order (frequency) indicator.
    pub f_p: f64,
    /// Per-dimension scaling indicators.
    pub f_x: Vec<f64>,
    /// Per-dimension exterior-error indicators, left and right.
    pub e_l: Vec<f64>,
    pub e_r: Vec<f64>,
    pub beta: Vec<f64>,
    pub x0: Vec<f64>,
    pub order: usize,
    pub set_len: usize,
    pub newton_iters: usize,
    pub wall_ms: u64,
}

/// Everything a finished (or failed partway) run produced in memory.
#[derive(Debug, Clone, Default)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
    pub final_error: f64,
    /// Sum over steps of the active set size: the cost metric.
    pub basis_function_steps: u64,
    pub total_wall_ms: u64,
}

fn csv_header(d: usize) -> String {
    let mut cols = vec!["t".to_string(), "relative_error".into(), "F_p".into()];
    for i in 0..d {
        cols.push(format!("F_x_{i}"));
    }
    for i in 0..d {
        cols.push(format!("E_L_{i}"));
        cols.push(format!("E_R_{i}"));
    }
    for i in 0..d {
        cols.push(format!("beta_{i}"));
    }
    for i in 0..d {
        cols.push(format!("x0_{i}"));
    }
    cols.push("N".into());
    cols.push("set_size".into());
    cols.push("newton_iters".into());
    cols.join(",")
}

fn csv_row(row: &RunRow) -> String {
    let mut cols = vec![
        format!("{:.16e}", row.t),
        format!("{:.16e}", row.relative_error),
        format!("{:.16e}", row.f_p),
    ];
    for v in &row.f_x {
        cols.push(format!("{v:.16e}"));
    }
    for i in 0..row.e_l.len() {
        cols.push(format!("{:.16e}", row.e_l[i]));
        cols.push(format!("{:.16e}", row.e_r[i]));
    }
    for v in &row.beta {
        cols.push(format!("{v:.16e}"));
    }
    for v in &row.x0 {
        cols.push(format!("{v:.16e}"));
    }
    cols.push(row.order.to_string());
    cols.push(row.set_len.to_string());
    cols.push(row.newton_iters.to_string());
    cols.join(",")
}

/// Number of fixed steps covering [0, T]; exact multiples stay exact
/// despite floating-point division.
pub fn step_count(t_final: f64, dt: f64) -> usize {
    let ratio = t_final / dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() < 1e-9 * ratio.max(1.0) {
        rounded as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Executes the configured run and writes its artifacts.
///
/// On an error partway (Newton failure, capacity trip) the CSV rows
/// written so far are already flushed; the error propagates to the
/// caller for exit-code mapping.
pub fn run(config: &RunConfig) -> Result<RunRecord> {
    let spec = &config.spec;
    let d = spec.dim;
    std::fs::create_dir_all(&config.out_dir)?;

    let set = build(d, spec.order, spec.gamma, spec.adaptive.budget)?;
    let params = spec.params.clone();
    let mut field = initial_field(spec, &set, &params, config.oversample)?;
    let mut linear = assemble_linear(spec, field.set(), field.params())?;
    let mut rhs = build_rhs(spec, field.set(), field.params(), config.oversample)?;

    let adaptive_on =
        spec.adaptive.enable_move || spec.adaptive.enable_scale || spec.adaptive.enable_order;
    let mut adstate = if adaptive_on {
        Some(AdaptiveState::from_field(&field, &spec.adaptive)?)
    } else {
        None
    };

    let tableau = gauss_tableau(config.stages)?;
    let control = NewtonControl::default();
    let mut ws = StepWorkspace::new();

    let csv_file = File::create(config.out_dir.join("run.csv"))?;
    let mut csv = BufWriter::new(csv_file);
    writeln!(csv, "{}", csv_header(d))?;
    csv.flush()?;

    let steps = step_count(config.t_final, config.dt);
    let mut record = RunRecord::default();

    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * config.dt;
        let t_now = k as f64 * config.dt;
        let started = Instant::now();

        let outcome = {
            let eval = |c: &[f64], t: f64| rhs.eval(c, t);
            let system = StageSystem {
                linear: Some(&linear),
                rhs: Some(&eval),
                affine: spec.is_linear(),
            };
            step(
                &system,
                field.coeffs(),
                t_prev,
                config.dt,
                &tableau,
                &control,
                &mut ws,
            )?
        };
        field = SpectralField::from_coeffs(
            field.set().clone(),
            field.params().to_vec(),
            outcome.u_next,
        )?;

        if let Some(state) = adstate.as_mut() {
            let old_params = field.params().to_vec();
            let old_len = field.set().len();
            let old_order = field.set().order();
            field = adapt(&field, &spec.adaptive, state)?;
            let changed = field.params() != old_params.as_slice()
                || field.set().len() != old_len
                || field.set().order() != old_order;
            if changed {
                linear = assemble_linear(spec, field.set(), field.params())?;
                rhs = build_rhs(spec, field.set(), field.params(), config.oversample)?;
                ws.invalidate();
            }
        }
        let wall_ms = started.elapsed().as_millis() as u64;

        let mode = spec.adaptive.indicator_mode;
        let relative = if spec.analytic.is_some() {
            relative_error(&field, spec, t_now)?
        } else {
            f64::NAN
        };
        let mut f_x = Vec::with_capacity(d);
        let mut e_l = Vec::with_capacity(d);
        let mut e_r = Vec::with_capacity(d);
        for i in 0..d {
            f_x.push(freq_indicator_in_mode(&field, i, mode)?);
            let (l, r) = exterior_indicators(&field, i)?;
            e_l.push(l);
            e_r.push(r);
        }
        let row = RunRow {
            t: t_now,
            relative_error: relative,
            f_p: order_indicator_in_mode(&field, mode)?,
            f_x,
            e_l,
            e_r,
            beta: field.params().iter().map(|p| p.beta).collect(),
            x0: field.params().iter().map(|p| p.x0).collect(),
            order: field.set().order(),
            set_len: field.set().len(),
            newton_iters: outcome.newton_iters,
            wall_ms,
        };
        writeln!(csv, "{}", csv_row(&row))?;
        csv.flush()?;
        record.basis_function_steps += row.set_len as u64;
        record.total_wall_ms += wall_ms;
        record.rows.push(row);

        if config.snapshot_interval > 0 && k % config.snapshot_interval == 0 && k != steps {
            let mut snap =
                BufWriter::new(File::create(config.out_dir.join(format!("field_step{k:05}.txt")))?);
            field.write_snapshot(&mut snap)?;
        }
    }

    let mut snap = BufWriter::new(File::create(config.out_dir.join("field_final.txt"))?);
    field.write_snapshot(&mut snap)?;
    snap.flush()?;

    record.final_error = record.rows.last().map_or(f64::NAN, |r| r.relative_error);
    let mut summary = BufWriter::new(File::create(config.out_dir.join("summary.txt"))?);
    writeln!(summary, "problem = {}", spec.name)?;
    writeln!(summary, "steps = {}", record.rows.len())?;
    writeln!(summary, "final_relative_error = {:.16e}", record.final_error)?;
    writeln!(
        summary,
        "basis_function_steps = {}",
        record.basis_function_steps
    )?;
    writeln!(summary, "total_wall_ms = {}", record.total_wall_ms)?;
    summary.flush()?;

    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_str;

    fn run_in_temp(text: &str) -> (tempfile::TempDir, Result<RunRecord>) {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = parse_str(text, "test.ini").unwrap();
        cfg.out_dir = dir.path().to_path_buf();
        let rec = run(&cfg);
        (dir, rec)
    }

    #[test]
    fn step_count_handles_exact_and_ragged_divisions() {
        assert_eq!(step_count(1.0, 0.1), 10);
        assert_eq!(step_count(2.0, 0.1), 20);
        assert_eq!(step_count(0.95, 0.1), 10);
        assert_eq!(step_count(0.1, 0.1), 1);
        assert_eq!(step_count(0.3, 0.1), 3);
    }

    #[test]
    fn one_step_smoke_run_writes_all_artifacts() {
        let text = "problem = ex1\nT = 0.1\ndt = 0.1\n\
                    [adaptive]\nenable_move = false\nenable_scale = false\n\
                    enable_order = false\n";
        let (dir, rec) = run_in_temp(text);
        let rec = rec.unwrap();
        assert_eq!(rec.rows.len(), 1);
        assert!(rec.final_error.is_finite());
        assert!(rec.rows[0].t == 0.1);
        for name in ["run.csv", "field_final.txt", "summary.txt"] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,relative_error,F_p,F_x_0,E_L_0,E_R_0,beta_0,x0_0,N,set_size,newton_iters"
        );
        assert_eq!(lines.next().unwrap().split(',').count(), 11);
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn rows_increase_strictly_in_time() {
        let text = "problem = ex2\nT = 0.3\ndt = 0.1\n";
        let (_dir, rec) = run_in_temp(text);
        let rec = rec.unwrap();
        assert_eq!(rec.rows.len(), 3);
        for pair in rec.rows.windows(2) {
            assert!(pair[1].t > pair[0].t);
        }
    }

    #[test]
    fn capacity_trip_propagates_and_leaves_partial_csv() {
        // A budget below the initial set size trips immediately.
        let text = "problem = ex1\nT = 0.2\ndt = 0.1\n[adaptive]\nbudget = 10\n";
        let (dir, rec) = run_in_temp(text);
        let err = rec.unwrap_err();
        assert!(
            matches!(err, hcsolve_core::error::CoreError::Capacity { .. }),
            "{err}"
        );
        // The CSV never got a header in this case (failure before loop);
        // a mid-run trip is exercised in the acceptance suite.
        assert!(!dir.path().join("run.csv").exists() || {
            let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
            csv.lines().count() <= 1
        });
    }

    #[test]
    fn snapshot_interval_writes_intermediate_fields() {
        let text = "problem = ex1\nT = 0.3\ndt = 0.1\nsnapshot_interval = 1\n\
                    [adaptive]\nenable_move = false\nenable_scale = false\n\
                    enable_order = false\n";
        let (dir, rec) = run_in_temp(text);
        rec.unwrap();
        assert!(dir.path().join("field_step00001.txt").exists());
        assert!(dir.path().join("field_step00002.txt").exists());
        // The final step is covered by field_final.txt, not duplicated.
        assert!(!dir.path().join("field_step00003.txt").exists());
        assert!(dir.path().join("field_final.txt").exists());
    }
}
