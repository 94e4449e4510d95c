//! Metrics rows, run directories and the CSV dumps (trajectories and κ
//! diagnostics).
//!
//! Every file written here is byte-deterministic for a fixed seed and
//! config: floats use fixed-precision formatting and the `wall_ms` column
//! reports the simulated clock (environment steps × dt), not host time, so
//! identical runs produce identical logs. Host timing goes to stdout.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::compose::Method;
use crate::error::{Error, Result};

/// One row of the training metrics CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    /// Environment transitions completed.
    pub step: u64,
    /// Simulated wall clock in milliseconds (env steps × dt × 1000).
    pub wall_ms: u64,
    pub method: Method,
    pub train_return: f64,
    pub eval_return: f64,
    pub eval_final_dist: f64,
    pub eval_success: f64,
    pub sf_loss_mean: f64,
    pub pi_obj_mean: f64,
    pub alpha: f64,
}

impl MetricsRow {
    pub const HEADER: &'static str = "step,wall_ms,method,train_return,eval_return,eval_final_dist,eval_success,sf_loss_mean,pi_obj_mean,alpha";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.step,
            self.wall_ms,
            self.method,
            self.train_return,
            self.eval_return,
            self.eval_final_dist,
            self.eval_success,
            self.sf_loss_mean,
            self.pi_obj_mean,
            self.alpha
        )
    }

    pub fn parse(line: &str) -> Result<MetricsRow> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::config(format!(
                "metrics row has {} fields, expected 10: '{line}'",
                fields.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::config(format!("bad number '{s}' in metrics row")))
        };
        Ok(MetricsRow {
            step: fields[0]
                .parse()
                .map_err(|_| Error::config("bad step column"))?,
            wall_ms: fields[1]
                .parse()
                .map_err(|_| Error::config("bad wall_ms column"))?,
            method: fields[2].parse()?,
            train_return: num(fields[3])?,
            eval_return: num(fields[4])?,
            eval_final_dist: num(fields[5])?,
            eval_success: num(fields[6])?,
            sf_loss_mean: num(fields[7])?,
            pi_obj_mean: num(fields[8])?,
            alpha: num(fields[9])?,
        })
    }
}

pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", MetricsRow::HEADER)?;
        Ok(MetricsWriter { out })
    }

    pub fn append(&mut self, row: &MetricsRow) -> Result<()> {
        writeln!(self.out, "{}", row.to_csv())?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == MetricsRow::HEADER => {}
        other => {
            return Err(Error::config(format!(
                "{}: unexpected metrics header {other:?}",
                path.display()
            )))
        }
    }
    lines.map(MetricsRow::parse).collect()
}

/// `run-<seed>-<method>` under the output root.
pub fn run_dir_name(seed: u64, method: Method) -> String {
    format!("run-{seed}-{method}")
}

pub fn run_dir(out_root: &Path, seed: u64, method: Method) -> PathBuf {
    out_root.join(run_dir_name(seed, method))
}

/// Trajectory dump: one row per (instance, step).
pub struct TrajectoryWriter {
    out: BufWriter<File>,
    wrote_header: bool,
}

impl TrajectoryWriter {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        Ok(TrajectoryWriter {
            out: BufWriter::new(File::create(path)?),
            wrote_header: false,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn write_row(
        &mut self,
        env_id: usize,
        step: usize,
        state: &[f32],
        action: &[f32],
        phi: &[f32],
        reward: f32,
        task_phase: &str,
    ) -> Result<()> {
        if !self.wrote_header {
            let mut header = String::from("env_id,step");
            for k in 0..state.len() {
                header.push_str(&format!(",s{k}"));
            }
            for k in 0..action.len() {
                header.push_str(&format!(",a{k}"));
            }
            for k in 0..phi.len() {
                header.push_str(&format!(",phi{k}"));
            }
            header.push_str(",reward,task_phase");
            writeln!(self.out, "{header}")?;
            self.wrote_header = true;
        }
        let mut row = format!("{env_id},{step}");
        for v in state.iter().chain(action).chain(phi) {
            row.push_str(&format!(",{v:.6}"));
        }
        row.push_str(&format!(",{reward:.6},{task_phase}"));
        writeln!(self.out, "{row}")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// κ diagnostics dump: per step and instance, the flattened κ rows plus the
/// relative position they were computed at and a P̂ summary.
pub struct KappaWriter {
    out: BufWriter<File>,
    wrote_header: bool,
}

impl KappaWriter {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        Ok(KappaWriter {
            out: BufWriter::new(File::create(path)?),
            wrote_header: false,
        })
    }

    pub fn write_row(
        &mut self,
        env_id: usize,
        step: usize,
        rel_pos: &[f32],
        kappa_flat: &[f32],
        act_dim: usize,
        p_hat_mean: f32,
    ) -> Result<()> {
        let n = kappa_flat.len() / act_dim;
        if !self.wrote_header {
            let mut header = String::from("env_id,step,x,y");
            for j in 0..act_dim {
                for i in 0..n {
                    header.push_str(&format!(",kappa_a{j}_p{i}"));
                }
            }
            header.push_str(",p_hat_mean");
            writeln!(self.out, "{header}")?;
            self.wrote_header = true;
        }
        let y = if rel_pos.len() > 1 { rel_pos[1] } else { 0.0 };
        let mut row = format!("{env_id},{step},{:.4},{:.4}", rel_pos[0], y);
        for v in kappa_flat {
            row.push_str(&format!(",{v:.6}"));
        }
        row.push_str(&format!(",{p_hat_mean:.6}"));
        writeln!(self.out, "{row}")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_row_round_trips_through_csv() {
        let row = MetricsRow {
            step: 5000,
            wall_ms: 12_500,
            method: Method::Dac,
            train_return: -123.456789,
            eval_return: -20.0,
            eval_final_dist: 1.25,
            eval_success: 0.85,
            sf_loss_mean: 0.002,
            pi_obj_mean: 7.5,
            alpha: 0.2,
        };
        let back = MetricsRow::parse(&row.to_csv()).unwrap();
        assert_eq!(back.step, row.step);
        assert_eq!(back.method, Method::Dac);
        assert!((back.train_return - (-123.456789)).abs() < 1e-5);
    }

    #[test]
    fn run_dir_naming() {
        assert_eq!(run_dir_name(7, Method::Dac), "run-7-dac");
        assert_eq!(run_dir_name(0, Method::SfGpi), "run-0-sfgpi");
    }
}
