use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::schedules::ScheduleSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    IterLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub iter: usize,
    pub lb: f64,
    pub ub: f64,
    pub gap: f64,
    pub n_paths: usize,
    pub wall_ms: f64,
    pub eps_bar: f64,
    pub eps0: f64,
    /// Cuts appended during this iteration.
    pub cuts: usize,
    /// Largest backward accuracy guaranteed at a trial point, per stage `2..=T`.
    pub eps_used: Vec<f64>,
    /// Largest forward accuracy granted, per stage `1..=T`.
    pub delta_used: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub algorithm: String,
    pub schedule: ScheduleSpec,
    pub records: Vec<RunRecord>,
    pub status: RunStatus,
    pub total_ms: f64,
}

/// Whether CSV output carries the timing column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    Include,
    Omit,
}

impl RunLog {
    pub fn new(algorithm: &str, schedule: &ScheduleSpec) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            schedule: *schedule,
            records: Vec::new(),
            status: RunStatus::IterLimit,
            total_ms: 0.0,
        }
    }

    pub fn last(&self) -> Option<&RunRecord> {
        self.records.last()
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// One row per iteration: `iter, lb, ub, gap, n_paths, wall_ms, eps_bar,
    /// eps0`. With [`Timing::Omit`] the `wall_ms` column is left out, which
    /// makes the output a pure function of the run's inputs.
    pub fn write_csv<W: Write>(&self, out: W, timing: Timing) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iter", "lb", "ub", "gap", "n_paths"];
        if timing == Timing::Include {
            header.push("wall_ms");
        }
        header.extend(["eps_bar", "eps0"]);
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.iter.to_string(),
                r.lb.to_string(),
                r.ub.to_string(),
                r.gap.to_string(),
                r.n_paths.to_string(),
            ];
            if timing == Timing::Include {
                row.push(format!("{:.3}", r.wall_ms));
            }
            row.extend([r.eps_bar.to_string(), r.eps0.to_string()]);
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, timing: Timing) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, timing).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Equality of everything except timings.
    pub fn same_trajectory(&self, other: &RunLog) -> bool {
        let strip = |l: &RunLog| -> Vec<RunRecord> {
            l.records
                .iter()
                .map(|r| RunRecord {
                    wall_ms: 0.0,
                    ..r.clone()
                })
                .collect()
        };
        self.status == other.status && strip(self) == strip(other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_columns() {
        let mut log = RunLog::new("isddp", &ScheduleSpec::relative(0.1, 1e-12));
        log.records.push(RunRecord {
            iter: 1,
            lb: -1.5,
            ub: 2.0,
            gap: 1.75,
            n_paths: 3,
            wall_ms: 12.3456,
            eps_bar: 0.1,
            eps0: 1e-12,
            cuts: 2,
            eps_used: vec![0.1],
            delta_used: vec![0.0, 0.1],
        });
        let with = log.to_csv_string(Timing::Include);
        let mut lines = with.lines();
        assert_eq!(lines.next(), Some("iter,lb,ub,gap,n_paths,wall_ms,eps_bar,eps0"));
        assert_eq!(lines.next(), Some("1,-1.5,2,1.75,3,12.346,0.1,0.000000000001"));
        let without = log.to_csv_string(Timing::Omit);
        assert!(without.starts_with("iter,lb,ub,gap,n_paths,eps_bar,eps0\n"));
        let mut other = log.clone();
        other.records[0].wall_ms = 99.0;
        assert!(log.same_trajectory(&other));
    }
}
