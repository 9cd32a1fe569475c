//! CSV tables for the four sweep kinds.

use std::path::Path;

use wdmqkd_core::planner::{
    crossover_power, joint_plan, keyrate_vs_distance, keyrate_vs_power, PlanPoint, PlanReport,
};
use wdmqkd_core::Error as CoreError;

use crate::calibration::CalibrationFile;
use crate::config::ConfigDocument;
use crate::failure::{io_err, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    Power,
    Distance,
    Crossover,
    Plan,
}

impl SweepKind {
    pub fn file_name(self) -> &'static str {
        match self {
            SweepKind::Power => "sweep_power.csv",
            SweepKind::Distance => "sweep_distance.csv",
            SweepKind::Crossover => "sweep_crossover.csv",
            SweepKind::Plan => "sweep_plan.csv",
        }
    }
}

const POWER_COLUMNS: [&str; 6] = ["power_dbm", "y0", "qber", "key_bps", "ber_raw", "fec_pass"];

fn point_fields(p: &PlanPoint) -> Vec<String> {
    vec![
        p.power_dbm.to_string(),
        p.y0.to_string(),
        p.qber.to_string(),
        p.key_bps.to_string(),
        p.ber_raw.to_string(),
        p.fec_pass.to_string(),
    ]
}

/// A finished table: header plus rows, written in one go.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let ctx = path.display().to_string();
        let mut w = csv::Writer::from_path(path).map_err(|e| io_err(&ctx, e))?;
        w.write_record(&self.header).map_err(|e| io_err(&ctx, e))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| io_err(&ctx, e))?;
        }
        w.flush().map_err(|e| io_err(&ctx, e))
    }
}

fn distance_table(rep: &PlanReport, with_chosen: bool) -> Table {
    let mut header = vec!["distance_km", "direction"];
    header.extend(POWER_COLUMNS);
    if with_chosen {
        header.push("chosen");
    }
    let mut t = Table::new(&header);
    for (i, p) in rep.points.iter().enumerate() {
        let mut row = vec![p.distance_km.to_string(), p.direction.to_string()];
        row.extend(point_fields(p));
        if with_chosen {
            row.push((rep.chosen == Some(i)).to_string());
        }
        t.rows.push(row);
    }
    t
}

pub fn run(kind: SweepKind, doc: &ConfigDocument, cal: &CalibrationFile) -> CliResult<Table> {
    let sc = doc.scenario(cal, doc.scenario.quantum_nm)?;
    let grid = &doc.sweep;
    match kind {
        SweepKind::Power => {
            let rep = keyrate_vs_power(&sc, &grid.powers_dbm)?;
            let mut t = Table::new(&POWER_COLUMNS);
            t.rows = rep.points.iter().map(point_fields).collect();
            Ok(t)
        }
        SweepKind::Distance => {
            let rep = keyrate_vs_distance(&sc, &grid.distances_km, &doc.schedule())?;
            Ok(distance_table(&rep, false))
        }
        SweepKind::Plan => {
            if grid.distances_km.is_empty() || grid.powers_dbm.is_empty() {
                return Ok(distance_table(
                    &PlanReport {
                        points: vec![],
                        chosen: None,
                        diagnostics: None,
                    },
                    true,
                ));
            }
            let rep = joint_plan(&sc, &grid.distances_km, &grid.powers_dbm, grid.objective)?;
            let mut t = distance_table(&rep, true);
            // Summary: distance_km = "summary", direction = verdict, then the chosen point.
            let mut row = vec!["summary".to_string()];
            match rep.chosen_point() {
                Some(p) => {
                    row.push("feasible".into());
                    row.extend(point_fields(p));
                    row.push("true".into());
                }
                None => {
                    row.push("infeasible".into());
                    row.extend(std::iter::repeat_n(String::new(), POWER_COLUMNS.len()));
                    row.push(rep.diagnostics.clone().unwrap_or_default());
                }
            }
            t.rows.push(row);
            Ok(t)
        }
        SweepKind::Crossover => {
            let mut t = Table::new(&[
                "quantum_a_nm",
                "quantum_b_nm",
                "distance_km",
                "direction",
                "crossover_dbm",
                "status",
            ]);
            let Some(c) = &grid.crossover else {
                return Ok(t);
            };
            let a = doc.scenario(cal, c.quantum_nm[0])?;
            let b = doc.scenario(cal, c.quantum_nm[1])?;
            let (value, status) = match crossover_power(&a, &b, c.lo_dbm, c.hi_dbm, c.step_db) {
                Ok(p) => (p.to_string(), "found"),
                Err(CoreError::NotFound(_)) => (String::new(), "not_found"),
                Err(e) => return Err(e.into()),
            };
            t.rows.push(vec![
                c.quantum_nm[0].to_string(),
                c.quantum_nm[1].to_string(),
                sc.fiber.length_km.to_string(),
                sc.direction.to_string(),
                value,
                status.to_string(),
            ]);
            Ok(t)
        }
    }
}
