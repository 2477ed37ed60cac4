//! `records.csv`: one row per output, numbers with 17 significant digits so
//! that every value reads back bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::diagnostics::EnergyRecord;
use crate::error::{Error, Result};
use crate::oseen_frank::EnergyBreakdown;

pub const COLUMNS: [&str; 17] = [
    "t",
    "E_total",
    "E_splay",
    "E_twistbend_k2",
    "E_twistbend_k3",
    "E_null",
    "dissipation_cum",
    "identity_residual_energy",
    "identity_residual_beta",
    "grad_sup",
    "blowup_integral",
    "H2_norm_sq",
    "L4_grad",
    "local_E_R_max",
    "local_E_R_argmax_x",
    "local_E_R_argmax_y",
    "flags",
];

/// Thresholds that decide the `concentrated` and `small_energy` flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlagThresholds {
    pub epsilon0: f64,
    pub epsilon1: f64,
}

/// `|`-separated flags, or `ok`.
pub fn flags(r: &EnergyRecord, th: &FlagThresholds) -> String {
    let mut f = Vec::new();
    if r.blowup {
        f.push("blowup");
    }
    if r.local_max > th.epsilon0 {
        f.push("concentrated");
    }
    if r.local_max < th.epsilon1 {
        f.push("small_energy");
    }
    if f.is_empty() {
        "ok".to_string()
    } else {
        f.join("|")
    }
}

pub fn format_records(records: &[EnergyRecord], th: &FlagThresholds) -> String {
    let mut s = COLUMNS.join(",");
    s.push('\n');
    for r in records {
        let e = &r.energy;
        let nums = [
            r.t,
            e.total,
            e.splay,
            e.twist_bend_k2,
            e.twist_bend_k3,
            e.null_lagrangian,
            r.dissipation_cum,
            r.identity_residual_energy,
            r.identity_residual_beta,
            r.grad_sup,
            r.blowup_integral,
            r.h2_norm_sq,
            r.l4_grad,
            r.local_max,
            r.local_argmax[0],
            r.local_argmax[1],
        ];
        for v in nums {
            let _ = write!(s, "{v:.16e},");
        }
        s.push_str(&flags(r, th));
        s.push('\n');
    }
    s
}

pub fn write_records(path: &Path, records: &[EnergyRecord], th: &FlagThresholds) -> Result<()> {
    std::fs::write(path, format_records(records, th))?;
    Ok(())
}

/// Parse rows back. The energy parts not stored in the file
/// (`dirichlet_part`, `v_part`) come back as NaN.
pub fn parse_records(text: &str, path: &Path) -> Result<Vec<EnergyRecord>> {
    let fail = |line: usize, message: String| Error::Records {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == COLUMNS.join(",") => {}
        _ => return Err(fail(1, "missing or unexpected header".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != COLUMNS.len() {
            return Err(fail(line_no, format!("expected {} columns, found {}", COLUMNS.len(), cells.len())));
        }
        let mut v = [0.0; 16];
        for (j, c) in cells[..16].iter().enumerate() {
            v[j] = c
                .parse()
                .map_err(|_| fail(line_no, format!("column {}: bad number `{c}`", COLUMNS[j])))?;
        }
        out.push(EnergyRecord {
            t: v[0],
            energy: EnergyBreakdown {
                total: v[1],
                splay: v[2],
                twist_bend_k2: v[3],
                twist_bend_k3: v[4],
                null_lagrangian: v[5],
                dirichlet_part: f64::NAN,
                v_part: f64::NAN,
            },
            dissipation_cum: v[6],
            identity_residual_energy: v[7],
            identity_residual_beta: v[8],
            grad_sup: v[9],
            blowup_integral: v[10],
            h2_norm_sq: v[11],
            l4_grad: v[12],
            local_max: v[13],
            local_argmax: [v[14], v[15]],
            blowup: cells[16].split('|').any(|f| f == "blowup"),
        });
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<EnergyRecord>> {
    parse_records(&std::fs::read_to_string(path)?, path)
}
