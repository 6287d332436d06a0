//! Sparse SDPA (".dat-s") export and import, plus an optional bridge to an
//! external solver executable configured through an environment variable.
//!
//! A conic program `min c'x : Ax = b, x in K` maps onto the SDPA dual side
//! `max tr(F_0 Y) : tr(F_i Y) = b_i, Y >= 0` with `F_i` the row coefficient
//! matrices and `F_0 = -C`. Free variables are split into differences of
//! non-negative pairs on export only; zero blocks are dropped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::Command;

use crate::conic::{Cone, ConicProgram, SQRT2};

/// Environment variable naming an external SDPA-compatible solver executable.
pub const EXTERNAL_SOLVER_ENV: &str = "MOMENTSOS_SDPA_SOLVER";

#[derive(Debug, thiserror::Error)]
pub enum SdpaError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {0}: {1}")]
    Parse(usize, String),
    #[error("external solver not configured; set {EXTERNAL_SOLVER_ENV}")]
    NotConfigured,
    #[error("external solver failed: {0}")]
    External(String),
}

enum ExportBlock {
    /// LP block; each original variable maps to one diagonal position.
    Diag { vars: Vec<(usize, f64)> },
    /// PSD block of the given side.
    Psd { side: usize },
    Skipped,
}

/// Renders a conic program in sparse SDPA format.
pub fn render_sdpa(cp: &ConicProgram) -> String {
    let mut blocks = Vec::new();
    let mut sizes: Vec<i64> = Vec::new();
    for b in cp.blocks() {
        match b.cone {
            Cone::Zero(_) => blocks.push(ExportBlock::Skipped),
            Cone::NonNeg(n) => {
                if n == 0 {
                    blocks.push(ExportBlock::Skipped);
                    continue;
                }
                blocks.push(ExportBlock::Diag {
                    vars: (0..n).map(|t| (t, 1.0)).collect(),
                });
                sizes.push(-(n as i64));
            }
            Cone::Free(n) => {
                if n == 0 {
                    blocks.push(ExportBlock::Skipped);
                    continue;
                }
                // x_t = x+_t - x-_t on positions t and n + t
                blocks.push(ExportBlock::Diag {
                    vars: (0..2 * n)
                        .map(|p| if p < n { (p, 1.0) } else { (p - n, -1.0) })
                        .collect(),
                });
                sizes.push(-(2 * n as i64));
            }
            Cone::Psd(n) => {
                blocks.push(ExportBlock::Psd { side: n });
                sizes.push(n as i64);
            }
        }
    }

    // map a global variable index to sparse entries in its exported block
    let entries_of = |var: usize, coeff: f64, out: &mut Vec<(usize, usize, usize, f64)>, blk_no: &[usize]| {
        // locate the containing block
        let (bi, local) = locate(cp, var);
        match &blocks[bi] {
            ExportBlock::Skipped => {}
            ExportBlock::Diag { vars } => {
                for (pos, &(t, sign)) in vars.iter().enumerate() {
                    if t == local {
                        out.push((blk_no[bi], pos + 1, pos + 1, sign * coeff));
                    }
                }
            }
            ExportBlock::Psd { side } => {
                let (i, j) = svec_pos(local, *side);
                let val = if i == j { coeff } else { coeff / SQRT2 };
                out.push((blk_no[bi], i + 1, j + 1, val));
            }
        }
    };

    // exported block numbers (1-based) for non-skipped blocks
    let mut blk_no = vec![0usize; blocks.len()];
    let mut next = 1;
    for (i, b) in blocks.iter().enumerate() {
        if !matches!(b, ExportBlock::Skipped) {
            blk_no[i] = next;
            next += 1;
        }
    }

    let mut s = String::new();
    let _ = writeln!(s, "* sparse SDPA export");
    let _ = writeln!(s, "{}", cp.num_rows());
    let _ = writeln!(s, "{}", sizes.len());
    let _ = writeln!(
        s,
        "{}",
        sizes
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    let _ = writeln!(
        s,
        "{}",
        cp.rhs()
            .iter()
            .map(|v| format!("{v:.17e}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    // objective: F_0 = -C
    let mut ent = Vec::new();
    for (var, &c) in cp.obj().iter().enumerate() {
        if c != 0.0 {
            entries_of(var, -c, &mut ent, &blk_no);
        }
    }
    for (blk, i, j, v) in ent {
        let _ = writeln!(s, "0 {blk} {i} {j} {v:.17e}");
    }
    for (row_idx, row) in cp.rows().iter().enumerate() {
        let mut ent = Vec::new();
        for &(var, coeff) in row {
            if coeff != 0.0 {
                entries_of(var, coeff, &mut ent, &blk_no);
            }
        }
        for (blk, i, j, v) in ent {
            let _ = writeln!(s, "{} {blk} {i} {j} {v:.17e}", row_idx + 1);
        }
    }
    s
}

fn locate(cp: &ConicProgram, var: usize) -> (usize, usize) {
    for (bi, b) in cp.blocks().iter().enumerate() {
        if b.range().contains(&var) {
            return (bi, var - b.offset);
        }
    }
    panic!("variable {var} outside all blocks");
}

/// Upper-triangle (column-major svec) position of a local svec index.
fn svec_pos(local: usize, side: usize) -> (usize, usize) {
    let mut k = 0;
    for j in 0..side {
        for i in 0..=j {
            if k == local {
                return (i, j);
            }
            k += 1;
        }
    }
    panic!("svec index {local} out of range for side {side}");
}

/// Writes the sparse SDPA rendering of a program to a file.
pub fn export_sdpa(cp: &ConicProgram, path: impl AsRef<Path>) -> Result<(), SdpaError> {
    fs::write(path, render_sdpa(cp))?;
    Ok(())
}

/// Parses a sparse SDPA file into a conic program.
///
/// Negative block sizes become non-negative blocks, positive sizes PSD
/// blocks; the objective is recovered from the `F_0` entries.
pub fn import_sdpa(path: impl AsRef<Path>) -> Result<ConicProgram, SdpaError> {
    parse_sdpa(&fs::read_to_string(path)?)
}

pub fn parse_sdpa(text: &str) -> Result<ConicProgram, SdpaError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('*') && !l.starts_with('"'));
    let clean = |l: &str| -> Vec<String> {
        l.replace(['{', '}', '(', ')', ','], " ")
            .split_whitespace()
            .map(str::to_string)
            .collect()
    };
    let mut next_tokens = |what: &str| -> Result<(usize, Vec<String>), SdpaError> {
        lines
            .next()
            .map(|(n, l)| (n, clean(l)))
            .ok_or_else(|| SdpaError::Parse(0, format!("missing {what}")))
    };

    let (n1, t) = next_tokens("mDIM")?;
    let m_dim: usize = t
        .first()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| SdpaError::Parse(n1, "bad mDIM".into()))?;
    let (n2, t) = next_tokens("nBLOCK")?;
    let n_block: usize = t
        .first()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| SdpaError::Parse(n2, "bad nBLOCK".into()))?;
    let (n3, t) = next_tokens("block sizes")?;
    if t.len() != n_block {
        return Err(SdpaError::Parse(n3, format!("expected {n_block} block sizes")));
    }
    let sizes: Vec<i64> = t
        .iter()
        .map(|v| v.parse::<f64>().map(|x| x as i64))
        .collect::<Result<_, _>>()
        .map_err(|e| SdpaError::Parse(n3, e.to_string()))?;
    let (n4, t) = next_tokens("c vector")?;
    if t.len() != m_dim {
        return Err(SdpaError::Parse(n4, format!("expected {m_dim} rhs entries")));
    }
    let rhs: Vec<f64> = t
        .iter()
        .map(|v| v.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e: std::num::ParseFloatError| SdpaError::Parse(n4, e.to_string()))?;

    let mut cp = ConicProgram::new();
    let mut offsets = Vec::with_capacity(n_block);
    let mut side = Vec::with_capacity(n_block);
    for (b, &sz) in sizes.iter().enumerate() {
        if sz < 0 {
            offsets.push(cp.add_block(format!("blk{b}"), Cone::NonNeg((-sz) as usize)));
            side.push(0usize);
        } else {
            offsets.push(cp.add_block(format!("blk{b}"), Cone::Psd(sz as usize)));
            side.push(sz as usize);
        }
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m_dim];
    for (ln, line) in lines {
        let t = clean(line);
        if t.len() != 5 {
            return Err(SdpaError::Parse(ln, "expected: matno blkno i j value".into()));
        }
        let matno: usize = t[0].parse().map_err(|_| SdpaError::Parse(ln, "bad matno".into()))?;
        let blkno: usize = t[1].parse().map_err(|_| SdpaError::Parse(ln, "bad blkno".into()))?;
        let i: usize = t[2].parse().map_err(|_| SdpaError::Parse(ln, "bad row index".into()))?;
        let j: usize = t[3].parse().map_err(|_| SdpaError::Parse(ln, "bad col index".into()))?;
        let val: f64 = t[4].parse().map_err(|_| SdpaError::Parse(ln, "bad value".into()))?;
        if matno > m_dim || blkno == 0 || blkno > n_block || i == 0 || j == 0 {
            return Err(SdpaError::Parse(ln, "index out of range".into()));
        }
        let b = blkno - 1;
        let (lo, hi) = (i.min(j) - 1, i.max(j) - 1);
        let (var, coeff) = if side[b] == 0 {
            if lo != hi {
                return Err(SdpaError::Parse(ln, "off-diagonal entry in LP block".into()));
            }
            (offsets[b] + lo, val)
        } else {
            // svec coefficient reproducing tr(F Y): diagonal as-is,
            // off-diagonal scaled by sqrt(2)
            let local = hi * (hi + 1) / 2 + lo;
            let scale = if lo == hi { 1.0 } else { SQRT2 };
            (offsets[b] + local, val * scale)
        };
        if matno == 0 {
            cp.set_obj(var, -coeff);
        } else {
            rows[matno - 1].push((var, coeff));
        }
    }
    for (row, b) in rows.into_iter().zip(rhs) {
        cp.add_row(row, b);
    }
    Ok(cp)
}

/// Objective bounds reported by an external solver, in this crate's sign
/// convention (estimates of `min c'x`).
#[derive(Clone, Copy, Debug)]
pub struct ExternalValue {
    pub obj_primal: f64,
    pub obj_dual: f64,
}

/// Exports the program, runs the executable named by
/// [`EXTERNAL_SOLVER_ENV`] as `exe input.dat-s output`, and parses the
/// reported objective values.
pub fn solve_external(cp: &ConicProgram, workdir: impl AsRef<Path>) -> Result<ExternalValue, SdpaError> {
    let exe = std::env::var(EXTERNAL_SOLVER_ENV).map_err(|_| SdpaError::NotConfigured)?;
    let input = workdir.as_ref().join("problem.dat-s");
    let output = workdir.as_ref().join("problem.result");
    export_sdpa(cp, &input)?;
    let run = Command::new(&exe).arg(&input).arg(&output).output()?;
    if !run.status.success() {
        return Err(SdpaError::External(format!(
            "{exe} exited with {}",
            run.status
        )));
    }
    let text = fs::read_to_string(&output)?;
    let grab = |key: &str| -> Option<f64> {
        text.lines().find_map(|l| {
            let l = l.trim();
            l.strip_prefix(key)
                .and_then(|rest| rest.trim_start().strip_prefix('='))
                .and_then(|v| v.trim().parse().ok())
        })
    };
    let p = grab("objValPrimal")
        .ok_or_else(|| SdpaError::External("missing objValPrimal".into()))?;
    let d = grab("objValDual").ok_or_else(|| SdpaError::External("missing objValDual".into()))?;
    // the exported file encodes max -c'x on the SDPA dual side
    Ok(ExternalValue {
        obj_primal: -d,
        obj_dual: -p,
    })
}
