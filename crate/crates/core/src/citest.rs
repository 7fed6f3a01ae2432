//! Conditional-independence testing for discrete data.
//!
//! `x ⊥ y | z` is tested with Pearson's chi-square statistic summed over the
//! strata of the conditioning assignment. Strata too sparse for the asymptotic
//! approximation are skipped; when nothing is left the result is marked as
//! not informative.

use std::collections::BTreeMap;

use statrs::function::gamma::gamma_ur;
use thiserror::Error;

use crate::dataset::CodedDataset;

/// Rows required per cell of a stratum's (reduced) table before it is tested.
pub const MIN_ROWS_PER_CELL: usize = 5;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum CiError {
    #[error("significance level {0} is outside (0, 1)")]
    Alpha(f64),
    #[error("column index {0} out of range")]
    UnknownColumn(usize),
    #[error("x and y are the same column ({0})")]
    SameVariable(usize),
    #[error("column {0} is both tested and conditioned on")]
    Overlap(usize),
    #[error("row {row}: `{column}` holds invalid code {code}")]
    InvalidCode {
        row: usize,
        column: String,
        code: i32,
    },
}

pub type Result<T, E = CiError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub independent: bool,
    /// False when no stratum had enough rows to be tested.
    pub informative: bool,
}

fn check_column(data: &CodedDataset, c: usize) -> Result<()> {
    if c < data.n_cols() {
        Ok(())
    } else {
        Err(CiError::UnknownColumn(c))
    }
}

fn level(data: &CodedDataset, row: usize, col: usize) -> Result<usize> {
    let code = data.value(row, col);
    data.variable(col)
        .level_index(code)
        .ok_or_else(|| CiError::InvalidCode {
            row: row + 1,
            column: data.variable(col).name.clone(),
            code,
        })
}

/// Co-occurrence counts of `x` (rows) and `y` (columns) among rows matching
/// every `(column, code)` pair in `conditioning`.
pub fn contingency_table(
    data: &CodedDataset,
    x: usize,
    y: usize,
    conditioning: &[(usize, i32)],
) -> Result<Vec<Vec<u64>>> {
    check_column(data, x)?;
    check_column(data, y)?;
    if x == y {
        return Err(CiError::SameVariable(x));
    }
    for &(c, _) in conditioning {
        check_column(data, c)?;
        if c == x || c == y {
            return Err(CiError::Overlap(c));
        }
    }
    let mut table = vec![vec![0u64; data.variable(y).n_levels()]; data.variable(x).n_levels()];
    for r in 0..data.n_rows() {
        if conditioning.iter().all(|&(c, code)| data.value(r, c) == code) {
            table[level(data, r, x)?][level(data, r, y)?] += 1;
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearsonStatistic {
    pub statistic: f64,
    pub dof: usize,
    /// Rows counted in the table.
    pub total: u64,
    /// Cells of the reduced table.
    pub cells: usize,
}

/// Pearson X² and degrees of freedom of a table after dropping empty rows and
/// columns. `None` when fewer than two rows or columns remain.
pub fn pearson_statistic(table: &[Vec<u64>]) -> Option<PearsonStatistic> {
    let row_sums: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let n_cols = table.first().map_or(0, Vec::len);
    let col_sums: Vec<u64> = (0..n_cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let rows: Vec<usize> = (0..table.len()).filter(|&i| row_sums[i] > 0).collect();
    let cols: Vec<usize> = (0..n_cols).filter(|&j| col_sums[j] > 0).collect();
    if rows.len() < 2 || cols.len() < 2 {
        return None;
    }
    let total: u64 = row_sums.iter().sum();
    let n = total as f64;
    let mut stat = 0.0;
    for &i in &rows {
        for &j in &cols {
            let expected = row_sums[i] as f64 * col_sums[j] as f64 / n;
            let diff = table[i][j] as f64 - expected;
            stat += diff * diff / expected;
        }
    }
    Some(PearsonStatistic {
        statistic: stat,
        dof: (rows.len() - 1) * (cols.len() - 1),
        total,
        cells: rows.len() * cols.len(),
    })
}

/// Upper tail `P(X >= statistic)` of a chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    if statistic <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof as f64 / 2.0, statistic / 2.0).clamp(0.0, 1.0)
}

/// Tests `x ⊥ y | z` at level `alpha`.
pub fn chi_square_ci(
    data: &CodedDataset,
    x: usize,
    y: usize,
    z: &[usize],
    alpha: f64,
) -> Result<CiResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CiError::Alpha(alpha));
    }
    check_column(data, x)?;
    check_column(data, y)?;
    if x == y {
        return Err(CiError::SameVariable(x));
    }
    for &c in z {
        check_column(data, c)?;
        if c == x || c == y {
            return Err(CiError::Overlap(c));
        }
    }

    let nx = data.variable(x).n_levels();
    let ny = data.variable(y).n_levels();
    let mut strata: BTreeMap<Vec<usize>, Vec<Vec<u64>>> = BTreeMap::new();
    for r in 0..data.n_rows() {
        let key = z
            .iter()
            .map(|&c| level(data, r, c))
            .collect::<Result<Vec<_>>>()?;
        let (i, j) = (level(data, r, x)?, level(data, r, y)?);
        strata.entry(key).or_insert_with(|| vec![vec![0; ny]; nx])[i][j] += 1;
    }

    let mut statistic = 0.0;
    let mut dof = 0;
    let mut tested = 0;
    for table in strata.values() {
        if let Some(p) = pearson_statistic(table) {
            if (p.total as usize) < MIN_ROWS_PER_CELL * p.cells {
                continue;
            }
            statistic += p.statistic;
            dof += p.dof;
            tested += 1;
        }
    }

    let informative = tested > 0 && dof >= 1;
    if !informative {
        return Ok(CiResult {
            statistic,
            dof,
            p_value: 1.0,
            independent: false,
            informative: false,
        });
    }
    let p_value = chi_square_sf(statistic, dof);
    Ok(CiResult {
        statistic,
        dof,
        p_value,
        independent: p_value > alpha,
        informative: true,
    })
}
