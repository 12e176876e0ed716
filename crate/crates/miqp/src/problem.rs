//! Standard-form convex MIQP.
//!
//! ```text
//! minimize    0.5 x'Qx + c'x + offset
//! subject to  lo_r <= a_r x <= hi_r     for every row r
//!             l <= x <= u
//!             x_j in {0, 1}             for j in the binary set
//! ```
//!
//! `Q` is stored as its upper triangle; an off-diagonal entry `(i, j)` stands
//! for both `Q_ij` and `Q_ji`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use crate::error::SolverError;

/// One linear constraint `lower <= sum(coef * x) <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    pub fn is_equality(&self) -> bool {
        self.lower == self.upper
    }

    /// Amount by which `x` violates the row; zero when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        (self.lower - act).max(act - self.upper).max(0.0)
    }
}

/// Two continuous columns that may not both be positive, each guarded by a
/// binary "off" switch: `off = 1` forces the column to zero.
///
/// The branch-and-bound heuristic uses these to repair relaxation points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExclusivePair {
    pub first: usize,
    pub second: usize,
    pub first_off: usize,
    pub second_off: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelStats {
    pub variables: usize,
    pub binaries: usize,
    pub constraints: usize,
    pub equalities: usize,
    pub constraint_nonzeros: usize,
    pub quadratic_nonzeros: usize,
}

impl fmt::Display for ModelStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} vars ({} binary), {} rows ({} eq), {} nnz(A), {} nnz(Q)",
            self.variables,
            self.binaries,
            self.constraints,
            self.equalities,
            self.constraint_nonzeros,
            self.quadratic_nonzeros
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct MiqpProblem {
    names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub linear: Vec<f64>,
    pub offset: f64,
    quadratic: BTreeMap<(usize, usize), f64>,
    pub rows: Vec<Row>,
    row_names: Vec<String>,
    binaries: Vec<usize>,
    priority: Vec<i32>,
    pub exclusive_pairs: Vec<ExclusivePair>,
}

impl MiqpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.names.push(name.into());
        self.lower.push(lower);
        self.upper.push(upper);
        self.linear.push(0.0);
        self.names.len() - 1
    }

    /// Adds a `[0, 1]` column and marks it binary. Larger `priority` values are
    /// branched on first.
    pub fn add_binary(&mut self, name: impl Into<String>, priority: i32) -> usize {
        let j = self.add_var(name, 0.0, 1.0);
        self.binaries.push(j);
        self.priority.push(priority);
        j
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        lower: f64,
        upper: f64,
    ) -> usize {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.num_vars()));
        self.rows.push(Row {
            coeffs,
            lower,
            upper,
        });
        self.row_names.push(name.into());
        self.rows.len() - 1
    }

    pub fn add_linear(&mut self, j: usize, c: f64) {
        self.linear[j] += c;
    }

    /// Adds `value` to `Q_ij` (and `Q_ji`). Diagonal entries contribute
    /// `0.5 * value * x_i^2` to the objective.
    pub fn add_quadratic(&mut self, i: usize, j: usize, value: f64) {
        if value == 0.0 {
            return;
        }
        let key = if i <= j { (i, j) } else { (j, i) };
        *self.quadratic.entry(key).or_insert(0.0) += value;
    }

    /// Adds `weight * (sum_k a_k x_k)^2` to the objective.
    pub fn add_squared_term(&mut self, weight: f64, terms: &[(usize, f64)]) {
        for (p, &(i, ai)) in terms.iter().enumerate() {
            self.add_quadratic(i, i, 2.0 * weight * ai * ai);
            for &(j, aj) in &terms[p + 1..] {
                if i == j {
                    self.add_quadratic(i, i, 4.0 * weight * ai * aj);
                } else {
                    self.add_quadratic(i, j, 2.0 * weight * ai * aj);
                }
            }
        }
    }

    pub fn quadratic(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.quadratic.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn binaries(&self) -> &[usize] {
        &self.binaries
    }

    pub fn binary_priority(&self) -> &[i32] {
        &self.priority
    }

    pub fn is_binary(&self, j: usize) -> bool {
        self.binaries.contains(&j)
    }

    pub fn name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn row_name(&self, r: usize) -> &str {
        &self.row_names[r]
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut value = self.offset;
        for (j, &c) in self.linear.iter().enumerate() {
            value += c * x[j];
        }
        for (&(i, j), &q) in &self.quadratic {
            if i == j {
                value += 0.5 * q * x[i] * x[i];
            } else {
                value += q * x[i] * x[j];
            }
        }
        value
    }

    /// `Q x` using the symmetric expansion of the stored triangle.
    pub fn quadratic_times(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars()];
        for (&(i, j), &q) in &self.quadratic {
            out[i] += q * x[j];
            if i != j {
                out[j] += q * x[i];
            }
        }
        out
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max);
        self.rows
            .iter()
            .map(|r| r.violation(x))
            .fold(bounds, f64::max)
    }

    pub fn max_integrality_violation(&self, x: &[f64]) -> f64 {
        self.binaries
            .iter()
            .map(|&j| (x[j] - x[j].round()).abs())
            .fold(0.0, f64::max)
    }

    pub fn stats(&self) -> ModelStats {
        ModelStats {
            variables: self.num_vars(),
            binaries: self.binaries.len(),
            constraints: self.rows.len(),
            equalities: self.rows.iter().filter(|r| r.is_equality()).count(),
            constraint_nonzeros: self.rows.iter().map(|r| r.coeffs.len()).sum(),
            quadratic_nonzeros: self.quadratic.len(),
        }
    }

    /// Fixes column `j` to `value` by collapsing its bounds.
    pub fn fix(&mut self, j: usize, value: f64) {
        self.lower[j] = value;
        self.upper[j] = value;
    }

    /// Writes the problem in a line-oriented sparse text format, one line per
    /// nonzero:
    ///
    /// ```text
    /// miqp v1 <vars> <rows>
    /// var <j> <name> <lower> <upper> <binary>
    /// c <j> <value>
    /// q <i> <j> <value>          (upper triangle, objective 0.5 x'Qx)
    /// row <r> <name> <lower> <upper>
    /// a <r> <j> <value>
    /// offset <value>
    /// ```
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "miqp v1 {} {}", self.num_vars(), self.num_rows())?;
        for j in 0..self.num_vars() {
            writeln!(w, "var {} {} {} {}", j, self.names[j], self.lower[j], self.upper[j])?;
        }
        for (k, &j) in self.binaries.iter().enumerate() {
            writeln!(w, "bin {} {}", j, self.priority[k])?;
        }
        for p in &self.exclusive_pairs {
            writeln!(w, "pair {} {} {} {}", p.first, p.second, p.first_off, p.second_off)?;
        }
        for (j, &c) in self.linear.iter().enumerate() {
            if c != 0.0 {
                writeln!(w, "c {} {}", j, c)?;
            }
        }
        for (&(i, j), &q) in &self.quadratic {
            writeln!(w, "q {} {} {}", i, j, q)?;
        }
        for (r, row) in self.rows.iter().enumerate() {
            writeln!(w, "row {} {} {} {}", r, self.row_names[r], row.lower, row.upper)?;
            for &(j, a) in &row.coeffs {
                writeln!(w, "a {} {} {}", r, j, a)?;
            }
        }
        writeln!(w, "offset {}", self.offset)
    }

    /// Parses the format written by [`MiqpProblem::write_dump`].
    pub fn read_dump(text: &str) -> Result<Self, SolverError> {
        let bad = |line: usize, what: &str| {
            SolverError::InvalidProblem(format!("dump line {}: {what}", line + 1))
        };
        let mut p = MiqpProblem::new();
        for (k, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<f64, SolverError> {
                f.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| bad(k, "bad number"))
            };
            let idx = |i: usize| -> Result<usize, SolverError> {
                f.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| bad(k, "bad index"))
            };
            match f.first().copied() {
                None | Some("miqp") => {}
                Some("var") => {
                    let name = f.get(2).ok_or_else(|| bad(k, "missing name"))?;
                    p.add_var(*name, num(3)?, num(4)?);
                }
                Some("bin") => {
                    let j = idx(1)?;
                    let prio = f.get(2).and_then(|v| v.parse().ok()).ok_or_else(|| bad(k, "bad priority"))?;
                    if j >= p.num_vars() {
                        return Err(bad(k, "unknown column"));
                    }
                    p.binaries.push(j);
                    p.priority.push(prio);
                }
                Some("pair") => p.exclusive_pairs.push(ExclusivePair {
                    first: idx(1)?,
                    second: idx(2)?,
                    first_off: idx(3)?,
                    second_off: idx(4)?,
                }),
                Some("c") => {
                    let j = idx(1)?;
                    *p.linear.get_mut(j).ok_or_else(|| bad(k, "unknown column"))? = num(2)?;
                }
                Some("q") => {
                    let (i, j) = (idx(1)?, idx(2)?);
                    p.quadratic.insert((i.min(j), i.max(j)), num(3)?);
                }
                Some("row") => {
                    let name = f.get(2).ok_or_else(|| bad(k, "missing name"))?;
                    p.add_row(*name, Vec::new(), num(3)?, num(4)?);
                }
                Some("a") => {
                    let (r, j) = (idx(1)?, idx(2)?);
                    let row = p.rows.get_mut(r).ok_or_else(|| bad(k, "unknown row"))?;
                    row.coeffs.push((j, num(3)?));
                }
                Some("offset") => p.offset = num(1)?,
                Some(other) => return Err(bad(k, &format!("unknown record {other}"))),
            }
        }
        Ok(p)
    }
}

/// Column map produced by [`MiqpProblem::eliminate_fixed`].
#[derive(Debug, Clone, PartialEq)]
pub struct Elimination {
    /// Original index of every kept column, in reduced order.
    pub kept: Vec<usize>,
    /// Removed columns and their values.
    pub fixed: Vec<(usize, f64)>,
    original_len: usize,
}

impl Elimination {
    /// Re-inserts the fixed values into a point of the reduced problem.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.original_len];
        for &(j, v) in &self.fixed {
            x[j] = v;
        }
        for (k, &j) in self.kept.iter().enumerate() {
            x[j] = reduced[k];
        }
        x
    }

    /// Drops the fixed columns from a point of the original problem.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.kept.iter().map(|&j| full[j]).collect()
    }
}

impl MiqpProblem {
    /// Removes every column whose bounds coincide, substituting its value
    /// into the objective and rows. Rows left without columns are dropped
    /// when satisfied and kept (empty, unsatisfiable) otherwise.
    pub fn eliminate_fixed(&self) -> (MiqpProblem, Elimination) {
        let n = self.num_vars();
        let mut new_index = vec![None; n];
        let mut kept = Vec::new();
        let mut fixed = Vec::new();
        for j in 0..n {
            if self.lower[j] == self.upper[j] {
                fixed.push((j, self.lower[j]));
            } else {
                new_index[j] = Some(kept.len());
                kept.push(j);
            }
        }
        let value = |j: usize| self.lower[j];
        let mut out = MiqpProblem::new();
        for &j in &kept {
            out.add_var(self.names[j].clone(), self.lower[j], self.upper[j]);
            out.linear[new_index[j].expect("kept")] = self.linear[j];
        }
        for (b, &j) in self.binaries.iter().enumerate() {
            if let Some(k) = new_index[j] {
                out.binaries.push(k);
                out.priority.push(self.priority[b]);
            }
        }
        out.offset = self.offset;
        for &(j, v) in &fixed {
            out.offset += self.linear[j] * v;
        }
        for (&(i, j), &q) in &self.quadratic {
            match (new_index[i], new_index[j]) {
                (Some(a), Some(b)) => out.add_quadratic(a, b, q),
                (Some(a), None) => out.linear[a] += q * value(j),
                (None, Some(b)) => out.linear[b] += q * value(i),
                (None, None) if i == j => out.offset += 0.5 * q * value(i) * value(i),
                (None, None) => out.offset += q * value(i) * value(j),
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            let mut shift = 0.0;
            let mut coeffs = Vec::new();
            for &(j, a) in &row.coeffs {
                match new_index[j] {
                    Some(k) => coeffs.push((k, a)),
                    None => shift += a * value(j),
                }
            }
            let (lo, hi) = (row.lower - shift, row.upper - shift);
            if coeffs.is_empty() && lo <= 1e-9 * (1.0 + lo.abs()) && hi >= -1e-9 * (1.0 + hi.abs()) {
                continue;
            }
            out.add_row(self.row_names[r].clone(), coeffs, lo, hi);
        }
        for pair in &self.exclusive_pairs {
            let ids = [pair.first, pair.second, pair.first_off, pair.second_off].map(|j| new_index[j]);
            if let [Some(first), Some(second), Some(first_off), Some(second_off)] = ids {
                out.exclusive_pairs.push(ExclusivePair {
                    first,
                    second,
                    first_off,
                    second_off,
                });
            }
        }
        let elim = Elimination {
            kept,
            fixed,
            original_len: n,
        };
        (out, elim)
    }
}
