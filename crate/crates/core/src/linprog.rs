//! Exact linear algebra and feasibility over the rationals.
//!
//! Polytope statements at bit scale are combinatorial facts, so everything
//! here runs in arbitrary-precision rational arithmetic: Gauss-Jordan
//! elimination, unique solving, vertex enumeration by basic-solution
//! search, and phase-one simplex feasibility with Bland's rule. A simplex
//! run never returns a bare verdict: feasible outcomes carry the point and
//! infeasible outcomes carry a separating functional, and both are
//! re-verified exactly before they are returned.

use std::collections::HashSet;

use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(num.into(), den.into())
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(n.into())
}

/// Exact rational value of a finite float (its binary expansion).
pub fn rat_from_f64(v: f64) -> Result<Rat> {
    Rat::from_f64(v).ok_or_else(|| Error::Malformed(format!("non-finite value {v}")))
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Gauss-Jordan elimination in place; returns the pivot column of each of
/// the leading `rank` rows.
pub fn row_reduce(rows: &mut [Vec<Rat>]) -> Vec<usize> {
    let m = rows.len();
    if m == 0 {
        return Vec::new();
    }
    let n = rows[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let Some(p) = (r..m).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].recip();
        for v in rows[r].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..m {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for j in 0..n {
                    let delta = &f * &rows[r][j];
                    rows[i][j] = &rows[i][j] - &delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m {
            break;
        }
    }
    pivots
}

pub fn rank(rows: &[Vec<Rat>]) -> usize {
    let mut copy: Vec<Vec<Rat>> = rows.to_vec();
    row_reduce(&mut copy).len()
}

/// Indices of a maximal linearly independent subset of `rows`, scanned in
/// order.
pub fn independent_rows(rows: &[Vec<Rat>]) -> Vec<usize> {
    let mut basis: Vec<Vec<Rat>> = Vec::new();
    let mut kept = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut candidate = basis.clone();
        candidate.push(row.clone());
        if rank(&candidate) > basis.len() {
            basis = candidate;
            row_reduce(&mut basis);
            kept.push(i);
        }
    }
    kept
}

/// Solve `a x = b` exactly when the solution exists and is unique; `None`
/// if the system is inconsistent or the columns are linearly dependent.
pub fn solve_unique(a: &[Vec<Rat>], b: &[Rat]) -> Option<Vec<Rat>> {
    let m = a.len();
    if m != b.len() {
        return None;
    }
    let n = if m == 0 { 0 } else { a[0].len() };
    let mut aug: Vec<Vec<Rat>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut v = row.clone();
            v.push(rhs.clone());
            v
        })
        .collect();
    let pivots = row_reduce(&mut aug);
    if pivots.contains(&n) {
        return None; // inconsistent: pivot in the constant column
    }
    if pivots.len() < n {
        return None; // free variables: not unique
    }
    let mut x = vec![Rat::zero(); n];
    for (row, &c) in pivots.iter().enumerate() {
        x[c] = aug[row][n].clone();
    }
    Some(x)
}

/// Outcome of an exact feasibility run for `{x >= 0 : a x = b}`.
#[derive(Clone, Debug)]
pub enum Feasibility {
    /// A point of the polytope.
    Feasible(Vec<Rat>),
    /// A functional `y` with `y a <= 0` componentwise yet `y b > 0`,
    /// certifying emptiness.
    Infeasible(Vec<Rat>),
}

/// Decide `{x >= 0 : a x = b}` by phase-one simplex with Bland's rule,
/// re-verifying the point or the certificate exactly before returning.
pub fn feasibility(a: &[Vec<Rat>], b: &[Rat]) -> Result<Feasibility> {
    let m = a.len();
    if b.len() != m {
        return Err(Error::Malformed(format!(
            "{} constraint rows with {} right-hand sides",
            m,
            b.len()
        )));
    }
    let n = if m == 0 { 0 } else { a[0].len() };
    if a.iter().any(|row| row.len() != n) {
        return Err(Error::Malformed("ragged constraint matrix".into()));
    }
    if m == 0 {
        return Ok(Feasibility::Feasible(vec![Rat::zero(); n]));
    }

    // orient rows so the right-hand side is nonnegative
    let signs: Vec<bool> = b.iter().map(|v| v.is_negative()).collect();
    let mut tab: Vec<Vec<Rat>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row: Vec<Rat> = Vec::with_capacity(n + m + 1);
        for j in 0..n {
            row.push(if signs[i] { -&a[i][j] } else { a[i][j].clone() });
        }
        for k in 0..m {
            row.push(if k == i { rat_int(1) } else { Rat::zero() });
        }
        row.push(if signs[i] { -&b[i] } else { b[i].clone() });
        tab.push(row);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    // reduced costs of "minimize the artificial total"
    let mut zrow = vec![Rat::zero(); n + m + 1];
    for (j, z) in zrow.iter_mut().enumerate() {
        let col_sum: Rat = tab.iter().map(|row| row[j].clone()).sum();
        let cost = if (n..n + m).contains(&j) {
            rat_int(1)
        } else {
            Rat::zero()
        };
        *z = &cost - &col_sum;
    }

    loop {
        // Bland: lowest-index column with negative reduced cost
        let Some(enter) = (0..n + m).find(|&j| zrow[j].is_negative()) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best: Option<Rat> = None;
        for i in 0..m {
            if tab[i][enter].is_positive() {
                let ratio = &tab[i][n + m] / &tab[i][enter];
                let better = match &best {
                    None => true,
                    Some(cur) => {
                        ratio < *cur || (ratio == *cur && basis[i] < basis[leave.unwrap()])
                    }
                };
                if better {
                    best = Some(ratio);
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            return Err(Error::LpFailure(
                "phase-one objective unbounded below".into(),
            ));
        };
        let inv = tab[leave][enter].recip();
        for v in tab[leave].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..m {
            if i != leave && !tab[i][enter].is_zero() {
                let f = tab[i][enter].clone();
                for j in 0..n + m + 1 {
                    let delta = &f * &tab[leave][j];
                    tab[i][j] = &tab[i][j] - &delta;
                }
            }
        }
        if !zrow[enter].is_zero() {
            let f = zrow[enter].clone();
            for j in 0..n + m + 1 {
                let delta = &f * &tab[leave][j];
                zrow[j] = &zrow[j] - &delta;
            }
        }
        basis[leave] = enter;
    }

    let objective: Rat = (0..m)
        .filter(|&i| basis[i] >= n)
        .map(|i| tab[i][n + m].clone())
        .sum();

    if objective.is_zero() {
        let mut x = vec![Rat::zero(); n];
        for i in 0..m {
            if basis[i] < n {
                x[basis[i]] = tab[i][n + m].clone();
            }
        }
        if x.iter().any(|v| v.is_negative()) {
            return Err(Error::LpFailure("negative basic value at optimum".into()));
        }
        for i in 0..m {
            let lhs: Rat = (0..n).map(|j| &a[i][j] * &x[j]).sum();
            if lhs != b[i] {
                return Err(Error::LpFailure(format!(
                    "solution fails equality row {i} on re-verification"
                )));
            }
        }
        return Ok(Feasibility::Feasible(x));
    }

    // dual at the optimum, read off the artificial reduced costs and mapped
    // back through the row orientation
    let mut y = Vec::with_capacity(m);
    for i in 0..m {
        let yi = rat_int(1) - &zrow[n + i];
        y.push(if signs[i] { -yi } else { yi });
    }
    for j in 0..n {
        let dot: Rat = (0..m).map(|i| &y[i] * &a[i][j]).sum();
        if dot.is_positive() {
            return Err(Error::LpFailure(format!(
                "certificate fails column {j} on re-verification"
            )));
        }
    }
    let gain: Rat = (0..m).map(|i| &y[i] * &b[i]).sum();
    if !gain.is_positive() {
        return Err(Error::LpFailure(
            "certificate has nonpositive margin on re-verification".into(),
        ));
    }
    Ok(Feasibility::Infeasible(y))
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut out: u128 = 1;
    for i in 0..k {
        out = out.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    out
}

/// All vertices of `{x >= 0 : a x = b}` by exhaustive basic-solution
/// enumeration: every column subset of size `rank(a)` whose square system
/// solves uniquely and nonnegatively contributes its point.
pub fn polytope_vertices(a: &[Vec<Rat>], b: &[Rat]) -> Result<Vec<Vec<Rat>>> {
    let m = a.len();
    if b.len() != m {
        return Err(Error::Malformed(format!(
            "{} constraint rows with {} right-hand sides",
            m,
            b.len()
        )));
    }
    let n = if m == 0 { 0 } else { a[0].len() };
    let keep = independent_rows(a);
    let r = keep.len();
    // consistency of the dropped rows with the kept ones is checked per
    // candidate below, against the full original system
    if r == 0 {
        return Ok(if b.iter().all(|v| v.is_zero()) && n > 0 {
            vec![vec![Rat::zero(); n]]
        } else if n == 0 {
            Vec::new()
        } else {
            Vec::new()
        });
    }
    if binomial(n, r) > 2_000_000 {
        return Err(Error::ScaleCap(format!(
            "basic-solution enumeration needs {} candidate bases",
            binomial(n, r)
        )));
    }
    let a_kept: Vec<&Vec<Rat>> = keep.iter().map(|&i| &a[i]).collect();
    let b_kept: Vec<Rat> = keep.iter().map(|&i| b[i].clone()).collect();

    let mut seen: HashSet<Vec<Rat>> = HashSet::new();
    let mut out = Vec::new();
    let mut cols: Vec<usize> = (0..r).collect();
    loop {
        let sub: Vec<Vec<Rat>> = a_kept
            .iter()
            .map(|row| cols.iter().map(|&c| row[c].clone()).collect())
            .collect();
        if let Some(xs) = solve_unique(&sub, &b_kept) {
            if xs.iter().all(|v| !v.is_negative()) {
                let mut x = vec![Rat::zero(); n];
                for (k, &c) in cols.iter().enumerate() {
                    x[c] = xs[k].clone();
                }
                let consistent = (0..m).all(|i| {
                    let lhs: Rat = (0..n).map(|j| &a[i][j] * &x[j]).sum();
                    lhs == b[i]
                });
                if consistent && seen.insert(x.clone()) {
                    out.push(x);
                }
            }
        }
        // advance the combination lexicographically
        let mut k = r;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            if cols[k] < n - (r - k) {
                cols[k] += 1;
                for j in k + 1..r {
                    cols[j] = cols[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(vals: &[i64]) -> Vec<Rat> {
        vals.iter().map(|&v| rat_int(v)).collect()
    }

    #[test]
    fn row_reduce_finds_rank() {
        let mut m = vec![row(&[1, 2, 3]), row(&[2, 4, 6]), row(&[0, 1, 1])];
        let pivots = row_reduce(&mut m);
        assert_eq!(pivots, vec![0, 1]);
        assert_eq!(rank(&[row(&[1, 2]), row(&[2, 4])]), 1);
        assert_eq!(rank(&[row(&[1, 0]), row(&[0, 1])]), 2);
    }

    #[test]
    fn independent_rows_keeps_first_spanning_set() {
        let rows = vec![
            row(&[1, 1, 0]),
            row(&[2, 2, 0]),
            row(&[0, 0, 1]),
            row(&[1, 1, 1]),
        ];
        assert_eq!(independent_rows(&rows), vec![0, 2]);
    }

    #[test]
    fn solve_unique_handles_all_outcomes() {
        let a = vec![row(&[2, 1]), row(&[1, -1])];
        let x = solve_unique(&a, &row(&[5, 1])).unwrap();
        assert_eq!(x, vec![rat_int(2), rat_int(1)]);
        // inconsistent
        assert!(solve_unique(&[row(&[1, 1]), row(&[1, 1])], &row(&[1, 2])).is_none());
        // underdetermined
        assert!(solve_unique(&[row(&[1, 1])], &row(&[1])).is_none());
    }

    #[test]
    fn feasibility_finds_interior_point() {
        // x1 + x2 = 1, x1 - x2 = 0 -> (1/2, 1/2)
        let a = vec![row(&[1, 1]), row(&[1, -1])];
        match feasibility(&a, &row(&[1, 0])).unwrap() {
            Feasibility::Feasible(x) => {
                assert_eq!(x, vec![rat(1, 2), rat(1, 2)]);
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn feasibility_handles_redundant_rows() {
        let a = vec![row(&[1, 1]), row(&[2, 2])];
        match feasibility(&a, &row(&[1, 2])).unwrap() {
            Feasibility::Feasible(x) => {
                let total = &x[0] + &x[1];
                assert_eq!(total, rat_int(1));
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn infeasibility_comes_with_a_verified_functional() {
        // x1 + x2 = -1 has no nonnegative solution
        let a = vec![row(&[1, 1])];
        match feasibility(&a, &row(&[-1])).unwrap() {
            Feasibility::Infeasible(y) => {
                assert!((&y[0] * &rat_int(-1)).is_positive());
                assert!(!(&y[0] * &rat_int(1)).is_positive());
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        // contradictory equalities
        let a = vec![row(&[1, 1]), row(&[1, 1])];
        match feasibility(&a, &row(&[1, 2])).unwrap() {
            Feasibility::Infeasible(y) => {
                let margin = &y[0] * &rat_int(1) + &y[1] * &rat_int(2);
                assert!(margin.is_positive());
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn simplex_vertices_are_the_unit_points() {
        let a = vec![row(&[1, 1, 1])];
        let verts = polytope_vertices(&a, &row(&[1])).unwrap();
        assert_eq!(verts.len(), 3);
        for v in &verts {
            assert_eq!(v.iter().filter(|c| c.is_zero()).count(), 2);
            let total: Rat = v.iter().cloned().sum();
            assert_eq!(total, rat_int(1));
        }
    }

    #[test]
    fn box_via_slacks_has_four_vertices() {
        // x1 + x3 = 1, x2 + x4 = 1, all >= 0: square in (x1, x2)
        let a = vec![row(&[1, 0, 1, 0]), row(&[0, 1, 0, 1])];
        let verts = polytope_vertices(&a, &row(&[1, 1])).unwrap();
        assert_eq!(verts.len(), 4);
        for v in &verts {
            assert!(v.iter().all(|c| c.is_zero() || *c == rat_int(1)));
        }
    }

    #[test]
    fn degenerate_polytope_is_a_single_point() {
        let a = vec![row(&[1, 1]), row(&[1, -1])];
        let verts = polytope_vertices(&a, &row(&[1, 1])).unwrap();
        assert_eq!(verts, vec![vec![rat_int(1), Rat::zero()]]);
    }

    #[test]
    fn float_conversion_is_exact_for_dyadics() {
        assert_eq!(rat_from_f64(0.25).unwrap(), rat(1, 4));
        assert_eq!(rat_from_f64(-1.5).unwrap(), rat(-3, 2));
        assert!(rat_from_f64(f64::NAN).is_err());
        assert_eq!(rat_to_f64(&rat(1, 8)), 0.125);
    }
}
