//! Dense rational simplex for `max cᵀx, Ax ≤ b, x ≥ 0` with `b ≥ 0`.
//!
//! The slack basis is feasible because `b ≥ 0`, so no first phase is
//! needed. Bland's rule rules out cycling.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

#[derive(Debug, Clone, PartialEq)]
pub struct LpOptimum {
    pub value: BigRational,
    pub x: Vec<BigRational>,
}

/// Solves the problem, or returns `None` if it is unbounded.
///
/// `a` is row-major with one row per constraint.
pub fn maximize(c: &[BigRational], a: &[Vec<BigRational>], b: &[BigRational]) -> Option<LpOptimum> {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m);
    assert!(
        b.iter().all(|v| !v.is_negative()),
        "right-hand side must be non-negative"
    );
    let width = n + m;
    // tableau rows: [A | I | b]
    let mut rows: Vec<Vec<BigRational>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            assert_eq!(row.len(), n);
            let mut r = row.clone();
            r.extend((0..m).map(|j| if i == j { one() } else { BigRational::zero() }));
            r.push(b[i].clone());
            r
        })
        .collect();
    // objective row holds reduced costs c_j − z_j, and −value in the last slot
    let mut obj: Vec<BigRational> = c.to_vec();
    obj.extend((0..=m).map(|_| BigRational::zero()));
    let mut basis: Vec<usize> = (n..width).collect();

    while let Some(enter) = (0..width).find(|&j| obj[j].is_positive()) {
        let mut leave: Option<(usize, BigRational)> = None;
        for (i, row) in rows.iter().enumerate() {
            if !row[enter].is_positive() {
                continue;
            }
            let ratio = &row[width] / &row[enter];
            let better = match &leave {
                None => true,
                Some((li, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*li]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        let (pivot_row, _) = leave?;
        pivot(&mut rows, &mut obj, pivot_row, enter);
        basis[pivot_row] = enter;
    }

    let mut x = vec![BigRational::zero(); n];
    for (i, &var) in basis.iter().enumerate() {
        if var < n {
            x[var] = rows[i][width].clone();
        }
    }
    let value = -obj[width].clone();
    Some(LpOptimum { value, x })
}

fn one() -> BigRational {
    BigRational::from_integer(1.into())
}

fn pivot(rows: &mut [Vec<BigRational>], obj: &mut [BigRational], r: usize, col: usize) {
    let p = rows[r][col].clone();
    for v in rows[r].iter_mut() {
        if !v.is_zero() {
            *v = &*v / &p;
        }
    }
    let pivot_row = rows[r].clone();
    let eliminate = |target: &mut [BigRational]| {
        let f = target[col].clone();
        if f.is_zero() {
            return;
        }
        for (t, p) in target.iter_mut().zip(&pivot_row) {
            if !p.is_zero() {
                *t = &*t - &f * p;
            }
        }
    };
    for (i, row) in rows.iter_mut().enumerate() {
        if i != r {
            eliminate(row);
        }
    }
    eliminate(obj);
}
