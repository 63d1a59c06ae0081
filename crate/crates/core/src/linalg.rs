//! Small dense linear algebra over a coefficient ring.

use crate::error::{Error, Result};
use crate::scalar::Coeff;

fn pivot_row<C: Coeff>(m: &[Vec<C>], col: usize, from: usize) -> Option<usize> {
    let rows = from..m.len();
    if C::is_exact() {
        rows.into_iter().find(|&r| !m[r][col].is_zero())
    } else {
        let mag = |c: &C| c.to_c64().map(|z| z.norm()).unwrap_or(0.0);
        rows.into_iter()
            .filter(|&r| !m[r][col].is_zero())
            .max_by(|&a, &b| mag(&m[a][col]).total_cmp(&mag(&m[b][col])))
    }
}

/// Reduced row echelon form. Returns the reduced matrix and pivot columns.
pub fn rref<C: Coeff>(mut m: Vec<Vec<C>>) -> Result<(Vec<Vec<C>>, Vec<usize>)> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = pivot_row(&m, c, r) else { continue };
        m.swap(r, p);
        let inv = m[r][c].inv()?;
        for x in m[r].iter_mut() {
            *x = x.mul(&inv);
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let t = m[r][j].mul(&f);
                    m[i][j] = m[i][j].sub(&t);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    Ok((m, pivots))
}

pub fn inverse<C: Coeff>(a: &[Vec<C>]) -> Result<Vec<Vec<C>>> {
    let n = a.len();
    let aug: Vec<Vec<C>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { C::one() } else { C::zero() }));
            r
        })
        .collect();
    let (red, piv) = rref(aug)?;
    if piv.len() < n || piv.iter().enumerate().any(|(i, &p)| p != i) {
        return Err(Error::Invalid("singular matrix".into()));
    }
    Ok(red.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Solves `a x = b` for square invertible `a`.
pub fn solve<C: Coeff>(a: &[Vec<C>], b: &[C]) -> Result<Vec<C>> {
    let inv = inverse(a)?;
    Ok(mat_vec(&inv, b))
}

pub fn mat_vec<C: Coeff>(a: &[Vec<C>], x: &[C]) -> Vec<C> {
    a.iter()
        .map(|row| row.iter().zip(x).fold(C::zero(), |acc, (p, q)| acc.add(&p.mul(q))))
        .collect()
}
