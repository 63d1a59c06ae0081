//! Formal equivalences between singular ODEs.
//!
//! The Cauchy data `Y = (g₀, g₁, f₀, f₁)` of a normalized map is solved
//! degree by degree in `w`. The unknowns `Yₙ` of degree `n` first appear in
//! the coefficients of `z⁰w^{n+m−1}ζ²` and of `zᵏw^{n+2m−2}ζˡ` with
//! `(k, l) ∈ {(0,3), (1,2), (1,3)}` of the transformed `Φ`, so each degree
//! gives a 4×4 system. It is linear for `n ≥ 2`; for `n = 1` and `m > 1` the
//! unknowns also enter polynomially, and supplied values are used for them.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::jet::{Exponent, Jet, UNCAPPED};
use crate::linalg::rref;
use crate::ode::SingularODE;
use crate::scalar::{Coeff, GaussRat};
use crate::transform::{
    complete_levels, complete_map, push_forward, push_forward_capped, w_vars, CauchyData, NormalizedMap,
};

/// Order of the Cauchy data components: `Y = (g₀, X)`, `X = (g₁, f₀, f₁)`.
pub const COMPONENTS: [&str; 4] = ["g0", "g1", "f0", "f1"];

/// Values for unconstrained coefficients, keyed `"<component>_<degree>"`.
pub type FreeParams = BTreeMap<String, GaussRat>;

pub fn param_name(component: usize, degree: u32) -> String {
    format!("{}_{}", COMPONENTS[component], degree)
}

/// Why no normalized map exists (up to the truncation), or why the
/// recursion could not decide.
#[derive(Clone, Debug, PartialEq)]
pub struct Obstruction {
    pub order: u32,
    pub reason: String,
    pub free_count: usize,
}

impl fmt::Display for Obstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "obstruction at order {}: {} ({} free parameters so far)", self.order, self.reason, self.free_count)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapSolution {
    pub map: NormalizedMap<GaussRat>,
    pub data: CauchyData<GaussRat>,
    /// Free coefficients in the order met, with the values used.
    pub free: Vec<(String, GaussRat)>,
    /// Degree in `w` to which the Cauchy data is determined.
    pub order: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveOutcome {
    Solved(MapSolution),
    Obstructed(Obstruction),
}

impl SolveOutcome {
    pub fn solution(&self) -> Option<&MapSolution> {
        match self {
            SolveOutcome::Solved(s) => Some(s),
            SolveOutcome::Obstructed(_) => None,
        }
    }
}

/// Cauchy data from its coefficient table (`coeffs[n−1]` holds degree `n`).
fn data_from(coeffs: &[[GaussRat; 4]], total: u32) -> CauchyData<GaussRat> {
    let comp = |i: usize| {
        let mut j = Jet::zero_total(w_vars(), total);
        for (n, row) in coeffs.iter().enumerate() {
            j.add_term(Exponent::from_slice(&[(n + 1) as u16]), row[i].clone());
        }
        j
    };
    CauchyData { g0: comp(0), g1: comp(1), f0: comp(2), f1: comp(3) }
}

/// Monomials `(z, w, ζ)` of the four equations of degree `n`.
fn equations(m: u32, n: u32) -> [[u32; 3]; 4] {
    let s = n + m - 1;
    let t = n + 2 * m - 2;
    [[0, s, 2], [0, t, 3], [1, t, 2], [1, t, 3]]
}

/// Equations not touched by any unknown; they must hold for the identity.
fn low_equations(m: u32) -> Vec<[u32; 3]> {
    let mut out: Vec<[u32; 3]> = (0..m).map(|j| [0, j, 2]).collect();
    for j in 0..=(2 * m - 2) {
        out.extend([[0, j, 3], [1, j, 2], [1, j, 3]]);
    }
    out
}

struct Stage<'a> {
    m: u32,
    e_star: &'a SingularODE<GaussRat>,
    target: &'a Jet<GaussRat>,
}

impl Stage<'_> {
    /// `Φ' − Φ` at the given monomials, where `Φ'` is the push-forward by the
    /// map with the given Cauchy data (higher coefficients zero). Only the
    /// part of the map needed for `z`-degree ≤ 1 is built.
    fn residual(&self, coeffs: &[[GaussRat; 4]], monomials: &[[u32; 3]]) -> Result<Vec<GaussRat>> {
        let need = monomials.iter().map(|e| e.iter().sum::<u32>()).max().unwrap_or(0) + 1;
        let phi_star = self.e_star.phi().truncate(&[UNCAPPED; 3], need);
        let es = SingularODE::new(self.m, phi_star)?;
        let data = data_from(coeffs, need + 1);
        let h = complete_levels(&es, &data, need + 1, Some(2))?;
        let out = push_forward_capped(&es, &h, 3)?;
        monomials
            .iter()
            .map(|e| {
                let e16: Vec<u16> = e.iter().map(|&x| x as u16).collect();
                if !out.is_known(&e16) || !self.target.is_known(&e16) {
                    return Err(Error::Truncation(format!("coefficient of z^{} w^{} zeta^{} is not determined", e[0], e[1], e[2])));
                }
                Ok(out.coeff(&e16).sub(&self.target.coeff(&e16)))
            })
            .collect()
    }
}

#[derive(Debug, PartialEq)]
enum Step {
    /// Columns taken as free or fixed.
    Solved(Vec<usize>),
    Inconsistent,
    NotAffine,
}

impl Stage<'_> {
    /// Solves the degree-`n` equations for the last row of `coeffs`, holding
    /// the `fixed` components. The dependence is read off from evaluations and
    /// checked afterwards.
    fn solve(&self, coeffs: &mut [[GaussRat; 4]], n: u32, fixed: &[Option<GaussRat>; 4], free_params: &FreeParams) -> Result<Step> {
        let eqs = equations(self.m, n);
        let last = coeffs.len() - 1;
        let unknown: Vec<usize> = (0..4).filter(|&c| fixed[c].is_none()).collect();
        for c in 0..4 {
            coeffs[last][c] = fixed[c].clone().unwrap_or_else(GaussRat::zero);
        }
        let base = self.residual(coeffs, &eqs)?;
        let mut cols = Vec::with_capacity(unknown.len());
        for &c in &unknown {
            coeffs[last][c] = GaussRat::one();
            let r = self.residual(coeffs, &eqs)?;
            coeffs[last][c] = GaussRat::zero();
            cols.push(r.iter().zip(&base).map(|(a, b)| a.sub(b)).collect::<Vec<_>>());
        }
        let k = unknown.len();
        // augmented [M | −base]
        let aug: Vec<Vec<GaussRat>> = (0..4)
            .map(|row| {
                let mut v: Vec<GaussRat> = (0..k).map(|c| cols[c][row].clone()).collect();
                v.push(base[row].neg());
                v
            })
            .collect();
        let (red, piv) = rref(aug)?;
        if piv.contains(&k) {
            return Ok(if k == 4 { Step::Inconsistent } else { Step::NotAffine });
        }
        let mut taken: Vec<usize> = (0..4).filter(|&c| fixed[c].is_some()).collect();
        for i in (0..k).filter(|i| !piv.contains(i)) {
            let c = unknown[i];
            coeffs[last][c] = free_params.get(&param_name(c, n)).cloned().unwrap_or_else(GaussRat::zero);
            taken.push(c);
        }
        for (row, &p) in piv.iter().enumerate() {
            let mut v = red[row][k].clone();
            for i in (0..k).filter(|i| !piv.contains(i)) {
                v = v.sub(&red[row][i].mul(&coeffs[last][unknown[i]]));
            }
            coeffs[last][unknown[p]] = v;
        }
        taken.sort_unstable();
        let check = self.residual(coeffs, &eqs)?;
        Ok(if check.iter().all(|v| v.is_zero()) { Step::Solved(taken) } else { Step::NotAffine })
    }
}

/// Largest Cauchy-data degree the caps of both ODEs can determine.
pub fn max_order(e_star: &SingularODE<GaussRat>, e: &SingularODE<GaussRat>) -> u32 {
    let m = e_star.m;
    let fits = |n: u32| n + 2 * m + 3 <= e_star.phi().total_cap() && n + 2 * m + 2 <= e.phi().total_cap();
    (1..).take_while(|&n| fits(n)).last().unwrap_or(0)
}

/// Finds a normalized map taking `E*` to `E` whose Cauchy data is known to
/// degree `order` (the largest the caps allow when `None`).
pub fn solve_formal_map(
    e_star: &SingularODE<GaussRat>,
    e: &SingularODE<GaussRat>,
    free_params: &FreeParams,
    order: Option<u32>,
) -> Result<SolveOutcome> {
    let m = e_star.m;
    if e.m != m {
        return Err(Error::Precondition(format!("nonminimality orders differ: {} and {}", m, e.m)));
    }
    let top = max_order(e_star, e);
    let order = order.unwrap_or(top);
    if order > top {
        return Err(Error::Truncation(format!("caps determine the Cauchy data only to degree {top}, asked for {order}")));
    }
    let stage = Stage { m, e_star, target: e.phi() };
    let mut coeffs: Vec<[GaussRat; 4]> = Vec::new();
    let mut free = Vec::new();
    let obstruct = |order: u32, reason: String, free_count: usize| Ok(SolveOutcome::Obstructed(Obstruction { order, reason, free_count }));

    let low = low_equations(m);
    let r = stage.residual(&coeffs, &low)?;
    if let Some((e, v)) = low.iter().zip(&r).find(|(_, v)| !v.is_zero()) {
        return obstruct(0, format!("invariant coefficient z^{} w^{} zeta^{} differs by {v}", e[0], e[1], e[2]), 0);
    }

    for n in 1..=order {
        coeffs.push(std::array::from_fn(|_| GaussRat::zero()));
        let mut fixed: [Option<GaussRat>; 4] = Default::default();
        let mut step = stage.solve(&mut coeffs, n, &fixed, free_params)?;
        if matches!(step, Step::NotAffine | Step::Inconsistent) {
            // the degree-1 unknowns enter polynomially when m > 1: they are
            // taken as free and the equations only checked
            for (c, slot) in fixed.iter_mut().enumerate() {
                *slot = Some(free_params.get(&param_name(c, n)).cloned().unwrap_or_else(GaussRat::zero));
            }
            step = stage.solve(&mut coeffs, n, &fixed, free_params)?;
        }
        match step {
            Step::Solved(cols) => free.extend(cols.into_iter().map(|c| (param_name(c, n), coeffs[n as usize - 1][c].clone()))),
            Step::Inconsistent => return obstruct(n, format!("the degree-{n} equations are inconsistent"), free.len()),
            Step::NotAffine => {
                return obstruct(n, format!("the degree-{n} equations are not affine in the unknowns and the supplied values do not solve them"), free.len())
            }
        }
        let x = &coeffs[n as usize - 1][0];
        if n < m && !x.is_real() {
            return obstruct(n, format!("g0 coefficient of w^{n} must be real, solved as {x}"), free.len());
        }
    }

    let data = data_from(&coeffs, order);
    let total = e_star.phi().total_cap() + 1;
    let map = complete_map(e_star, &data, total)?;
    let image = push_forward(e_star, &map)?;
    let diff = image.phi().sub(e.phi())?;
    if let Some(ord) = diff.order() {
        return obstruct(ord, format!("the full identity fails at total degree {ord}"), free.len());
    }
    Ok(SolveOutcome::Solved(MapSolution { map, data, free, order }))
}
