//! Truncated multivariate power series ("jets").
//!
//! A [`Jet`] stores the coefficients it knows in a sparse map from exponent
//! vectors to coefficients. Its truncation is a box: a monomial is *known* when
//! every exponent is at most the per-variable cap and the weighted degree is at
//! most the total cap. Weights are 1 unless set otherwise; a weight-0 variable
//! must be bounded by its own cap. Every operation returns a jet whose caps only
//! cover monomials whose coefficients are determined exactly by the inputs.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::scalar::Coeff;

pub type Exponent = SmallVec<[u16; 8]>;

/// Shared, ordered list of variable names.
pub type Vars = Arc<[String]>;

/// Per-variable degree weights.
pub type Weights = Arc<[u16]>;

/// Per-variable cap meaning "bounded by the total cap only".
pub const UNCAPPED: u32 = 1 << 20;

pub fn vars(names: &[&str]) -> Vars {
    names.iter().map(|s| s.to_string()).collect::<Vec<_>>().into()
}

fn unit_weights(n: usize) -> Weights {
    vec![1u16; n].into()
}

#[derive(Clone)]
pub struct Jet<C: Coeff> {
    vars: Vars,
    weights: Weights,
    caps: Vec<u32>,
    total: u32,
    terms: BTreeMap<Exponent, C>,
}

impl<C: Coeff> PartialEq for Jet<C> {
    fn eq(&self, other: &Self) -> bool {
        self.same_space(other) && self.caps == other.caps && self.total == other.total && self.terms == other.terms
    }
}

fn same_arc<T: PartialEq + ?Sized>(a: &Arc<T>, b: &Arc<T>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl<C: Coeff> Jet<C> {
    // ----- construction -------------------------------------------------

    pub fn zero(vars: Vars, caps: Vec<u32>, total: u32) -> Self {
        let w = unit_weights(vars.len());
        Self::zero_weighted(vars, w, caps, total)
    }

    pub fn zero_weighted(vars: Vars, weights: Weights, caps: Vec<u32>, total: u32) -> Self {
        assert_eq!(vars.len(), caps.len(), "one cap per variable");
        assert_eq!(vars.len(), weights.len(), "one weight per variable");
        Jet { vars, weights, caps, total, terms: BTreeMap::new() }
    }

    /// Zero jet whose only truncation is the total degree.
    pub fn zero_total(vars: Vars, total: u32) -> Self {
        let caps = vec![UNCAPPED; vars.len()];
        Self::zero(vars, caps, total)
    }

    /// Zero jet in the same space with other caps.
    fn blank(&self, caps: Vec<u32>, total: u32) -> Self {
        Jet { vars: self.vars.clone(), weights: self.weights.clone(), caps, total, terms: BTreeMap::new() }
    }

    /// A zero jet with the same variables and caps as `self`.
    pub fn zero_like(&self) -> Self {
        self.blank(self.caps.clone(), self.total)
    }

    pub fn constant_like(&self, c: C) -> Self {
        let mut j = self.zero_like();
        j.insert(Exponent::from_elem(0, self.vars.len()), c);
        j
    }

    pub fn one_like(&self) -> Self {
        self.constant_like(C::one())
    }

    /// The coordinate function `var` with the caps of `self`.
    pub fn var_like(&self, var: &str) -> Result<Self> {
        let i = self.var_index(var)?;
        Ok(self.monomial_like(&unit(self.vars.len(), i), C::one()))
    }

    pub fn var_at(&self, i: usize) -> Self {
        self.monomial_like(&unit(self.vars.len(), i), C::one())
    }

    pub fn monomial_like(&self, e: &[u16], c: C) -> Self {
        let mut j = self.zero_like();
        j.insert(Exponent::from_slice(e), c);
        j
    }

    /// Builds a jet from `(exponent, coefficient)` pairs; entries outside the
    /// caps are dropped and zero coefficients are skipped.
    pub fn from_terms<I>(vars: Vars, caps: Vec<u32>, total: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, C)>,
    {
        Self::zero(vars, caps, total).with_terms(terms)
    }

    /// Adds the given terms to `self`.
    pub fn with_terms<I>(mut self, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, C)>,
    {
        for (e, c) in terms {
            if e.len() != self.vars.len() {
                return Err(Error::Arity { expected: self.vars.len(), got: e.len() });
            }
            let e: Exponent = e.iter().map(|&x| x as u16).collect();
            self.add_term(e, c);
        }
        Ok(self)
    }

    // ----- accessors ----------------------------------------------------

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn is_unit_weighted(&self) -> bool {
        self.weights.iter().all(|&w| w == 1)
    }

    pub fn caps(&self) -> &[u32] {
        &self.caps
    }

    pub fn total_cap(&self) -> u32 {
        self.total
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_index(&self, var: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v == var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &C)> {
        self.terms.iter()
    }

    /// Weighted degree of an exponent.
    pub fn wdeg(&self, e: &[u16]) -> u32 {
        e.iter().zip(self.weights.iter()).map(|(&x, &w)| x as u32 * w as u32).sum()
    }

    /// Whether the coefficient of `e` is determined by this jet.
    pub fn is_known(&self, e: &[u16]) -> bool {
        e.len() == self.caps.len()
            && e.iter().zip(&self.caps).all(|(&x, &c)| x as u32 <= c)
            && self.wdeg(e) <= self.total
    }

    pub fn coeff(&self, e: &[u16]) -> C {
        self.terms.get(e).cloned().unwrap_or_else(C::zero)
    }

    pub fn coeff_u32(&self, e: &[u32]) -> C {
        let e: Exponent = e.iter().map(|&x| x as u16).collect();
        self.coeff(&e)
    }

    pub fn constant_term(&self) -> C {
        self.coeff(&Exponent::from_elem(0, self.vars.len()))
    }

    /// Lowest weighted degree of a stored term, `None` for the zero jet.
    pub fn order(&self) -> Option<u32> {
        self.terms.keys().map(|e| self.wdeg(e)).min()
    }

    /// Lowest exponent of variable `i` among stored terms.
    pub fn order_in(&self, i: usize) -> Option<u32> {
        self.terms.keys().map(|e| e[i] as u32).min()
    }

    /// Largest exponent of variable `i` among stored terms.
    pub fn degree_in(&self, i: usize) -> u32 {
        self.terms.keys().map(|e| e[i] as u32).max().unwrap_or(0)
    }

    // ----- mutation helpers ---------------------------------------------

    fn insert(&mut self, e: Exponent, c: C) {
        if !c.is_zero() && self.is_known(&e) {
            self.terms.insert(e, c);
        }
    }

    /// Adds `c` to the coefficient of `e` (ignored outside the caps).
    pub fn add_term(&mut self, e: Exponent, c: C) {
        if c.is_zero() || !self.is_known(&e) {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                o.get_mut().add_assign(&c);
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn same_space(&self, other: &Self) -> bool {
        same_arc(&self.vars, &other.vars) && same_arc(&self.weights, &other.weights)
    }

    /// Errors unless both jets share variables and weights.
    pub fn check_same_space(&self, other: &Self) -> Result<()> {
        self.check_vars(other)
    }

    fn check_vars(&self, other: &Self) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            Err(Error::VariableMismatch(self.vars.to_vec(), other.vars.to_vec()))
        }
    }

    fn min_caps(&self, other: &Self) -> (Vec<u32>, u32) {
        let caps = self.caps.iter().zip(&other.caps).map(|(a, b)| *a.min(b)).collect();
        (caps, self.total.min(other.total))
    }

    /// Restricts the caps (never raises them).
    pub fn truncate(&self, caps: &[u32], total: u32) -> Self {
        let caps: Vec<u32> = self.caps.iter().zip(caps).map(|(a, b)| *a.min(b)).collect();
        let total = self.total.min(total);
        let mut out = self.blank(caps, total);
        for (e, c) in &self.terms {
            if out.is_known(e) {
                out.terms.insert(e.clone(), c.clone());
            }
        }
        out
    }

    pub fn truncate_total(&self, total: u32) -> Self {
        let caps = self.caps.clone();
        self.truncate(&caps, total)
    }

    /// Sets the caps to the given values. Only sound when the caller knows
    /// the newly covered region is identically zero (e.g. polynomial data).
    pub fn with_caps_unchecked(&self, caps: Vec<u32>, total: u32) -> Self {
        let mut out = self.blank(caps, total);
        for (e, c) in &self.terms {
            if out.is_known(e) {
                out.terms.insert(e.clone(), c.clone());
            }
        }
        out
    }

    // ----- ring operations ------------------------------------------------

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_vars(other)?;
        let (caps, total) = self.min_caps(other);
        let mut out = self.blank(caps, total);
        for (e, c) in &self.terms {
            out.insert(e.clone(), c.clone());
        }
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_coeffs(|c| c.neg())
    }

    pub fn scale(&self, k: &C) -> Self {
        if k.is_zero() {
            return self.zero_like();
        }
        self.map_coeffs(|c| c.mul(k))
    }

    pub fn scale_int(&self, k: i64) -> Self {
        self.scale(&C::from_int(k))
    }

    pub fn map_coeffs(&self, f: impl Fn(&C) -> C) -> Self {
        let mut out = self.zero_like();
        for (e, c) in &self.terms {
            out.insert(e.clone(), f(c));
        }
        out
    }

    /// Coefficientwise complex conjugation.
    pub fn conj(&self) -> Self {
        self.map_coeffs(|c| c.conj())
    }

    /// Product. The total cap uses the valuation of each factor: an unknown
    /// tail of `a` (degree > T_a) times `b` has degree > T_a + ord(b).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_vars(other)?;
        let (caps, _) = self.min_caps(other);
        let total = (self.total + other.valuation()).min(other.total + self.valuation());
        let mut out = self.blank(caps, total);
        mul_into(&mut out, &self.terms, &other.terms);
        Ok(out)
    }

    /// Lower bound for the weighted order of the full series.
    pub fn valuation(&self) -> u32 {
        self.order().unwrap_or(self.total + 1).min(self.total + 1)
    }

    /// Equality on the common known region.
    pub fn agrees_with(&self, other: &Self) -> bool {
        if !self.same_space(other) {
            return false;
        }
        let (caps, total) = self.min_caps(other);
        self.truncate(&caps, total).terms == other.truncate(&caps, total).terms
    }

    pub fn pow(&self, n: u32) -> Result<Self> {
        let mut acc = self.one_like();
        for _ in 0..n {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    // ----- monomial shifts and calculus ----------------------------------

    /// Multiplies by `var_i^k`; the known region grows accordingly.
    pub fn shift_up(&self, i: usize, k: u32) -> Self {
        if k == 0 {
            return self.clone();
        }
        let mut caps = self.caps.clone();
        caps[i] += k;
        let mut out = self.blank(caps, self.total + k * self.weights[i] as u32);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            e2[i] += k as u16;
            out.terms.insert(e2, c.clone());
        }
        out
    }

    /// Exact division by `var_i^k`; fails if a stored term is not divisible.
    pub fn shift_down(&self, i: usize, k: u32) -> Result<Self> {
        if k == 0 {
            return Ok(self.clone());
        }
        let dw = k * self.weights[i] as u32;
        if self.caps[i] < k || self.total < dw {
            return Err(Error::Truncation(format!(
                "cannot divide by {}^{k}: cap is {}",
                self.vars[i], self.caps[i]
            )));
        }
        let mut caps = self.caps.clone();
        caps[i] -= k;
        let mut out = self.blank(caps, self.total - dw);
        for (e, c) in &self.terms {
            if (e[i] as u32) < k {
                return Err(Error::NotDivisible {
                    var: self.vars[i].clone(),
                    power: k,
                    monomial: e.iter().map(|&x| x as u32).collect(),
                });
            }
            let mut e2 = e.clone();
            e2[i] -= k as u16;
            out.terms.insert(e2, c.clone());
        }
        Ok(out)
    }

    /// Formal partial derivative in variable `i`; the cap in `i` drops by one
    /// and the total cap by the weight of `i`. A jet with cap 0 in `i` has
    /// derivative known nowhere, which is reported as an empty zero jet with
    /// total cap 0 and cap 0 in `i`; callers needing information check caps.
    pub fn derive_at(&self, i: usize) -> Self {
        let w = self.weights[i] as u32;
        let mut caps = self.caps.clone();
        caps[i] = caps[i].saturating_sub(1);
        let mut out = self.blank(caps, self.total.saturating_sub(w));
        if self.caps[i] == 0 || self.total < w {
            out.caps[i] = 0;
            out.total = 0;
            return out;
        }
        for (e, c) in &self.terms {
            let k = e[i];
            if k == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[i] -= 1;
            out.insert(e2, c.scale_int(k as i64));
        }
        out
    }

    pub fn derive(&self, var: &str) -> Result<Self> {
        Ok(self.derive_at(self.var_index(var)?))
    }

    /// Terms whose exponent in variable `i` equals `k`, with that exponent
    /// reset to zero. The result has cap zero in `i`.
    pub fn slice(&self, i: usize, k: u32) -> Self {
        let mut caps = self.caps.clone();
        caps[i] = 0;
        let total = self.total.saturating_sub(k * self.weights[i] as u32);
        let mut out = self.blank(caps, total);
        for (e, c) in &self.terms {
            if e[i] as u32 == k {
                let mut e2 = e.clone();
                e2[i] = 0;
                out.insert(e2, c.clone());
            }
        }
        out
    }

    /// Keeps only the terms with `e_i <= k` and lowers the cap accordingly.
    pub fn cap_var(&self, i: usize, k: u32) -> Self {
        let mut caps = self.caps.clone();
        caps[i] = caps[i].min(k);
        let total = self.total;
        self.truncate(&caps, total)
    }

    /// Rewrites the jet over another unit-weighted variable list. `map[i]` is
    /// the index in `new_vars` of old variable `i`.
    pub fn embed(&self, new_vars: &Vars, map: &[usize]) -> Result<Self> {
        self.embed_weighted(new_vars, &unit_weights(new_vars.len()), map)
    }

    /// Rewrites the jet over another variable list with the given weights.
    /// New variables that receive no old one are bounded by the total cap
    /// (or get cap 0 if their weight is 0). When a weight decreases, the
    /// total cap shrinks so that the new box stays inside the old one.
    pub fn embed_weighted(&self, new_vars: &Vars, new_weights: &Weights, map: &[usize]) -> Result<Self> {
        if map.len() != self.vars.len() {
            return Err(Error::Arity { expected: self.vars.len(), got: map.len() });
        }
        let n = new_vars.len();
        let mut caps: Vec<u32> = new_weights.iter().map(|&w| if w == 0 { 0 } else { UNCAPPED }).collect();
        let mut loss = 0u32;
        for (i, &j) in map.iter().enumerate() {
            if j >= n {
                return Err(Error::Invalid(format!("embedding index {j} out of range")));
            }
            caps[j] = self.caps[i];
            let (wo, wn) = (self.weights[i] as u32, new_weights[j] as u32);
            if wn < wo {
                if self.caps[i] >= UNCAPPED {
                    return Err(Error::Truncation(format!("variable {} needs a cap to lower its weight", self.vars[i])));
                }
                loss += (wo - wn) * self.caps[i];
            }
        }
        if loss > self.total {
            return Err(Error::Truncation("weight change leaves nothing known".into()));
        }
        let mut out = Jet::zero_weighted(new_vars.clone(), new_weights.clone(), caps, self.total - loss);
        for (e, c) in &self.terms {
            let mut e2 = Exponent::from_elem(0, n);
            for (i, &j) in map.iter().enumerate() {
                e2[j] += e[i];
            }
            out.add_term(e2, c.clone());
        }
        Ok(out)
    }

    /// Embeds by variable name; every old variable must exist in `new_vars`.
    pub fn embed_by_name(&self, new_vars: &Vars) -> Result<Self> {
        let map = self
            .vars
            .iter()
            .map(|v| {
                new_vars
                    .iter()
                    .position(|w| w == v)
                    .ok_or_else(|| Error::UnknownVariable(v.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        self.embed(new_vars, &map)
    }

    // ----- composition ----------------------------------------------------

    /// Substitutes `inner[i]` for the `i`-th variable of `self`. All inner
    /// jets share one variable space, which becomes the result's. Inner jets
    /// must have zero constant term.
    pub fn compose(&self, inner: &[Jet<C>]) -> Result<Self> {
        if inner.len() != self.vars.len() {
            return Err(Error::Arity { expected: self.vars.len(), got: inner.len() });
        }
        let Some(first) = inner.first() else {
            return Err(Error::Arity { expected: 1, got: 0 });
        };
        for (i, g) in inner.iter().enumerate() {
            first.check_vars(g)?;
            if !g.constant_term().is_zero() {
                return Err(Error::NonzeroConstant(self.vars[i].clone()));
            }
        }
        let (caps, total) = self.composition_caps(inner)?;
        let inner: Vec<Jet<C>> = inner.iter().map(|g| g.truncate(&caps, total)).collect();
        let proto = first.blank(caps, total);
        let entries: Vec<(&Exponent, &C)> = self.terms.iter().collect();
        Ok(horner(&proto, &inner, &entries, 0))
    }

    /// Caps of `self ∘ inner` that are guaranteed exact.
    ///
    /// Every monomial of the outer series outside its box maps to a sum of
    /// monomials that must fall outside the result box. Three lower bounds are
    /// used for such an image: its weighted degree, its plain degree in the
    /// weight-0 variables plus weighted degree, and each per-variable degree.
    fn composition_caps(&self, inner: &[Jet<C>]) -> Result<(Vec<u32>, u32)> {
        let sp = &inner[0];
        let n = sp.vars.len();
        let mut caps: Vec<u32> = (0..n).map(|v| inner.iter().map(|g| g.caps[v]).min().unwrap()).collect();
        let mut total = inner.iter().map(|g| g.total).min().unwrap();
        let zero_w: Vec<usize> = (0..n).filter(|&v| sp.weights[v] == 0).collect();
        let nu = |g: &Jet<C>| -> Option<u32> {
            g.terms.keys().map(|e| g.wdeg(e) + zero_w.iter().map(|&v| e[v] as u32).sum::<u32>()).min()
        };
        struct Bound {
            w: u32,
            nu: u32,
            val: Vec<u32>,
        }
        let bounds: Vec<Option<Bound>> = inner
            .iter()
            .map(|g| {
                g.order().map(|w| Bound {
                    w,
                    nu: nu(g).unwrap(),
                    val: (0..n).map(|v| g.order_in(v).unwrap()).collect(),
                })
            })
            .collect();
        let guard = |count: u32, b: &Bound, caps: &mut Vec<u32>, total: &mut u32| -> Result<()> {
            if (0..n).any(|v| count.saturating_mul(b.val[v]) > caps[v]) {
                return Ok(());
            }
            let wl = count.saturating_mul(b.w);
            if wl > *total {
                return Ok(());
            }
            let slack: u32 = zero_w.iter().map(|&v| caps[v]).fold(0u32, |a, c| a.saturating_add(c));
            let nl = count.saturating_mul(b.nu);
            if nl > total.saturating_add(slack) {
                return Ok(());
            }
            let t1 = wl.checked_sub(1);
            let t2 = nl.checked_sub(1).and_then(|x| x.checked_sub(slack));
            match t1.max(t2) {
                Some(t) => {
                    *total = t;
                    Ok(())
                }
                None => Err(Error::Truncation("composition leaves nothing known".into())),
            }
        };
        for (i, b) in bounds.iter().enumerate() {
            let Some(b) = b else { continue };
            let wi = self.weights[i] as u32;
            if wi > 0 && wi * (self.caps[i] + 1) > self.total {
                continue; // subsumed by the weighted-degree bound below
            }
            guard(self.caps[i] + 1, b, &mut caps, &mut total)?;
        }
        let live: Vec<&Bound> = bounds
            .iter()
            .enumerate()
            .filter(|(i, b)| b.is_some() && self.weights[*i] > 0)
            .map(|(_, b)| b.as_ref().unwrap())
            .collect();
        if !live.is_empty() {
            let wmax = self.weights.iter().copied().max().unwrap_or(1).max(1) as u32;
            // Σ w_i e_i > T forces Σ e_i > T / w_max
            let count = self.total / wmax + 1;
            let b = Bound {
                w: live.iter().map(|b| b.w).min().unwrap(),
                nu: live.iter().map(|b| b.nu).min().unwrap(),
                val: (0..n).map(|v| live.iter().map(|b| b.val[v]).min().unwrap()).collect(),
            };
            guard(count, &b, &mut caps, &mut total)?;
        }
        Ok((caps, total))
    }

    /// Iteration budget for series that terminate by truncation.
    fn series_budget(&self) -> u32 {
        let zero_caps: u32 = (0..self.nvars())
            .filter(|&v| self.weights[v] == 0)
            .map(|v| self.caps[v])
            .fold(0u32, |a, c| a.saturating_add(c));
        self.total.saturating_add(zero_caps).saturating_add(2)
    }

    // ----- units, exp and log --------------------------------------------

    /// Multiplicative inverse; the constant term must be a unit.
    pub fn reciprocal(&self) -> Result<Self> {
        let c0 = self.constant_term();
        let c0_inv = c0.inv().map_err(|_| Error::NonUnit("constant term is not invertible".into()))?;
        // a = c0 (1 + r)
        let r = self.scale(&c0_inv).sub(&self.one_like())?;
        let minus_r = r.neg();
        let mut term = self.one_like();
        let mut sum = self.one_like();
        for _ in 0..self.series_budget() {
            term = term.mul(&minus_r)?.truncate(&self.caps, self.total);
            if term.is_zero() {
                let out = sum.scale(&c0_inv).truncate(&self.caps, self.total);
                return Ok(out);
            }
            sum = sum.add(&term)?;
        }
        Err(Error::Truncation("reciprocal does not terminate: uncapped weight-0 variable".into()))
    }

    /// `self / other` for a unit `other`.
    pub fn div(&self, other: &Self) -> Result<Self> {
        self.mul(&other.reciprocal()?)
    }

    /// Exponential of a jet without constant term.
    pub fn exp(&self) -> Result<Self> {
        if !self.constant_term().is_zero() {
            return Err(Error::Precondition("exp needs a zero constant term".into()));
        }
        let mut term = self.one_like();
        let mut sum = self.one_like();
        for k in 1..=self.series_budget() as i64 {
            term = term.mul(self)?.truncate(&self.caps, self.total).scale(&C::from_ratio(1, k)?);
            if term.is_zero() {
                return Ok(sum);
            }
            sum = sum.add(&term)?;
        }
        Err(Error::Truncation("exp does not terminate: uncapped weight-0 variable".into()))
    }

    /// Logarithm of a jet with constant term one.
    pub fn log(&self) -> Result<Self> {
        if !self.constant_term().is_one() {
            return Err(Error::Precondition("log needs constant term 1".into()));
        }
        let a = self.sub(&self.one_like())?;
        let mut power = self.one_like();
        let mut sum = self.zero_like();
        for k in 1..=self.series_budget() as i64 {
            power = power.mul(&a)?.truncate(&self.caps, self.total);
            if power.is_zero() {
                return Ok(sum);
            }
            let sign = if k % 2 == 1 { 1 } else { -1 };
            sum = sum.add(&power.scale(&C::from_ratio(sign, k)?))?;
        }
        Err(Error::Truncation("log does not terminate: uncapped weight-0 variable".into()))
    }
}

fn unit(n: usize, i: usize) -> Exponent {
    let mut e = Exponent::from_elem(0, n);
    e[i] = 1;
    e
}

fn mul_into<C: Coeff>(out: &mut Jet<C>, a: &BTreeMap<Exponent, C>, b: &BTreeMap<Exponent, C>) {
    let caps = out.caps.clone();
    let total = out.total;
    let fits = |e: &[u16]| e.iter().zip(&caps).all(|(&x, &c)| x as u32 <= c);
    let mut bs: Vec<(&Exponent, u32, &C)> =
        b.iter().filter(|(e, _)| fits(e)).map(|(e, c)| (e, out.wdeg(e), c)).collect();
    bs.sort_by_key(|t| t.1);
    let mut acc: HashMap<Exponent, C> = HashMap::new();
    for (ea, ca) in a.iter().filter(|(e, _)| fits(e)) {
        let da = out.wdeg(ea);
        if da > total {
            continue;
        }
        for (eb, db, cb) in &bs {
            if da + db > total {
                break;
            }
            let mut e = ea.clone();
            let mut ok = true;
            for k in 0..e.len() {
                e[k] += eb[k];
                if e[k] as u32 > caps[k] {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            let p = ca.mul(cb);
            match acc.get_mut(&e) {
                Some(v) => v.add_assign(&p),
                None => {
                    acc.insert(e, p);
                }
            }
        }
    }
    out.terms = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
}

/// Multivariate Horner evaluation of the outer entries (sorted
/// lexicographically) starting at variable `level`.
fn horner<C: Coeff>(proto: &Jet<C>, inner: &[Jet<C>], entries: &[(&Exponent, &C)], level: usize) -> Jet<C> {
    if entries.is_empty() {
        return proto.zero_like();
    }
    if level == inner.len() {
        let mut acc = proto.zero_like();
        for (_, c) in entries.iter() {
            acc.add_term(Exponent::from_elem(0, proto.vars.len()), (*c).clone());
        }
        return acc;
    }
    let mut groups: BTreeMap<u16, Vec<(&Exponent, &C)>> = BTreeMap::new();
    for &(e, c) in entries {
        groups.entry(e[level]).or_default().push((e, c));
    }
    let max = *groups.keys().next_back().unwrap();
    let mut acc = proto.zero_like();
    for k in (0..=max).rev() {
        if k != max {
            acc = acc.mul(&inner[level]).expect("shared variables").truncate(&proto.caps, proto.total);
        }
        if let Some(g) = groups.get(&k) {
            let part = horner(proto, inner, g, level + 1);
            acc = acc.add(&part).expect("shared variables");
        }
    }
    acc
}

/// Solves `y = G(x, y)` for `y(x)` where `G` lives on the variables
/// `x_1..x_k, y_1..y_n` (the last `n` variables are the unknowns).
///
/// The linear part `A = ∂G/∂y(0,0)` is factored out so that the iteration
/// `y ← (I − A)^{-1} (G(x, y) − A y)` raises the order of the error by at
/// least one per step. The returned jets satisfy the equation exactly
/// within their caps.
pub fn solve_fixed_point<C: Coeff>(g: &[Jet<C>], n: usize) -> Result<Vec<Jet<C>>> {
    if g.len() != n || n == 0 {
        return Err(Error::Arity { expected: n, got: g.len() });
    }
    let nv = g[0].nvars();
    if nv < n {
        return Err(Error::Arity { expected: n, got: nv });
    }
    for gi in g {
        g[0].check_vars(gi)?;
        if !gi.constant_term().is_zero() {
            return Err(Error::Precondition("fixed-point map must vanish at the origin".into()));
        }
    }
    let k = nv - n;
    let mut a = vec![vec![C::zero(); n]; n];
    for (r, gi) in g.iter().enumerate() {
        for (c, entry) in a[r].iter_mut().enumerate() {
            *entry = gi.coeff(&unit(nv, k + c));
        }
    }
    let mut g_adj: Vec<Jet<C>> = g.to_vec();
    if a.iter().flatten().any(|c| !c.is_zero()) {
        let mut i_minus_a = vec![vec![C::zero(); n]; n];
        for r in 0..n {
            for c in 0..n {
                let id = if r == c { C::one() } else { C::zero() };
                i_minus_a[r][c] = id.sub(&a[r][c]);
            }
        }
        let inv = crate::linalg::inverse(&i_minus_a).map_err(|_| Error::SingularLinearPart)?;
        let ys: Vec<Jet<C>> = (0..n).map(|c| g[0].var_at(k + c)).collect();
        let mut reduced = Vec::with_capacity(n);
        for r in 0..n {
            let mut t = g[r].clone();
            for c in 0..n {
                if !a[r][c].is_zero() {
                    t = t.sub(&ys[c].scale(&a[r][c]))?;
                }
            }
            reduced.push(t);
        }
        g_adj = (0..n)
            .map(|r| {
                let mut t = reduced[0].zero_like();
                for c in 0..n {
                    if !inv[r][c].is_zero() {
                        t = t.add(&reduced[c].scale(&inv[r][c]))?;
                    }
                }
                Ok(t)
            })
            .collect::<Result<_>>()?;
    }
    let x_vars: Vars = g[0].vars[..k].to_vec().into();
    let x_weights: Weights = g[0].weights[..k].to_vec().into();
    let x_caps = g[0].caps[..k].to_vec();
    let x_total = g.iter().map(|gi| gi.total).min().unwrap();
    let proto = Jet::<C>::zero_weighted(x_vars, x_weights, x_caps, x_total);
    let xs: Vec<Jet<C>> = (0..k).map(|i| proto.var_at(i)).collect();
    let mut y: Vec<Jet<C>> = vec![proto.zero_like(); n];
    let max_iter = proto.series_budget() as usize + 1;
    for _ in 0..max_iter {
        let mut args = xs.clone();
        args.extend(y.iter().cloned());
        let next: Vec<Jet<C>> = g_adj.iter().map(|gi| gi.compose(&args)).collect::<Result<_>>()?;
        let next: Vec<Jet<C>> = next.iter().map(|j| j.truncate(&proto.caps, proto.total)).collect();
        if next.iter().zip(&y).all(|(a, b)| a.terms == b.terms) {
            let tot = next.iter().map(|j| j.total).min().unwrap();
            let caps = (0..k).map(|v| next.iter().map(|j| j.caps[v]).min().unwrap()).collect::<Vec<_>>();
            return Ok(next.iter().map(|j| j.truncate(&caps, tot)).collect());
        }
        y = next;
    }
    let mut args = xs.clone();
    args.extend(y.iter().cloned());
    let mut order = u32::MAX;
    for (gi, yi) in g_adj.iter().zip(&y) {
        let d = gi.compose(&args)?.sub(yi)?;
        if let Some(o) = d.order() {
            order = order.min(o);
        }
    }
    Err(Error::NoConvergence { order })
}

impl<C: Coeff> fmt::Debug for Jet<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet[{}; caps {:?}, total {}", self.vars.join(","), self.caps, self.total)?;
        if !self.is_unit_weighted() {
            write!(f, ", weights {:?}", &self.weights[..])?;
        }
        write!(f, "]{{")?;
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:?}: {}", e.as_slice(), c)?;
        }
        write!(f, "}}")
    }
}

impl<C: Coeff> fmt::Display for Jet<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for (v, &k) in self.vars.iter().zip(e.iter()) {
                match k {
                    0 => {}
                    1 => write!(f, "*{v}")?,
                    _ => write!(f, "*{v}^{k}")?,
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::GaussRat;
    use proptest::prelude::*;

    type J = Jet<GaussRat>;

    fn q(n: i64) -> GaussRat {
        GaussRat::from_int(n)
    }

    fn xy(total: u32) -> J {
        J::zero_total(vars(&["x", "y"]), total)
    }

    fn poly(total: u32, terms: &[((u32, u32), i64)]) -> J {
        J::from_terms(
            vars(&["x", "y"]),
            vec![total, total],
            total,
            terms.iter().map(|&((a, b), c)| (vec![a, b], q(c))),
        )
        .unwrap()
    }

    #[test]
    fn product_respects_caps() {
        let p = poly(3, &[((1, 0), 1), ((0, 1), 1)]);
        let sq = p.mul(&p).unwrap();
        assert_eq!(sq.coeff_u32(&[1, 1]), q(2));
        // p is exact to degree 3 with order 1, so p^4 is exact to degree 6
        let fourth = sq.mul(&p).unwrap().mul(&p).unwrap();
        assert_eq!(fourth.total_cap(), 6);
        assert_eq!(fourth.coeff_u32(&[2, 2]), q(6));
        let truncated = J::from_terms(vars(&["x"]), vec![UNCAPPED], 3, vec![(vec![3], q(1))]).unwrap();
        assert!(truncated.mul(&truncated.one_like()).unwrap().mul(&truncated.var_at(0)).unwrap().coeff_u32(&[4]) == q(1));
    }

    #[test]
    fn catalan_fixed_point() {
        // y = x + y^2 has the Catalan numbers as coefficients
        let g = J::from_terms(vars(&["x", "y"]), vec![8, 8], 8, vec![(vec![1, 0], q(1)), (vec![0, 2], q(1))]).unwrap();
        let y = solve_fixed_point(&[g], 1).unwrap().remove(0);
        let cat = [0, 1, 1, 2, 5, 14, 42, 132, 429];
        for (k, &c) in cat.iter().enumerate() {
            assert_eq!(y.coeff_u32(&[k as u32]), q(c), "order {k}");
        }
    }

    #[test]
    fn fixed_point_with_linear_part() {
        // y = x + 3y + y^2  <=>  y = -(x + y^2)/2
        let g = J::from_terms(
            vars(&["x", "y"]),
            vec![6, 6],
            6,
            vec![(vec![1, 0], q(1)), (vec![0, 1], q(3)), (vec![0, 2], q(1))],
        )
        .unwrap();
        let y = solve_fixed_point(&[g.clone()], 1).unwrap().remove(0);
        let x = y.var_at(0);
        let back = g.compose(&[x, y.clone()]).unwrap();
        assert!(back.agrees_with(&y));
        let singular = J::from_terms(vars(&["x", "y"]), vec![4, 4], 4, vec![(vec![1, 0], q(1)), (vec![0, 1], q(1))]).unwrap();
        assert_eq!(solve_fixed_point(&[singular], 1), Err(Error::SingularLinearPart));
    }

    #[test]
    fn exp_log_roundtrip() {
        let a = poly(6, &[((1, 0), 2), ((1, 1), -1), ((0, 3), 5)]);
        let e = a.exp().unwrap();
        assert_eq!(e.log().unwrap(), a);
        let r = e.reciprocal().unwrap();
        assert!(r.agrees_with(&a.neg().exp().unwrap()));
    }

    #[test]
    fn shift_down_detects_remainder() {
        let a = poly(5, &[((2, 0), 1), ((1, 2), 1)]);
        assert!(a.shift_down(0, 1).is_ok());
        assert!(matches!(a.shift_down(0, 2), Err(Error::NotDivisible { .. })));
        assert_eq!(a.shift_up(1, 2).shift_down(1, 2).unwrap(), a);
    }

    #[test]
    fn compose_rejects_constants() {
        let f = poly(3, &[((1, 1), 1)]);
        let bad = xy(3).one_like();
        assert!(matches!(f.compose(&[bad, xy(3).var_at(1)]), Err(Error::NonzeroConstant(_))));
    }

    #[test]
    fn derivative_of_product() {
        let a = poly(6, &[((1, 0), 2), ((2, 1), -1), ((0, 3), 5)]);
        let b = poly(6, &[((0, 0), 1), ((1, 1), 3)]);
        let lhs = a.mul(&b).unwrap().derive_at(0);
        let rhs = a.derive_at(0).mul(&b).unwrap().add(&a.mul(&b.derive_at(0)).unwrap()).unwrap();
        assert!(lhs.agrees_with(&rhs));
    }

    fn arb_jet(total: u32) -> impl Strategy<Value = J> {
        proptest::collection::vec(((0u32..=total, 0u32..=total), -4i64..=4), 0..8).prop_map(move |ts| {
            J::from_terms(vars(&["x", "y"]), vec![total, total], total, ts.into_iter().map(|((a, b), c)| (vec![a, b], q(c))))
                .unwrap()
        })
    }

    fn without_constant(j: J) -> J {
        j.sub(&j.constant_like(j.constant_term())).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn ring_laws(a in arb_jet(5), b in arb_jet(5), c in arb_jet(5)) {
            prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
            prop_assert!(a.mul(&b).unwrap().total_cap() >= 5);
            prop_assert!(a.mul(&b).unwrap().mul(&c).unwrap().agrees_with(&a.mul(&b.mul(&c).unwrap()).unwrap()));
            let lhs = a.mul(&b.add(&c).unwrap()).unwrap();
            let rhs = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
            prop_assert!(lhs.agrees_with(&rhs));
        }

        #[test]
        fn composition_is_a_homomorphism(a in arb_jet(4), b in arb_jet(4), u in arb_jet(4), v in arb_jet(4)) {
            let (u, v) = (without_constant(u), without_constant(v));
            let args = [u, v];
            let lhs = a.mul(&b).unwrap().compose(&args).unwrap();
            let rhs = a.compose(&args).unwrap().mul(&b.compose(&args).unwrap()).unwrap();
            // both sides are exact inside the smaller of the two boxes
            let t = lhs.total_cap().min(rhs.total_cap());
            prop_assert_eq!(lhs.truncate_total(t), rhs.truncate_total(t));
        }

        #[test]
        fn composition_caps_are_sound(a in arb_jet(6), u in arb_jet(6), v in arb_jet(6)) {
            // composing lower jets never contradicts the higher one
            let (u, v) = (without_constant(u), without_constant(v));
            let hi = a.compose(&[u.clone(), v.clone()]).unwrap();
            let lo = a.truncate_total(3).compose(&[u.truncate_total(4), v.truncate_total(4)]).unwrap();
            prop_assert!(hi.agrees_with(&lo));
            prop_assert!(lo.total_cap() <= hi.total_cap());
        }

        #[test]
        fn reciprocal_is_inverse(a in arb_jet(5), c in 1i64..5) {
            let u = without_constant(a).add(&xy(5).constant_like(q(c))).unwrap();
            let r = u.reciprocal().unwrap();
            prop_assert!(r.mul(&u).unwrap().agrees_with(&u.one_like()));
        }
    }
}
