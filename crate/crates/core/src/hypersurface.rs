//! Infinite-type real hypersurfaces in C² in admissible coordinates.
//!
//! All three forms store one "bracket" series in three variables, truncated
//! by total degree:
//!
//! * real: `v = ½ uᵐ ψ(z, z̄, u)`, bracket `ψ` in `(z, zb, u)`;
//! * complex: `w = τ + i τᵐ θ(z, χ, τ)`, bracket `θ` in `(z, chi, tau)`;
//! * exponential: `w = τ exp(i τ^{m−1} φ(z, χ, τ))`, bracket `φ`.
//!
//! In each case the bracket is `ε z χ + Σ_{k,l≥2} c_kl(t) zᵏ χˡ`.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed};

use crate::error::{Error, Result};
use crate::jet::{solve_fixed_point, vars, Exponent, Jet, Vars, UNCAPPED};
use crate::scalar::{Coeff, GaussRat};

/// Default total-degree cap: the smallest that decides every condition of
/// the Fuchsian-type test.
pub fn default_cap(m: u32) -> u32 {
    2 * m + 4
}

pub fn real_vars() -> Vars {
    vars(&["z", "zb", "u"])
}

pub fn complex_vars() -> Vars {
    vars(&["z", "chi", "tau"])
}

fn e3(k: u32, l: u32, j: u32) -> Exponent {
    Exponent::from_slice(&[k as u16, l as u16, j as u16])
}

/// Which of the three normal forms a bracket describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormKind {
    Real,
    Complex,
    Exponential,
}

impl FormKind {
    pub fn name(self) -> &'static str {
        match self {
            FormKind::Real => "real",
            FormKind::Complex => "complex",
            FormKind::Exponential => "exponential",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(FormKind::Real),
            "complex" => Ok(FormKind::Complex),
            "exponential" => Ok(FormKind::Exponential),
            _ => Err(Error::Parse(format!("unknown form `{s}`"))),
        }
    }

    fn vars(self) -> Vars {
        match self {
            FormKind::Real => real_vars(),
            _ => complex_vars(),
        }
    }
}

/// A hypersurface in one of the normal forms.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypersurface<C: Coeff> {
    pub kind: FormKind,
    pub m: u32,
    pub epsilon: i8,
    bracket: Jet<C>,
}

pub type RealAdmissibleForm<C> = Hypersurface<C>;
pub type ComplexDefiningForm<C> = Hypersurface<C>;
pub type ExponentialForm<C> = Hypersurface<C>;

impl<C: Coeff> Hypersurface<C> {
    /// Builds a form from its bracket series; the `ε z χ` term is added if
    /// missing and checked otherwise.
    pub fn from_bracket(kind: FormKind, m: u32, epsilon: i8, bracket: Jet<C>) -> Result<Self> {
        if m == 0 {
            return Err(Error::Invalid("nonminimality order must be positive".into()));
        }
        if epsilon != 1 && epsilon != -1 {
            return Err(Error::Invalid(format!("epsilon must be ±1, got {epsilon}")));
        }
        if bracket.vars()[..] != kind.vars()[..] {
            return Err(Error::VariableMismatch(bracket.vars().to_vec(), kind.vars().to_vec()));
        }
        if bracket.total_cap() < 2 {
            return Err(Error::Truncation("bracket must be known to total degree 2".into()));
        }
        let mut b = bracket.with_caps_unchecked(vec![UNCAPPED; 3], bracket.total_cap());
        let lead = b.coeff(&e3(1, 1, 0));
        let eps = C::from_int(epsilon as i64);
        if lead.is_zero() {
            b.add_term(e3(1, 1, 0), eps);
        } else if lead != eps {
            return Err(Error::Invalid(format!("|z|^2 coefficient is {lead}, expected {epsilon}")));
        }
        Ok(Hypersurface { kind, m, epsilon, bracket: b })
    }

    /// The model hypersurface (all higher coefficients zero).
    pub fn model(kind: FormKind, m: u32, epsilon: i8, cap: u32) -> Result<Self> {
        Self::from_bracket(kind, m, epsilon, Jet::zero_total(kind.vars(), cap))
    }

    /// Real form from its coefficient series `h_kl(u)` given as lists of
    /// `(u-degree, coefficient)`.
    pub fn from_h<I>(m: u32, epsilon: i8, cap: u32, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((u32, u32), Vec<(u32, C)>)>,
    {
        let mut b = Jet::zero_total(real_vars(), cap);
        for ((k, l), series) in entries {
            for (j, c) in series {
                b.add_term(e3(k, l, j), c);
            }
        }
        Self::from_bracket(FormKind::Real, m, epsilon, b)
    }

    pub fn bracket(&self) -> &Jet<C> {
        &self.bracket
    }

    pub fn cap(&self) -> u32 {
        self.bracket.total_cap()
    }

    pub fn nonminimality_order(&self) -> u32 {
        self.m
    }

    /// Coefficient series of `zᵏ χˡ` as a jet in one variable (`u` or `tau`).
    pub fn coefficient(&self, k: u32, l: u32) -> Jet<C> {
        let name = if self.kind == FormKind::Real { "u" } else { "tau" };
        let total = self.cap().saturating_sub(k + l);
        let mut out = Jet::zero_total(vars(&[name]), total);
        if k + l > self.cap() {
            return out;
        }
        for (e, c) in self.bracket.terms() {
            if e[0] as u32 == k && e[1] as u32 == l {
                out.add_term(Exponent::from_slice(&[e[2]]), c.clone());
            }
        }
        out
    }

    /// The full series `h_kl` indexed by `(k, l)`, excluding `(1, 1)`.
    pub fn coefficients(&self) -> BTreeMap<(u32, u32), Jet<C>> {
        let mut keys: Vec<(u32, u32)> = self.bracket.terms().map(|(e, _)| (e[0] as u32, e[1] as u32)).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter().filter(|&kl| kl != (1, 1)).map(|(k, l)| ((k, l), self.coefficient(k, l))).collect()
    }

    /// Re-truncates the bracket to a lower total degree.
    pub fn truncate(&self, cap: u32) -> Self {
        Hypersurface { bracket: self.bracket.truncate_total(cap), ..self.clone() }
    }

    // ----- validation -------------------------------------------------------

    /// Every violated structural condition; empty means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.m == 0 {
            out.push("nonminimality order m must be positive".into());
        }
        if self.epsilon != 1 && self.epsilon != -1 {
            out.push(format!("epsilon = {} is not ±1", self.epsilon));
        } else if self.epsilon == -1 && self.m % 2 == 0 {
            out.push("epsilon = -1 with even m is not the canonical normalization".into());
        }
        let eps = C::from_int(self.epsilon as i64);
        for (e, c) in self.bracket.terms() {
            let (k, l, j) = (e[0], e[1], e[2]);
            if (k, l) == (1, 1) {
                if j != 0 {
                    out.push(format!("|z|^2 coefficient depends on the transversal variable (degree {j})"));
                } else if *c != eps {
                    out.push(format!("|z|^2 coefficient is {c}, not epsilon"));
                }
            } else if k == 0 || l == 0 {
                out.push(format!("normality: term z^{k} zb^{l} with a vanishing index"));
            } else if k == 1 || l == 1 {
                out.push(format!("admissible shape: forbidden entry h{k}{l}"));
            }
        }
        if self.bracket.coeff(&e3(1, 1, 0)).is_zero() {
            out.push("generic point: |z|^2 coefficient vanishes".into());
        }
        if self.kind == FormKind::Real {
            for (e, c) in self.bracket.terms() {
                let mirror = self.bracket.coeff(&e3(e[1] as u32, e[0] as u32, e[2] as u32));
                if e[0] < e[1] && mirror != c.conj() {
                    out.push(format!("reality: h{}{} is not the conjugate of h{}{} at degree {}", e[0], e[1], e[1], e[0], e[2]));
                }
                if e[0] == e[1] && *c != c.conj() {
                    out.push(format!("reality: h{}{} is not real at degree {}", e[0], e[1], e[2]));
                }
            }
            // mirrored entries with no partner stored
            for (e, _) in self.bracket.terms() {
                if e[0] > e[1] && self.bracket.coeff(&e3(e[1] as u32, e[0] as u32, e[2] as u32)).is_zero() {
                    out.push(format!("reality: h{}{} is not the conjugate of h{}{} at degree {}", e[1], e[0], e[0], e[1], e[2]));
                }
            }
        }
        out.dedup();
        out
    }

    // ----- dilations ----------------------------------------------------------

    /// Applies `z ↦ λz, w ↦ μw` (μ real) subject to `μ^{1−m} = ε|λ|²`.
    pub fn apply_dilation(&self, lambda: &C, mu: &C) -> Result<Self> {
        let norm = lambda.mul(&lambda.conj());
        let lhs = int_pow(mu, 1 - self.m as i64)?;
        let rhs = norm.scale_int(self.epsilon as i64);
        if lhs != rhs {
            return Err(Error::Precondition(format!("dilation constraint mu^(1-m) = eps|lambda|^2 fails: {lhs} vs {rhs}")));
        }
        self.dilate(lambda, mu)
    }

    /// Substitution `z = λz', w = μw'` without checking the constraint; the
    /// new `|z|²` coefficient must come out as ±1.
    pub fn dilate(&self, lambda: &C, mu: &C) -> Result<Self> {
        if mu.conj() != *mu || mu.is_zero() {
            return Err(Error::Precondition("mu must be real and nonzero".into()));
        }
        let lc = lambda.conj();
        let factor = int_pow(mu, self.m as i64 - 1)?;
        let pl: Vec<C> = powers(lambda, self.cap());
        let plc: Vec<C> = powers(&lc, self.cap());
        let pm: Vec<C> = powers(mu, self.cap());
        let mut b = self.bracket.zero_like();
        for (e, c) in self.bracket.terms() {
            let coef = c.mul(&factor).mul(&pl[e[0] as usize]).mul(&plc[e[1] as usize]).mul(&pm[e[2] as usize]);
            b.add_term(e.clone(), coef);
        }
        let lead = b.coeff(&e3(1, 1, 0));
        let eps = if lead.is_one() {
            1
        } else if lead.neg().is_one() {
            -1
        } else {
            return Err(Error::Invalid(format!("dilated |z|^2 coefficient {lead} is not ±1")));
        };
        if self.kind != FormKind::Real {
            // θ and φ pick up no extra sign: the same substitution applies
        }
        Ok(Hypersurface { kind: self.kind, m: self.m, epsilon: eps, bracket: b })
    }

    // ----- conversions ------------------------------------------------------

    /// Solves `(w − τ)/(2i) = F(z, χ, (w + τ)/2)` for `w`.
    pub fn real_to_complex(&self) -> Result<Self> {
        self.expect(FormKind::Real)?;
        let m = self.m;
        let t = self.cap();
        // unknown y = w − τ, equation y = i (τ + y/2)^m ψ(z, χ, τ + y/2)
        let gv = vars(&["z", "chi", "tau", "y"]);
        let proto = Jet::<C>::zero_total(gv.clone(), t + m + 2);
        let half = C::from_ratio(1, 2)?;
        let s = proto.var_at(2).add(&proto.var_at(3).scale(&half))?;
        let psi = self.bracket.compose(&[proto.var_at(0), proto.var_at(1), s.clone()])?;
        let g = s.pow(m)?.mul(&psi)?.scale(&C::imag_unit());
        let y = solve_fixed_point(&[g], 1)?.remove(0);
        // θ = y / (i τ^m)
        let theta = y.shift_down(2, m)?.scale(&C::imag_unit().neg());
        let theta = theta.truncate_total(t);
        let out = Self::from_bracket(FormKind::Complex, m, self.epsilon, retag(&theta, complex_vars())?)?;
        Ok(out)
    }

    /// Inverse of [`Self::real_to_complex`].
    pub fn complex_to_real(&self) -> Result<Self> {
        self.expect(FormKind::Complex)?;
        let m = self.m;
        let t = self.cap();
        // unknown y = τ − u, equation y = −(i/2)(u + y)^m θ(z, χ, u + y)
        let gv = vars(&["z", "zb", "u", "y"]);
        let proto = Jet::<C>::zero_total(gv, t + m + 2);
        let s = proto.var_at(2).add(&proto.var_at(3))?;
        let th = retag(&self.bracket, real_vars())?;
        let theta = th.compose(&[proto.var_at(0), proto.var_at(1), s.clone()])?;
        let coef = C::imag_unit().mul(&C::from_ratio(-1, 2)?);
        let g = s.pow(m)?.mul(&theta)?.scale(&coef);
        let y = solve_fixed_point(&[g], 1)?.remove(0);
        // ψ = 2F/u^m with F = ½ (u + y)^m θ(z, χ, u + y)
        let p3 = Jet::<C>::zero_total(real_vars(), y.total_cap());
        let s3 = p3.var_at(2).add(&y)?;
        let f2 = s3.pow(m)?.mul(&th.compose(&[p3.var_at(0), p3.var_at(1), s3.clone()])?)?;
        let psi = f2.shift_down(2, m)?.truncate_total(t);
        Self::from_bracket(FormKind::Real, m, self.epsilon, psi)
    }

    /// `φ = log(1 + iτ^{m−1}θ) / (iτ^{m−1})`.
    pub fn to_exponential(&self) -> Result<Self> {
        self.expect(FormKind::Complex)?;
        let m = self.m;
        let x = self.bracket.shift_up(2, m - 1).scale(&C::imag_unit());
        let l = x.add(&x.one_like())?.log()?;
        let phi = l.shift_down(2, m - 1)?.scale(&C::imag_unit().neg()).truncate_total(self.cap());
        Self::from_bracket(FormKind::Exponential, m, self.epsilon, phi)
    }

    /// `θ = (exp(iτ^{m−1}φ) − 1) / (iτ^{m−1})`.
    pub fn from_exponential(&self) -> Result<Self> {
        self.expect(FormKind::Exponential)?;
        let m = self.m;
        let x = self.bracket.shift_up(2, m - 1).scale(&C::imag_unit());
        let e = x.exp()?.sub(&x.one_like())?;
        let theta = e.shift_down(2, m - 1)?.scale(&C::imag_unit().neg()).truncate_total(self.cap());
        Self::from_bracket(FormKind::Complex, m, self.epsilon, theta)
    }

    /// Converts to any other form.
    pub fn convert(&self, kind: FormKind) -> Result<Self> {
        use FormKind::*;
        Ok(match (self.kind, kind) {
            (a, b) if a == b => self.clone(),
            (Real, Complex) => self.real_to_complex()?,
            (Real, Exponential) => self.real_to_complex()?.to_exponential()?,
            (Complex, Real) => self.complex_to_real()?,
            (Complex, Exponential) => self.to_exponential()?,
            (Exponential, Complex) => self.from_exponential()?,
            (Exponential, Real) => self.from_exponential()?.complex_to_real()?,
            _ => unreachable!(),
        })
    }

    /// Residual of `Θ(z, χ, Θ̄(χ, z, w)) − w` for a complex form.
    pub fn reality_residual(&self) -> Result<Jet<C>> {
        self.expect(FormKind::Complex)?;
        let m = self.m;
        let t = self.cap() + m;
        let cv = vars(&["z", "chi", "w"]);
        let p = Jet::<C>::zero_total(cv.clone(), t + 1);
        // full Θ(z, χ, τ) = τ + i τ^m θ
        let full = |b: &Jet<C>| -> Result<Jet<C>> {
            let x = b.shift_up(2, m).scale(&C::imag_unit());
            x.add(&b.var_at(2).with_caps_unchecked(x.caps().to_vec(), x.total_cap()))
        };
        let theta_full = retag(&full(&self.bracket)?, cv.clone())?;
        // conjugate Θ̄(χ, z, w): conjugate coefficients and swap z, χ
        let swapped = self.bracket.conj().embed(&complex_vars(), &[1, 0, 2])?;
        let bar = Jet::<C>::from_terms(cv.clone(), vec![UNCAPPED; 3], swapped.total_cap(), swapped.terms().map(|(e, c)| (e.iter().map(|&x| x as u32).collect(), c.clone())))?;
        let x = bar.shift_up(2, m).scale(&C::imag_unit().neg());
        let bar_full = x.add(&p.var_at(2).truncate_total(x.total_cap()))?;
        let back = theta_full.compose(&[p.var_at(0), p.var_at(1), bar_full])?;
        back.sub(&p.var_at(2))
    }

    fn expect(&self, kind: FormKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Precondition(format!("expected a {} form, got {}", kind.name(), self.kind.name())))
        }
    }

    // ----- Fuchsian type ----------------------------------------------------

    /// The order conditions of the Fuchsian-type definition for hypersurfaces.
    pub fn check_fuchsian(&self) -> FuchsReport {
        let m = self.m as i64;
        let mut conds = vec![(2, 2, m - 1), (2, 3, 2 * m - 2), (3, 3, 2 * m - 2)];
        for l in 4..=(2 * m + 1) {
            conds.push((2, l, 2 * m - l + 2));
        }
        for s in 7..=(2 * m + 4) {
            for k in 3..=(s - 3) {
                conds.push((k, s - k, 2 * m - s + 5));
            }
        }
        let mut rep = FuchsReport::new(!C::is_exact());
        for (k, l, bound) in conds {
            let series = self.coefficient(k as u32, l as u32);
            rep.record(&format!("h{k}{l}"), &series, bound, 0);
        }
        rep.finish()
    }
}

/// Rational raw ingestion: `v = F(z, z̄, u)` with `F` given in normal
/// coordinates. The result is an admissible real form with `ε = ±1`.
pub fn from_raw(f: &Jet<GaussRat>) -> Result<Hypersurface<GaussRat>> {
    if f.vars()[..] != real_vars()[..] {
        return Err(Error::VariableMismatch(f.vars().to_vec(), real_vars().to_vec()));
    }
    let m = f.order_in(2).ok_or(Error::LeviFlat)?;
    if m == 0 {
        return Err(Error::Invalid("F must vanish on u = 0 for an infinite-type point".into()));
    }
    let psi = f.shift_down(2, m)?.scale(&GaussRat::from_int(2));
    let c = psi.coeff(&e3(1, 1, 0));
    if c.is_zero() {
        return Err(Error::ExceptionalPoint);
    }
    if !c.is_real() {
        return Err(Error::Invalid("the |z|^2 coefficient of a real hypersurface is real".into()));
    }
    let a = c.re.abs();
    // find rational λ > 0, μ > 0 with μ^{m−1} λ² |c| = 1
    let (lambda, mu) = rational_normalizer(&a, m)
        .ok_or_else(|| Error::Invalid(format!("normalizing |z|^2 coefficient {c} needs an irrational dilation")))?;
    let psi = psi.with_caps_unchecked(vec![UNCAPPED; 3], psi.total_cap());
    let eps = if c.re.is_positive() { 1 } else { -1 };
    let raw = Hypersurface { kind: FormKind::Real, m, epsilon: eps, bracket: psi };
    let out = raw.dilate(&GaussRat::real(lambda), &GaussRat::real(mu))?;
    if out.epsilon == -1 && m % 2 == 0 {
        // even m: μ = −1 flips the sign, since μ^{m−1} = −1
        return out.dilate(&GaussRat::from_int(1), &GaussRat::from_int(-1));
    }
    Ok(out)
}

type Q = num_rational::BigRational;

fn rational_sqrt(q: &Q) -> Option<Q> {
    if q.is_negative() {
        return None;
    }
    let n = q.numer().sqrt();
    let d = q.denom().sqrt();
    (&n * &n == *q.numer() && &d * &d == *q.denom()).then(|| Q::new(n, d))
}

fn rational_root(q: &Q, k: u32) -> Option<Q> {
    if k == 0 {
        return None;
    }
    let n = q.numer().nth_root(k);
    let d = q.denom().nth_root(k);
    (num_traits::pow(n.clone(), k as usize) == *q.numer() && num_traits::pow(d.clone(), k as usize) == *q.denom())
        .then(|| Q::new(n, d))
}

fn rational_normalizer(a: &Q, m: u32) -> Option<(Q, Q)> {
    // prefer λ = 1 when an exact root exists, otherwise μ = a^j
    if m == 1 {
        return rational_sqrt(&(Q::one() / a)).map(|l| (l, Q::one()));
    }
    if let Some(mu) = rational_root(&(Q::one() / a), m - 1) {
        return Some((Q::one(), mu));
    }
    for j in [1i32, -1, 2, -2, 3, -3] {
        let mu = num_traits::pow::pow(a.clone(), j.unsigned_abs() as usize);
        let mu = if j < 0 { Q::one() / mu } else { mu };
        let denom = num_traits::pow(mu.clone(), (m - 1) as usize) * a;
        if let Some(l) = rational_sqrt(&(Q::one() / denom)) {
            return Some((l, mu));
        }
    }
    None
}

fn int_pow<C: Coeff>(x: &C, k: i64) -> Result<C> {
    let base = if k < 0 { x.inv()? } else { x.clone() };
    let mut acc = C::one();
    for _ in 0..k.unsigned_abs() {
        acc = acc.mul(&base);
    }
    Ok(acc)
}

fn powers<C: Coeff>(x: &C, n: u32) -> Vec<C> {
    let mut v = vec![C::one()];
    for i in 0..n as usize {
        let next = v[i].mul(x);
        v.push(next);
    }
    v
}

/// Same coefficients, different variable names.
pub fn retag<C: Coeff>(j: &Jet<C>, names: Vars) -> Result<Jet<C>> {
    Jet::from_terms(names, j.caps().to_vec(), j.total_cap(), j.terms().map(|(e, c)| (e.iter().map(|&x| x as u32).collect(), c.clone())))
}

// ----- Fuchsian verdicts (shared with the ODE checker) ------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Fuchsian,
    NotFuchsian,
    Undecidable,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Fuchsian => 0,
            Status::NotFuchsian => 1,
            Status::Undecidable => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuchsReport {
    pub status: Status,
    /// Failed inequalities, e.g. `ord h22 = 0 < 1`.
    pub violations: Vec<String>,
    /// Conditions the truncation cannot decide.
    pub undecidable: Vec<String>,
    /// Whether zero tests were tolerance-based.
    pub numeric: bool,
}

impl FuchsReport {
    pub fn new(numeric: bool) -> Self {
        FuchsReport { status: Status::Fuchsian, violations: Vec::new(), undecidable: Vec::new(), numeric }
    }

    /// Checks `ord series ≥ bound` where `series` is a one-variable jet and
    /// `var_index` names its variable.
    pub fn record<C: Coeff>(&mut self, name: &str, series: &Jet<C>, bound: i64, var_index: usize) {
        if bound <= 0 {
            return;
        }
        let ord = series.order_in(var_index);
        match ord {
            Some(o) if (o as i64) < bound => {
                self.violations.push(format!("ord {name} = {o} < {bound}"));
            }
            _ => {
                let known = series.total_cap().min(series.caps()[var_index]) as i64;
                if known < bound - 1 {
                    self.undecidable.push(format!("ord {name} >= {bound} (known to degree {known})"));
                }
            }
        }
    }

    pub fn finish(mut self) -> Self {
        self.status = if !self.violations.is_empty() {
            Status::NotFuchsian
        } else if !self.undecidable.is_empty() {
            Status::Undecidable
        } else {
            Status::Fuchsian
        };
        self
    }

    pub fn is_fuchsian(&self) -> bool {
        self.status == Status::Fuchsian
    }
}

impl fmt::Display for FuchsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word = match self.status {
            Status::Fuchsian => "fuchsian",
            Status::NotFuchsian => "not fuchsian",
            Status::Undecidable => "undecidable",
        };
        write!(f, "{word}")?;
        if self.numeric {
            write!(f, " (numeric)")?;
        }
        for v in &self.violations {
            write!(f, "\n  violated: {v}")?;
        }
        for v in &self.undecidable {
            write!(f, "\n  undecidable: {v}")?;
        }
        Ok(())
    }
}

/// Lowest `u`-order of `h_kl` allowed by the Fuchsian-type conditions.
pub fn fuchsian_bound(m: u32, k: u32, l: u32) -> u32 {
    let (k, l) = (k.min(l) as i64, k.max(l) as i64);
    let m = m as i64;
    let b = match (k, l) {
        (2, 2) => m - 1,
        (2, 3) | (3, 3) => 2 * m - 2,
        (2, _) => 2 * m - l + 2,
        _ => 2 * m - k - l + 5,
    };
    b.max(0) as u32
}

/// A random real form of Fuchsian type: each admissible `uʲzᵏz̄ˡ` with
/// `2 ≤ k ≤ l` appears with probability `density`, mirrored to keep the
/// bracket real. Coefficients are Gaussian rationals with small parts.
pub fn random_fuchsian<R: rand::Rng>(m: u32, epsilon: i8, cap: u32, density: f64, rng: &mut R) -> Result<Hypersurface<GaussRat>> {
    let mut b = Jet::zero_total(real_vars(), cap);
    for k in 2..=cap {
        for l in k..=cap {
            for j in fuchsian_bound(m, k, l)..=cap {
                if k + l + j > cap || !rng.gen_bool(density) {
                    continue;
                }
                let c = crate::transform::random_gauss_rat(rng, k == l);
                if k != l {
                    b.add_term(e3(l, k, j), c.conj());
                }
                b.add_term(e3(k, l, j), c);
            }
        }
    }
    Hypersurface::from_bracket(FormKind::Real, m, epsilon, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    type G = GaussRat;

    fn q(n: i64) -> G {
        G::from_int(n)
    }

    fn real(m: u32, entries: &[((u32, u32), &[(u32, i64)])]) -> Hypersurface<G> {
        Hypersurface::from_h(
            m,
            1,
            default_cap(m),
            entries.iter().map(|(kl, s)| (*kl, s.iter().map(|&(j, c)| (j, q(c))).collect())),
        )
        .unwrap()
    }

    #[test]
    fn model_is_valid_and_fuchsian() {
        let h = real(2, &[]);
        assert!(h.validate().is_empty());
        assert!(h.check_fuchsian().is_fuchsian());
    }

    #[test]
    fn reality_and_shape_violations() {
        let h = real(2, &[((2, 3), &[(1, 1)]), ((3, 2), &[(1, 2)])]);
        assert!(h.validate().iter().any(|v| v.starts_with("reality")));
        let h = real(2, &[((1, 2), &[(0, 1)]), ((2, 1), &[(0, 1)])]);
        assert!(h.validate().iter().any(|v| v.contains("h12")));
    }

    #[test]
    fn h22_boundary() {
        assert!(real(2, &[((2, 2), &[(1, 1)])]).check_fuchsian().is_fuchsian());
        let rep = real(2, &[((2, 2), &[(0, 1)])]).check_fuchsian();
        assert_eq!(rep.status, Status::NotFuchsian);
        assert_eq!(rep.violations, vec!["ord h22 = 0 < 1".to_string()]);
    }

    #[test]
    fn low_truncation_is_undecidable() {
        let h = real(3, &[]).truncate(5);
        assert_eq!(h.check_fuchsian().status, Status::Undecidable);
    }

    #[test]
    fn model_m1_complex_form() {
        // F = ½u zz̄ gives w = τ + iτ zχ + O(z²χ²)
        let h = real(1, &[]);
        let c = h.real_to_complex().unwrap();
        let b = c.bracket();
        assert_eq!(b.coeff(&e3(1, 1, 0)), q(1));
        // y = iτzχ/(1 − izχ/2), so θ = zχ + (i/2) z²χ² + ...
        assert_eq!(b.coeff(&e3(2, 2, 0)), G::new(q(0).re, num_rational::BigRational::new(1.into(), 2.into())));
    }

    #[test]
    fn conversions_round_trip() {
        for m in 1..=3 {
            let h = real(m, &[((2, 2), &[(m - 1, 1), (m, 3)]), ((2, 3), &[(2 * m - 2, 2)]), ((3, 2), &[(2 * m - 2, 2)])]);
            let c = h.real_to_complex().unwrap();
            assert_eq!(c.complex_to_real().unwrap(), h);
            let e = c.to_exponential().unwrap();
            assert_eq!(e.from_exponential().unwrap(), c);
            assert!(c.reality_residual().unwrap().is_zero());
        }
    }

    #[test]
    fn dilation_of_model() {
        // m=3, λ=2, μ=1/2
        let h = real(3, &[]);
        let mu = G::rat(1, 2);
        let d = h.apply_dilation(&q(2), &mu).unwrap();
        assert_eq!(d, h);
        assert!(h.apply_dilation(&q(2), &q(1)).is_err());
    }

    #[test]
    fn raw_ingestion() {
        let f = |terms: Vec<(Vec<u32>, i64)>| {
            Jet::from_terms(real_vars(), vec![UNCAPPED; 3], 10, terms.into_iter().map(|(e, c)| (e, G::rat(c, 2)))).unwrap()
        };
        let h = from_raw(&f(vec![(vec![1, 1, 2], 1)])).unwrap();
        assert_eq!(h.m, 2);
        let h = from_raw(&f(vec![(vec![1, 1, 1], 1), (vec![2, 2, 1], 1)])).unwrap();
        assert_eq!(h.m, 1);
        let h = from_raw(&f(vec![(vec![1, 1, 3], 4), (vec![2, 2, 4], 2)])).unwrap();
        assert_eq!((h.m, h.epsilon), (3, 1));
        assert!(h.validate().is_empty());
        assert!(matches!(from_raw(&f(vec![(vec![1, 1, 3], 8)])), Err(Error::Invalid(_))));
        let h = from_raw(&f(vec![(vec![1, 1, 2], -6)])).unwrap();
        assert_eq!((h.m, h.epsilon), (2, 1));
        assert_eq!(from_raw(&f(vec![(vec![2, 2, 1], 1)])), Err(Error::ExceptionalPoint));
        assert_eq!(from_raw(&f(vec![])), Err(Error::LeviFlat));
    }
}
