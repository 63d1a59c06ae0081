//! Coefficient rings for jets.
//!
//! Three rings are provided: exact Gaussian rationals ([`GaussRat`]), double
//! precision complex numbers ([`C64`]) and polynomials in finitely many formal
//! parameters with Gaussian rational coefficients ([`ParamPoly`]).

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Absolute threshold below which a float coefficient is treated as zero.
pub const TAU_ZERO: f64 = 1e-12;

/// Commutative coefficient ring used by [`crate::jet::Jet`].
pub trait Coeff: Clone + PartialEq + fmt::Debug + fmt::Display + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Multiplicative inverse; fails on zero and on non-units.
    fn inv(&self) -> Result<Self>;
    fn from_int(n: i64) -> Self;
    /// The imaginary unit `i`.
    fn imag_unit() -> Self;
    /// Complex conjugation (formal parameters are treated as real).
    fn conj(&self) -> Self;
    /// `true` when zero tests are exact.
    fn is_exact() -> bool;
    /// Numeric value, when the element is a constant.
    fn to_c64(&self) -> Option<Complex64>;

    fn add_assign(&mut self, rhs: &Self) {
        *self = Coeff::add(self, rhs);
    }

    fn from_ratio(n: i64, d: i64) -> Result<Self> {
        Ok(Self::from_int(n).mul(&Self::from_int(d).inv()?))
    }

    fn is_one(&self) -> bool {
        *self == Self::one()
    }

    fn scale_int(&self, k: i64) -> Self {
        self.mul(&Self::from_int(k))
    }
}

// ---------------------------------------------------------------------------
// Gaussian rationals
// ---------------------------------------------------------------------------

/// Exact complex number `re + i·im` with arbitrary precision rational parts.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct GaussRat {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRat {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        GaussRat { re, im }
    }

    pub fn real(re: BigRational) -> Self {
        GaussRat { re, im: BigRational::zero() }
    }

    /// `(rn/rd) + i (im_n/im_d)`; panics on a zero denominator.
    pub fn from_parts(rn: i64, rd: i64, im_n: i64, im_d: i64) -> Self {
        GaussRat {
            re: BigRational::new(rn.into(), rd.into()),
            im: BigRational::new(im_n.into(), im_d.into()),
        }
    }

    pub fn rat(n: i64, d: i64) -> Self {
        Self::from_parts(n, d, 0, 1)
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    /// `|z|²`, always a non-negative rational.
    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    /// Integer power (negative exponents invert).
    pub fn powi(&self, e: i64) -> Result<Self> {
        let mut base = if e < 0 { self.inv()? } else { self.clone() };
        let mut n = e.unsigned_abs();
        let mut acc = GaussRat::one();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            n >>= 1;
        }
        Ok(acc)
    }

    /// Parses `"p/q"` or `"p"`.
    pub fn parse_rational(s: &str) -> Result<BigRational> {
        let s = s.trim();
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let n: BigInt = n
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational numerator `{s}`")))?;
        let d: BigInt = d
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational denominator `{s}`")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{s}`")));
        }
        Ok(BigRational::new(n, d))
    }

    pub fn fmt_rational(r: &BigRational) -> String {
        if r.denom().is_one() {
            r.numer().to_string()
        } else {
            format!("{}/{}", r.numer(), r.denom())
        }
    }
}

impl Coeff for GaussRat {
    fn zero() -> Self {
        GaussRat { re: BigRational::zero(), im: BigRational::zero() }
    }
    fn one() -> Self {
        GaussRat { re: BigRational::one(), im: BigRational::zero() }
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn add(&self, rhs: &Self) -> Self {
        GaussRat { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
    fn sub(&self, rhs: &Self) -> Self {
        GaussRat { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
    fn mul(&self, rhs: &Self) -> Self {
        if self.im.is_zero() && rhs.im.is_zero() {
            return GaussRat::real(&self.re * &rhs.re);
        }
        GaussRat {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
    fn neg(&self) -> Self {
        GaussRat { re: -&self.re, im: -&self.im }
    }
    fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let n = self.norm_sqr();
        Ok(GaussRat { re: &self.re / &n, im: -&self.im / &n })
    }
    fn from_int(n: i64) -> Self {
        GaussRat::real(BigRational::from_integer(n.into()))
    }
    fn imag_unit() -> Self {
        GaussRat { re: BigRational::zero(), im: BigRational::one() }
    }
    fn conj(&self) -> Self {
        GaussRat { re: self.re.clone(), im: -&self.im }
    }
    fn is_exact() -> bool {
        true
    }
    fn to_c64(&self) -> Option<Complex64> {
        Some(Complex64::new(self.re.to_f64()?, self.im.to_f64()?))
    }
    fn add_assign(&mut self, rhs: &Self) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl fmt::Display for GaussRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "\"{}\"", Self::fmt_rational(&self.re))
        } else {
            write!(
                f,
                "[\"{}\",\"{}\"]",
                Self::fmt_rational(&self.re),
                Self::fmt_rational(&self.im)
            )
        }
    }
}

// ---------------------------------------------------------------------------
// Floating point complex numbers
// ---------------------------------------------------------------------------

/// Double precision complex coefficient; zero tests use [`TAU_ZERO`].
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct C64(pub Complex64);

impl C64 {
    pub fn new(re: f64, im: f64) -> Self {
        C64(Complex64::new(re, im))
    }
}

impl Coeff for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.0.norm() <= TAU_ZERO
    }
    fn add(&self, rhs: &Self) -> Self {
        C64(self.0 + rhs.0)
    }
    fn sub(&self, rhs: &Self) -> Self {
        C64(self.0 - rhs.0)
    }
    fn mul(&self, rhs: &Self) -> Self {
        C64(self.0 * rhs.0)
    }
    fn neg(&self) -> Self {
        C64(-self.0)
    }
    fn inv(&self) -> Result<Self> {
        if self.0.norm() == 0.0 {
            return Err(Error::DivisionByZero);
        }
        Ok(C64(self.0.inv()))
    }
    fn from_int(n: i64) -> Self {
        C64::new(n as f64, 0.0)
    }
    fn imag_unit() -> Self {
        C64::new(0.0, 1.0)
    }
    fn conj(&self) -> Self {
        C64(self.0.conj())
    }
    fn is_exact() -> bool {
        false
    }
    fn to_c64(&self) -> Option<Complex64> {
        Some(self.0)
    }
}

impl fmt::Display for C64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.im == 0.0 {
            write!(f, "\"{:e}\"", self.0.re)
        } else {
            write!(f, "[\"{:e}\",\"{:e}\"]", self.0.re, self.0.im)
        }
    }
}

// ---------------------------------------------------------------------------
// Polynomials in formal parameters
// ---------------------------------------------------------------------------

/// Sparse polynomial in named formal parameters with Gaussian rational
/// coefficients. Parameters are real for the purpose of [`Coeff::conj`].
#[derive(Clone, PartialEq, Debug, Default)]
pub struct ParamPoly {
    // monomial: sorted (parameter index, exponent) pairs
    terms: BTreeMap<Vec<(u32, u32)>, GaussRat>,
}

impl ParamPoly {
    pub fn constant(c: GaussRat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Vec::new(), c);
        }
        ParamPoly { terms }
    }

    /// The formal parameter with index `p`.
    pub fn param(p: u32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![(p, 1)], GaussRat::one());
        ParamPoly { terms }
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[(u32, u32)], &GaussRat)> {
        self.terms.iter().map(|(m, c)| (m.as_slice(), c))
    }

    /// Degree in parameter `p`.
    pub fn degree_in(&self, p: u32) -> u32 {
        self.terms
            .keys()
            .filter_map(|m| m.iter().find(|(q, _)| *q == p).map(|(_, e)| *e))
            .max()
            .unwrap_or(0)
    }

    pub fn constant_term(&self) -> GaussRat {
        self.terms.get(&Vec::new()).cloned().unwrap_or_else(GaussRat::zero)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_empty())
    }

    /// Substitutes values for every parameter.
    pub fn evaluate(&self, values: &dyn Fn(u32) -> GaussRat) -> GaussRat {
        let mut acc = GaussRat::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for &(p, e) in m {
                let v = values(p);
                for _ in 0..e {
                    t = t.mul(&v);
                }
            }
            acc.add_assign(&t);
        }
        acc
    }

    fn mul_monomials(a: &[(u32, u32)], b: &[(u32, u32)]) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        out
    }

    fn insert(&mut self, m: Vec<(u32, u32)>, c: GaussRat) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                if !c.is_zero() {
                    v.insert(c);
                }
            }
            Entry::Occupied(mut o) => {
                o.get_mut().add_assign(&c);
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }
}

impl Coeff for ParamPoly {
    fn zero() -> Self {
        ParamPoly::default()
    }
    fn one() -> Self {
        ParamPoly::constant(GaussRat::one())
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn add(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(rhs);
        out
    }
    fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }
    fn mul(&self, rhs: &Self) -> Self {
        let mut out = ParamPoly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.insert(Self::mul_monomials(ma, mb), ca.mul(cb));
            }
        }
        out
    }
    fn neg(&self) -> Self {
        ParamPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.neg())).collect(),
        }
    }
    fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if !self.is_constant() {
            return Err(Error::NonUnit("non-constant parameter polynomial".into()));
        }
        Ok(ParamPoly::constant(self.constant_term().inv()?))
    }
    fn from_int(n: i64) -> Self {
        ParamPoly::constant(GaussRat::from_int(n))
    }
    fn imag_unit() -> Self {
        ParamPoly::constant(GaussRat::imag_unit())
    }
    fn conj(&self) -> Self {
        ParamPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.conj())).collect(),
        }
    }
    fn is_exact() -> bool {
        true
    }
    fn to_c64(&self) -> Option<Complex64> {
        if self.is_constant() {
            self.constant_term().to_c64()
        } else {
            None
        }
    }
    fn add_assign(&mut self, rhs: &Self) {
        for (m, c) in &rhs.terms {
            self.insert(m.clone(), c.clone());
        }
    }
}

impl fmt::Display for ParamPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (p, e) in m {
                if *e == 1 {
                    write!(f, "*t{p}")?;
                } else {
                    write!(f, "*t{p}^{e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Sign of a nonzero rational as `±1`.
pub fn rational_sign(r: &BigRational) -> i64 {
    if r.is_negative() {
        -1
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_arithmetic_is_exact() {
        let a = GaussRat::from_parts(1, 3, 2, 5);
        let b = GaussRat::from_parts(-7, 2, 1, 1);
        let prod = a.mul(&b);
        assert_eq!(prod.div_check(&b), a);
        let i = GaussRat::imag_unit();
        assert_eq!(i.mul(&i), GaussRat::from_int(-1));
    }

    impl GaussRat {
        fn div_check(&self, d: &Self) -> Self {
            self.mul(&d.inv().unwrap())
        }
    }

    #[test]
    fn division_by_zero_is_rejected() {
        assert!(GaussRat::zero().inv().is_err());
        assert!(C64::zero().inv().is_err());
        assert!(ParamPoly::zero().inv().is_err());
        assert!(ParamPoly::param(0).inv().is_err());
    }

    #[test]
    fn param_poly_tracks_degree() {
        let t = ParamPoly::param(0);
        let s = ParamPoly::param(1);
        let p = t.mul(&t).mul(&s).add(&ParamPoly::one());
        assert_eq!(p.degree_in(0), 2);
        assert_eq!(p.degree_in(1), 1);
        assert_eq!(p.degree_in(7), 0);
        let v = p.evaluate(&|q| if q == 0 { GaussRat::from_int(3) } else { GaussRat::from_int(2) });
        assert_eq!(v, GaussRat::from_int(19));
        assert!(p.sub(&p).is_zero());
    }

    #[test]
    fn parse_and_format_rationals() {
        let r = GaussRat::parse_rational("-6/4").unwrap();
        assert_eq!(GaussRat::fmt_rational(&r), "-3/2");
        assert!(GaussRat::parse_rational("1/0").is_err());
        assert_eq!(format!("{}", GaussRat::from_parts(1, 2, -1, 3)), "[\"1/2\",\"-1/3\"]");
    }
}
