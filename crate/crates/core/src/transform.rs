//! Normalized maps, dilations and the push-forward of singular ODEs.
//!
//! A normalized map is `z ↦ z + f(z, w)`, `w ↦ w + w g₀(w) + wᵐ g(z, w)`.
//! Under such a map the defining function of `w″ = wᵐΦ(z, w, w′/wᵐ)`
//! transforms by
//!
//! ```text
//! J·Φ = A³Bᵐ Φ*(z + f, w + wg₀ + wᵐg, ζ̃) + I₀ + I₁ζ + I₂wᵐζ² + I₃w²ᵐζ³
//! ```
//!
//! with `A = 1 + f_z + wᵐf_wζ`, `B = 1 + g₀ + w^{m−1}g` and
//! `ζ̃ = (g_z + ζD)/(BᵐA)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::jet::{vars, Exponent, Jet, Vars, Weights, UNCAPPED};
use crate::ode::{ode_vars, Residual, SingularODE};
use crate::scalar::{Coeff, GaussRat};

pub fn map_vars() -> Vars {
    vars(&["z", "w"])
}

pub fn w_vars() -> Vars {
    vars(&["w"])
}

fn is_real<C: Coeff>(c: &C) -> bool {
    c.sub(&c.conj()).is_zero()
}

fn check_space<C: Coeff>(j: &Jet<C>, want: &Vars, what: &str) -> Result<()> {
    if j.vars()[..] == want[..] {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{what} must be a jet in ({})", want.join(","))))
    }
}

/// Cauchy data `(f₀, f₁, g₀, g₁)`: `f(0,w)`, `f_z(0,w)`, `g₀(w)`, `g_z(0,w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyData<C: Coeff> {
    pub f0: Jet<C>,
    pub f1: Jet<C>,
    pub g0: Jet<C>,
    pub g1: Jet<C>,
}

impl<C: Coeff> CauchyData<C> {
    pub fn zero(total: u32) -> Self {
        let z = Jet::zero_total(w_vars(), total);
        CauchyData { f0: z.clone(), f1: z.clone(), g0: z.clone(), g1: z }
    }

    pub fn as_array(&self) -> [&Jet<C>; 4] {
        [&self.f0, &self.f1, &self.g0, &self.g1]
    }

    /// Constraint violations on the data of a normalized map.
    pub fn validate(&self, m: u32) -> Vec<String> {
        let mut out = Vec::new();
        for (name, j) in [("f0", &self.f0), ("f1", &self.f1), ("g0", &self.g0), ("g1", &self.g1)] {
            if j.vars()[..] != w_vars()[..] {
                out.push(format!("{name} must be a series in w"));
            } else if !j.constant_term().is_zero() {
                out.push(format!("{name}(0) must vanish"));
            }
        }
        for l in 1..m {
            let c = self.g0.coeff_u32(&[l]);
            if !is_real(&c) {
                out.push(format!("g0 coefficient of w^{l} must be real, got {c}"));
            }
        }
        out
    }
}

/// `z ↦ z + f`, `w ↦ w + w g₀(w) + wᵐ g`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedMap<C: Coeff> {
    pub m: u32,
    f: Jet<C>,
    g0: Jet<C>,
    g: Jet<C>,
}

impl<C: Coeff> NormalizedMap<C> {
    pub fn new(m: u32, f: Jet<C>, g0: Jet<C>, g: Jet<C>) -> Result<Self> {
        let h = Self::new_unchecked(m, f, g0, g)?;
        let v = h.validate();
        if v.is_empty() {
            Ok(h)
        } else {
            Err(Error::Invalid(v.join("; ")))
        }
    }

    /// Checks only the variable lists.
    pub fn new_unchecked(m: u32, f: Jet<C>, g0: Jet<C>, g: Jet<C>) -> Result<Self> {
        if m == 0 {
            return Err(Error::Invalid("m must be positive".into()));
        }
        check_space(&f, &map_vars(), "f")?;
        check_space(&g, &map_vars(), "g")?;
        check_space(&g0, &w_vars(), "g0")?;
        Ok(NormalizedMap { m, f, g0, g })
    }

    pub fn identity(m: u32, total: u32) -> Self {
        let zw = Jet::zero_total(map_vars(), total);
        NormalizedMap { m, f: zw.clone(), g0: Jet::zero_total(w_vars(), total), g: zw }
    }

    pub fn f(&self) -> &Jet<C> {
        &self.f
    }

    pub fn g0(&self) -> &Jet<C> {
        &self.g0
    }

    pub fn g(&self) -> &Jet<C> {
        &self.g
    }

    pub fn is_identity(&self) -> bool {
        self.f.is_zero() && self.g0.is_zero() && self.g.is_zero()
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.f.constant_term().is_zero() {
            out.push("f(0,0) must vanish".to_string());
        }
        if !self.f.coeff_u32(&[1, 0]).is_zero() {
            out.push("f_z(0,0) must vanish".to_string());
        }
        if !self.g0.constant_term().is_zero() {
            out.push("g0(0) must vanish".to_string());
        }
        if let Some((e, _)) = self.g.terms().find(|(e, _)| e[0] == 0 || e[1] == 0) {
            out.push(format!("g must be O(zw): found z^{} w^{}", e[0], e[1]));
        }
        for l in 1..self.m {
            let c = self.g0.coeff_u32(&[l]);
            if !is_real(&c) {
                out.push(format!("g0 coefficient of w^{l} must be real, got {c}"));
            }
        }
        out
    }

    pub fn cauchy_data(&self) -> CauchyData<C> {
        let to_w = |j: &Jet<C>| z_slice(j, 0);
        CauchyData { f0: to_w(&self.f), f1: z_slice(&self.f, 1), g0: self.g0.clone(), g1: to_w(&self.g.derive_at(0)) }
    }

    /// `(z + f, w + w g₀ + wᵐ g)` as a general map.
    pub fn to_general(&self) -> Result<GeneralMap<C>> {
        let p = self.f.zero_like();
        let z = p.var_at(0);
        let w = p.var_at(1);
        let g0 = self.g0.embed(&map_vars(), &[1])?;
        let big_f = z.add(&self.f)?;
        let big_g = w.add(&g0.shift_up(1, 1))?.add(&self.g.shift_up(1, self.m))?;
        GeneralMap::new(big_f, big_g)
    }
}

/// Coefficient of `zᵏ` as a series in `w`.
fn z_slice<C: Coeff>(j: &Jet<C>, k: u32) -> Jet<C> {
    let total = j.total_cap().saturating_sub(k).min(j.caps()[1]);
    let mut out = Jet::zero_total(w_vars(), total);
    if k > j.caps()[0] || k > j.total_cap() {
        return Jet::zero(w_vars(), vec![0], 0);
    }
    for (e, c) in j.terms() {
        if e[0] as u32 == k {
            out.add_term(Exponent::from_slice(&[e[1]]), c.clone());
        }
    }
    out
}

/// `z ↦ λz`, `w ↦ μw` with `μ^{1−m} = ε|λ|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dilation<C: Coeff> {
    pub lambda: C,
    pub mu: C,
    pub m: u32,
    pub epsilon: i8,
}

impl<C: Coeff> Dilation<C> {
    pub fn new(lambda: C, mu: C, m: u32, epsilon: i8) -> Result<Self> {
        let d = Dilation { lambda, mu, m, epsilon };
        let v = d.validate();
        if v.is_empty() {
            Ok(d)
        } else {
            Err(Error::Invalid(v.join("; ")))
        }
    }

    pub fn identity(m: u32) -> Self {
        Dilation { lambda: C::one(), mu: C::one(), m, epsilon: 1 }
    }

    pub fn is_identity(&self) -> bool {
        self.lambda.is_one() && self.mu.is_one()
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lambda.is_zero() {
            out.push("lambda must be nonzero".to_string());
        }
        if self.mu.is_zero() {
            out.push("mu must be nonzero".to_string());
        }
        if !is_real(&self.mu) {
            out.push(format!("mu must be real, got {}", self.mu));
        }
        if self.epsilon != 1 && self.epsilon != -1 {
            out.push("epsilon must be 1 or -1".to_string());
        }
        if out.is_empty() && !scaling_holds(&self.lambda, &self.mu, self.m, self.epsilon) {
            out.push(format!("mu^(1-m) = {}|lambda|^2 fails", if self.epsilon < 0 { "-" } else { "" }));
        }
        out
    }

    /// Transforms `Φ` under `(z, w) ↦ (λz, μw)`:
    /// `Φ̂(z, w, ζ) = μ^{1−m}λ^{−2} Φ(z/λ, w/μ, λμ^{m−1}ζ)`.
    pub fn push_forward(&self, e: &SingularODE<C>) -> Result<SingularODE<C>> {
        let li = self.lambda.inv()?;
        let mi = self.mu.inv()?;
        let mut front = li.mul(&li);
        let mut zscale = self.lambda.clone();
        for _ in 1..self.m {
            front = front.mul(&mi);
            zscale = zscale.mul(&self.mu);
        }
        let phi = e.phi().map_coeffs(|c| c.clone());
        let mut out = phi.zero_like();
        for (ex, c) in phi.terms() {
            let mut v = c.mul(&front);
            v = v.mul(&powc(&li, ex[0] as u32)).mul(&powc(&mi, ex[1] as u32)).mul(&powc(&zscale, ex[2] as u32));
            out.add_term(ex.clone(), v);
        }
        SingularODE::new(e.m, out)
    }
}

fn powc<C: Coeff>(c: &C, n: u32) -> C {
    (0..n).fold(C::one(), |a, _| a.mul(c))
}

/// `ε μ^{m−1} |λ|² = 1`.
fn scaling_holds<C: Coeff>(lambda: &C, mu: &C, m: u32, eps: i8) -> bool {
    let lhs = powc(mu, m - 1).mul(lambda).mul(&lambda.conj()).scale_int(eps as i64);
    lhs.sub(&C::one()).is_zero()
}

/// A formal map `(F, G)` in `(z, w)` vanishing at the origin.
#[derive(Clone, Debug, PartialEq)]
#[allow(non_snake_case)]
pub struct GeneralMap<C: Coeff> {
    pub F: Jet<C>,
    pub G: Jet<C>,
}

/// Outcome of [`validate_map`].
#[derive(Clone, Debug, PartialEq)]
pub struct MapReport<C: Coeff> {
    pub lambda: C,
    pub mu: C,
    pub violations: Vec<String>,
}

impl<C: Coeff> MapReport<C> {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[allow(non_snake_case)]
impl<C: Coeff> GeneralMap<C> {
    pub fn new(F: Jet<C>, G: Jet<C>) -> Result<Self> {
        check_space(&F, &map_vars(), "F")?;
        check_space(&G, &map_vars(), "G")?;
        F.check_same_space(&G)?;
        Ok(GeneralMap { F, G })
    }

    pub fn identity(total: u32) -> Self {
        let p = Jet::zero_total(map_vars(), total);
        GeneralMap { F: p.var_at(0), G: p.var_at(1) }
    }

    pub fn dilation(d: &Dilation<C>, total: u32) -> Self {
        let p = Jet::zero_total(map_vars(), total);
        GeneralMap { F: p.var_at(0).scale(&d.lambda), G: p.var_at(1).scale(&d.mu) }
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &GeneralMap<C>) -> Result<Self> {
        let args = [inner.F.clone(), inner.G.clone()];
        GeneralMap::new(self.F.compose(&args)?, self.G.compose(&args)?)
    }

    pub fn agrees_with(&self, other: &GeneralMap<C>) -> bool {
        self.F.agrees_with(&other.F) && self.G.agrees_with(&other.G)
    }
}

/// Checks the constraints every map between two hypersurfaces of
/// nonminimality order `m` satisfies.
pub fn validate_map<C: Coeff>(h: &GeneralMap<C>, m: u32) -> MapReport<C> {
    let lambda = h.F.coeff_u32(&[1, 0]);
    let mu = h.G.coeff_u32(&[0, 1]);
    let mut v = Vec::new();
    if !h.F.constant_term().is_zero() || !h.G.constant_term().is_zero() {
        v.push("map must vanish at the origin".to_string());
    }
    if lambda.is_zero() {
        v.push("F_z(0,0) = lambda must be nonzero".to_string());
    }
    if mu.is_zero() {
        v.push("G_w(0,0) = mu must be nonzero".to_string());
    }
    if !is_real(&mu) {
        v.push(format!("mu = G_w(0,0) must be real, got {mu}"));
    }
    if let Some((e, _)) = h.G.terms().find(|(e, _)| e[1] == 0) {
        v.push(format!("G must be O(w): found z^{}", e[0]));
    }
    if let Some((e, _)) = h.G.terms().find(|(e, _)| e[0] > 0 && (e[1] as u32) < m + 1) {
        v.push(format!("G_z must be O(w^{}): found z^{} w^{} in G", m + 1, e[0], e[1]));
    }
    for l in 1..=m {
        let c = h.G.coeff_u32(&[0, l]);
        if !is_real(&c) {
            v.push(format!("G coefficient of w^{l} must be real, got {c}"));
        }
    }
    if !lambda.is_zero() && !mu.is_zero() && !scaling_holds(&lambda, &mu, m, 1) {
        v.push("mu^(1-m) = |lambda|^2 fails".to_string());
    }
    MapReport { lambda, mu, violations: v }
}

/// Splits `H = H₀ ∘ ψ` with `ψ(z, w) = (λz, μw)` and `H₀` normalized.
pub fn factor<C: Coeff>(h: &GeneralMap<C>, m: u32) -> Result<(NormalizedMap<C>, Dilation<C>)> {
    let rep = validate_map(h, m);
    if !rep.is_valid() {
        return Err(Error::Invalid(rep.violations.join("; ")));
    }
    let psi = Dilation::new(rep.lambda.clone(), rep.mu.clone(), m, 1)?;
    let p = h.F.zero_like();
    let inv = [p.var_at(0).scale(&rep.lambda.inv()?), p.var_at(1).scale(&rep.mu.inv()?)];
    let f0 = h.F.compose(&inv)?;
    let g0_full = h.G.compose(&inv)?;
    let f = f0.sub(&p.var_at(0))?;
    let edge = g0_full.truncate(&[0, UNCAPPED], UNCAPPED).with_caps_unchecked(vec![UNCAPPED, UNCAPPED], g0_full.total_cap());
    let g0 = z_slice(&edge.sub(&p.var_at(1))?, 0).shift_down(0, 1)?;
    let g = g0_full.sub(&edge)?.shift_down(1, m)?;
    let h0 = NormalizedMap::new(m, f, g0, g)?;
    let back = h0.to_general()?.after(&GeneralMap::dilation(&psi, h.F.total_cap().max(h.G.total_cap())))?;
    if !back.agrees_with(h) {
        return Err(Error::Invariant("factorization residual is nonzero".into()));
    }
    Ok((h0, psi))
}

/// The pieces of the transformation rule that depend only on the map,
/// as jets in `(z, w, zeta)`.
pub(crate) struct Kernel<C: Coeff> {
    zf: Jet<C>,
    wg: Jet<C>,
    zeta_t: Jet<C>,
    a3: Jet<C>,
    bm: Jet<C>,
    pub(crate) j: Jet<C>,
    i0: Jet<C>,
    i1: Jet<C>,
    i2w: Jet<C>,
    i3w: Jet<C>,
}

/// Derivatives of a normalized map entering the transformation rule, with
/// the `w`-derivatives scaled so that they stay polynomial in `θ = w∂_w`:
/// `fw = wᵐf_w`, `fzw = wᵐf_zw`, `fww = w²ᵐf_ww` (same for `g`),
/// `g0p = wg₀′`, `g0pp = w^{m+1}g₀″`. The first three variables of every
/// jet are `(z, w, zeta)`.
pub(crate) struct Parts<C: Coeff> {
    pub f: Jet<C>,
    pub f_z: Jet<C>,
    pub f_zz: Jet<C>,
    pub fw: Jet<C>,
    pub fzw: Jet<C>,
    pub fww: Jet<C>,
    pub g: Jet<C>,
    pub g_z: Jet<C>,
    pub g_zz: Jet<C>,
    pub gw: Jet<C>,
    pub gzw: Jet<C>,
    pub gww: Jet<C>,
    pub g0: Jet<C>,
    pub g0p: Jet<C>,
    pub g0pp: Jet<C>,
}

/// Embeds a map component into `(z, w, zeta)`. With `zeta_weight = 0`
/// the total cap counts only the degree in `(z, w)`.
fn lift<C: Coeff>(j: &Jet<C>, map: &[usize], zeta_cap: u32, zeta_weight: u16) -> Result<Jet<C>> {
    let weights: Weights = vec![1, 1, zeta_weight].into();
    let e = j.embed_weighted(&ode_vars(), &weights, map)?;
    let mut caps = e.caps().to_vec();
    caps[2] = zeta_cap;
    // the map does not depend on zeta
    Ok(e.with_caps_unchecked(caps, e.total_cap()))
}

impl<C: Coeff> Parts<C> {
    fn of_map(h: &NormalizedMap<C>, zeta_cap: u32, zeta_weight: u16) -> Result<Self> {
        let m = h.m;
        let f = lift(&h.f, &[0, 1], zeta_cap, zeta_weight)?;
        let g = lift(&h.g, &[0, 1], zeta_cap, zeta_weight)?;
        let g0 = lift(&h.g0, &[1], zeta_cap, zeta_weight)?;
        let wp = |x: &Jet<C>, k: u32| x.shift_up(1, k);
        let f_z = f.derive_at(0);
        let f_w = f.derive_at(1);
        let g_z = g.derive_at(0);
        let g_w = g.derive_at(1);
        let g0p = g0.derive_at(1);
        Ok(Parts {
            f_zz: f_z.derive_at(0),
            fzw: wp(&f_z.derive_at(1), m),
            fww: wp(&f_w.derive_at(1), 2 * m),
            fw: wp(&f_w, m),
            g_zz: g_z.derive_at(0),
            gzw: wp(&g_z.derive_at(1), m),
            gww: wp(&g_w.derive_at(1), 2 * m),
            gw: wp(&g_w, m),
            g0pp: wp(&g0p.derive_at(1), m + 1),
            g0p: wp(&g0p, 1),
            f,
            f_z,
            g,
            g_z,
            g0,
        })
    }
}

impl<C: Coeff> Kernel<C> {
    fn new(h: &NormalizedMap<C>, zeta_cap: u32, zeta_weight: u16) -> Result<Self> {
        Self::from_parts(h.m, &Parts::of_map(h, zeta_cap, zeta_weight)?)
    }

    pub(crate) fn from_parts(m: u32, p: &Parts<C>) -> Result<Self> {
        let one = p.f.one_like();
        let zeta = p.f.var_at(2);
        // w^k X
        let wp = |x: &Jet<C>, k: u32| x.shift_up(1, k);
        let mm = m as i64;

        let az = one.add(&p.f_z)?;
        let a = az.add(&p.fw.mul(&zeta)?)?;
        let b = one.add(&p.g0)?.add(&wp(&p.g, m - 1))?;
        // D = 1 + wg₀′ + g₀ + m w^{m−1} g + wᵐ g_w
        let d = one.add(&p.g0p)?.add(&p.g0)?.add(&wp(&p.g, m - 1).scale_int(mm))?.add(&p.gw)?;
        // wᵐ(wg₀″ + 2g₀′ + m(m−1)w^{m−2}g + 2m w^{m−1}g_w + wᵐg_ww)
        let e2 = p
            .g0pp
            .add(&wp(&p.g0p, m - 1).scale_int(2))?
            .add(&wp(&p.g, 2 * m - 2).scale_int(mm * (mm - 1)))?
            .add(&wp(&p.gw, m - 1).scale_int(2 * mm))?
            .add(&p.gww)?;
        // m w^{m−1}g_z + wᵐg_zw
        let k = wp(&p.g_z, m - 1).scale_int(mm).add(&p.gzw)?;

        let j = az.mul(&d)?.sub(&p.fw.mul(&p.g_z)?)?;
        let i0 = p.g_z.mul(&p.f_zz)?.sub(&az.mul(&p.g_zz)?)?;
        let i1 = d
            .mul(&p.f_zz)?
            .sub(&p.fw.mul(&p.g_zz)?)?
            .sub(&az.mul(&k)?.scale_int(2))?
            .add(&p.g_z.mul(&p.fzw)?.scale_int(2))?;
        let i2w = p
            .g_z
            .mul(&p.fww)?
            .sub(&az.mul(&e2)?)?
            .sub(&p.fw.mul(&k)?.scale_int(2))?
            .add(&d.mul(&p.fzw)?.scale_int(2))?;
        let i3w = d.mul(&p.fww)?.sub(&p.fw.mul(&e2)?)?;

        let bm = b.pow(m)?;
        let zeta_t = p.g_z.add(&zeta.mul(&d)?)?.div(&bm.mul(&a)?)?;
        let zf = p.f.var_at(0).add(&p.f)?;
        let wg = p.f.var_at(1).add(&wp(&p.g0, 1))?.add(&wp(&p.g, m))?;
        let a3 = a.pow(3)?;
        Ok(Kernel { zf, wg, zeta_t, a3, bm, j, i0, i1, i2w, i3w })
    }

    /// `A³Bᵐ Φ*(z + f, w + wg₀ + wᵐg, ζ̃)`, the part not involving the
    /// second `w`-derivatives.
    pub(crate) fn lead(&self, phi_star: &Jet<C>) -> Result<Jet<C>> {
        phi_star.compose(&[self.zf.clone(), self.wg.clone(), self.zeta_t.clone()])?.mul(&self.a3)?.mul(&self.bm)
    }

    /// `I₀ + I₁ζ + I₂wᵐζ² + I₃w²ᵐζ³`.
    pub(crate) fn rest(&self) -> Result<Jet<C>> {
        let zeta = self.zf.var_at(2);
        let z2 = zeta.mul(&zeta)?;
        self.i0.add(&self.i1.mul(&zeta)?)?.add(&self.i2w.mul(&z2)?)?.add(&self.i3w.mul(&z2.mul(&zeta)?)?)
    }

    /// `I₂wᵐζ² + I₃w²ᵐζ³`.
    pub(crate) fn rest_high(&self) -> Result<Jet<C>> {
        let zeta = self.zf.var_at(2);
        let z2 = zeta.mul(&zeta)?;
        self.i2w.mul(&z2)?.add(&self.i3w.mul(&z2.mul(&zeta)?)?)
    }

    /// `A³Bᵐ Φ*(z + f, w + wg₀ + wᵐg, ζ̃) + I₀ + I₁ζ + I₂wᵐζ² + I₃w²ᵐζ³`.
    fn bracket(&self, phi_star: &Jet<C>) -> Result<Jet<C>> {
        self.lead(phi_star)?.add(&self.rest()?)
    }
}

fn check_m<C: Coeff>(e: &SingularODE<C>, h: &NormalizedMap<C>) -> Result<()> {
    if e.m != h.m {
        return Err(Error::Precondition(format!("ODE has m = {} but the map has m = {}", e.m, h.m)));
    }
    Ok(())
}

/// The transformed `Φ` as a jet in `(z, w, zeta)`, without any checks on
/// the low `ζ`-orders.
pub fn push_forward_raw<C: Coeff>(e_star: &SingularODE<C>, h0: &NormalizedMap<C>) -> Result<Jet<C>> {
    let out = push_forward_capped(e_star, h0, e_star.phi().caps()[2])?;
    let caps = e_star.phi().caps().to_vec();
    Ok(out.truncate(&caps, e_star.phi().total_cap()))
}

/// Like [`push_forward_raw`] but only up to `ζ`-degree `zeta_cap`.
pub(crate) fn push_forward_capped<C: Coeff>(e_star: &SingularODE<C>, h0: &NormalizedMap<C>, zeta_cap: u32) -> Result<Jet<C>> {
    check_m(e_star, h0)?;
    let k = Kernel::new(h0, zeta_cap, 1)?;
    let br = k.bracket(e_star.phi())?;
    br.div(&k.j)
}

/// The ODE obtained from `E*` by the normalized map `H₀`.
pub fn push_forward<C: Coeff>(e_star: &SingularODE<C>, h0: &NormalizedMap<C>) -> Result<SingularODE<C>> {
    let v = h0.validate();
    if !v.is_empty() {
        return Err(Error::Precondition(format!("map is not normalized: {}", v.join("; "))));
    }
    let phi = push_forward_raw(e_star, h0)?;
    SingularODE::new(h0.m, phi)
}

/// Push-forward by a general map, through its factorization.
pub fn push_forward_general<C: Coeff>(e_star: &SingularODE<C>, h: &GeneralMap<C>) -> Result<SingularODE<C>> {
    let (h0, psi) = factor(h, e_star.m)?;
    let mid = psi.push_forward(e_star)?;
    push_forward(&mid, &h0)
}

/// `J·Φ − [A³BᵐΦ*(…) + I₀ + I₁ζ + I₂wᵐζ² + I₃w²ᵐζ³]` on the common caps.
pub fn verify_transformation_identity<C: Coeff>(
    e_star: &SingularODE<C>,
    e: &SingularODE<C>,
    h0: &NormalizedMap<C>,
) -> Result<Residual<C>> {
    check_m(e_star, h0)?;
    check_m(e, h0)?;
    let cap = e_star.phi().caps()[2].max(e.phi().caps()[2]);
    let k = Kernel::new(h0, cap, 1)?;
    let br = k.bracket(e_star.phi())?;
    let lhs = k.j.mul(e.phi())?;
    Ok(Residual { residual: lhs.sub(&br)? })
}

/// Solves the `ζ⁰, ζ¹` part of the transformation rule for the higher
/// `z`-coefficients of `f` and `g`, given the Cauchy data.
///
/// At level `zᵏ` the unknowns `(f_{k+2}, g_{k+2})` enter only through
/// `f_zz, g_zz` in `I₀, I₁`, with matrix
/// `(k+2)(k+1)·[[g₁, −(1+f₁)], [1 + wg₀′ + g₀, −wᵐf₀′]]`.
pub fn complete_map<C: Coeff>(e_star: &SingularODE<C>, data: &CauchyData<C>, total: u32) -> Result<NormalizedMap<C>> {
    let v = data.validate(e_star.m);
    if !v.is_empty() {
        return Err(Error::Precondition(v.join("; ")));
    }
    let h = complete_levels(e_star, data, total, None)?;
    let v = h.validate();
    if !v.is_empty() {
        return Err(Error::Invalid(v.join("; ")));
    }
    Ok(h)
}

/// Runs the first `levels` steps of the recursion (all of them for
/// `None`); with a limit the result is capped at `z`-degree `levels + 1`.
pub(crate) fn complete_levels<C: Coeff>(
    e_star: &SingularODE<C>,
    data: &CauchyData<C>,
    total: u32,
    levels: Option<u32>,
) -> Result<NormalizedMap<C>> {
    let m = e_star.m;
    let free = |j: &Jet<C>| -> Result<Jet<C>> { Ok(j.embed(&map_vars(), &[1])?.with_caps_unchecked(vec![UNCAPPED; 2], UNCAPPED)) };
    let mut t = total;
    for d in data.as_array() {
        t = t.min(d.total_cap());
    }
    let mut f = free(&data.f0)?.add(&free(&data.f1)?.shift_up(0, 1))?;
    let mut g = free(&data.g1)?.shift_up(0, 1);
    let g0 = data.g0.clone();
    let lw = |j: &Jet<C>| -> Result<Jet<C>> { Ok(lift(j, &[1], 1, 0)?.truncate_total(t)) };
    let one = lw(&data.g0)?.one_like();
    let f1 = lw(&data.f1)?;
    let g1 = lw(&data.g1)?;
    let g0l = lw(&data.g0)?;
    let d0 = one.add(&g0l.derive_at(1).shift_up(1, 1))?.add(&g0l)?;
    let f0pw = lw(&data.f0)?.derive_at(1).shift_up(1, m);
    let az = one.add(&f1)?;
    let det = az.mul(&d0)?.sub(&g1.mul(&f0pw)?)?;
    let det_inv = det.reciprocal()?;
    let zcap = levels.map_or(UNCAPPED, |l| l + 1);
    for k in 0..t.saturating_sub(1).min(levels.unwrap_or(UNCAPPED)) {
        let h = NormalizedMap::new_unchecked(
            m,
            f.truncate(&[zcap, UNCAPPED], t),
            g0.clone(),
            g.truncate(&[zcap, UNCAPPED], t),
        )?;
        let kern = Kernel::new(&h, 1, 0)?;
        let br = kern.bracket(e_star.phi())?;
        let r0 = br.slice(2, 0).slice(0, k);
        let r1 = br.slice(2, 1).slice(0, k);
        let c = C::from_int(-(((k + 2) * (k + 1)) as i64)).inv()?;
        let r0 = r0.scale(&c);
        let r1 = r1.scale(&c);
        let x = f0pw.neg().mul(&r0)?.add(&az.mul(&r1)?)?.mul(&det_inv)?;
        let y = d0.neg().mul(&r0)?.add(&g1.mul(&r1)?)?.mul(&det_inv)?;
        let (xf, kx) = to_level(&x, k)?;
        let (yg, ky) = to_level(&y, k)?;
        t = t.min(kx).min(ky);
        f = f.add(&xf)?;
        g = g.add(&yg)?;
    }
    let f = f.truncate(&[zcap, UNCAPPED], t);
    let g = g.truncate(&[zcap, UNCAPPED], t);
    let g0 = g0.truncate_total(t);
    NormalizedMap::new_unchecked(m, f, g0, g)
}

/// `z^{k+2}·x(w)` for a level-`k` solution `x` living in `(z, w, zeta)`
/// with zero caps in `z` and `zeta`, and the total it is known to.
fn to_level<C: Coeff>(x: &Jet<C>, k: u32) -> Result<(Jet<C>, u32)> {
    let known = x.total_cap().min(x.caps()[1]) + k + 2;
    let mut out = Jet::zero_total(map_vars(), UNCAPPED);
    for (e, c) in x.terms() {
        out.add_term(Exponent::from_slice(&[(k + 2) as u16, e[1]]), c.clone());
    }
    Ok((out, known))
}

/// A Gaussian rational with numerators and denominators in `[-10, 10]`.
pub fn random_gauss_rat<R: Rng>(rng: &mut R, real: bool) -> GaussRat {
    let part = |rng: &mut R| (rng.gen_range(-10i64..=10), rng.gen_range(1i64..=10));
    let (a, b) = part(rng);
    if real {
        return GaussRat::rat(a, b);
    }
    let (c, d) = part(rng);
    GaussRat::from_parts(a, b, c, d)
}

/// Random Cauchy data of a normalized map: polynomials in `w` of degree
/// at most `degree`, vanishing at `w = 0`, with each coefficient present
/// with probability `density`.
pub fn random_cauchy_data<R: Rng>(m: u32, degree: u32, density: f64, rng: &mut R) -> CauchyData<GaussRat> {
    let series = |real_below: u32, rng: &mut R| {
        let mut j = Jet::zero_total(w_vars(), UNCAPPED);
        for p in 1..=degree {
            if rng.gen_bool(density) {
                j.add_term(Exponent::from_slice(&[p as u16]), random_gauss_rat(rng, p < real_below));
            }
        }
        j
    };
    let f0 = series(0, rng);
    let f1 = series(0, rng);
    let g0 = series(m, rng);
    let g1 = series(0, rng);
    CauchyData { f0, f1, g0, g1 }
}

/// Violations of the low-order identities between the coefficients
/// `Φ_{k j l}` (of `zᵏwʲζˡ`) of a push-forward `Φ` and its source `Φ*`.
pub fn check_low_terms<C: Coeff>(phi_star: &SingularODE<C>, phi: &SingularODE<C>) -> Vec<String> {
    let m = phi.m;
    let mut out = Vec::new();
    let known = |e: &[u32]| {
        let e: Vec<u16> = e.iter().map(|&x| x as u16).collect();
        phi.phi().is_known(&e)
    };
    let zero = |k: u32, j: u32, l: u32, out: &mut Vec<String>| {
        if !known(&[k, j, l]) {
            out.push(format!("Phi_{k},{j},{l} not in the truncation"));
        } else if !phi.coeff_jkl(j, k, l).is_zero() {
            out.push(format!("Phi_{k},{j},{l} = {} != 0", phi.coeff_jkl(j, k, l)));
        }
    };
    for j in 0..m.saturating_sub(1) {
        zero(0, j, 2, &mut out);
    }
    for j in 0..(2 * m).saturating_sub(2) {
        zero(1, j, 2, &mut out);
        zero(0, j, 3, &mut out);
        zero(1, j, 3, &mut out);
    }
    for (k, j, l) in [(0, m - 1, 2), (0, 2 * m - 2, 3), (1, 2 * m - 2, 2), (1, 2 * m - 2, 3)] {
        let e = [k, j, l];
        let e16: Vec<u16> = e.iter().map(|&x| x as u16).collect();
        if !known(&e) || !phi_star.phi().is_known(&e16) {
            out.push(format!("Phi_{k},{j},{l} not in the truncation"));
            continue;
        }
        let (a, b) = (phi.coeff_jkl(j, k, l), phi_star.coeff_jkl(j, k, l));
        if !a.sub(&b).is_zero() {
            out.push(format!("Phi_{k},{j},{l} = {a} but the source has {b}"));
        }
    }
    out
}
