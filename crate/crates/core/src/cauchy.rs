//! The singular system satisfied by the Cauchy data of a normalized map,
//!
//! `w^{m+1}g₀″ = S(w, Y, wY′)`, `w²ᵐX″ = T(w, Y, wY′)`,
//!
//! with `Y = (g₀, X)`, `X = (g₁, f₀, f₁)`, the order bounds of its
//! coefficients, and the reduction of a formal solution to a first-order
//! Briot-Bouquet system.
//!
//! Both computations substitute symbolic Cauchy data into the
//! transformation rule. Derivatives in `w` are carried through `θ = w∂_w`,
//! and the higher `z`-coefficients of the map come from the `ζ⁰, ζ¹` part of
//! the rule at `z⁰`.

use std::fmt;

use crate::error::{Error, Result};
use crate::jet::{vars, Exponent, Jet, Vars, Weights, UNCAPPED};
use crate::ode::SingularODE;
use crate::scalar::Coeff;
use crate::transform::{w_vars, CauchyData, Kernel, Parts};

/// Variables of `S` and `T`: `w`, then `Y = (g₀, g₁, f₀, f₁)`, then `wY′`.
pub fn system_vars() -> Vars {
    vars(&["w", "Y0", "Y1", "Y2", "Y3", "dY0", "dY1", "dY2", "dY3"])
}

/// Variables of the first-order system: `w`, `U` and `V = wU′`.
pub fn bb_vars() -> Vars {
    vars(&["w", "U0", "U1", "U2", "U3", "V0", "V1", "V2", "V3"])
}

/// `sᵢ` in the left-hand side `w^{sᵢ}(θ²Yᵢ − θYᵢ) = w^{sᵢ+2}Yᵢ″`.
fn lhs_power(m: u32, i: usize) -> u32 {
    if i == 0 {
        m - 1
    } else {
        2 * m - 2
    }
}

/// `θ = w d/dw` on a series in `w` alone.
fn theta_w<C: Coeff>(j: &Jet<C>) -> Jet<C> {
    j.derive_at(0).shift_up(0, 1)
}

/// `Y` and `θY` at a point of a symbolic family, with the `θ`-derivatives
/// of the symbols. Quantities depending on the unknown second derivatives
/// are affine in a vector `x` and stored as `(base, coefficient of x_i)`.
struct Frame<C: Coeff> {
    m: u32,
    /// zero jet of the working space `(z, w, zeta, symbols…)`
    space: Jet<C>,
    y: [Jet<C>; 4],
    dy0: Jet<C>,
    /// `w^{m−1}θYᵢ`
    sdy: [Jet<C>; 4],
    /// `w^{m−1}θ(symbol k)`
    theta: Vec<(Jet<C>, Option<(usize, Jet<C>)>)>,
    /// `w^{sᵢ}(θ²Yᵢ − θYᵢ)`
    v: Vec<(Jet<C>, Jet<C>)>,
}

type Eqs<C> = [Jet<C>; 4];

impl<C: Coeff> Frame<C> {
    fn space(symbols: &Vars, total: u32) -> Jet<C> {
        let mut names: Vec<&str> = vec!["z", "w", "zeta"];
        names.extend(symbols[1..].iter().map(String::as_str));
        let n = names.len();
        let mut weights = vec![1u16; n];
        weights[0] = 0;
        weights[2] = 0;
        let mut caps = vec![UNCAPPED; n];
        caps[0] = 2;
        caps[2] = 3;
        Jet::zero_weighted(vars(&names), Weights::from(weights), caps, total)
    }

    fn sym(&self, k: usize) -> Jet<C> {
        self.space.var_at(3 + k)
    }

    fn wp(&self, j: &Jet<C>, k: u32) -> Jet<C> {
        j.shift_up(1, k)
    }

    /// A series in `w` alone, placed in the working space.
    fn lift_w(&self, j: &Jet<C>) -> Result<Jet<C>> {
        let e = j.embed_weighted(self.space.vars(), self.space.weights(), &[1])?;
        let total = e.total_cap().min(self.space.total_cap());
        Ok(e.with_caps_unchecked(self.space.caps().to_vec(), total))
    }

    /// Resets the `z`- and `zeta`-caps of a jet not depending on them.
    fn flat(&self, j: &Jet<C>, zcap: u32) -> Jet<C> {
        let mut caps = self.space.caps().to_vec();
        caps[0] = zcap;
        j.with_caps_unchecked(caps, j.total_cap())
    }

    fn affine(&self, (base, coef): &(Jet<C>, Jet<C>), xi: &C) -> Result<Jet<C>> {
        if xi.is_zero() {
            return Ok(base.clone());
        }
        base.add(&coef.scale(xi))
    }

    /// `w^{m−1}θF` for a jet `F` in the working space.
    fn theta_scaled(&self, f: &Jet<C>, x: &[C; 4]) -> Result<Jet<C>> {
        let mut out = f.derive_at(1).shift_up(1, self.m);
        for (k, (base, extra)) in self.theta.iter().enumerate() {
            let d = f.derive_at(3 + k);
            if d.is_zero() && d.total_cap() > 0 {
                continue;
            }
            let mut t = base.clone();
            if let Some((i, coef)) = extra {
                if !x[*i].is_zero() {
                    t = t.add(&coef.scale(&x[*i]))?;
                }
            }
            out = out.add(&t.mul(&d)?)?;
        }
        Ok(out)
    }

    /// The four equations `J·Φ − bracket` at `z^{0,1}ζ^{2,3}` for each `x`,
    /// as series in `w` and the symbols.
    fn equations(&self, e_star: &SingularODE<C>, e: &SingularODE<C>, xs: &[[C; 4]]) -> Result<Vec<Eqs<C>>> {
        let m = self.m;
        let [y0, y1, y2, y3] = &self.y;
        let [_, s1, s2, s3] = &self.sdy;
        let zero = self.space.zero_like();
        let one = self.space.one_like();
        let z = self.space.var_at(0);
        let capz = |j: &Jet<C>, k: u32| j.cap_var(0, k);

        // second z-coefficients from the zeta^0, zeta^1 part at z^0
        let f_base = y2.add(&y3.mul(&z)?)?;
        let g_base = y1.mul(&z)?;
        let p1 = Parts {
            f: f_base.clone(),
            f_z: capz(y3, 1),
            f_zz: capz(&zero, 0),
            fw: capz(&s2.add(&s3.mul(&z)?)?, 1),
            fzw: capz(s3, 0),
            fww: capz(&zero, 0),
            g: g_base.clone(),
            g_z: capz(y1, 1),
            g_zz: capz(&zero, 0),
            gw: capz(&s1.mul(&z)?, 1),
            gzw: capz(s1, 0),
            gww: capz(&zero, 0),
            g0: y0.clone(),
            g0p: self.dy0.clone(),
            g0pp: zero.clone(),
        };
        let k1 = Kernel::from_parts(m, &p1)?;
        let br = k1.lead(e_star.phi())?.add(&k1.rest()?)?;
        let r0 = self.flat(&br.slice(0, 0).slice(2, 0), 0);
        let r1 = self.flat(&br.slice(0, 0).slice(2, 1), 0);
        let az = one.add(y3)?;
        let d0 = one.add(&self.dy0)?.add(y0)?;
        let q = az.mul(&d0)?.sub(&y1.mul(s2)?)?.scale_int(2);
        let q_inv = self.flat(&q, 0).reciprocal()?;
        let f2 = s2.mul(&r0)?.sub(&az.mul(&r1)?)?.mul(&q_inv)?;
        let g2 = d0.mul(&r0)?.sub(&y1.mul(&r1)?)?.mul(&q_inv)?;
        let f2 = self.flat(&f2, 0);
        let g2 = self.flat(&g2, 0);

        let z2 = |j: &Jet<C>| self.flat(j, 0).shift_up(0, 2);
        let lz = |j: &Jet<C>| -> Result<Jet<C>> { Ok(j.shift_up(0, 1)) };
        let mut p = Parts {
            f: f_base.add(&z2(&f2))?,
            f_z: capz(&y3.add(&lz(&f2.scale_int(2))?)?, 1),
            f_zz: capz(&f2.scale_int(2), 0),
            fw: capz(&s2.add(&lz(s3)?)?, 1),
            fzw: zero.clone(),
            fww: zero.clone(),
            g: g_base.add(&z2(&g2))?,
            g_z: capz(&y1.add(&lz(&g2.scale_int(2))?)?, 1),
            g_zz: capz(&g2.scale_int(2), 0),
            gw: capz(&lz(s1)?, 1),
            gzw: zero.clone(),
            gww: zero.clone(),
            g0: y0.clone(),
            g0p: self.dy0.clone(),
            g0pp: zero.clone(),
        };
        let phi = e.phi().truncate(&[1, UNCAPPED, 3], e.phi().total_cap());
        let phi = phi.embed_weighted(self.space.vars(), self.space.weights(), &[0, 1, 2])?;
        let mut lead = None;
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            let tf = self.theta_scaled(&f2, x)?;
            let tg = self.theta_scaled(&g2, x)?;
            let v: Vec<Jet<C>> = (0..4).map(|i| self.affine(&self.v[i], &x[i])).collect::<Result<_>>()?;
            p.fzw = capz(&s3.add(&lz(&tf.scale_int(2))?)?, 1);
            p.gzw = capz(&s1.add(&lz(&tg.scale_int(2))?)?, 1);
            p.fww = capz(&v[2].add(&lz(&v[3])?)?, 1);
            p.gww = capz(&lz(&v[1])?, 1);
            p.g0pp = v[0].clone();
            let k = Kernel::from_parts(m, &p)?;
            let base = match &lead {
                Some(b) => b,
                None => lead.insert(k.j.mul(&phi)?.sub(&k.lead(e_star.phi())?)?),
            };
            let eq = base.sub(&k.rest_high()?)?;
            let pick = |a: u32, l: u32| drop_z_zeta(&eq.slice(0, a).slice(2, l));
            out.push([pick(0, 2)?, pick(0, 3)?, pick(1, 2)?, pick(1, 3)?]);
        }
        Ok(out)
    }
}

/// Rewrites a jet of the working space with no `z` or `zeta` dependence
/// over the remaining variables.
fn drop_z_zeta<C: Coeff>(j: &Jet<C>) -> Result<Jet<C>> {
    let names: Vec<&str> = j.vars().iter().enumerate().filter(|(i, _)| *i != 0 && *i != 2).map(|(_, s)| s.as_str()).collect();
    let n = names.len();
    let mut out = Jet::zero(vars(&names), vec![UNCAPPED; n], j.total_cap());
    for (e, c) in j.terms() {
        if e[0] != 0 || e[2] != 0 {
            return Err(Error::Invariant("equation still depends on z or zeta".into()));
        }
        let e2: Exponent = e.iter().enumerate().filter(|(i, _)| *i != 0 && *i != 2).map(|(_, &x)| x).collect();
        out.add_term(e2, c.clone());
    }
    Ok(out)
}

/// Solves `A x = b` over power series whose pivots are units.
fn solve_series<C: Coeff>(mut a: Vec<Vec<Jet<C>>>, mut b: Vec<Jet<C>>) -> Result<Vec<Jet<C>>> {
    let n = b.len();
    for c in 0..n {
        let r = (c..n)
            .find(|&r| !a[r][c].constant_term().is_zero())
            .ok_or_else(|| Error::NonUnit(format!("column {c} of the system has no unit pivot")))?;
        a.swap(c, r);
        b.swap(c, r);
        let inv = a[c][c].reciprocal()?;
        for k in 0..n {
            a[c][k] = a[c][k].mul(&inv)?;
        }
        b[c] = b[c].mul(&inv)?;
        for r in 0..n {
            if r == c || a[r][c].is_zero() {
                continue;
            }
            let f = a[r][c].clone();
            for k in 0..n {
                let t = f.mul(&a[c][k])?;
                a[r][k] = a[r][k].sub(&t)?;
            }
            let t = f.mul(&b[c])?;
            b[r] = b[r].sub(&t)?;
        }
    }
    Ok(b)
}

/// Affine dependence `E(x) = E₀ + M x` read off from `E(0)` and `E(eᵢ)`.
fn affine_parts<C: Coeff>(fr: &Frame<C>, e_star: &SingularODE<C>, e: &SingularODE<C>) -> Result<(Eqs<C>, Vec<Vec<Jet<C>>>)> {
    let mut xs = vec![std::array::from_fn(|_| C::zero())];
    for i in 0..4 {
        let mut x: [C; 4] = std::array::from_fn(|_| C::zero());
        x[i] = C::one();
        xs.push(x);
    }
    let mut ev = fr.equations(e_star, e, &xs)?;
    let e0 = ev.remove(0);
    let mut m = vec![Vec::with_capacity(4); 4];
    for col in &ev {
        for (r, row) in m.iter_mut().enumerate() {
            row.push(col[r].sub(&e0[r])?);
        }
    }
    Ok((e0, m))
}

fn check_pair<C: Coeff>(e_star: &SingularODE<C>, e: &SingularODE<C>) -> Result<u32> {
    if e_star.m != e.m {
        return Err(Error::Precondition(format!("nonminimality orders differ: {} and {}", e_star.m, e.m)));
    }
    Ok(e_star.m)
}

/// The system `w^{m+1}g₀″ = S`, `w²ᵐX″ = T` as series in [`system_vars`].
#[derive(Clone, Debug, PartialEq)]
pub struct CauchySystem<C: Coeff> {
    pub m: u32,
    pub s: Jet<C>,
    /// Right-hand sides for `g₁`, `f₀`, `f₁`.
    pub t: [Jet<C>; 3],
}

/// Multi-index pair `(α, β)` of the monomial `Y^α (wY′)^β`.
pub type Multi = ([u16; 4], [u16; 4]);

impl<C: Coeff> CauchySystem<C> {
    /// Right-hand side for component `i` of `Y` (0 is `S`).
    pub fn rhs(&self, i: usize) -> &Jet<C> {
        if i == 0 {
            &self.s
        } else {
            &self.t[i - 1]
        }
    }

    /// `S_{α,β}(w)` for `i = 0`, the `T_{α,β}` components otherwise.
    pub fn coeff(&self, i: usize, (alpha, beta): &Multi) -> Jet<C> {
        let j = self.rhs(i);
        let deg: u32 = alpha.iter().chain(beta).map(|&a| a as u32).sum();
        let mut out = Jet::zero_total(w_vars(), j.total_cap().saturating_sub(deg));
        for (e, c) in j.terms() {
            if e[1..5] == alpha[..] && e[5..9] == beta[..] {
                out.add_term(Exponent::from_slice(&[e[0]]), c.clone());
            }
        }
        out
    }

    /// Every `(α, β)` with a nonzero coefficient in component `i`.
    pub fn multi_indices(&self, i: usize) -> Vec<Multi> {
        let mut out: Vec<Multi> = self
            .rhs(i)
            .terms()
            .map(|(e, _)| (std::array::from_fn(|k| e[1 + k]), std::array::from_fn(|k| e[5 + k])))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The system for `Z = Y − P`: `S̃(w, Z, wZ′) = S(w, P + Z, θP + wZ′)`.
    pub fn shifted(&self, p: &CauchyData<C>) -> Result<Self> {
        let base = self.s.zero_like();
        let comps = [&p.g0, &p.g1, &p.f0, &p.f1];
        let mut inner = vec![base.var_at(0)];
        for (k, c) in comps.iter().enumerate() {
            inner.push(base.var_at(1 + k).add(&embed_w(c, &base)?)?);
        }
        for (k, c) in comps.iter().enumerate() {
            inner.push(base.var_at(5 + k).add(&embed_w(&theta_w(c), &base)?)?);
        }
        let sub = |j: &Jet<C>| j.compose(&inner);
        Ok(CauchySystem { m: self.m, s: sub(&self.s)?, t: [sub(&self.t[0])?, sub(&self.t[1])?, sub(&self.t[2])?] })
    }
}

fn embed_w<C: Coeff>(j: &Jet<C>, like: &Jet<C>) -> Result<Jet<C>> {
    let e = j.embed(like.vars(), &[0])?;
    Ok(e.with_caps_unchecked(vec![UNCAPPED; like.nvars()], e.total_cap()))
}

/// Derives the singular system for the Cauchy data of maps taking `E*` to
/// `E`. `total` is the working truncation in `(w, Y, wY′)`; the result is
/// known to a somewhat lower total, recorded in its jets.
pub fn derive_cauchy_system<C: Coeff>(e_star: &SingularODE<C>, e: &SingularODE<C>, total: u32) -> Result<CauchySystem<C>> {
    let m = check_pair(e_star, e)?;
    let sv = system_vars();
    let space = Frame::<C>::space(&sv, total);
    // symbols: Y0..Y3, then θY0 and w^{m−1}θX (renamed at the end)
    let sym = |k: usize| space.var_at(3 + k);
    let wm1 = |j: &Jet<C>| j.shift_up(1, m - 1);
    let one = space.one_like();
    let y = [sym(0), sym(1), sym(2), sym(3)];
    let d0 = sym(4);
    let b = [sym(5), sym(6), sym(7)];
    let mut theta = vec![(wm1(&d0), None)];
    theta.extend(b.iter().map(|bx| (bx.clone(), None)));
    theta.push((wm1(&d0), Some((0, one.clone()))));
    for (k, bx) in b.iter().enumerate() {
        theta.push((wm1(bx).scale_int(m as i64), Some((k + 1, one.clone()))));
    }
    let fr = Frame {
        m,
        sdy: [wm1(&d0), b[0].clone(), b[1].clone(), b[2].clone()],
        dy0: d0,
        y,
        theta,
        v: (0..4).map(|_| (space.zero_like(), one.clone())).collect(),
        space,
    };
    let (e0, mat) = affine_parts(&fr, e_star, e)?;
    let x = solve_series(mat, e0.iter().map(Jet::neg).collect())?;
    // w^{m−1}θX back to θX
    let rename = |j: &Jet<C>| -> Jet<C> {
        let mut out = Jet::zero(sv.clone(), vec![UNCAPPED; 9], j.total_cap());
        for (e, c) in j.terms() {
            let mut e2 = e.clone();
            e2[0] += (m as u16 - 1) * (e[6] + e[7] + e[8]);
            out.add_term(e2, c.clone());
        }
        out
    };
    Ok(CauchySystem { m, s: rename(&x[0]), t: [rename(&x[1]), rename(&x[2]), rename(&x[3])] })
}

/// Outcome of one order inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderCheck {
    pub name: String,
    pub required: u32,
    /// Lowest `w`-order found, `None` if nothing nonzero is known.
    pub order: Option<u32>,
    /// Whether the truncation reaches far enough to decide.
    pub decided: bool,
}

impl OrderCheck {
    pub fn holds(&self) -> bool {
        self.order.map_or(true, |o| o >= self.required)
    }

    /// `order − required` when both are known.
    pub fn slack(&self) -> Option<i64> {
        self.order.map(|o| o as i64 - self.required as i64)
    }
}

impl fmt::Display for OrderCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ord = self.order.map_or_else(|| "none".to_string(), |o| o.to_string());
        let state = match (self.holds(), self.decided) {
            (true, true) => "ok",
            (true, false) => "undecided",
            (false, _) => "FAILS",
        };
        write!(f, "{}: ord {} >= {} {}", self.name, ord, self.required, state)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TsReport {
    pub checks: Vec<OrderCheck>,
}

impl TsReport {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(OrderCheck::holds)
    }

    pub fn decided(&self) -> bool {
        self.checks.iter().all(|c| c.decided || !c.holds())
    }

    pub fn failures(&self) -> Vec<&OrderCheck> {
        self.checks.iter().filter(|c| !c.holds()).collect()
    }
}

const NAMES: [&str; 4] = ["S", "T[g1]", "T[f0]", "T[f1]"];

/// Lowest `w`-order over the given monomial degrees of component `i`.
fn order_where<C: Coeff>(cs: &CauchySystem<C>, i: usize, keep: impl Fn(u32, &Exponent) -> bool) -> Option<u32> {
    cs.rhs(i)
        .terms()
        .filter(|(e, _)| keep(e[1..].iter().map(|&a| a as u32).sum(), e))
        .map(|(e, _)| e[0] as u32)
        .min()
}

fn check(name: String, required: u32, order: Option<u32>, degree: u32, total: u32) -> OrderCheck {
    let decided = order.is_some_and(|o| o < required) || required == 0 || required - 1 + degree <= total;
    OrderCheck { name, required, order, decided }
}

/// Checks `ord T_{α,β} ≥ 2m−1−|α|−|β|`, `ord S_{α,β} ≥ m−|α|−|β|` for
/// `|α|+|β| > 0`, the bounds on `S₀₀`, `T₀₀`, and, when a polynomial `P`
/// is given, the bounds on the linear coefficients of the system shifted by
/// `P`: `m − 1` for `S̃`, `2m − 2` for `T̃`.
pub fn check_ts_orders<C: Coeff>(cs: &CauchySystem<C>, shift: Option<&CauchyData<C>>) -> Result<TsReport> {
    let m = cs.m;
    let mut checks = Vec::new();
    for i in 0..4 {
        let base = if i == 0 { m } else { 2 * m - 1 };
        let total = cs.rhs(i).total_cap();
        let top = cs.rhs(i).terms().map(|(e, _)| e[1..].iter().map(|&a| a as u32).sum::<u32>()).max().unwrap_or(0);
        for s in 1..=top.max(1) {
            let req = base.saturating_sub(s);
            let ord = order_where(cs, i, |d, _| d == s);
            checks.push(check(format!("{} |a|+|b|={s}", NAMES[i]), req, ord, s, total));
        }
        let ord = order_where(cs, i, |d, _| d == 0);
        checks.push(check(format!("{}00", NAMES[i]), base, ord, 0, total));
    }
    if let Some(p) = shift {
        let sh = cs.shifted(p)?;
        for i in 0..4 {
            let req = lhs_power(m, i);
            let total = sh.rhs(i).total_cap();
            for (tag, range) in [("10", 1..5), ("01", 5..9)] {
                let ord = order_where(&sh, i, |d, e| d == 1 && range.clone().any(|k| e[k] == 1));
                checks.push(check(format!("shifted {}{tag}", NAMES[i]), req, ord, 1, total));
            }
        }
    }
    Ok(TsReport { checks })
}

/// `w·U′ = Q(w, U)` for `U = (Û, V)` where `Y = P + w²ᵐ(u₀ + Û)` and
/// `V = wÛ′`.
#[derive(Clone, Debug, PartialEq)]
pub struct BbReduction<C: Coeff> {
    pub m: u32,
    /// The part of `Y` of degree at most `2m − 1`.
    pub p: CauchyData<C>,
    /// Coefficients of `w²ᵐ` in `Y`.
    pub u0: [C; 4],
    /// Eight components over [`bb_vars`]: first `θÛ = V`, then `θV`.
    pub q: Vec<Jet<C>>,
}

impl<C: Coeff> BbReduction<C> {
    /// `Y = P + w²ᵐ(u₀ + Û)` from a solution `Û` (series in `w`).
    pub fn reconstruct(&self, u: &[Jet<C>]) -> Result<CauchyData<C>> {
        let m = self.m;
        let comps = [&self.p.g0, &self.p.g1, &self.p.f0, &self.p.f1];
        let mut out = Vec::with_capacity(4);
        for i in 0..4 {
            let mut tail = u[i].clone();
            tail.add_term(Exponent::from_slice(&[0]), self.u0[i].clone());
            out.push(comps[i].add(&tail.shift_up(0, 2 * m))?);
        }
        let [g0, g1, f0, f1]: [Jet<C>; 4] = out.try_into().expect("four components");
        Ok(CauchyData { f0, f1, g0, g1 })
    }

    /// The linear part `∂Q/∂U` at the origin.
    pub fn linear_part(&self) -> Vec<Vec<C>> {
        self.q
            .iter()
            .map(|qi| {
                (0..8)
                    .map(|k| {
                        let mut e = [0u16; 9];
                        e[1 + k] = 1;
                        qi.coeff(&e)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Splits a formal solution `Y` of the system between `E*` and `E` as
/// `P + w²ᵐU` and rewrites the system for `U` in first-order form. The
/// result is known to total `order` in [`bb_vars`]. Fails with
/// [`Error::NegativePower`] when the reduced right-hand side is not
/// holomorphic.
pub fn reduce_to_bb<C: Coeff>(e_star: &SingularODE<C>, e: &SingularODE<C>, h: &CauchyData<C>, order: u32) -> Result<BbReduction<C>> {
    let m = check_pair(e_star, e)?;
    let v = h.validate(m);
    if !v.is_empty() {
        return Err(Error::Precondition(v.join("; ")));
    }
    let comps = [&h.g0, &h.g1, &h.f0, &h.f1];
    if let Some(c) = comps.iter().find(|c| c.total_cap() < 2 * m) {
        return Err(Error::Truncation(format!("Cauchy data known to degree {}, need {}", c.total_cap(), 2 * m)));
    }
    let pp: Vec<Jet<C>> = comps.iter().map(|c| c.truncate_total(2 * m - 1).with_caps_unchecked(vec![UNCAPPED], UNCAPPED)).collect();
    let u0: [C; 4] = std::array::from_fn(|i| comps[i].coeff_u32(&[2 * m]));
    let lift_p: Vec<Jet<C>> = (0..4)
        .map(|i| {
            let mut j = pp[i].clone();
            j.add_term(Exponent::from_slice(&[(2 * m) as u16]), u0[i].clone());
            j
        })
        .collect();

    let total = order + 4 * m - 2;
    let have = e_star.phi().total_cap().min(e.phi().total_cap());
    if have < total + 4 {
        return Err(Error::Truncation(format!("ODE total caps must reach {} for order {order}, have {have}", total + 4)));
    }
    let space = Frame::<C>::space(&bb_vars(), total);
    let wm1 = |j: &Jet<C>| j.shift_up(1, m - 1);
    let one = space.one_like();
    let mm = m as i64;
    let mut fr = Frame {
        m,
        y: std::array::from_fn(|_| space.zero_like()),
        dy0: space.zero_like(),
        sdy: std::array::from_fn(|_| space.zero_like()),
        theta: Vec::new(),
        v: Vec::new(),
        space,
    };
    let mut dy: Vec<Jet<C>> = Vec::new();
    for i in 0..4 {
        let u = fr.sym(i);
        let vv = fr.sym(4 + i);
        let p = fr.lift_w(&lift_p[i])?;
        let tp = fr.lift_w(&theta_w(&lift_p[i]))?;
        let ttp = fr.lift_w(&theta_w(&theta_w(&lift_p[i])))?;
        fr.y[i] = p.add(&fr.wp(&u, 2 * m))?;
        // θ(w²ᵐU) = w²ᵐ(2mU + V)
        dy.push(tp.add(&fr.wp(&u.scale_int(2 * mm).add(&vv)?, 2 * m))?);
        let s = lhs_power(m, i);
        // θ²(w²ᵐU) − θ(w²ᵐU) = w²ᵐ((4m² − 2m)U + (4m − 1)V + θV)
        let known = fr.wp(&ttp.sub(&tp)?, s).add(&fr.wp(&u.scale_int(4 * mm * mm - 2 * mm).add(&vv.scale_int(4 * mm - 1))?, s + 2 * m))?;
        fr.v.push((known, fr.wp(&one, s + 2 * m)));
    }
    fr.dy0 = dy[0].clone();
    fr.sdy = std::array::from_fn(|i| wm1(&dy[i]));
    for i in 0..4 {
        fr.theta.push((wm1(&fr.sym(4 + i)), None));
    }
    for i in 0..4 {
        fr.theta.push((fr.space.zero_like(), Some((i, wm1(&one)))));
    }

    let (e0, mut mat) = affine_parts(&fr, e_star, e)?;
    let shifts: Vec<u32> = (0..4).map(|i| lhs_power(m, i) + 2 * m).collect();
    for row in mat.iter_mut() {
        for (c, entry) in row.iter_mut().enumerate() {
            *entry = entry.shift_down(0, shifts[c]).map_err(|err| Error::Invariant(format!("unexpected coefficient of the second derivatives: {err}")))?;
        }
    }
    let x = solve_series(mat, e0.iter().map(Jet::neg).collect())?;
    let bv = bb_vars();
    let mut q: Vec<Jet<C>> = (0..4).map(|i| Jet::zero(bv.clone(), vec![UNCAPPED; 9], order).var_at(5 + i)).collect();
    for i in 0..4 {
        let wi = x[i].shift_down(0, shifts[i]).map_err(|err| match err {
            Error::NotDivisible { monomial, .. } => Error::NegativePower(format!(
                "{} has a term w^{} U^{:?} V^{:?} below w^{} (the bound on the {} coefficients fails)",
                NAMES[i],
                monomial[0],
                &monomial[1..5],
                &monomial[5..9],
                shifts[i],
                if monomial[1..].iter().all(|&a| a == 0) { "(0,0)" } else { "linear" },
            )),
            other => other,
        })?;
        if wi.total_cap() < order {
            return Err(Error::Truncation(format!("reduced system known to total {}, asked for {order}", wi.total_cap())));
        }
        let mut qi = Jet::zero(bv.clone(), vec![UNCAPPED; 9], order);
        for (e, c) in wi.truncate_total(order).terms() {
            qi.add_term(e.clone(), c.clone());
        }
        q.push(qi);
    }
    let [g0, g1, f0, f1]: [Jet<C>; 4] = pp.try_into().expect("four components");
    Ok(BbReduction { m, p: CauchyData { f0, f1, g0, g1 }, u0, q })
}
