//! Singular second-order ODEs `w″ = wᵐ Φ(z, w, w′/wᵐ)` and their
//! construction from the Segre family of a hypersurface.

use crate::error::{Error, Result};
use crate::hypersurface::{retag, FormKind, FuchsReport, Hypersurface};
use crate::jet::{solve_fixed_point, vars, Exponent, Jet, Vars, UNCAPPED};
use crate::scalar::Coeff;

pub fn ode_vars() -> Vars {
    vars(&["z", "w", "zeta"])
}

/// Per-variable caps for an ODE jet, plus the total cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OdeCaps {
    pub z: u32,
    pub w: u32,
    pub zeta: u32,
    pub total: u32,
}

impl OdeCaps {
    /// Caps that decide every condition of the Fuchsian ODE test.
    pub fn for_m(m: u32) -> Self {
        OdeCaps { z: 2 * m + 2, w: 2 * m + 4, zeta: 2 * m + 2, total: 2 * m + 2 }
    }

    /// [`OdeCaps::for_m`] with every cap raised by `extra`.
    pub fn with_margin(m: u32, extra: u32) -> Self {
        let c = Self::for_m(m);
        OdeCaps { z: c.z + extra, w: c.w + extra, zeta: c.zeta + extra, total: c.total + extra }
    }

    fn vec(&self) -> Vec<u32> {
        vec![self.z, self.w, self.zeta]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingularODE<C: Coeff> {
    pub m: u32,
    phi: Jet<C>,
}

impl<C: Coeff> SingularODE<C> {
    /// Wraps `Φ`, checking `Φ = O(ζ²)`.
    pub fn new(m: u32, phi: Jet<C>) -> Result<Self> {
        if m == 0 {
            return Err(Error::Invalid("m must be positive".into()));
        }
        if phi.vars()[..] != ode_vars()[..] {
            return Err(Error::VariableMismatch(phi.vars().to_vec(), ode_vars().to_vec()));
        }
        if let Some((e, _)) = phi.terms().find(|(e, _)| e[2] < 2) {
            return Err(Error::Invariant(format!(
                "Phi has a term of zeta-degree {} (z^{} w^{})",
                e[2], e[0], e[1]
            )));
        }
        Ok(SingularODE { m, phi })
    }

    /// `Φ = w^{m−1} ζ²`.
    pub fn model(m: u32, caps: OdeCaps) -> Self {
        let p = Jet::zero(ode_vars(), caps.vec(), caps.total);
        SingularODE { m, phi: p.monomial_like(&[0, (m - 1) as u16, 2], C::one()) }
    }

    pub fn phi(&self) -> &Jet<C> {
        &self.phi
    }

    pub fn into_phi(self) -> Jet<C> {
        self.phi
    }

    /// `Φ_{jkl}`: coefficient of `zᵏ wʲ ζˡ`.
    pub fn coeff_jkl(&self, j: u32, k: u32, l: u32) -> C {
        self.phi.coeff_u32(&[k, j, l])
    }

    /// `Φ_{kl}(w)` as a jet in `w`; `None` when no coefficient is known.
    pub fn phi_kl(&self, k: u32, l: u32) -> Option<Jet<C>> {
        let caps = self.phi.caps();
        if k > caps[0] || l > caps[2] || k + l > self.phi.total_cap() {
            return None;
        }
        let total = (self.phi.total_cap() - k - l).min(caps[1]);
        let mut out = Jet::zero(vars(&["w"]), vec![UNCAPPED], total);
        for (e, c) in self.phi.terms() {
            if e[0] as u32 == k && e[2] as u32 == l {
                out.add_term(Exponent::from_slice(&[e[1]]), c.clone());
            }
        }
        Some(out)
    }

    /// The order conditions of the Fuchsian ODE definition.
    pub fn check_fuchsian(&self) -> FuchsReport {
        let m = self.m as i64;
        let mut conds: Vec<(i64, i64, i64)> = vec![(0, 2, m - 1), (0, 3, 2 * m - 2), (1, 2, m - 1), (1, 3, 2 * m - 2)];
        for l in 4..=(2 * m + 1) {
            conds.push((0, l, 2 * m - l + 2));
        }
        for k in 2..=(2 * m + 1) {
            conds.push((k, 2, 2 * m - k));
        }
        for s in 5..=(2 * m + 2) {
            for k in 1..=(s - 3) {
                conds.push((k, s - k, 2 * m - s + 3));
            }
        }
        let mut rep = FuchsReport::new(!C::is_exact());
        for (k, l, bound) in conds {
            let name = format!("Phi{k}{l}");
            match self.phi_kl(k as u32, l as u32) {
                Some(series) => rep.record(&name, &series, bound, 0),
                None if bound > 0 => rep.undecidable.push(format!("ord {name} >= {bound} (not in the truncation)")),
                None => {}
            }
        }
        rep.finish()
    }
}

/// Builds the associated ODE of an exponential form.
///
/// Along a Segre graph `w = η exp(iη^{m−1}φ(z, ξ, η))` one has
/// `ζ = w′/wᵐ = i φ_z E^{1−m}` with `E = w/η`, so `(ξ, η)` solve
///
/// ```text
/// η = w exp(−iη^{m−1}φ),   ξ = ε(−iζ exp(i(m−1)η^{m−1}φ) − (φ_z − εξ)),
/// ```
///
/// and differentiating again gives
/// `Φ = w^{m−1}ζ² + i exp(−i(m−1)η^{m−1}φ) φ_zz`.
pub fn associate<C: Coeff>(t: &Hypersurface<C>, caps: OdeCaps) -> Result<SingularODE<C>> {
    if t.kind != FormKind::Exponential {
        return Err(Error::Precondition("associate needs an exponential form".into()));
    }
    let m = t.m;
    let i = C::imag_unit();
    let eps = C::from_int(t.epsilon as i64);
    let phi = t.bracket();
    let tp = phi.var_at(2).pow(m - 1)?;
    let tphi = tp.mul(phi)?;
    let phi_z = phi.derive_at(0);
    let phi_zz = phi_z.derive_at(0);

    // fixed-point map on (z, w, zeta, xi, eta)
    let v5 = vars(&["z", "w", "zeta", "xi", "eta"]);
    let caps5 = vec![caps.z, caps.w, caps.zeta, caps.zeta, caps.w];
    let big = caps.total + m + 2;
    let p5 = Jet::<C>::zero(v5.clone(), caps5.clone(), big);
    let lift = |j: &Jet<C>| -> Result<Jet<C>> { Ok(j.embed(&v5, &[0, 3, 4])?.truncate(&caps5, big)) };
    let a = lift(&tphi.scale(&i.neg()).exp()?)?;
    let b = lift(&tphi.scale(&i.scale_int(m as i64 - 1)).exp()?)?;
    let chi = phi.var_at(1).scale(&eps);
    let rest = lift(&phi_z.sub(&chi.truncate_total(phi_z.total_cap()))?)?;
    let g_eta = p5.var_at(1).mul(&a)?;
    let g_xi = p5.var_at(2).mul(&b)?.scale(&i.neg()).sub(&rest)?.scale(&eps);
    let sol = solve_fixed_point(&[g_xi, g_eta], 2)?;
    let (xi, eta) = (&sol[0], &sol[1]);

    let p3 = Jet::<C>::zero(ode_vars(), caps.vec(), big);
    let k = tphi.scale(&i.neg().scale_int(m as i64 - 1)).exp()?.mul(&phi_zz)?.scale(&i);
    let k = retag(&k, vars(&["z", "xi", "eta"]))?;
    let z = p3.var_at(0);
    let extra = k.compose(&[z, xi.clone(), eta.clone()])?;
    let lead = p3.monomial_like(&[0, (m - 1) as u16, 2], C::one());
    let phi_out = lead.add(&extra)?.truncate(&caps.vec(), caps.total);
    SingularODE::new(m, phi_out)
}

/// A residual series that should vanish within its caps.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual<C: Coeff> {
    pub residual: Jet<C>,
}

/// `w″ − wᵐΦ(z, w, w′/wᵐ)` as a jet in `(z, xi, eta)`.
pub type SegreResidual<C> = Residual<C>;

impl<C: Coeff> Residual<C> {
    pub fn is_zero(&self) -> bool {
        self.residual.is_zero()
    }

    /// Lowest-degree nonzero monomial of the residual.
    pub fn leading(&self) -> Option<(Vec<u32>, C)> {
        let ord = self.residual.order()?;
        self.residual
            .terms()
            .find(|(e, _)| e.iter().map(|&x| x as u32).sum::<u32>() == ord)
            .map(|(e, c)| (e.iter().map(|&x| x as u32).collect(), c.clone()))
    }
}

/// Checks that every Segre graph `w(z) = η exp(iη^{m−1}φ(z, ξ, η))` solves
/// the ODE, treating `ξ, η` as extra jet variables. `caps` bounds the
/// degrees in `(z, xi, eta)`.
pub fn verify_segre_solutions<C: Coeff>(
    t: &Hypersurface<C>,
    e: &SingularODE<C>,
    caps: [u32; 3],
    total: u32,
) -> Result<SegreResidual<C>> {
    if t.kind != FormKind::Exponential {
        return Err(Error::Precondition("verification needs an exponential form".into()));
    }
    let m = t.m;
    let i = C::imag_unit();
    let v = vars(&["z", "xi", "eta"]);
    let phi = retag(t.bracket(), v.clone())?.truncate(&caps, total);
    let eta = phi.var_at(2);
    let x = eta.pow(m - 1)?.mul(&phi)?.scale(&i);
    let ee = x.exp()?;
    let w = ee.shift_up(2, 1);
    let w1 = w.derive_at(0);
    let w2 = w1.derive_at(0);
    // ζ = w′/wᵐ = (w′/ηᵐ) / Eᵐ
    let zeta = w1.shift_down(2, m)?.mul(&ee.pow(m)?.reciprocal()?)?;
    let phi_at = e.phi().compose(&[phi.var_at(0), w.clone(), zeta])?;
    let rhs = w.pow(m)?.mul(&phi_at)?;
    let residual = w2.sub(&rhs)?;
    Ok(SegreResidual { residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypersurface::default_cap;
    use crate::scalar::GaussRat;

    type G = GaussRat;

    fn model_exp(m: u32, cap: u32) -> Hypersurface<G> {
        Hypersurface::model(FormKind::Exponential, m, 1, cap).unwrap()
    }

    #[test]
    fn model_gives_model_ode() {
        for m in 1..=3 {
            let t = model_exp(m, default_cap(m));
            let e = associate(&t, OdeCaps::for_m(m)).unwrap();
            assert_eq!(e.phi().len(), 1, "m = {m}: {:?}", e.phi());
            assert_eq!(e.coeff_jkl(m - 1, 0, 2), G::from_int(1));
            assert!(e.check_fuchsian().is_fuchsian());
            let r = verify_segre_solutions(&t, &e, [4, 4, 2 * m + 4], 2 * m + 4).unwrap();
            assert!(r.is_zero(), "{:?}", r.residual);
        }
    }

    #[test]
    fn zero_phi_leaves_residual() {
        let m = 2;
        let t = model_exp(m, 10);
        let caps = OdeCaps::for_m(m);
        let zero = SingularODE::<G>::new(m, Jet::zero(ode_vars(), caps.vec(), caps.total)).unwrap();
        let r = verify_segre_solutions(&t, &zero, [4, 4, 2 * m + 4], 12).unwrap();
        let (e, c) = r.leading().unwrap();
        assert_eq!(e, vec![0, 2, 2 * m - 1]);
        assert_eq!(c, G::from_int(-1));
    }

    #[test]
    fn constant_phi02_is_not_fuchsian() {
        let caps = OdeCaps::for_m(2);
        let p = Jet::<G>::zero(ode_vars(), caps.vec(), caps.total).monomial_like(&[0, 0, 2], G::from_int(1));
        let rep = SingularODE::new(2, p).unwrap().check_fuchsian();
        assert!(rep.violations.contains(&"ord Phi02 = 0 < 1".to_string()));
    }

    #[test]
    fn low_zeta_terms_rejected() {
        let caps = OdeCaps::for_m(1);
        let p = Jet::<G>::zero(ode_vars(), caps.vec(), caps.total).monomial_like(&[1, 0, 1], G::from_int(1));
        assert!(matches!(SingularODE::new(1, p), Err(Error::Invariant(_))));
    }
}

#[cfg(test)]
mod nonmodel_tests {
    use super::*;
    use crate::hypersurface::default_cap;
    use crate::scalar::GaussRat;

    type G = GaussRat;

    #[test]
    fn perturbed_hypersurface_segre_residual_vanishes() {
        for m in 1..=3u32 {
            let h = Hypersurface::<G>::from_h(
                m,
                1,
                default_cap(m),
                vec![
                    ((2, 2), vec![(m - 1, G::from_int(2)), (m, G::rat(1, 3))]),
                    ((2, 3), vec![(2 * m - 2, G::from_parts(1, 1, 1, 2))]),
                    ((3, 2), vec![(2 * m - 2, G::from_parts(1, 1, -1, 2))]),
                    ((3, 3), vec![(0, G::from_int(1))]),
                ],
            )
            .unwrap();
            let t = h.convert(FormKind::Exponential).unwrap();
            let e = associate(&t, OdeCaps::for_m(m)).unwrap();
            let r = verify_segre_solutions(&t, &e, [UNCAPPED; 3], e.phi().total_cap()).unwrap();
            assert!(r.residual.total_cap() >= 2 * m + 1, "known to {}", r.residual.total_cap());
            assert!(r.is_zero(), "m = {m}: {:?}", r.leading());
        }
    }
}
