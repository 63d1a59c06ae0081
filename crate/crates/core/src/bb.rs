//! Briot-Bouquet systems `x·y′ = F(x, y)`: formal solutions, resonances,
//! linear singular systems and numerical experiments in `t = ln x`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jet::{vars, Exponent, Jet, Vars};
use crate::linalg::rref;
use crate::scalar::Coeff;

/// `[x, y1, .., yn]`.
pub fn bb_space(n: usize) -> Vars {
    let mut names = vec!["x".to_string()];
    names.extend((1..=n).map(|i| format!("y{i}")));
    names.into()
}

#[derive(Clone, Debug)]
pub struct BbSystem<C: Coeff> {
    pub n: usize,
    /// Right-hand sides; variable 0 is `x`, the rest are `y`.
    pub f: Vec<Jet<C>>,
    /// `F_y(0, 0)`.
    pub a: Vec<Vec<C>>,
}

impl<C: Coeff> BbSystem<C> {
    pub fn new(f: Vec<Jet<C>>) -> Result<Self> {
        let n = f.len();
        if n == 0 {
            return Err(Error::Arity { expected: 1, got: 0 });
        }
        for fi in &f {
            if fi.nvars() != n + 1 {
                return Err(Error::Arity { expected: n + 1, got: fi.nvars() });
            }
            f[0].check_same_space(fi)?;
            if !fi.is_unit_weighted() {
                return Err(Error::Invalid("Briot-Bouquet right-hand sides must be unit weighted".into()));
            }
        }
        let a = f
            .iter()
            .map(|fi| {
                (0..n)
                    .map(|j| {
                        let mut e = vec![0u16; n + 1];
                        e[j + 1] = 1;
                        fi.coeff(&e)
                    })
                    .collect()
            })
            .collect();
        Ok(BbSystem { n, f, a })
    }

    /// Builds `x·y′ = A y + b(x, y)` from polynomial terms `(exponent, coefficient)`
    /// per component over [`bb_space`], known to total degree `total`.
    pub fn from_terms(n: usize, total: u32, terms: Vec<Vec<(Vec<u16>, C)>>) -> Result<Self> {
        if terms.len() != n {
            return Err(Error::Arity { expected: n, got: terms.len() });
        }
        let space = bb_space(n);
        let mut f = Vec::with_capacity(n);
        for comp in terms {
            let mut j = Jet::zero_total(space.clone(), total);
            for (e, c) in comp {
                if e.len() != n + 1 {
                    return Err(Error::Arity { expected: n + 1, got: e.len() });
                }
                j.add_term(Exponent::from_slice(&e), c);
            }
            f.push(j);
        }
        Self::new(f)
    }

    /// Total degree to which every component is known.
    pub fn known_order(&self) -> u32 {
        self.f.iter().map(|j| j.total_cap()).min().unwrap_or(0)
    }

    fn x_space(&self) -> Vars {
        let name = self.f[0].vars()[0].clone();
        vars(&[name.as_str()])
    }

    /// `x·y′ − F(x, y)` for series `y` in `x`.
    pub fn residual(&self, y: &[Jet<C>]) -> Result<Vec<Jet<C>>> {
        if y.len() != self.n {
            return Err(Error::Arity { expected: self.n, got: y.len() });
        }
        let x = y[0].var_at(0);
        let mut inner = vec![x.clone()];
        inner.extend(y.iter().cloned());
        let mut out = Vec::with_capacity(self.n);
        for (fi, yi) in self.f.iter().zip(y) {
            let lhs = x.mul(&yi.derive_at(0))?;
            out.push(lhs.sub(&fi.compose(&inner)?)?);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// resonances

/// Numeric eigenvalue with an inclusion radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Enclosure {
    pub center: Complex64,
    pub radius: f64,
}

#[derive(Clone, Debug)]
pub struct ResonanceReport<C: Coeff> {
    /// Monic characteristic polynomial, constant term first.
    pub char_poly: Vec<C>,
    /// Positive integers `k ≤ probed` with `det(kI − A) = 0`.
    pub resonances: Vec<u32>,
    pub probed: u32,
    pub eigenvalues: Vec<Enclosure>,
}

impl<C: Coeff> ResonanceReport<C> {
    pub fn is_resonant(&self) -> bool {
        !self.resonances.is_empty()
    }
}

/// Faddeev–LeVerrier: coefficients of `det(λI − A)`, constant term first.
pub fn char_poly<C: Coeff>(a: &[Vec<C>]) -> Result<Vec<C>> {
    let n = a.len();
    let mut coeffs = vec![C::zero(); n + 1];
    coeffs[n] = C::one();
    let mut m: Vec<Vec<C>> = vec![vec![C::zero(); n]; n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = vec![vec![C::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = C::zero();
                for l in 0..n {
                    s.add_assign(&a[i][l].mul(&m[l][j]));
                }
                next[i][j] = s;
            }
            next[i][i].add_assign(&coeffs[n - k + 1]);
        }
        m = next;
        let mut tr = C::zero();
        for i in 0..n {
            for l in 0..n {
                tr.add_assign(&a[i][l].mul(&m[l][i]));
            }
        }
        coeffs[n - k] = tr.neg().mul(&C::from_int(k as i64).inv()?);
    }
    Ok(coeffs)
}

fn eval_poly<C: Coeff>(p: &[C], x: &C) -> C {
    p.iter().rev().fold(C::zero(), |acc, c| acc.mul(x).add(c))
}

fn eval_poly_c(p: &[Complex64], x: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c)
}

/// Weierstrass iteration; the returned radii are `n·|p(z_i)/Π(z_i − z_j)|`,
/// whose discs cover all roots.
fn poly_roots(p: &[Complex64]) -> Vec<Enclosure> {
    let n = p.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let seed = Complex64::new(0.4, 0.9);
    let bound = 1.0 + p[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * bound.min(2.0)).collect();
    let corr = |z: &[Complex64], i: usize| {
        let mut den = Complex64::new(1.0, 0.0);
        for (j, zj) in z.iter().enumerate() {
            if j != i {
                den *= z[i] - zj;
            }
        }
        eval_poly_c(p, z[i]) / den
    };
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let d = corr(&z, i);
            if d.is_finite() {
                z[i] -= d;
                moved = moved.max(d.norm());
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    (0..n)
        .map(|i| Enclosure { center: z[i], radius: n as f64 * corr(&z, i).norm() })
        .collect()
}

/// Exact integer-resonance test on `det(kI − A)` for `1 ≤ k ≤ min(limit, root bound)`.
pub fn resonances<C: Coeff>(a: &[Vec<C>], limit: u32) -> Result<ResonanceReport<C>> {
    let p = char_poly(a)?;
    let pc: Vec<Complex64> = p.iter().map(|c| c.to_c64().unwrap_or_default()).collect();
    let cauchy = 1.0 + pc[..pc.len() - 1].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let probed = if cauchy.is_finite() { limit.min(cauchy.ceil() as u32 + 1) } else { limit };
    let res: Vec<u32> = (1..=probed)
        .filter(|&k| eval_poly(&p, &C::from_int(k as i64)).is_zero())
        .collect();
    let mut eigenvalues = poly_roots(&pc);
    for &k in &res {
        let kc = Complex64::new(k as f64, 0.0);
        if let Some(e) = eigenvalues
            .iter_mut()
            .filter(|e| e.radius != 0.0)
            .min_by(|a, b| (a.center - kc).norm().total_cmp(&(b.center - kc).norm()))
        {
            if C::is_exact() {
                *e = Enclosure { center: kc, radius: 0.0 };
            }
        }
    }
    Ok(ResonanceReport { char_poly: p, resonances: res, probed, eigenvalues })
}

// ---------------------------------------------------------------------------
// formal solutions

#[derive(Clone, Debug, PartialEq)]
pub struct FreeParam<C: Coeff> {
    pub name: String,
    pub level: u32,
    pub component: usize,
    pub value: C,
}

/// Name of the free value of component `i` at resonant level `k`.
pub fn free_name(k: u32, i: usize) -> String {
    format!("a{k}_{}", i + 1)
}

#[derive(Clone, Debug)]
pub struct FormalSolution<C: Coeff> {
    pub n: usize,
    pub order: u32,
    /// `coeffs[k-1][i]` is the coefficient of `xᵏ` in `yᵢ`.
    pub coeffs: Vec<Vec<C>>,
    pub free: Vec<FreeParam<C>>,
    /// First level whose equations have no solution.
    pub inconsistent_at: Option<u32>,
    pub resonance: ResonanceReport<C>,
    x_space: Vars,
}

impl<C: Coeff> FormalSolution<C> {
    pub fn is_complete(&self) -> bool {
        self.inconsistent_at.is_none()
    }

    /// Number of levels actually determined.
    pub fn reached(&self) -> u32 {
        self.coeffs.len() as u32
    }

    /// The solution as jets in `x` known to the reached order.
    pub fn series(&self) -> Vec<Jet<C>> {
        series_of(&self.x_space, &self.coeffs, self.reached())
    }

    /// `max_k |a_k|^{1/k}` over computed levels.
    pub fn growth(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let nrm = a.iter().map(|c| c.to_c64().map_or(0.0, |z| z.norm())).fold(0.0, f64::max);
                nrm.powf(1.0 / (k + 1) as f64)
            })
            .fold(0.0, f64::max)
    }
}

fn series_of<C: Coeff>(space: &Vars, coeffs: &[Vec<C>], total: u32) -> Vec<Jet<C>> {
    let n = coeffs.first().map_or(0, |c| c.len());
    (0..n)
        .map(|i| {
            let mut j = Jet::zero_total(space.clone(), total);
            for (k, a) in coeffs.iter().enumerate() {
                j.add_term(Exponent::from_slice(&[(k + 1) as u16]), a[i].clone());
            }
            j
        })
        .collect()
}

/// Solves `(kI − A) a_k = b_k` level by level up to `order`. Kernel directions
/// at resonant levels take values from `free` (default 0).
pub fn formal_solve<C: Coeff>(
    sys: &BbSystem<C>,
    order: u32,
    free: &BTreeMap<String, C>,
) -> Result<FormalSolution<C>> {
    if order == 0 {
        return Err(Error::Precondition("order must be at least 1".into()));
    }
    if sys.known_order() < order {
        return Err(Error::Truncation(format!(
            "right-hand side known to degree {} but order {order} requested",
            sys.known_order()
        )));
    }
    let n = sys.n;
    let resonance = resonances(&sys.a, order)?;
    let space = sys.x_space();
    let mut sol = FormalSolution {
        n,
        order,
        coeffs: Vec::new(),
        free: Vec::new(),
        inconsistent_at: None,
        resonance,
        x_space: space.clone(),
    };
    let origin = vec![0u16; n + 1];
    if sys.f.iter().any(|fi| !fi.coeff(&origin).is_zero()) {
        sol.inconsistent_at = Some(0);
        return Ok(sol);
    }
    for k in 1..=order {
        let y = series_of(&space, &sol.coeffs, k);
        let y = if y.is_empty() { vec![Jet::zero_total(space.clone(), k); n] } else { y };
        let mut inner = vec![Jet::zero_total(space.clone(), k).var_at(0)];
        inner.extend(y);
        let mut rows = Vec::with_capacity(n);
        for (i, fi) in sys.f.iter().enumerate() {
            let b = fi.truncate_total(k).compose(&inner)?.coeff(&[k as u16]);
            let mut row: Vec<C> = (0..n).map(|j| sys.a[i][j].neg()).collect();
            row[i].add_assign(&C::from_int(k as i64));
            row.push(b);
            rows.push(row);
        }
        let (red, piv) = rref(rows)?;
        if piv.last() == Some(&n) {
            sol.inconsistent_at = Some(k);
            return Ok(sol);
        }
        let mut a = vec![C::zero(); n];
        for j in (0..n).filter(|j| !piv.contains(j)) {
            let name = free_name(k, j);
            let v = free.get(&name).cloned().unwrap_or_else(C::zero);
            sol.free.push(FreeParam { name, level: k, component: j, value: v.clone() });
            a[j] = v;
        }
        for (r, &p) in piv.iter().enumerate() {
            let mut v = red[r][n].clone();
            for j in (0..n).filter(|j| !piv.contains(j)) {
                v = v.sub(&red[r][j].mul(&a[j]));
            }
            a[p] = v;
        }
        sol.coeffs.push(a);
    }
    for (i, r) in sys.residual(&sol.series())?.iter().enumerate() {
        if let Some(ord) = r.truncate_total(order).order() {
            return Err(Error::Invariant(format!("residual of component {} has order {ord}", i + 1)));
        }
    }
    Ok(sol)
}

// ---------------------------------------------------------------------------
// linear systems

/// `y′ = A(x) y` with `A = x^{−p} H(x)`, `H` a matrix of jets in `x`.
#[derive(Clone, Debug)]
pub struct LinearSingularSystem<C: Coeff> {
    pub pole_order: u32,
    pub h: Vec<Vec<Jet<C>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Singularity {
    Nonsingular,
    /// Pole of order one.
    Fuchsian,
    /// Pole of the given order, at least two.
    NonFuchsian(u32),
}

/// Classifies by the effective pole order `p − min ord H` only.
pub fn classify_linear<C: Coeff>(sys: &LinearSingularSystem<C>) -> Singularity {
    let v = sys.h.iter().flatten().filter_map(|j| j.order()).min();
    let eff = match v {
        None => 0,
        Some(v) => sys.pole_order.saturating_sub(v),
    };
    match eff {
        0 => Singularity::Nonsingular,
        1 => Singularity::Fuchsian,
        p => Singularity::NonFuchsian(p),
    }
}

// ---------------------------------------------------------------------------
// numerics

/// `F` as a list of float monomials.
#[derive(Clone, Debug)]
struct FloatRhs {
    n: usize,
    terms: Vec<Vec<(Vec<u16>, Complex64)>>,
}

impl FloatRhs {
    fn new<C: Coeff>(sys: &BbSystem<C>) -> Result<Self> {
        let terms = sys
            .f
            .iter()
            .map(|fi| {
                fi.terms()
                    .map(|(e, c)| {
                        c.to_c64()
                            .map(|z| (e.to_vec(), z))
                            .ok_or_else(|| Error::Invalid("coefficient has no float value".into()))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FloatRhs { n: sys.n, terms })
    }

    fn eval(&self, x: f64, y: &[Complex64]) -> Vec<Complex64> {
        self.terms
            .iter()
            .map(|comp| {
                comp.iter()
                    .map(|(e, c)| {
                        let mut t = c * x.powi(e[0] as i32);
                        for (yj, &k) in y.iter().zip(&e[1..]) {
                            t *= yj.powu(k as u32);
                        }
                        t
                    })
                    .sum()
            })
            .collect()
    }

    /// `Σ |c| a^{e0} R^{|e_y|−1}` over the worst component; `None` if some
    /// term does not vanish at `y = 0`.
    fn lipschitz(&self, a: f64, r: f64) -> Option<f64> {
        let mut c = 0.0f64;
        for comp in &self.terms {
            let mut s = 0.0;
            for (e, z) in comp {
                let d: i32 = e[1..].iter().map(|&k| k as i32).sum();
                if d == 0 {
                    return None;
                }
                s += z.norm() * a.powi(e[0] as i32) * r.powi(d - 1);
            }
            c = c.max(s);
        }
        Some(c)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    pub samples_per_decade: u32,
    /// Trajectories leaving `|y| ≤ escape` are abandoned.
    pub escape: f64,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { rtol: 1e-10, atol: 1e-30, samples_per_decade: 20, escape: 1e8, max_steps: 1_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub xs: Vec<f64>,
    pub ys: Vec<Vec<Complex64>>,
}

fn sup_norm(y: &[Complex64]) -> f64 {
    y.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Log-uniform grid from `a` down to `x_min`, both included.
pub fn log_grid(a: f64, x_min: f64, per_decade: u32) -> Vec<f64> {
    let decades = (a / x_min).log10();
    let steps = ((decades * per_decade as f64).ceil() as usize).max(1);
    let (la, lb) = (a.ln(), x_min.ln());
    let mut g: Vec<f64> = (0..=steps).map(|i| (la + (lb - la) * i as f64 / steps as f64).exp()).collect();
    g[0] = a;
    g[steps] = x_min;
    g
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a> {
    rhs: &'a FloatRhs,
    opts: IntegrateOptions,
}

impl Stepper<'_> {
    // real state [Re y, Im y]
    fn field(&self, t: f64, u: &[f64]) -> Vec<f64> {
        let n = self.rhs.n;
        let y: Vec<Complex64> = (0..n).map(|i| Complex64::new(u[i], u[n + i])).collect();
        let f = self.rhs.eval(t.exp(), &y);
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            out[i] = f[i].re;
            out[n + i] = f[i].im;
        }
        out
    }

    fn step(&self, t: f64, u: &[f64], k1: &[f64], h: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let dim = u.len();
        let mut ks: Vec<Vec<f64>> = vec![k1.to_vec()];
        let cs = [C2, C3, C4, C5, 1.0, 1.0];
        for (s, row) in A.iter().enumerate() {
            let mut v = u.to_vec();
            for (j, kj) in ks.iter().enumerate() {
                if row[j] != 0.0 {
                    for d in 0..dim {
                        v[d] += h * row[j] * kj[d];
                    }
                }
            }
            if s == 5 {
                let k7 = self.field(t + h, &v);
                ks.push(k7);
                let mut err = 0.0;
                for d in 0..dim {
                    let e: f64 = (0..7).map(|j| E[j] * ks[j][d]).sum::<f64>() * h;
                    let sc = self.opts.atol + self.opts.rtol * u[d].abs().max(v[d].abs());
                    err += (e / sc).powi(2);
                }
                let err = (err / dim as f64).sqrt();
                return (v, ks.pop().unwrap(), err);
            }
            ks.push(self.field(t + cs[s] * h, &v));
        }
        unreachable!()
    }
}

/// Integrates `dy/dt = F(eᵗ, y)` from `t = ln a` down to `ln x_min`, sampling
/// on [`log_grid`].
pub fn numeric_integrate<C: Coeff>(
    sys: &BbSystem<C>,
    y_a: &[Complex64],
    a: f64,
    x_min: f64,
    opts: IntegrateOptions,
) -> Result<Trajectory> {
    if y_a.len() != sys.n {
        return Err(Error::Arity { expected: sys.n, got: y_a.len() });
    }
    if !(x_min > 0.0 && x_min < a && a.is_finite()) {
        return Err(Error::Precondition(format!("need 0 < x_min < a, got a = {a}, x_min = {x_min}")));
    }
    let rhs = FloatRhs::new(sys)?;
    let st = Stepper { rhs: &rhs, opts };
    let n = sys.n;
    let grid = log_grid(a, x_min, opts.samples_per_decade);
    let mut u: Vec<f64> = y_a.iter().map(|z| z.re).chain(y_a.iter().map(|z| z.im)).collect();
    let mut t = a.ln();
    let mut k1 = st.field(t, &u);
    let mut h: f64 = -1e-3;
    let mut traj = Trajectory { xs: vec![a], ys: vec![y_a.to_vec()] };
    let mut steps = 0;
    for &target in &grid[1..] {
        let tt = target.ln();
        while t > tt {
            steps += 1;
            let x_now = t.exp();
            let fail = move |reason: &str| Error::Integration { x: x_now, reason: reason.to_string() };
            if steps > opts.max_steps {
                return Err(fail("step budget exhausted"));
            }
            let last = h.abs() >= t - tt;
            let hh = if last { tt - t } else { h };
            if hh.abs() < 1e-14 * t.abs().max(1.0) && !last {
                return Err(fail("step size underflow"));
            }
            let (v, k7, err) = st.step(t, &u, &k1, hh);
            if err.is_finite() && err <= 1.0 {
                t = if last { tt } else { t + hh };
                u = v;
                k1 = k7;
                let y: Vec<Complex64> = (0..n).map(|i| Complex64::new(u[i], u[n + i])).collect();
                if !(sup_norm(&y) <= opts.escape) {
                    return Err(fail("trajectory left the evaluation region"));
                }
            }
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) } else { 0.2 };
            h = -(hh.abs() * fac);
        }
        traj.xs.push(target);
        traj.ys.push((0..n).map(|i| Complex64::new(u[i], u[n + i])).collect());
    }
    Ok(traj)
}

#[derive(Clone, Debug)]
pub struct FlatnessReport {
    /// `|F(x, y)| ≤ C|y|` on the tube.
    pub c: f64,
    pub c_tilde: f64,
    pub tube: f64,
    /// `min |y(x)| / (C̃ x^C)` over samples.
    pub margin: f64,
    pub trajectory: Trajectory,
    /// Per-sample `(x, |y|, C̃ x^C)`.
    pub rows: Vec<(f64, f64, f64)>,
}

impl FlatnessReport {
    pub fn holds(&self) -> bool {
        self.margin >= 1.0 - 1e-9
    }
}

/// Checks `|y(x)| ≥ C̃·x^C` along a numerical trajectory; norms are sup norms.
pub fn flatness_experiment<C: Coeff>(
    sys: &BbSystem<C>,
    y_a: &[Complex64],
    a: f64,
    x_min: f64,
    opts: IntegrateOptions,
) -> Result<FlatnessReport> {
    let ya = sup_norm(y_a);
    if ya == 0.0 {
        return Err(Error::Precondition("terminal data must be nonzero".into()));
    }
    let traj = numeric_integrate(sys, y_a, a, x_min, opts)?;
    let tube = 2.0 * traj.ys.iter().map(|y| sup_norm(y)).fold(0.0, f64::max);
    let rhs = FloatRhs::new(sys)?;
    let c = rhs
        .lipschitz(a, tube)
        .ok_or_else(|| Error::Precondition("F(x, 0) does not vanish; y = 0 is not a solution".into()))?;
    let c_tilde = ya / a.powf(c);
    let mut rows = Vec::with_capacity(traj.xs.len());
    let mut margin = f64::INFINITY;
    for (x, y) in traj.xs.iter().zip(&traj.ys) {
        let bound = c_tilde * x.powf(c);
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::Precondition(format!(
                "tube too large: bound C̃x^C = {bound:e} at x = {x} with C = {c}; shrink a"
            )));
        }
        let ny = sup_norm(y);
        margin = margin.min(ny / bound);
        rows.push((*x, ny, bound));
    }
    Ok(FlatnessReport { c, c_tilde, tube, margin, trajectory: traj, rows })
}
