//! Python bindings for `fuchs_core`. Coefficients cross the boundary as
//! exact strings: `"3/4"`, or `'["1/2", "-3"]'` for `1/2 - 3i`.

use std::collections::BTreeMap;

use fuchs_core::bb::{self, BbSystem, IntegrateOptions};
use fuchs_core::hypersurface::{random_fuchsian, FormKind, Hypersurface, Status};
use fuchs_core::jet::{Exponent, UNCAPPED};
use fuchs_core::ode::{associate, OdeCaps, SingularODE};
use fuchs_core::serial::{self, Document, SerialCoeff};
use fuchs_core::solver::{solve_formal_map, SolveOutcome};
use fuchs_core::transform::{push_forward, verify_transformation_identity, NormalizedMap};
use fuchs_core::{vars, Error, GaussRat, Jet};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Q = GaussRat;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// `"p/q"`, or a JSON array `["re", "im"]` passed as a string.
fn parse_coeff(s: &str) -> PyResult<Q> {
    let v = if s.trim_start().starts_with('[') {
        serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string()))?
    } else {
        Value::String(s.to_string())
    };
    Q::from_json(&v).map_err(err)
}

fn show(c: &Q) -> String {
    match c.to_json() {
        Value::String(s) => s,
        v => v.to_string(),
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Fuchsian => "fuchsian",
        Status::NotFuchsian => "not fuchsian",
        Status::Undecidable => "undecidable",
    }
}

/// Truncated power series with exact Gaussian-rational coefficients.
#[pyclass(name = "Jet", module = "fuchs_py", from_py_object)]
#[derive(Clone)]
struct PyJet {
    inner: Jet<Q>,
}

#[pymethods]
impl PyJet {
    /// `caps` entries of `None` mean no per-variable cap.
    #[new]
    #[pyo3(signature = (names, total, caps=None, terms=None))]
    fn new(names: Vec<String>, total: u32, caps: Option<Vec<Option<u32>>>, terms: Option<Vec<(Vec<u16>, String)>>) -> PyResult<Self> {
        let n = names.len();
        let caps: Vec<u32> = match caps {
            Some(c) if c.len() != n => return Err(PyValueError::new_err("one cap per variable")),
            Some(c) => c.into_iter().map(|x| x.unwrap_or(UNCAPPED)).collect(),
            None => vec![UNCAPPED; n],
        };
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut j = Jet::zero(vars(&refs), caps, total);
        for (e, c) in terms.unwrap_or_default() {
            if e.len() != n {
                return Err(PyValueError::new_err(format!("exponent {e:?} has the wrong length")));
            }
            let e = Exponent::from_slice(&e);
            if !j.is_known(&e) {
                return Err(PyValueError::new_err(format!("{:?} lies outside the truncation", e.as_slice())));
            }
            j.add_term(e, parse_coeff(&c)?);
        }
        Ok(PyJet { inner: j })
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.vars().to_vec()
    }

    #[getter]
    fn total(&self) -> u32 {
        self.inner.total_cap()
    }

    #[getter]
    fn caps(&self) -> Vec<Option<u32>> {
        self.inner.caps().iter().map(|&c| (c < UNCAPPED).then_some(c)).collect()
    }

    fn terms(&self) -> Vec<(Vec<u16>, String)> {
        self.inner.terms().map(|(e, c)| (e.to_vec(), show(c))).collect()
    }

    fn coeff(&self, e: Vec<u16>) -> PyResult<String> {
        if e.len() != self.inner.nvars() {
            return Err(PyValueError::new_err("exponent has the wrong length"));
        }
        Ok(show(&self.inner.coeff(&e)))
    }

    fn is_known(&self, e: Vec<u16>) -> bool {
        e.len() == self.inner.nvars() && self.inner.is_known(&e)
    }

    fn __add__(&self, other: &PyJet) -> PyResult<PyJet> {
        Ok(PyJet { inner: self.inner.add(&other.inner).map_err(err)? })
    }

    fn __sub__(&self, other: &PyJet) -> PyResult<PyJet> {
        Ok(PyJet { inner: self.inner.sub(&other.inner).map_err(err)? })
    }

    fn __mul__(&self, other: &PyJet) -> PyResult<PyJet> {
        Ok(PyJet { inner: self.inner.mul(&other.inner).map_err(err)? })
    }

    fn __eq__(&self, other: &PyJet) -> bool {
        self.inner == other.inner
    }

    fn reciprocal(&self) -> PyResult<PyJet> {
        Ok(PyJet { inner: self.inner.reciprocal().map_err(err)? })
    }

    /// Substitutes `inner[i]` for the i-th variable.
    fn compose(&self, inner: Vec<PyJet>) -> PyResult<PyJet> {
        let v: Vec<Jet<Q>> = inner.into_iter().map(|j| j.inner).collect();
        Ok(PyJet { inner: self.inner.compose(&v).map_err(err)? })
    }

    fn agrees_with(&self, other: &PyJet) -> bool {
        self.inner.agrees_with(&other.inner)
    }

    fn to_json(&self) -> String {
        serial::jet_to_json(&self.inner).to_string()
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<PyJet> {
        let v: Value = serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyJet { inner: serial::jet_from_json(&v).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!("Jet({})", self.inner)
    }
}

/// Result of a Fuchsian-type test.
#[pyclass(name = "FuchsReport", module = "fuchs_py", get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyReport {
    status: String,
    violations: Vec<String>,
    undecidable: Vec<String>,
}

#[pymethods]
impl PyReport {
    fn is_fuchsian(&self) -> bool {
        self.status == "fuchsian"
    }

    fn __repr__(&self) -> String {
        format!("FuchsReport({:?}, violations={:?})", self.status, self.violations)
    }
}

impl From<fuchs_core::hypersurface::FuchsReport> for PyReport {
    fn from(r: fuchs_core::hypersurface::FuchsReport) -> Self {
        PyReport { status: status_name(r.status).into(), violations: r.violations, undecidable: r.undecidable }
    }
}

#[pyclass(name = "Hypersurface", module = "fuchs_py", skip_from_py_object)]
#[derive(Clone)]
struct PyHypersurface {
    inner: Hypersurface<Q>,
}

fn kind_of(s: &str) -> PyResult<FormKind> {
    FormKind::parse(s).map_err(err)
}

#[pymethods]
impl PyHypersurface {
    #[staticmethod]
    #[pyo3(signature = (m, epsilon=1, cap=None, kind="real"))]
    fn model(m: u32, epsilon: i8, cap: Option<u32>, kind: &str) -> PyResult<Self> {
        let cap = cap.unwrap_or(fuchs_core::hypersurface::default_cap(m));
        Ok(PyHypersurface { inner: Hypersurface::model(kind_of(kind)?, m, epsilon, cap).map_err(err)? })
    }

    /// Random real form of Fuchsian type.
    #[staticmethod]
    #[pyo3(signature = (m, seed, cap=None, epsilon=1, density=0.5))]
    fn random(m: u32, seed: u64, cap: Option<u32>, epsilon: i8, density: f64) -> PyResult<Self> {
        let cap = cap.unwrap_or(fuchs_core::hypersurface::default_cap(m));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(PyHypersurface { inner: random_fuchsian(m, epsilon, cap, density, &mut rng).map_err(err)? })
    }

    /// Real form from `{(k, l): [(j, coeff), ...]}`, the coefficient of `u^j z^k zb^l`.
    #[staticmethod]
    #[pyo3(signature = (m, entries, epsilon=1, cap=None))]
    fn from_h(m: u32, entries: BTreeMap<(u32, u32), Vec<(u32, String)>>, epsilon: i8, cap: Option<u32>) -> PyResult<Self> {
        let cap = cap.unwrap_or(fuchs_core::hypersurface::default_cap(m));
        let mut parsed = Vec::new();
        for (kl, series) in entries {
            let s: PyResult<Vec<(u32, Q)>> = series.into_iter().map(|(j, c)| Ok((j, parse_coeff(&c)?))).collect();
            parsed.push((kl, s?));
        }
        Ok(PyHypersurface { inner: Hypersurface::from_h(m, epsilon, cap, parsed).map_err(err)? })
    }

    #[getter]
    fn m(&self) -> u32 {
        self.inner.m
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.name()
    }

    fn bracket(&self) -> PyJet {
        PyJet { inner: self.inner.bracket().clone() }
    }

    fn convert(&self, kind: &str) -> PyResult<Self> {
        Ok(PyHypersurface { inner: self.inner.convert(kind_of(kind)?).map_err(err)? })
    }

    fn check_fuchsian(&self) -> PyReport {
        self.inner.check_fuchsian().into()
    }

    /// Associated ODE, with caps raised by `margin` beyond the deciding ones.
    #[pyo3(signature = (margin=0))]
    fn associate(&self, margin: u32) -> PyResult<PyOde> {
        let t = self.inner.convert(FormKind::Exponential).map_err(err)?;
        Ok(PyOde { inner: associate(&t, OdeCaps::with_margin(t.m, margin)).map_err(err)? })
    }

    fn to_json(&self) -> String {
        serial::to_string(&Document::Hypersurface(self.inner.clone()))
    }
}

#[pyclass(name = "Ode", module = "fuchs_py", skip_from_py_object)]
#[derive(Clone)]
struct PyOde {
    inner: SingularODE<Q>,
}

#[pymethods]
impl PyOde {
    #[staticmethod]
    #[pyo3(signature = (m, margin=0))]
    fn model(m: u32, margin: u32) -> Self {
        PyOde { inner: SingularODE::model(m, OdeCaps::with_margin(m, margin)) }
    }

    #[getter]
    fn m(&self) -> u32 {
        self.inner.m
    }

    fn phi(&self) -> PyJet {
        PyJet { inner: self.inner.phi().clone() }
    }

    fn check_fuchsian(&self) -> PyReport {
        self.inner.check_fuchsian().into()
    }

    fn push_forward(&self, h: &PyMap) -> PyResult<PyOde> {
        Ok(PyOde { inner: push_forward(&self.inner, &h.inner).map_err(err)? })
    }

    /// Normalized map from `self` to `target`; raises if obstructed.
    #[pyo3(signature = (target, free=None, order=None))]
    fn solve_map(&self, target: &PyOde, free: Option<BTreeMap<String, String>>, order: Option<u32>) -> PyResult<PyMap> {
        let mut fp = BTreeMap::new();
        for (k, v) in free.unwrap_or_default() {
            fp.insert(k, parse_coeff(&v)?);
        }
        match solve_formal_map(&self.inner, &target.inner, &fp, order).map_err(err)? {
            SolveOutcome::Solved(s) => Ok(PyMap { inner: s.map }),
            SolveOutcome::Obstructed(o) => Err(PyValueError::new_err(o.to_string())),
        }
    }

    /// Whether `h` takes `self` to `target` on the common truncation.
    fn verify_map(&self, target: &PyOde, h: &PyMap) -> PyResult<bool> {
        Ok(verify_transformation_identity(&self.inner, &target.inner, &h.inner).map_err(err)?.is_zero())
    }

    fn to_json(&self) -> String {
        serial::to_string(&Document::Ode(self.inner.clone()))
    }
}

#[pyclass(name = "Map", module = "fuchs_py", skip_from_py_object)]
#[derive(Clone)]
struct PyMap {
    inner: NormalizedMap<Q>,
}

#[pymethods]
impl PyMap {
    #[staticmethod]
    fn identity(m: u32, total: u32) -> Self {
        PyMap { inner: NormalizedMap::identity(m, total) }
    }

    /// `(z + z·f, w + w·g0 + z·w·g)`-style components as stored.
    fn components(&self) -> (PyJet, PyJet, PyJet) {
        let h = &self.inner;
        (PyJet { inner: h.f().clone() }, PyJet { inner: h.g0().clone() }, PyJet { inner: h.g().clone() })
    }

    fn is_identity(&self) -> bool {
        self.inner.is_identity()
    }

    fn to_json(&self) -> String {
        serial::to_string(&Document::Map(self.inner.clone()))
    }
}

#[pyclass(name = "BbSystem", module = "fuchs_py", skip_from_py_object)]
#[derive(Clone)]
struct PyBb {
    inner: BbSystem<Q>,
}

#[pymethods]
impl PyBb {
    /// `terms[i]` lists `(exponent over (x, y1..yn), coeff)` for component `i`.
    #[new]
    fn new(n: usize, total: u32, terms: Vec<Vec<(Vec<u16>, String)>>) -> PyResult<Self> {
        let mut parsed = Vec::with_capacity(terms.len());
        for comp in terms {
            let c: PyResult<Vec<(Vec<u16>, Q)>> = comp.into_iter().map(|(e, c)| Ok((e, parse_coeff(&c)?))).collect();
            parsed.push(c?);
        }
        Ok(PyBb { inner: BbSystem::from_terms(n, total, parsed).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    /// Positive integer eigenvalues of `F_y(0, 0)` up to `limit`.
    #[pyo3(signature = (limit=64))]
    fn resonances(&self, limit: u32) -> PyResult<Vec<u32>> {
        Ok(bb::resonances(&self.inner.a, limit).map_err(err)?.resonances)
    }

    /// Returns `(coeffs, inconsistent_at)`; `coeffs[k-1][i]` is `[x^k] y_i`.
    #[pyo3(signature = (order, free=None))]
    fn formal_solve(&self, order: u32, free: Option<BTreeMap<String, String>>) -> PyResult<(Vec<Vec<String>>, Option<u32>)> {
        let mut fp = BTreeMap::new();
        for (k, v) in free.unwrap_or_default() {
            fp.insert(k, parse_coeff(&v)?);
        }
        let s = bb::formal_solve(&self.inner, order, &fp).map_err(err)?;
        let coeffs = s.coeffs.iter().map(|a| a.iter().map(show).collect()).collect();
        Ok((coeffs, s.inconsistent_at))
    }

    /// Numerical trajectory from `x = a` down to `x_min`.
    #[pyo3(signature = (y0, a, x_min, rtol=1e-10))]
    fn integrate(&self, y0: Vec<Complex64>, a: f64, x_min: f64, rtol: f64) -> PyResult<(Vec<f64>, Vec<Vec<Complex64>>)> {
        let opts = IntegrateOptions { rtol, ..IntegrateOptions::default() };
        let t = bb::numeric_integrate(&self.inner, &y0, a, x_min, opts).map_err(err)?;
        Ok((t.xs, t.ys))
    }

    /// Returns `(C, C~, margin)` for the bound `|y(x)| >= C~ x^C`.
    #[pyo3(signature = (y0, a, x_min, rtol=1e-10))]
    fn flatness(&self, y0: Vec<Complex64>, a: f64, x_min: f64, rtol: f64) -> PyResult<(f64, f64, f64)> {
        let opts = IntegrateOptions { rtol, ..IntegrateOptions::default() };
        let r = bb::flatness_experiment(&self.inner, &y0, a, x_min, opts).map_err(err)?;
        Ok((r.c, r.c_tilde, r.margin))
    }

    fn to_json(&self) -> String {
        serial::to_string(&Document::Bb(self.inner.clone(), None))
    }
}

/// Reads any exact document; returns the matching wrapper.
#[pyfunction]
fn load(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let obj = match serial::from_str::<Q>(text).map_err(err)? {
        Document::Hypersurface(h) => Py::new(py, PyHypersurface { inner: h })?.into_any(),
        Document::Ode(e) => Py::new(py, PyOde { inner: e })?.into_any(),
        Document::Map(h) => Py::new(py, PyMap { inner: h })?.into_any(),
        Document::Bb(s, _) => Py::new(py, PyBb { inner: s })?.into_any(),
        d => return Err(PyValueError::new_err(format!("{} files are not exposed", d.kind()))),
    };
    Ok(obj)
}

#[pymodule]
fn fuchs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyJet>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyHypersurface>()?;
    m.add_class::<PyOde>()?;
    m.add_class::<PyMap>()?;
    m.add_class::<PyBb>()?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    Ok(())
}
