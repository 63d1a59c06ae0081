//! Versioned JSON file formats.
//!
//! Every document is an object with `"format": "fuchs-<kind>"` and
//! `"version": 1`. A jet record is
//!
//! ```text
//! {"vars": [...], "caps": [.., null, ..], "total": T, "weights": [...],
//!  "terms": [[[e1, .., ek], "p/q" | ["re", "im"]], ..]}
//! ```
//!
//! where `null` marks a variable bounded by the total only and `weights` is
//! omitted for unit weights. Exact coefficients round-trip bit for bit.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::bb::BbSystem;
use crate::cauchy::{BbReduction, CauchySystem};
use crate::error::{Error, Result};
use crate::hypersurface::{complex_vars, from_raw, real_vars, FormKind, Hypersurface};
use crate::jet::{Exponent, Jet, Vars, Weights, UNCAPPED};
use crate::ode::SingularODE;
use crate::scalar::{Coeff, GaussRat, C64};
use crate::transform::{CauchyData, GeneralMap, NormalizedMap};

pub const VERSION: u64 = 1;

/// Coefficients with a JSON text form.
pub trait SerialCoeff: Coeff {
    fn to_json(&self) -> Value;
    fn from_json(v: &Value) -> Result<Self>;
}

fn str_of(v: &Value) -> Result<&str> {
    v.as_str().ok_or_else(|| Error::Parse(format!("expected a string, got {v}")))
}

impl SerialCoeff for GaussRat {
    fn to_json(&self) -> Value {
        serde_json::from_str(&self.to_string()).expect("coefficient display is JSON")
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::String(s) => Ok(GaussRat::real(GaussRat::parse_rational(s)?)),
            Value::Number(n) if n.is_i64() => Ok(GaussRat::from_int(n.as_i64().unwrap())),
            Value::Array(a) if a.len() == 2 => Ok(GaussRat::new(
                GaussRat::parse_rational(str_of(&a[0])?)?,
                GaussRat::parse_rational(str_of(&a[1])?)?,
            )),
            _ => Err(Error::Parse(format!("bad exact coefficient {v}"))),
        }
    }
}

fn float_of(v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Parse(format!("bad number {n}"))),
        Value::String(s) => {
            if s.contains('/') {
                let r = GaussRat::parse_rational(s)?;
                Ok(GaussRat::real(r).to_c64().map_or(f64::NAN, |z| z.re))
            } else {
                s.trim().parse().map_err(|_| Error::Parse(format!("bad float `{s}`")))
            }
        }
        _ => Err(Error::Parse(format!("bad float {v}"))),
    }
}

impl SerialCoeff for C64 {
    fn to_json(&self) -> Value {
        serde_json::from_str(&self.to_string()).expect("coefficient display is JSON")
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::Array(a) if a.len() == 2 => Ok(C64::new(float_of(&a[0])?, float_of(&a[1])?)),
            _ => Ok(C64::new(float_of(v)?, 0.0)),
        }
    }
}

// ----- jets ---------------------------------------------------------------

pub fn jet_to_json<C: SerialCoeff>(j: &Jet<C>) -> Value {
    let caps: Vec<Value> = j.caps().iter().map(|&c| if c >= UNCAPPED { Value::Null } else { json!(c) }).collect();
    let terms: Vec<Value> = j.terms().map(|(e, c)| json!([e.as_slice(), c.to_json()])).collect();
    let mut o = Map::new();
    o.insert("vars".into(), json!(j.vars()[..]));
    o.insert("caps".into(), Value::Array(caps));
    o.insert("total".into(), json!(j.total_cap()));
    if !j.is_unit_weighted() {
        o.insert("weights".into(), json!(j.weights()[..]));
    }
    o.insert("terms".into(), Value::Array(terms));
    Value::Object(o)
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::Parse(format!("missing field `{key}`")))
}

fn u32_of(v: &Value, what: &str) -> Result<u32> {
    v.as_u64()
        .and_then(|x| u32::try_from(x).ok())
        .ok_or_else(|| Error::Parse(format!("`{what}` must be a nonnegative integer, got {v}")))
}

fn array_of<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::Parse(format!("`{what}` must be an array")))
}

pub fn jet_from_json<C: SerialCoeff>(v: &Value) -> Result<Jet<C>> {
    let names: Vec<String> = array_of(field(v, "vars")?, "vars")?
        .iter()
        .map(|x| str_of(x).map(str::to_string))
        .collect::<Result<_>>()?;
    let n = names.len();
    let caps: Vec<u32> = array_of(field(v, "caps")?, "caps")?
        .iter()
        .map(|c| if c.is_null() { Ok(UNCAPPED) } else { u32_of(c, "caps") })
        .collect::<Result<_>>()?;
    if caps.len() != n {
        return Err(Error::Parse(format!("{} caps for {n} variables", caps.len())));
    }
    let total = u32_of(field(v, "total")?, "total")?;
    let weights: Vec<u16> = match v.get("weights") {
        None => vec![1; n],
        Some(w) => array_of(w, "weights")?
            .iter()
            .map(|x| u32_of(x, "weights").and_then(|x| u16::try_from(x).map_err(|_| Error::Parse("weight too large".into()))))
            .collect::<Result<_>>()?,
    };
    if weights.len() != n {
        return Err(Error::Parse(format!("{} weights for {n} variables", weights.len())));
    }
    let vars: Vars = names.into();
    let weights: Weights = weights.into();
    let mut j = Jet::zero_weighted(vars, weights, caps, total);
    for t in array_of(field(v, "terms")?, "terms")? {
        let pair = array_of(t, "term")?;
        if pair.len() != 2 {
            return Err(Error::Parse(format!("term must be [exponent, coefficient], got {t}")));
        }
        let e: Exponent = array_of(&pair[0], "exponent")?
            .iter()
            .map(|x| u32_of(x, "exponent").map(|x| x as u16))
            .collect::<Result<_>>()?;
        if e.len() != n {
            return Err(Error::Parse(format!("exponent {} has the wrong length", pair[0])));
        }
        if !j.is_known(&e) {
            return Err(Error::Parse(format!("term {} lies outside the truncation", pair[0])));
        }
        j.add_term(e, C::from_json(&pair[1])?);
    }
    Ok(j)
}

// ----- documents -----------------------------------------------------------

#[derive(Clone, Debug)]
pub enum Document<C: Coeff> {
    Hypersurface(Hypersurface<C>),
    Ode(SingularODE<C>),
    Map(NormalizedMap<C>),
    GeneralMap(GeneralMap<C>),
    Cauchy(CauchySystem<C>),
    Bb(BbSystem<C>, Option<BbReduction<C>>),
}

impl<C: Coeff> Document<C> {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Hypersurface(_) => "hypersurface",
            Document::Ode(_) => "ode",
            Document::Map(_) | Document::GeneralMap(_) => "map",
            Document::Cauchy(_) => "cauchy",
            Document::Bb(..) => "bb",
        }
    }
}

fn header(kind: &str) -> Map<String, Value> {
    let mut o = Map::new();
    o.insert("format".into(), json!(format!("fuchs-{kind}")));
    o.insert("version".into(), json!(VERSION));
    o
}

fn data_to_json<C: SerialCoeff>(d: &CauchyData<C>) -> Value {
    json!({
        "f0": jet_to_json(&d.f0),
        "f1": jet_to_json(&d.f1),
        "g0": jet_to_json(&d.g0),
        "g1": jet_to_json(&d.g1),
    })
}

fn data_from_json<C: SerialCoeff>(v: &Value) -> Result<CauchyData<C>> {
    Ok(CauchyData {
        f0: jet_from_json(field(v, "f0")?)?,
        f1: jet_from_json(field(v, "f1")?)?,
        g0: jet_from_json(field(v, "g0")?)?,
        g1: jet_from_json(field(v, "g1")?)?,
    })
}

pub fn to_json<C: SerialCoeff>(doc: &Document<C>) -> Value {
    let mut o = header(doc.kind());
    match doc {
        Document::Hypersurface(h) => {
            o.insert("m".into(), json!(h.m));
            o.insert("epsilon".into(), json!(h.epsilon));
            o.insert("form".into(), json!(h.kind.name()));
            o.insert("cap".into(), json!(h.cap()));
            let h_kl: Vec<Value> = h
                .coefficients()
                .iter()
                .map(|((k, l), s)| json!({"k": k, "l": l, "series": jet_to_json(s)}))
                .collect();
            o.insert("h".into(), Value::Array(h_kl));
        }
        Document::Ode(e) => {
            o.insert("m".into(), json!(e.m));
            o.insert("phi".into(), jet_to_json(e.phi()));
        }
        Document::Map(h) => {
            o.insert("kind".into(), json!("normalized"));
            o.insert("m".into(), json!(h.m));
            o.insert("f".into(), jet_to_json(h.f()));
            o.insert("g0".into(), jet_to_json(h.g0()));
            o.insert("g".into(), jet_to_json(h.g()));
        }
        Document::GeneralMap(h) => {
            o.insert("kind".into(), json!("general"));
            o.insert("F".into(), jet_to_json(&h.F));
            o.insert("G".into(), jet_to_json(&h.G));
        }
        Document::Cauchy(cs) => {
            o.insert("m".into(), json!(cs.m));
            o.insert("S".into(), jet_to_json(&cs.s));
            o.insert("T".into(), Value::Array(cs.t.iter().map(jet_to_json).collect()));
        }
        Document::Bb(sys, red) => {
            o.insert("n".into(), json!(sys.n));
            o.insert("F".into(), Value::Array(sys.f.iter().map(jet_to_json).collect()));
            if let Some(r) = red {
                o.insert(
                    "reduction".into(),
                    json!({
                        "m": r.m,
                        "p": data_to_json(&r.p),
                        "u0": r.u0.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
                    }),
                );
            }
        }
    }
    Value::Object(o)
}

/// Pretty-printed document with a trailing newline; keys are sorted, so
/// equal documents give equal bytes.
pub fn to_string<C: SerialCoeff>(doc: &Document<C>) -> String {
    let mut s = serde_json::to_string_pretty(&to_json(doc)).expect("serializable");
    s.push('\n');
    s
}

fn kind_vars(kind: FormKind) -> Vars {
    match kind {
        FormKind::Real => real_vars(),
        _ => complex_vars(),
    }
}

fn hypersurface_from_json<C: SerialCoeff>(v: &Value) -> Result<Hypersurface<C>> {
    let m = u32_of(field(v, "m")?, "m")?;
    let epsilon = field(v, "epsilon")?
        .as_i64()
        .ok_or_else(|| Error::Parse("`epsilon` must be an integer".into()))?;
    let cap = u32_of(field(v, "cap")?, "cap")?;
    let kind = FormKind::parse(str_of(field(v, "form")?)?)?;
    let mut b = Jet::zero_total(kind_vars(kind), cap);
    for entry in array_of(field(v, "h")?, "h")? {
        let k = u32_of(field(entry, "k")?, "k")?;
        let l = u32_of(field(entry, "l")?, "l")?;
        let s: Jet<C> = jet_from_json(field(entry, "series")?)?;
        if s.nvars() != 1 {
            return Err(Error::Parse(format!("h_{k}{l} must be a series in one variable")));
        }
        for (e, c) in s.terms() {
            let e3 = Exponent::from_slice(&[k as u16, l as u16, e[0]]);
            if b.is_known(&e3) {
                b.add_term(e3, c.clone());
            }
        }
    }
    let h = Hypersurface::from_bracket(kind, m, epsilon as i8, b)?;
    let bad = h.validate();
    if !bad.is_empty() {
        return Err(Error::Invalid(bad.join("; ")));
    }
    Ok(h)
}

fn check_header(v: &Value) -> Result<&str> {
    let format = str_of(field(v, "format")?)?;
    let kind = format
        .strip_prefix("fuchs-")
        .ok_or_else(|| Error::Parse(format!("unknown format `{format}`")))?;
    let version = field(v, "version")?.as_u64();
    if version != Some(VERSION) {
        return Err(Error::Parse(format!("unsupported {format} version {}", field(v, "version")?)));
    }
    Ok(kind)
}

pub fn from_json<C: SerialCoeff>(v: &Value) -> Result<Document<C>> {
    match check_header(v)? {
        "hypersurface" => Ok(Document::Hypersurface(hypersurface_from_json(v)?)),
        "ode" => Ok(Document::Ode(SingularODE::new(u32_of(field(v, "m")?, "m")?, jet_from_json(field(v, "phi")?)?)?)),
        "map" => match v.get("kind").and_then(Value::as_str) {
            Some("general") => Ok(Document::GeneralMap(GeneralMap::new(
                jet_from_json(field(v, "F")?)?,
                jet_from_json(field(v, "G")?)?,
            )?)),
            _ => Ok(Document::Map(NormalizedMap::new_unchecked(
                u32_of(field(v, "m")?, "m")?,
                jet_from_json(field(v, "f")?)?,
                jet_from_json(field(v, "g0")?)?,
                jet_from_json(field(v, "g")?)?,
            )?)),
        },
        "cauchy" => {
            let t = array_of(field(v, "T")?, "T")?;
            if t.len() != 3 {
                return Err(Error::Parse("`T` must have three entries".into()));
            }
            Ok(Document::Cauchy(CauchySystem {
                m: u32_of(field(v, "m")?, "m")?,
                s: jet_from_json(field(v, "S")?)?,
                t: [jet_from_json(&t[0])?, jet_from_json(&t[1])?, jet_from_json(&t[2])?],
            }))
        }
        "bb" => {
            let n = field(v, "n")?.as_u64().unwrap_or(0) as usize;
            let f = array_of(field(v, "F")?, "F")?.iter().map(jet_from_json).collect::<Result<Vec<_>>>()?;
            if f.len() != n {
                return Err(Error::Parse(format!("`n` is {n} but {} right-hand sides given", f.len())));
            }
            let sys = BbSystem::new(f)?;
            let red = match v.get("reduction") {
                None => None,
                Some(r) => {
                    let u0 = array_of(field(r, "u0")?, "u0")?
                        .iter()
                        .map(C::from_json)
                        .collect::<Result<Vec<_>>>()?;
                    let u0: [C; 4] = u0.try_into().map_err(|_| Error::Parse("`u0` must have four entries".into()))?;
                    Some(BbReduction {
                        m: u32_of(field(r, "m")?, "m")?,
                        p: data_from_json(field(r, "p")?)?,
                        u0,
                        q: sys.f.clone(),
                    })
                }
            };
            Ok(Document::Bb(sys, red))
        }
        "raw" => {
            // v = F(z, zb, u) in normal coordinates, exact only
            let f: Jet<GaussRat> = jet_from_json(field(v, "F")?)?;
            let h = from_raw(&f)?;
            let j = convert(h.bracket())?;
            Ok(Document::Hypersurface(Hypersurface::from_bracket(h.kind, h.m, h.epsilon, j)?))
        }
        other => Err(Error::Parse(format!("unknown document kind `{other}`"))),
    }
}

/// Re-reads a jet's coefficients in another coefficient type.
pub fn convert<A: SerialCoeff, B: SerialCoeff>(j: &Jet<A>) -> Result<Jet<B>> {
    jet_from_json(&jet_to_json(j))
}

/// Parses a document, reporting JSON syntax errors with line and column.
pub fn from_str<C: SerialCoeff>(s: &str) -> Result<Document<C>> {
    // serde_json's message already ends with "at line L column C"
    let v: Value = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
    from_json(&v)
}

/// Named values such as free parameters: `{"name": coefficient, ..}`.
pub fn params_from_str<C: SerialCoeff>(s: &str) -> Result<BTreeMap<String, C>> {
    // serde_json's message already ends with "at line L column C"
    let v: Value = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
    let o = v.as_object().ok_or_else(|| Error::Parse("parameters must be a JSON object".into()))?;
    o.iter().map(|(k, x)| Ok((k.clone(), C::from_json(x)?))).collect()
}

pub fn params_to_string<C: SerialCoeff>(p: &[(String, C)]) -> String {
    let o: Map<String, Value> = p.iter().map(|(k, c)| (k.clone(), c.to_json())).collect();
    let mut s = serde_json::to_string_pretty(&Value::Object(o)).expect("serializable");
    s.push('\n');
    s
}
