//! Versioned JSON documents for every value type.
//!
//! Every document carries `"version": 1` and a `"type"` tag.  Index lists (`eps`) are
//! 1-based like the text syntax; multi-indices are exponent vectors.  Output is
//! byte-deterministic: all collections are emitted in their canonical sorted order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value as JsonValue;

use crate::error::{Error, Result};
use crate::forms::HorizontalForm;
use crate::jet::{JetPowers, LocalFunction, Monomial, MultiIndex, Rational};
use crate::ldo::{Ldo, LdoKey};
use crate::lifting::{DEndElement, SignConvention};
use crate::opcomplex::OperatorForm;
use crate::shlie::ShLieTower;

pub const VERSION: u32 = 1;

/// Any value that can be stored in a document.
#[derive(Clone, Debug, PartialEq)]
pub enum Document {
    Function(LocalFunction),
    Ldo(Ldo),
    Form(HorizontalForm),
    OperatorForm(OperatorForm),
    DEnd(DEndElement),
    Tower(ShLieTower),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Function(_) => "function",
            Document::Ldo(_) => "ldo",
            Document::Form(_) => "hform",
            Document::OperatorForm(_) => "oform",
            Document::DEnd(_) => "dend",
            Document::Tower(_) => "tower",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    coeff: String,
    x: Vec<u32>,
    u: Vec<(Vec<u32>, u32)>,
}

#[derive(Serialize, Deserialize)]
struct FunctionJson {
    dim: usize,
    terms: Vec<TermJson>,
}

#[derive(Serialize, Deserialize)]
struct LdoTermJson {
    xi: Vec<Vec<u32>>,
    eta: Vec<Vec<(Vec<u32>, u32)>>,
    coeff: Vec<TermJson>,
}

#[derive(Serialize, Deserialize)]
struct LdoJson {
    dim: usize,
    arity: usize,
    polarized: bool,
    bound: Option<i64>,
    terms: Vec<LdoTermJson>,
}

#[derive(Serialize, Deserialize)]
struct FormComponentJson {
    eps: Vec<usize>,
    f: Vec<TermJson>,
}

#[derive(Serialize, Deserialize)]
struct FormJson {
    dim: usize,
    degree: usize,
    components: Vec<FormComponentJson>,
}

#[derive(Serialize, Deserialize)]
struct OperatorComponentJson {
    eps: Vec<usize>,
    op: LdoJson,
}

#[derive(Serialize, Deserialize)]
struct OperatorFormJson {
    dim: usize,
    arity: usize,
    degree: usize,
    bound: Option<i64>,
    components: Vec<OperatorComponentJson>,
}

#[derive(Serialize, Deserialize)]
struct FamilyJson {
    s: usize,
    eps: Vec<Vec<usize>>,
    form: OperatorFormJson,
}

#[derive(Serialize, Deserialize)]
struct DEndJson {
    dim: usize,
    arity: usize,
    degree: i64,
    sign: String,
    families: Vec<FamilyJson>,
}

#[derive(Serialize, Deserialize)]
struct BracketJson {
    k: usize,
    element: DEndJson,
}

#[derive(Serialize, Deserialize)]
struct TowerJson {
    dim: usize,
    brackets: Vec<BracketJson>,
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    version: u32,
    #[serde(rename = "type")]
    kind: &'a str,
    #[serde(flatten)]
    body: T,
}

fn rational_text(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::Inconsistent(format!("invalid rational coefficient {s:?}"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: num_bigint::BigInt = n.trim().parse().map_err(|_| bad())?;
    let d: num_bigint::BigInt = d.trim().parse().map_err(|_| bad())?;
    if d == 0.into() {
        return Err(bad());
    }
    Ok(Rational::new(n, d))
}

fn powers_out(p: &JetPowers) -> Vec<(Vec<u32>, u32)> {
    p.iter().map(|(j, &m)| (j.0.clone(), m)).collect()
}

fn powers_in(v: Vec<(Vec<u32>, u32)>) -> Result<JetPowers> {
    let mut p = JetPowers::new();
    for (j, m) in v {
        if m == 0 {
            return Err(Error::Inconsistent("zero exponent in a jet monomial".into()));
        }
        if p.insert(MultiIndex(j), m).is_some() {
            return Err(Error::Inconsistent("repeated jet variable".into()));
        }
    }
    Ok(p)
}

fn function_out(f: &LocalFunction) -> Vec<TermJson> {
    f.terms()
        .map(|(m, c)| TermJson { coeff: rational_text(c), x: m.x.0.clone(), u: powers_out(&m.u) })
        .collect()
}

fn function_in(dim: usize, terms: Vec<TermJson>) -> Result<LocalFunction> {
    let mut out = Vec::new();
    for t in terms {
        out.push((Monomial { x: MultiIndex(t.x), u: powers_in(t.u)? }, parse_rational(&t.coeff)?));
    }
    LocalFunction::from_terms(dim, out)
}

fn ldo_out(a: &Ldo) -> LdoJson {
    LdoJson {
        dim: a.dim(),
        arity: a.arity(),
        polarized: a.is_polarized(),
        bound: a.bound(),
        terms: a
            .terms()
            .map(|(k, c)| LdoTermJson {
                xi: k.xi.iter().map(|i| i.0.clone()).collect(),
                eta: k.eta.iter().map(powers_out).collect(),
                coeff: function_out(c),
            })
            .collect(),
    }
}

fn ldo_in(j: LdoJson) -> Result<Ldo> {
    let mut terms = Vec::new();
    for t in j.terms {
        let key = LdoKey {
            xi: t.xi.into_iter().map(MultiIndex).collect(),
            eta: t.eta.into_iter().map(powers_in).collect::<Result<_>>()?,
        };
        terms.push((key, function_in(j.dim, t.coeff)?));
    }
    Ldo::from_terms(j.dim, j.arity, j.polarized, j.bound, terms)
}

fn one_based(eps: &[usize]) -> Vec<usize> {
    eps.iter().map(|i| i + 1).collect()
}

fn zero_based(eps: Vec<usize>) -> Result<Vec<usize>> {
    eps.into_iter()
        .map(|i| i.checked_sub(1).ok_or_else(|| Error::Inconsistent("index 0 in a 1-based index list".into())))
        .collect()
}

fn form_out(w: &HorizontalForm) -> FormJson {
    FormJson {
        dim: w.dim(),
        degree: w.degree(),
        components: w
            .components()
            .map(|(e, f)| FormComponentJson { eps: one_based(e), f: function_out(f) })
            .collect(),
    }
}

fn form_in(j: FormJson) -> Result<HorizontalForm> {
    let mut comps = Vec::new();
    for c in j.components {
        comps.push((zero_based(c.eps)?, function_in(j.dim, c.f)?));
    }
    HorizontalForm::from_components(j.dim, j.degree, comps)
}

fn oform_out(f: &OperatorForm) -> OperatorFormJson {
    OperatorFormJson {
        dim: f.dim(),
        arity: f.arity(),
        degree: f.degree(),
        bound: f.bound(),
        components: f
            .components()
            .map(|(e, a)| OperatorComponentJson { eps: one_based(e), op: ldo_out(a) })
            .collect(),
    }
}

fn oform_in(j: OperatorFormJson) -> Result<OperatorForm> {
    let mut comps = Vec::new();
    for c in j.components {
        comps.push((zero_based(c.eps)?, ldo_in(c.op)?));
    }
    let f = OperatorForm::from_components(j.dim, j.arity, j.degree, comps)?;
    Ok(match j.bound {
        Some(b) => f.truncate(b),
        None => f,
    })
}

fn sign_text(s: SignConvention) -> &'static str {
    match s {
        SignConvention::Regraded => "regraded",
        SignConvention::Classical => "classical",
    }
}

fn dend_out(f: &DEndElement) -> DEndJson {
    DEndJson {
        dim: f.dim(),
        arity: f.arity(),
        degree: f.degree(),
        sign: sign_text(f.sign_convention()).into(),
        families: f
            .families()
            .map(|(e, form)| FamilyJson {
                s: f.s_of(e),
                eps: e.iter().map(|x| one_based(x)).collect(),
                form: oform_out(form),
            })
            .collect(),
    }
}

fn dend_in(j: DEndJson) -> Result<DEndElement> {
    let sign = match j.sign.as_str() {
        "regraded" => SignConvention::Regraded,
        "classical" => SignConvention::Classical,
        other => return Err(Error::Inconsistent(format!("unknown sign convention {other:?}"))),
    };
    let mut out = DEndElement::zero(j.dim, j.arity, j.degree, sign);
    for fam in j.families {
        let eps: Vec<Vec<usize>> = fam.eps.into_iter().map(zero_based).collect::<Result<_>>()?;
        if eps.len() == j.arity && out.s_of(&eps) != fam.s {
            return Err(Error::Inconsistent(format!("family s = {} does not match its index lists", fam.s)));
        }
        out.insert(eps, oform_in(fam.form)?)?;
    }
    Ok(out)
}

fn tower_out(t: &ShLieTower) -> TowerJson {
    TowerJson {
        dim: t.dim,
        brackets: t.brackets.iter().map(|(&k, l)| BracketJson { k, element: dend_out(l) }).collect(),
    }
}

fn tower_in(j: TowerJson) -> Result<ShLieTower> {
    let mut brackets = BTreeMap::new();
    for b in j.brackets {
        let l = dend_in(b.element)?;
        if l.arity() != b.k || l.degree() != b.k as i64 - 2 || l.dim() != j.dim {
            return Err(Error::Inconsistent(format!("bracket l_{} has the wrong shape", b.k)));
        }
        brackets.insert(b.k, l);
    }
    Ok(ShLieTower { dim: j.dim, brackets })
}

fn render<T: Serialize>(kind: &str, body: T) -> String {
    let env = Envelope { version: VERSION, kind, body };
    let mut s = serde_json::to_string_pretty(&env).expect("serializable");
    s.push('\n');
    s
}

/// Serializes a document; identical values give identical bytes.
pub fn to_json(doc: &Document) -> String {
    let kind = doc.kind();
    match doc {
        Document::Function(f) => render(kind, FunctionJson { dim: f.dim(), terms: function_out(f) }),
        Document::Ldo(a) => render(kind, ldo_out(a)),
        Document::Form(w) => render(kind, form_out(w)),
        Document::OperatorForm(f) => render(kind, oform_out(f)),
        Document::DEnd(f) => render(kind, dend_out(f)),
        Document::Tower(t) => render(kind, tower_out(t)),
    }
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Syntax { line: e.line(), column: e.column(), message: format!("invalid JSON document: {e}") }
}

fn body<T: for<'de> Deserialize<'de>>(v: JsonValue) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Inconsistent(format!("malformed document: {e}")))
}

/// Parses a document of any type.
pub fn from_json(text: &str) -> Result<Document> {
    let mut v: JsonValue = serde_json::from_str(text).map_err(json_error)?;
    let obj = v.as_object_mut().ok_or_else(|| Error::Inconsistent("a document must be a JSON object".into()))?;
    match obj.remove("version").and_then(|x| x.as_u64()) {
        Some(x) if x == VERSION as u64 => {}
        Some(x) => return Err(Error::Unsupported(format!("document version {x}"))),
        None => return Err(Error::Inconsistent("missing version field".into())),
    }
    let kind = match obj.remove("type") {
        Some(JsonValue::String(s)) => s,
        _ => return Err(Error::Inconsistent("missing type field".into())),
    };
    Ok(match kind.as_str() {
        "function" => {
            let j: FunctionJson = body(v)?;
            Document::Function(function_in(j.dim, j.terms)?)
        }
        "ldo" => Document::Ldo(ldo_in(body(v)?)?),
        "hform" => Document::Form(form_in(body(v)?)?),
        "oform" => Document::OperatorForm(oform_in(body(v)?)?),
        "dend" => Document::DEnd(dend_in(body(v)?)?),
        "tower" => Document::Tower(tower_in(body(v)?)?),
        other => return Err(Error::Unsupported(format!("document type {other:?}"))),
    })
}
