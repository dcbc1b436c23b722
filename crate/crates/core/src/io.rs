//! JSON encodings of the toolkit's objects.
//!
//! Matrices are arrays of rows. A matrix entry is either a plain number or a
//! `[re, im]` pair. Objects are recognized by their keys:
//!
//! | keys                           | object                         |
//! |--------------------------------|--------------------------------|
//! | `dim_in`, `dim_out`, `choi`    | quantum channel (Choi matrix)  |
//! | `kraus`                        | quantum channel (Kraus list)   |
//! | `matrix`                       | classical channel, `[y][x]`    |
//! | `density`                      | quantum state                  |
//! | `probs`                        | probability vector             |
//! | `p`, `q`                       | dichotomy                      |
//!
//! Reals are written with 12 significant digits and infinities as the
//! strings `"inf"` and `"-inf"`.

use serde_json::{json, Map, Value};

use crate::channels::{ClassicalChannel, ProbVector, QuantumChannel, QuantumState};
use crate::error::Error;
use crate::linalg::{ComplexMatrix, C64};
use crate::majorization::Dichotomy;

/// Significant digits of every real written by this module.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// JSON value of a real: a rounded number, or `"inf"`, `"-inf"`, `"nan"`.
pub fn real_to_json(x: f64) -> Value {
    if x == f64::INFINITY {
        json!("inf")
    } else if x == f64::NEG_INFINITY {
        json!("-inf")
    } else if x.is_nan() {
        json!("nan")
    } else {
        json!(round_sig(x))
    }
}

/// Inverse of [`real_to_json`]; `None` for anything else.
pub fn real_from_json(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => None,
        },
        _ => None,
    }
}

/// Serde adapter for `f64` fields using the conventions of [`real_to_json`].
pub mod real {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use serde_json::Value;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        super::real_to_json(*x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let v = Value::deserialize(d)?;
        super::real_from_json(&v).ok_or_else(|| D::Error::custom(format!("expected a number or \"inf\", got {v}")))
    }
}

/// Where parsing failed and why.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ParseError {
    /// JSON path of the offending field, e.g. `$.kraus[1][0][2]`.
    pub path: String,
    pub message: String,
}

impl ParseError {
    fn new(path: &str, message: impl Into<String>) -> Self {
        Self {
            path: path.to_string(),
            message: message.into(),
        }
    }

    fn invalid(path: &str, e: Error) -> Self {
        Self::new(path, e.to_string())
    }
}

type Parsed<T> = std::result::Result<T, ParseError>;

/// Any object readable from a file.
#[derive(Debug, Clone, PartialEq)]
pub enum Object {
    Channel(QuantumChannel),
    Classical(ClassicalChannel),
    State(QuantumState),
    Probs(ProbVector),
    Dichotomy(Dichotomy),
}

impl Object {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Channel(_) => "channel",
            Self::Classical(_) => "classical channel",
            Self::State(_) => "state",
            Self::Probs(_) => "probability vector",
            Self::Dichotomy(_) => "dichotomy",
        }
    }

    /// The object as a quantum channel; states become channels with a
    /// one-dimensional input.
    pub fn to_channel(&self) -> Option<QuantumChannel> {
        match self {
            Self::Channel(c) => Some(c.clone()),
            Self::Classical(c) => Some(QuantumChannel::from_classical(c)),
            Self::State(s) => Some(QuantumChannel::from_state(s)),
            Self::Probs(p) => Some(QuantumChannel::from_state(&QuantumState::diagonal(p))),
            Self::Dichotomy(_) => None,
        }
    }

    /// The object as a classical channel, if it is one (states with a
    /// diagonal density matrix count as one-input channels).
    pub fn to_classical(&self) -> Option<ClassicalChannel> {
        match self {
            Self::Classical(c) => Some(c.clone()),
            Self::Probs(p) => ClassicalChannel::from_columns(std::slice::from_ref(p)).ok(),
            Self::Channel(c) => c.as_classical(),
            Self::State(s) => s.as_classical().and_then(|p| ClassicalChannel::from_columns(&[p]).ok()),
            Self::Dichotomy(_) => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Self::Channel(c) => channel_to_json(c),
            Self::Classical(c) => classical_to_json(c),
            Self::State(s) => state_to_json(s),
            Self::Probs(p) => probs_to_json(p),
            Self::Dichotomy(d) => dichotomy_to_json(d),
        }
    }
}

fn real_at(v: &Value, path: &str) -> Parsed<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| ParseError::new(path, "number out of range")),
        _ => Err(ParseError::new(path, format!("expected a number, got {v}"))),
    }
}

fn complex_at(v: &Value, path: &str) -> Parsed<C64> {
    match v {
        Value::Number(_) => Ok(C64::new(real_at(v, path)?, 0.0)),
        Value::Array(a) if a.len() == 2 => Ok(C64::new(
            real_at(&a[0], &format!("{path}[0]"))?,
            real_at(&a[1], &format!("{path}[1]"))?,
        )),
        _ => Err(ParseError::new(path, format!("expected a number or a [re, im] pair, got {v}"))),
    }
}

fn array_at<'a>(v: &'a Value, path: &str) -> Parsed<&'a [Value]> {
    match v {
        Value::Array(a) => Ok(a),
        _ => Err(ParseError::new(path, format!("expected an array, got {v}"))),
    }
}

fn reals_at(v: &Value, path: &str) -> Parsed<Vec<f64>> {
    array_at(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| real_at(x, &format!("{path}[{i}]")))
        .collect()
}

fn real_rows_at(v: &Value, path: &str) -> Parsed<Vec<Vec<f64>>> {
    array_at(v, path)?
        .iter()
        .enumerate()
        .map(|(i, r)| reals_at(r, &format!("{path}[{i}]")))
        .collect()
}

fn matrix_at(v: &Value, path: &str) -> Parsed<ComplexMatrix> {
    let rows = array_at(v, path)?;
    if rows.is_empty() {
        return Err(ParseError::new(path, "matrix has no rows"));
    }
    let mut entries = Vec::new();
    let mut cols = None;
    for (i, r) in rows.iter().enumerate() {
        let rp = format!("{path}[{i}]");
        let r = array_at(r, &rp)?;
        match cols {
            None => cols = Some(r.len()),
            Some(c) if c != r.len() => {
                return Err(ParseError::new(&rp, format!("row has {} entries, expected {c}", r.len())));
            }
            _ => {}
        }
        for (j, x) in r.iter().enumerate() {
            entries.push(complex_at(x, &format!("{rp}[{j}]"))?);
        }
    }
    let cols = cols.unwrap_or(0);
    if cols == 0 {
        return Err(ParseError::new(path, "matrix has no columns"));
    }
    ComplexMatrix::from_row_major(rows.len(), cols, entries).map_err(|e| ParseError::invalid(path, e))
}

fn dim_at(v: &Value, path: &str) -> Parsed<usize> {
    v.as_u64()
        .filter(|&d| d > 0)
        .map(|d| d as usize)
        .ok_or_else(|| ParseError::new(path, format!("expected a positive integer, got {v}")))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Parsed<&'a Value> {
    obj.get(key)
        .ok_or_else(|| ParseError::new("$", format!("missing field \"{key}\"")))
}

/// Parses any of the documented object shapes.
pub fn parse_object(v: &Value) -> Parsed<Object> {
    let obj = match v {
        Value::Object(o) => o,
        _ => return Err(ParseError::new("$", "expected a JSON object")),
    };
    let has = |k: &str| obj.contains_key(k);
    if has("choi") {
        let din = dim_at(field(obj, "dim_in")?, "$.dim_in")?;
        let dout = dim_at(field(obj, "dim_out")?, "$.dim_out")?;
        let choi = matrix_at(&obj["choi"], "$.choi")?;
        return QuantumChannel::from_choi(din, dout, choi)
            .map(Object::Channel)
            .map_err(|e| ParseError::invalid("$.choi", e));
    }
    if has("kraus") {
        let list = array_at(&obj["kraus"], "$.kraus")?;
        let ks = list
            .iter()
            .enumerate()
            .map(|(i, k)| matrix_at(k, &format!("$.kraus[{i}]")))
            .collect::<Parsed<Vec<_>>>()?;
        return QuantumChannel::from_kraus(ks)
            .map(Object::Channel)
            .map_err(|e| ParseError::invalid("$.kraus", e));
    }
    if has("matrix") {
        let rows = real_rows_at(&obj["matrix"], "$.matrix")?;
        return ClassicalChannel::new(rows)
            .map(Object::Classical)
            .map_err(|e| ParseError::invalid("$.matrix", e));
    }
    if has("density") {
        let m = matrix_at(&obj["density"], "$.density")?;
        return QuantumState::new(m)
            .map(Object::State)
            .map_err(|e| ParseError::invalid("$.density", e));
    }
    if has("probs") {
        let w = reals_at(&obj["probs"], "$.probs")?;
        return ProbVector::new(w)
            .map(Object::Probs)
            .map_err(|e| ParseError::invalid("$.probs", e));
    }
    if has("p") && has("q") {
        let p = reals_at(&obj["p"], "$.p")?;
        let q = reals_at(&obj["q"], "$.q")?;
        return Dichotomy::from_weights(p, q)
            .map(Object::Dichotomy)
            .map_err(|e| ParseError::invalid("$", e));
    }
    let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    Err(ParseError::new(
        "$",
        format!("unrecognized object with keys {keys:?}; expected one of choi, kraus, matrix, density, probs, or p and q"),
    ))
}

/// Parses JSON text; syntax errors report line and column.
pub fn parse_str(text: &str) -> Parsed<Object> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| ParseError::new("$", format!("invalid JSON at line {}, column {}: {e}", e.line(), e.column())))?;
    parse_object(&v)
}

fn complex_to_json(z: C64) -> Value {
    if z.im == 0.0 {
        real_to_json(z.re)
    } else {
        json!([real_to_json(z.re), real_to_json(z.im)])
    }
}

pub fn matrix_to_json(m: &ComplexMatrix) -> Value {
    Value::Array(
        (0..m.rows())
            .map(|i| Value::Array((0..m.cols()).map(|j| complex_to_json(m[(i, j)])).collect()))
            .collect(),
    )
}

fn reals_to_json(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| real_to_json(x)).collect())
}

pub fn channel_to_json(c: &QuantumChannel) -> Value {
    json!({ "dim_in": c.dim_in(), "dim_out": c.dim_out(), "choi": matrix_to_json(c.choi()) })
}

pub fn classical_to_json(c: &ClassicalChannel) -> Value {
    json!({ "matrix": Value::Array(c.rows().iter().map(|r| reals_to_json(r)).collect()) })
}

pub fn state_to_json(s: &QuantumState) -> Value {
    json!({ "density": matrix_to_json(s.matrix()) })
}

pub fn probs_to_json(p: &ProbVector) -> Value {
    json!({ "probs": reals_to_json(p.weights()) })
}

pub fn dichotomy_to_json(d: &Dichotomy) -> Value {
    json!({ "p": reals_to_json(d.p.weights()), "q": reals_to_json(d.q.weights()) })
}

/// Lorenz vertices as `[[a, b], ...]`.
pub fn vertices_to_json(vs: &[(f64, f64)]) -> Value {
    Value::Array(vs.iter().map(|&(a, b)| json!([real_to_json(a), real_to_json(b)])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_channel, random_mixed_state, random_stochastic, rng_from_seed};

    #[test]
    fn rounding_and_infinities() {
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(123456.7890123456), 123456.789012);
        assert_eq!(real_to_json(f64::INFINITY), json!("inf"));
        assert_eq!(real_from_json(&json!("inf")), Some(f64::INFINITY));
        assert_eq!(real_from_json(&json!(2.5)), Some(2.5));
        assert_eq!(real_from_json(&json!("2.5")), None);
    }

    #[test]
    fn written_objects_parse_back() {
        let mut rng = rng_from_seed(11);
        let c = random_channel(&mut rng, 2, 3);
        let back = match parse_object(&channel_to_json(&c)).unwrap() {
            Object::Channel(b) => b,
            o => panic!("{o:?}"),
        };
        assert!(back.choi().max_abs_diff(c.choi()) < 1e-11);

        let s = random_mixed_state(&mut rng, 3);
        assert!(matches!(parse_object(&state_to_json(&s)).unwrap(), Object::State(_)));
        let e = random_stochastic(&mut rng, 3, 2);
        let Object::Classical(e2) = parse_object(&classical_to_json(&e)).unwrap() else { panic!() };
        assert_eq!(e2.dim_in(), 3);
        assert_eq!(e2.dim_out(), 2);
    }

    #[test]
    fn kraus_and_complex_entries() {
        let t = r#"{"kraus": [[[0, 1], [1, 0]]]}"#;
        let Object::Channel(x) = parse_str(t).unwrap() else { panic!() };
        assert_eq!((x.dim_in(), x.dim_out()), (2, 2));
        let t = r#"{"density": [[0.5, [0, -0.5]], [[0, 0.5], 0.5]]}"#;
        assert!(matches!(parse_str(t).unwrap(), Object::State(_)));
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse_str(r#"{"kraus": [[[1, 0], [0, "x"]]]}"#).unwrap_err();
        assert_eq!(e.path, "$.kraus[0][1][1]");
        let e = parse_str(r#"{"probs": [0.5, 0.6]}"#).unwrap_err();
        assert_eq!(e.path, "$.probs");
        let e = parse_str(r#"{"matrix": [[1, 0], [0]]}"#).unwrap_err();
        assert_eq!(e.path, "$.matrix");
        let e = parse_str(r#"{"dim_in": 2, "choi": [[1]]}"#).unwrap_err();
        assert!(e.message.contains("dim_out"));
        let e = parse_str("{\"probs\": [1,\n").unwrap_err();
        assert!(e.message.contains("line 2"));
        assert!(parse_str(r#"{"foo": 1}"#).is_err());
    }
}
