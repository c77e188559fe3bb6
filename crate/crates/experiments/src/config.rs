//! Flat key access over TOML documents.
//!
//! Nested tables and dotted keys are flattened to `a.b.c` paths. Every key
//! must be consumed by a reader; leftovers are reported as unknown so typos
//! fail loudly. Numeric values may also be written as short expressions over
//! `pi`, such as `"-pi/2"` or `"3*pi/4"`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use toml::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Keys {
    map: BTreeMap<String, Value>,
    used: BTreeSet<String>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&path, t, out),
            other => {
                out.insert(path, other.clone());
            }
        }
    }
}

/// Evaluates `[-]factor ((*|/) factor)*` with factors being numbers or `pi`.
pub fn eval_expr(src: &str) -> Option<f64> {
    let s: String = src.chars().filter(|c| !c.is_whitespace()).collect();
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(&s)),
    };
    if body.is_empty() {
        return None;
    }
    let factor = |f: &str| match f {
        "pi" | "PI" => Some(PI),
        _ => f.parse::<f64>().ok(),
    };
    let mut value = None;
    let mut op = '*';
    let mut start = 0;
    for (i, c) in body.char_indices().chain(std::iter::once((body.len(), '*'))) {
        if c != '*' && c != '/' {
            continue;
        }
        let f = factor(&body[start..i])?;
        value = Some(match (value, op) {
            (None, _) => f,
            (Some(v), '*') => v * f,
            (Some(v), _) => v / f,
        });
        op = c;
        start = i + 1;
    }
    value.map(|v| sign * v).filter(|v| v.is_finite())
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) => eval_expr(s).ok_or_else(|| Error::key(key, format!("cannot evaluate `{s}`"))),
        other => Err(Error::key(key, format!("expected a number, got {}", other.type_str()))),
    }
}

impl Keys {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut map = BTreeMap::new();
        flatten("", &table, &mut map);
        Ok(Self { map, used: BTreeSet::new() })
    }

    fn take(&mut self, key: &str) -> Option<&Value> {
        let v = self.map.get(key)?;
        self.used.insert(key.to_string());
        Some(v)
    }

    pub fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key).map(|v| as_f64(key, v)).transpose()
    }

    pub fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(_) => Err(Error::key(key, "expected a non-negative integer")),
        }
    }

    pub fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(Error::key(key, "expected true or false")),
        }
    }

    pub fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(Error::key(key, "expected a string")),
        }
    }

    pub fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a.iter().map(|v| as_f64(key, v)).collect::<Result<Vec<_>>>().map(Some),
            Some(_) => Err(Error::key(key, "expected an array of numbers")),
        }
    }

    pub fn array<const K: usize>(&mut self, key: &str) -> Result<Option<[f64; K]>> {
        match self.list(key)? {
            None => Ok(None),
            Some(v) => v
                .try_into()
                .map(Some)
                .map_err(|v: Vec<f64>| Error::key(key, format!("expected {K} numbers, got {}", v.len()))),
        }
    }

    /// Fails if any key was never read.
    pub fn finish(self) -> Result<()> {
        let unknown: Vec<&str> = self.map.keys().filter(|k| !self.used.contains(*k)).map(String::as_str).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::UnknownKeys(unknown.join(", ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expressions() {
        assert_eq!(eval_expr("pi/2"), Some(PI / 2.0));
        assert_eq!(eval_expr(" - pi / 2 "), Some(-PI / 2.0));
        assert_eq!(eval_expr("3*pi/4"), Some(3.0 * PI / 4.0));
        assert_eq!(eval_expr("1.5e-3"), Some(1.5e-3));
        assert_eq!(eval_expr("2pi"), None);
        assert_eq!(eval_expr(""), None);
        assert_eq!(eval_expr("1/0"), None);
        assert_eq!(eval_expr("pi//2"), None);
    }

    #[test]
    fn flattens_and_tracks_usage() {
        let mut k = Keys::parse("a = 1\nb.c = \"pi\"\n[d]\ne = [1, 2.5]\nf = true\n").unwrap();
        assert_eq!(k.f64("a").unwrap(), Some(1.0));
        assert_eq!(k.f64("b.c").unwrap(), Some(PI));
        assert_eq!(k.array::<2>("d.e").unwrap(), Some([1.0, 2.5]));
        assert!(k.array::<3>("d.e").is_err());
        assert_eq!(k.f64("missing").unwrap(), None);
        let err = k.clone().finish().unwrap_err().to_string();
        assert!(err.contains("d.f"), "{err}");
        assert_eq!(k.bool("d.f").unwrap(), Some(true));
        k.finish().unwrap();
    }

    #[test]
    fn type_errors_name_the_key() {
        let mut k = Keys::parse("n = -3\ns = 1\nx = \"abc\"").unwrap();
        assert!(k.usize("n").unwrap_err().to_string().contains("`n`"));
        assert!(k.string("s").is_err());
        assert!(k.f64("x").is_err());
    }
}
