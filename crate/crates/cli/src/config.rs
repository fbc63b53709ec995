//! Flat key/value run configuration.
//!
//! A config file is a TOML document restricted to top-level scalar and array
//! values. Every value may be overridden by a command-line flag; keys that no
//! subcommand reads are rejected so typos do not pass silently.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Default)]
pub struct Settings {
    table: Table,
    source: Option<PathBuf>,
    used: RefCell<BTreeSet<String>>,
}

fn describe(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, Some(path.to_path_buf()))
    }

    pub fn parse(text: &str, source: Option<PathBuf>) -> Result<Self, CliError> {
        let origin = source
            .as_ref()
            .map_or_else(|| "config".to_string(), |p| p.display().to_string());
        let table: Table = toml::from_str(text).map_err(|e| CliError::Usage(format!("{origin}: {e}")))?;
        if let Some((k, _)) = table.iter().find(|(_, v)| v.is_table()) {
            return Err(CliError::Usage(format!(
                "{origin}: key '{k}' is a table; the config must be flat"
            )));
        }
        Ok(Self {
            table,
            source,
            used: RefCell::default(),
        })
    }

    fn origin(&self) -> String {
        self.source
            .as_ref()
            .map_or_else(|| "config".to_string(), |p| p.display().to_string())
    }

    fn raw(&self, key: &str) -> Option<&Value> {
        self.used.borrow_mut().insert(key.to_string());
        self.table.get(key)
    }

    fn bad(&self, key: &str, want: &str, v: &Value) -> CliError {
        CliError::Usage(format!("{}: '{key}' must be {want}, got {}", self.origin(), describe(v)))
    }

    /// Marks `key` as understood without reading it.
    pub fn touch(&self, key: &str) {
        self.used.borrow_mut().insert(key.to_string());
    }

    pub fn f64(&self, key: &str, flag: Option<f64>) -> Result<Option<f64>, CliError> {
        self.touch(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(self.bad(key, "a number", v)),
        }
    }

    pub fn u64(&self, key: &str, flag: Option<u64>) -> Result<Option<u64>, CliError> {
        self.touch(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(v) => Err(self.bad(key, "a non-negative integer", v)),
        }
    }

    pub fn usize(&self, key: &str, flag: Option<usize>) -> Result<Option<usize>, CliError> {
        Ok(self.u64(key, flag.map(|x| x as u64))?.map(|x| x as usize))
    }

    pub fn bool(&self, key: &str, flag: Option<bool>) -> Result<Option<bool>, CliError> {
        self.touch(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(v) => Err(self.bad(key, "true or false", v)),
        }
    }

    pub fn string(&self, key: &str, flag: Option<String>) -> Result<Option<String>, CliError> {
        self.touch(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(self.bad(key, "a string", v)),
        }
    }

    /// An array, or a comma-separated string, of items parsed with `parse`.
    pub fn list<T>(
        &self,
        key: &str,
        flag: Option<Vec<T>>,
        parse: impl Fn(&Value) -> Option<T>,
    ) -> Result<Option<Vec<T>>, CliError> {
        self.touch(key);
        if flag.is_some() {
            return Ok(flag);
        }
        let items: Vec<Value> = match self.raw(key) {
            None => return Ok(None),
            Some(Value::Array(a)) => a.clone(),
            Some(Value::String(s)) => s
                .split(',')
                .map(|p| {
                    let p = p.trim();
                    p.parse::<i64>()
                        .map(Value::Integer)
                        .or_else(|_| p.parse::<f64>().map(Value::Float))
                        .unwrap_or_else(|_| Value::String(p.to_string()))
                })
                .collect(),
            Some(v) => return Err(self.bad(key, "an array", v)),
        };
        items
            .iter()
            .map(|v| parse(v).ok_or_else(|| self.bad(key, "an array of valid items", v)))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    /// Fails on keys that no code path asked for.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .table
            .keys()
            .filter(|k| !used.contains(k.as_str()))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!(
                "{}: unknown key(s) {}",
                self.origin(),
                unknown.join(", ")
            )))
        }
    }
}

pub fn as_u64(v: &Value) -> Option<u64> {
    v.as_integer().and_then(|i| u64::try_from(i).ok())
}

pub fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

pub fn as_str(v: &Value) -> Option<String> {
    v.as_str().map(str::to_string)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let s = Settings::parse("seed = 3\nlr = 0.5\n", None).unwrap();
        assert_eq!(s.u64("seed", Some(9)).unwrap(), Some(9));
        assert_eq!(s.f64("lr", None).unwrap(), Some(0.5));
        s.finish().unwrap();
    }

    #[test]
    fn rejects_tables_and_unknown_keys() {
        assert!(Settings::parse("[xor]\ndelay = 1\n", None).is_err());
        let s = Settings::parse("seeed = 3\n", None).unwrap();
        s.u64("seed", None).unwrap();
        assert!(s.finish().is_err());
    }

    #[test]
    fn lists_accept_arrays_and_strings() {
        let s = Settings::parse("a = [1, 2]\nb = \"3, 4\"\n", None).unwrap();
        assert_eq!(s.list("a", None, as_u64).unwrap(), Some(vec![1, 2]));
        assert_eq!(s.list("b", None, as_u64).unwrap(), Some(vec![3, 4]));
        assert!(s.list("a", None, as_str).is_err());
    }

    #[test]
    fn type_errors_name_the_key() {
        let s = Settings::parse("seed = \"x\"\n", None).unwrap();
        match s.u64("seed", None) {
            Err(CliError::Usage(m)) => assert!(m.contains("seed")),
            other => panic!("{other:?}"),
        }
    }
}
