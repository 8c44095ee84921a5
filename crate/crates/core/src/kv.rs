//! Tiny `key=value` line format shared by model headers and run configs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Default, Clone, PartialEq)]
pub(crate) struct KvMap(BTreeMap<String, String>);

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("expected key=value, got {line:?}")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn insert(&mut self, key: &str, value: impl Display) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn get_str(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("missing key {key:?}")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get_str(key)?;
        raw.parse()
            .map_err(|_| Error::Format(format!("bad value {raw:?} for key {key:?}")))
    }

    /// Lines sorted by key, so equal maps render byte-identically.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_render_roundtrip() {
        let mut kv = KvMap::new();
        kv.insert("b", 2);
        kv.insert("a", "x");
        let text = kv.render();
        assert_eq!(text, "a=x\nb=2\n");
        assert_eq!(KvMap::parse(&text).unwrap(), kv);
    }

    #[test]
    fn comments_and_missing_keys() {
        let kv = KvMap::parse("# hi\n\nlevels = 8\n").unwrap();
        assert_eq!(kv.get::<u32>("levels").unwrap(), 8);
        assert!(kv.get::<u32>("nope").is_err());
        assert!(KvMap::parse("garbage").is_err());
    }
}
