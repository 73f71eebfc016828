//! Flat INI-style configuration: `[section]` headers, `key = value` lines,
//! `#` or `;` comments. Numbers are plain decimals with `.` as separator.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::map::MapParams;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn new(name: &str) -> Self {
        Section {
            name: name.to_string(),
            line: 0,
            entries: vec![],
        }
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push(Entry {
            key: key.to_string(),
            value: value.into(),
            line: 0,
        });
    }

    /// Fails on the first key not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
            Some(e) => Err(err(e.line, &e.key, format!("unknown key in [{}]", self.name))),
            None => Ok(()),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |e| e.f64())
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.get(key).map_or(Ok(default), |e| e.usize())
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        self.get(key).map_or(Ok(default), |e| e.u64())
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        self.get(key).map_or(Ok(default), |e| e.bool())
    }

    /// Line to blame for a section-level error: the key if present, else
    /// the header.
    pub fn line_of(&self, key: &str) -> usize {
        self.get(key).map_or(self.line, |e| e.line)
    }
}

pub(crate) fn err(line: usize, key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        msg: msg.into(),
    }
}

/// Strict decimal: optional sign, digits, optional `.digits`, optional
/// exponent. Rejects `,` separators, `inf`, `nan` and hex.
pub fn parse_decimal(s: &str) -> Option<f64> {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let d0 = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - d0;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let f0 = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - f0;
    }
    if digits == 0 {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let e0 = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == e0 {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    s.parse().ok().filter(|v: &f64| v.is_finite())
}

impl Entry {
    fn fail(&self, what: &str) -> Error {
        err(self.line, &self.key, format!("expected {what}, got `{}`", self.value))
    }

    pub fn f64(&self) -> Result<f64> {
        parse_decimal(&self.value).ok_or_else(|| self.fail("a decimal number"))
    }

    pub fn f64_list(&self) -> Result<Vec<f64>> {
        self.value
            .split(',')
            .map(|t| parse_decimal(t.trim()).ok_or_else(|| self.fail("a comma-separated list of decimals")))
            .collect()
    }

    pub fn usize_list(&self) -> Result<Vec<usize>> {
        self.value
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| self.fail("a comma-separated list of integers")))
            .collect()
    }

    pub fn usize(&self) -> Result<usize> {
        self.value.parse().map_err(|_| self.fail("a non-negative integer"))
    }

    pub fn u64(&self) -> Result<u64> {
        self.value.parse().map_err(|_| self.fail("a non-negative integer"))
    }

    pub fn bool(&self) -> Result<bool> {
        match self.value.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(self.fail("true or false")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IniDoc {
    pub sections: Vec<Section>,
}

impl IniDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = IniDoc::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, "", "unterminated section header"))?
                    .trim();
                if doc.section(name).is_some() {
                    return Err(err(line, name, "duplicate section"));
                }
                doc.sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: vec![],
                });
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| err(line, "", "expected `key = value`"))?;
            let key = k.trim();
            let sec = doc
                .sections
                .last_mut()
                .ok_or_else(|| err(line, key, "key outside any section"))?;
            if key.is_empty() {
                return Err(err(line, key, "empty key"));
            }
            if sec.get(key).is_some() {
                return Err(err(line, key, "duplicate key"));
            }
            sec.entries.push(Entry {
                key: key.to_string(),
                value: v.trim().to_string(),
                line,
            });
        }
        Ok(doc)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, sec) in self.sections.iter().enumerate() {
            if i > 0 {
                s.push('\n');
            }
            let _ = writeln!(s, "[{}]", sec.name);
            for e in &sec.entries {
                let _ = writeln!(s, "{} = {}", e.key, e.value);
            }
        }
        s
    }
}

pub const MAP_KEYS: &[&str] = &[
    "dim",
    "lambdas",
    "deformed",
    "eps",
    "r",
    "gamma1",
    "gamma2",
    "gamma3",
    "delta0",
    "delta1",
    "window_center",
    "fixed_point_mode",
    "plateau_slope",
    "beta",
];

fn list_text(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

impl MapParams {
    /// Reads a `[map]` section. Missing keys take the reference values;
    /// `dim` and `lambdas` must agree. Only the checks that can be pinned on
    /// a single key happen here, the rest is left to `MapSpec::new`.
    pub fn from_section(sec: &Section) -> Result<Self> {
        sec.reject_unknown(MAP_KEYS)?;
        let r = MapParams::reference();
        let lambdas = match sec.get("lambdas") {
            Some(e) => e.f64_list()?,
            None => r.lambdas.clone(),
        };
        let dim = sec.usize_or("dim", lambdas.len())?;
        if lambdas.len() != dim {
            return Err(err(sec.line_of("lambdas"), "lambdas", format!("{} entries for dim = {dim}", lambdas.len())));
        }
        let deformed = sec.bool_or("deformed", r.deformed)?;
        if lambdas.windows(2).any(|w| w[1] < w[0] || (deformed && w[1] == w[0])) {
            return Err(err(sec.line_of("lambdas"), "lambdas", "must be sorted increasingly"));
        }
        let window_center = match sec.get("window_center") {
            Some(e) => {
                let v = e.f64_list()?;
                if v.len() != dim {
                    return Err(err(e.line, &e.key, format!("{} entries for dim = {dim}", v.len())));
                }
                v
            }
            None => vec![0.0; dim],
        };
        let opt = |k: &str| sec.get(k).map(|e| e.f64()).transpose();
        Ok(MapParams {
            dim,
            lambdas,
            deformed,
            eps: sec.f64_or("eps", r.eps)?,
            r: sec.f64_or("r", r.r)?,
            gamma1: sec.f64_or("gamma1", r.gamma1)?,
            gamma2: sec.f64_or("gamma2", r.gamma2)?,
            gamma3: sec.f64_or("gamma3", r.gamma3)?,
            delta0: sec.f64_or("delta0", r.delta0)?,
            delta1: sec.f64_or("delta1", r.delta1)?,
            window_center,
            fixed_point_mode: sec.bool_or("fixed_point_mode", r.fixed_point_mode)?,
            plateau_slope: opt("plateau_slope")?,
            beta: opt("beta")?,
        })
    }

    pub fn to_section(&self) -> Section {
        let mut s = Section::new("map");
        s.push("dim", self.dim.to_string());
        s.push("lambdas", list_text(&self.lambdas));
        s.push("deformed", self.deformed.to_string());
        for (k, v) in [
            ("eps", self.eps),
            ("r", self.r),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
            ("delta0", self.delta0),
            ("delta1", self.delta1),
        ] {
            s.push(k, format!("{v:?}"));
        }
        s.push("window_center", list_text(&self.window_center));
        s.push("fixed_point_mode", self.fixed_point_mode.to_string());
        if let Some(v) = self.plateau_slope {
            s.push("plateau_slope", format!("{v:?}"));
        }
        if let Some(v) = self.beta {
            s.push("beta", format!("{v:?}"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_are_strict() {
        assert_eq!(parse_decimal("0.05"), Some(0.05));
        assert_eq!(parse_decimal("-1e-3"), Some(-1e-3));
        assert_eq!(parse_decimal("2"), Some(2.0));
        for bad in ["0,05", "inf", "nan", "0x10", "", ".", "1e", "1.0.0", " 1"] {
            assert_eq!(parse_decimal(bad), None, "{bad}");
        }
    }

    #[test]
    fn map_section_round_trip() {
        let p = MapParams::reference();
        let doc = IniDoc {
            sections: vec![p.to_section()],
        };
        let back = IniDoc::parse(&doc.to_text()).unwrap();
        assert_eq!(MapParams::from_section(back.section("map").unwrap()).unwrap(), p);
    }

    #[test]
    fn unsorted_lambdas_name_the_key() {
        let doc = IniDoc::parse("[map]\ndim = 2\nlambdas = 4, 2\n").unwrap();
        match MapParams::from_section(doc.section("map").unwrap()) {
            Err(Error::Config { line, key, .. }) => assert_eq!((line, key.as_str()), (3, "lambdas")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let doc = IniDoc::parse("[map]\nlamdas = 2, 4\n").unwrap();
        assert!(matches!(
            MapParams::from_section(doc.section("map").unwrap()),
            Err(Error::Config { line: 2, .. })
        ));
        assert!(matches!(
            IniDoc::parse("[map]\ndim = 2\ndim = 3\n"),
            Err(Error::Config { line: 3, .. })
        ));
        assert!(IniDoc::parse("dim = 2\n").is_err());
    }

    #[test]
    fn locale_comma_rejected_with_line() {
        let doc = IniDoc::parse("[map]\n\ndelta1 = 0,1\n").unwrap();
        match MapParams::from_section(doc.section("map").unwrap()) {
            Err(Error::Config { line, key, .. }) => assert_eq!((line, key.as_str()), (3, "delta1")),
            other => panic!("{other:?}"),
        }
    }
}
