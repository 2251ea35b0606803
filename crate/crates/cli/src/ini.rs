//! Minimal INI reader that keeps line numbers for diagnostics.
//!
//! Grammar: `[section]` headers, `key = value` pairs, blank lines, and
//! comments starting with `#` or `;` (whole-line or trailing after
//! whitespace). Keys and section names are case-sensitive. A key may appear
//! only once per section and a section only once per file.

use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Ini {
    pub sections: Vec<Section>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IniError {
    pub line: Option<usize>,
    pub message: String,
}

impl IniError {
    pub fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    pub fn general(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for IniError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for IniError {}

fn strip_comment(line: &str) -> &str {
    let trimmed = line.trim_start();
    if trimmed.starts_with('#') || trimmed.starts_with(';') {
        return "";
    }
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if (b == b'#' || b == b';') && i > 0 && bytes[i - 1].is_ascii_whitespace() {
            return &line[..i];
        }
    }
    line
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self, IniError> {
        let mut ini = Ini::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| IniError::at(line_no, "section header is missing ']'"))?
                    .trim();
                if name.is_empty() {
                    return Err(IniError::at(line_no, "empty section name"));
                }
                if let Some(prev) = ini.section(name) {
                    return Err(IniError::at(
                        line_no,
                        format!("section [{name}] already defined on line {}", prev.line),
                    ));
                }
                ini.sections.push(Section { name: name.to_string(), line: line_no, entries: Vec::new() });
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| IniError::at(line_no, format!("expected 'key = value', found '{line}'")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(IniError::at(line_no, "missing key before '='"));
            }
            let section = ini
                .sections
                .last_mut()
                .ok_or_else(|| IniError::at(line_no, format!("key '{key}' appears before any [section]")))?;
            if let Some(prev) = section.entries.iter().find(|e| e.key == key) {
                return Err(IniError::at(
                    line_no,
                    format!("key '{key}' in [{}] already set on line {}", section.name, prev.line),
                ));
            }
            section.entries.push(Entry { key: key.to_string(), value: value.trim().to_string(), line: line_no });
        }
        Ok(ini)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn require_section(&self, name: &str) -> Result<&Section, IniError> {
        self.section(name).ok_or_else(|| IniError::general(format!("missing section [{name}]")))
    }

    /// Rejects sections not named in `allowed`.
    pub fn check_sections(&self, allowed: &[&str]) -> Result<(), IniError> {
        for s in &self.sections {
            if !allowed.contains(&s.name.as_str()) {
                return Err(IniError::at(s.line, format!("unknown section [{}]", s.name)));
            }
        }
        Ok(())
    }
}

impl Section {
    pub fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), IniError> {
        for e in &self.entries {
            if !allowed.contains(&e.key.as_str()) {
                return Err(IniError::at(e.line, format!("unknown key '{}' in [{}]", e.key, self.name)));
            }
        }
        Ok(())
    }

    pub fn str(&self, key: &str) -> Result<&str, IniError> {
        self.entry(key)
            .map(|e| e.value.as_str())
            .ok_or_else(|| IniError::at(self.line, format!("[{}] is missing key '{key}'", self.name)))
    }

    pub fn f64(&self, key: &str) -> Result<f64, IniError> {
        let e = self
            .entry(key)
            .ok_or_else(|| IniError::at(self.line, format!("[{}] is missing key '{key}'", self.name)))?;
        parse_f64(e)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, IniError> {
        match self.entry(key) {
            Some(e) => parse_f64(e),
            None => Ok(default),
        }
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, IniError> {
        self.entry(key).map(parse_f64).transpose()
    }

    pub fn usize(&self, key: &str) -> Result<usize, IniError> {
        let e = self
            .entry(key)
            .ok_or_else(|| IniError::at(self.line, format!("[{}] is missing key '{key}'", self.name)))?;
        parse_usize(e)
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>, IniError> {
        self.entry(key).map(parse_usize).transpose()
    }

    /// Comma-separated list of numbers.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, IniError> {
        let e = self
            .entry(key)
            .ok_or_else(|| IniError::at(self.line, format!("[{}] is missing key '{key}'", self.name)))?;
        parse_f64_list(e)
    }
}

fn parse_f64(e: &Entry) -> Result<f64, IniError> {
    let v = parse_number(&e.value)
        .ok_or_else(|| IniError::at(e.line, format!("'{}' is not a number (key '{}')", e.value, e.key)))?;
    if !v.is_finite() {
        return Err(IniError::at(e.line, format!("key '{}' must be finite", e.key)));
    }
    Ok(v)
}

fn parse_usize(e: &Entry) -> Result<usize, IniError> {
    e.value
        .parse::<usize>()
        .map_err(|_| IniError::at(e.line, format!("'{}' is not a non-negative integer (key '{}')", e.value, e.key)))
}

pub fn parse_f64_list(e: &Entry) -> Result<Vec<f64>, IniError> {
    if e.value.trim().is_empty() {
        return Ok(Vec::new());
    }
    e.value
        .split(',')
        .map(|item| {
            let item = item.trim();
            parse_number(item)
                .filter(|v| v.is_finite())
                .ok_or_else(|| IniError::at(e.line, format!("'{item}' is not a finite number (key '{}')", e.key)))
        })
        .collect()
}

/// Numbers may be written as plain floats or with a `pi` factor, e.g.
/// `pi/4`, `2*pi`, `0.5pi`.
fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let lower = s.to_ascii_lowercase();
    let pos = lower.find("pi")?;
    let (pre, post) = (&lower[..pos], &lower[pos + 2..]);
    let pre = pre.trim().trim_end_matches('*').trim();
    let coeff = match pre {
        "" => 1.0,
        "-" => -1.0,
        p => p.parse::<f64>().ok()?,
    };
    let post = post.trim();
    let div = if post.is_empty() {
        1.0
    } else {
        post.strip_prefix('/')?.trim().parse::<f64>().ok()?
    };
    Some(coeff * std::f64::consts::PI / div)
}
