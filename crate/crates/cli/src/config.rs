//! Shared run configuration: defaults, the `key = value` config file, virtual
//! duration parsing, and threshold resolution.

use std::collections::HashMap;
use std::path::Path;

use sdd_core::vdo::{
    HYBRID_DEFAULT_SHARES, HYBRID_DEFAULT_THRESHOLD, VANISH_DEFAULT_SHARES,
    VANISH_DEFAULT_THRESHOLD,
};

use crate::CliError;

pub const DEFAULT_NODES: u32 = 200;
pub const DEFAULT_REPLICATION_FACTOR: u16 = 20;
pub const DEFAULT_REPLICATION_INTERVAL: u64 = 30 * 60;
pub const DEFAULT_ENTRY_TTL: u64 = 8 * 60 * 60;
pub const DEFAULT_HOP_INTERVAL: u64 = 3 * 60;
pub const DEFAULT_SWEEP_INTERVAL: u64 = 60;
pub const DEFAULT_THRESHOLD_PERCENT: u32 = 90;
pub const DEFAULT_TTL: u64 = 2 * 60 * 60;

/// Parses a virtual duration: plain seconds or any run of `<n>h <n>m <n>s`
/// components, e.g. `7200`, `2h`, `30m`, `7h30m`.
pub fn parse_duration(s: &str) -> Result<u64, CliError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(CliError::Usage("empty duration".into()));
    }
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let mut total = 0u64;
    let mut digits = String::new();
    let mut saw_component = false;
    for c in s.chars() {
        if c.is_ascii_digit() {
            digits.push(c);
        } else {
            let value: u64 = digits
                .parse()
                .map_err(|_| CliError::Usage(format!("bad duration {s:?}")))?;
            let unit = match c {
                's' => 1,
                'm' => 60,
                'h' => 3600,
                _ => return Err(CliError::Usage(format!("bad duration unit {c:?} in {s:?}"))),
            };
            total += value * unit;
            digits.clear();
            saw_component = true;
        }
    }
    if !digits.is_empty() || !saw_component {
        return Err(CliError::Usage(format!("bad duration {s:?}")));
    }
    Ok(total)
}

pub fn format_duration(mut secs: u64) -> String {
    let mut out = String::new();
    for (unit, suffix) in [(3600, 'h'), (60, 'm'), (1, 's')] {
        if secs >= unit {
            out.push_str(&format!("{}{}", secs / unit, suffix));
            secs %= unit;
        }
    }
    if out.is_empty() {
        out.push_str("0s");
    }
    out
}

/// Values read from a `key = value` config file; flags override these, these
/// override the built-in defaults.
#[derive(Debug, Default, Clone)]
pub struct FileSettings {
    map: HashMap<String, String>,
}

impl FileSettings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("config {}: {e}", path.display())))?;
        let mut map = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config {}:{}: expected key = value",
                    path.display(),
                    lineno + 1
                )));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { map })
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        self.map
            .get(key)
            .map(|v| v.parse().map_err(|_| CliError::Usage(format!("config key {key}: bad number {v:?}"))))
            .transpose()
    }

    pub fn duration(&self, key: &str) -> Result<Option<u64>, CliError> {
        self.map.get(key).map(|v| parse_duration(v)).transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Vanish,
    Ephemerizer,
    Hybrid,
}

impl ModeArg {
    pub fn default_shares(self) -> u16 {
        match self {
            ModeArg::Vanish => VANISH_DEFAULT_SHARES,
            _ => HYBRID_DEFAULT_SHARES,
        }
    }

    pub fn default_threshold(self) -> u16 {
        match self {
            ModeArg::Vanish => VANISH_DEFAULT_THRESHOLD,
            _ => HYBRID_DEFAULT_THRESHOLD,
        }
    }
}

/// Resolves (n, k) from explicit share/threshold flags or a threshold
/// percentage: k = ceil(n * percent / 100), and k must be at least 2.
pub fn resolve_sharing(
    mode: ModeArg,
    shares: Option<u16>,
    threshold: Option<u16>,
    percent: Option<u32>,
) -> Result<(u16, u16), CliError> {
    let n = shares.unwrap_or_else(|| mode.default_shares());
    if n == 0 {
        return Err(CliError::Usage("share count must be positive".into()));
    }
    let k = match (threshold, percent) {
        (Some(k), _) => k,
        (None, Some(pct)) => {
            if pct == 0 || pct > 100 {
                return Err(CliError::Usage("threshold percent must be in (0, 100]".into()));
            }
            ((u64::from(n) * u64::from(pct)).div_ceil(100)) as u16
        }
        (None, None) => {
            if shares.is_none() {
                mode.default_threshold()
            } else {
                ((u64::from(n) * u64::from(DEFAULT_THRESHOLD_PERCENT)).div_ceil(100)) as u16
            }
        }
    };
    if k < 2 {
        return Err(CliError::Usage(format!("resolved threshold {k} is below 2")));
    }
    if k > n {
        return Err(CliError::Usage(format!("threshold {k} exceeds share count {n}")));
    }
    if mode == ModeArg::Hybrid && k < 3 {
        return Err(CliError::Usage("hybrid mode needs a threshold of at least 3".into()));
    }
    Ok((n, k))
}
