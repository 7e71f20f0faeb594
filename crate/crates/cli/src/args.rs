//! Parsers for complex literals, paths and `name=value` flags.

use ermakov_core::numeric::ComplexPath;
use ermakov_core::C64;

fn parse_f64(s: &str, whole: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("invalid complex literal {whole:?}"))
}

/// Parses `re`, `imi`, `re+imi`, `re-imi`, `i`, `-i` (exponents allowed).
pub fn parse_complex(text: &str) -> Result<C64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err("empty complex literal".into());
    }
    let Some(body) = s.strip_suffix('i') else {
        return Ok(C64::new(parse_f64(&s, text)?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (parse_f64(&body[..k], text)?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => parse_f64(other, text)?,
    };
    Ok(C64::new(re, im))
}

/// `a:b[:c...]`
pub fn parse_path(text: &str) -> Result<ComplexPath, String> {
    let pts = text.split(':').map(parse_complex).collect::<Result<Vec<_>, _>>()?;
    ComplexPath::new(pts).map_err(|e| e.to_string())
}

/// `value,derivative`
pub fn parse_ic(text: &str) -> Result<(C64, C64), String> {
    let (a, b) = text.split_once(',').ok_or_else(|| format!("initial condition {text:?} must be `value,derivative`"))?;
    Ok((parse_complex(a)?, parse_complex(b)?))
}

pub fn parse_param(text: &str) -> Result<(String, C64), String> {
    let (name, value) = text.split_once('=').ok_or_else(|| format!("parameter {text:?} must be `name=value`"))?;
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(format!("invalid parameter name {name:?}"));
    }
    Ok((name.to_string(), parse_complex(value)?))
}

/// `index=value` for a free coefficient at a resonant index.
pub fn parse_free(text: &str) -> Result<(i64, C64), String> {
    let (idx, value) = text.split_once('=').ok_or_else(|| format!("free value {text:?} must be `index=value`"))?;
    let idx = idx.trim().parse::<i64>().map_err(|_| format!("invalid resonant index {idx:?}"))?;
    Ok((idx, parse_complex(value)?))
}
