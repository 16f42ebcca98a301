//! Comma-separated value lists. An item `a:b:s` expands to `a, a+s, …, b`.

use std::str::FromStr;

use ltfade_core::{Error, Result};

fn bad(flag: &str, item: &str) -> Error {
    Error::Config(format!("{flag}: cannot read '{item}'"))
}

pub fn powers_db(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, rest)) = item.split_once(':') {
            let (b, s) = rest.split_once(':').unwrap_or((rest, "1"));
            let parse = |x: &str| x.trim().parse::<f64>().map_err(|_| bad("--power-db", item));
            let (a, b, s) = (parse(a)?, parse(b)?, parse(s)?);
            if !(a.is_finite() && b.is_finite() && s > 0.0 && b >= a) {
                return Err(bad("--power-db", item));
            }
            let n = ((b - a) / s + 1e-9).floor() as usize;
            out.extend((0..=n).map(|k| a + k as f64 * s));
        } else {
            let v: f64 = item.parse().map_err(|_| bad("--power-db", item))?;
            if v.is_nan() || v == f64::INFINITY {
                return Err(bad("--power-db", item));
            }
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("--power-db: empty list".into()));
    }
    Ok(out)
}

pub fn delays(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parse = |x: &str| usize::from_str(x.trim()).map_err(|_| bad("--delay", item));
        if let Some((a, rest)) = item.split_once(':') {
            let (b, s) = rest.split_once(':').unwrap_or((rest, "1"));
            let (a, b, s) = (parse(a)?, parse(b)?, parse(s)?);
            if s == 0 || b < a {
                return Err(bad("--delay", item));
            }
            out.extend((a..=b).step_by(s));
        } else {
            out.push(parse(item)?);
        }
    }
    if out.is_empty() || out.contains(&0) {
        return Err(Error::Config("--delay: need delays ≥ 1".into()));
    }
    Ok(out)
}
