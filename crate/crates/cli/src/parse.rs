use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mg1_core::asymptotics::TailModel;
use mg1_core::mapg1::ServiceDist;

/// Bad flags or arguments; maps to exit status 64.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn number<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    match s.trim().parse() {
        Ok(v) => Ok(v),
        Err(_) => usage(format!("{what}: {s:?} is not a valid number")),
    }
}

/// `"25,50,100"` or `"1..20"` (inclusive).
pub fn levels(text: &str, what: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    let out: Vec<usize> = if let Some((a, b)) = text.split_once("..") {
        let (a, b): (usize, usize) = (number(a, what)?, number(b.trim_start_matches('='), what)?);
        if a > b {
            return usage(format!("{what}: empty range {text}"));
        }
        (a..=b).collect()
    } else {
        text.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| number(s, what))
            .collect::<Result<_>>()?
    };
    if out.is_empty() {
        return usage(format!("{what} is empty"));
    }
    Ok(out)
}

pub enum TailArg {
    Chain,
    Model(TailModel),
}

pub fn tail(text: &str) -> Result<TailArg> {
    let (kind, arg) = text.split_once(':').unwrap_or((text, ""));
    match kind.trim() {
        "chain" if arg.is_empty() => Ok(TailArg::Chain),
        "power" => Ok(TailArg::Model(TailModel::Power {
            exponent: number(arg, "power exponent")?,
        })),
        "geometric" => Ok(TailArg::Model(TailModel::Geometric {
            ratio: number(arg, "geometric ratio")?,
        })),
        _ => usage(format!(
            "unknown tail model {text:?}; use chain, power:EXPONENT or geometric:RATIO"
        )),
    }
}

pub fn service(text: &str) -> Result<ServiceDist> {
    let body = if text.trim_start().starts_with('{') {
        text.to_string()
    } else {
        read(Path::new(text))?
    };
    let svc: ServiceDist = serde_json::from_str(&body).context("service description")?;
    Ok(svc)
}
