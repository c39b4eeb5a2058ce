//! JSON wire format for [`ChainSpec`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::family::{AnalyticTail, BlockFamily, TailWeights};
use super::spec::ChainSpec;
use crate::error::{Error, Result};
use crate::linalg::{from_rows, to_rows, Mat};

type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TailWire {
    start: i64,
    weights: TailWeights,
    profile: Rows,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum TailFormWire {
    FiniteSupport,
    Analytic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<TailWire>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<TailWire>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainWire {
    m0: usize,
    m1: usize,
    a_blocks: BTreeMap<String, Rows>,
    b_blocks: BTreeMap<String, Rows>,
    tail_form: TailFormWire,
}

fn parse_keys(blocks: &BTreeMap<String, Rows>, what: &str) -> Result<BTreeMap<i64, Mat>> {
    let mut out = BTreeMap::new();
    for (key, rows) in blocks {
        let k: i64 = key.trim().parse().map_err(|_| {
            Error::InvalidInput(format!("{what}: block key {key:?} is not an integer"))
        })?;
        if out.insert(k, from_rows(rows)?).is_some() {
            return Err(Error::InvalidInput(format!(
                "{what}: duplicate block key {k}"
            )));
        }
    }
    Ok(out)
}

fn expect_shape(m: &Mat, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn family(
    blocks: &BTreeMap<i64, Mat>,
    first: i64,
    rows: usize,
    cols: usize,
    tail: Option<&TailWire>,
    what: &str,
) -> Result<BlockFamily> {
    let last_key = blocks.keys().next_back().copied().unwrap_or(first - 1);
    let end = match tail {
        Some(t) => {
            if t.start <= last_key || t.start < first {
                return Err(Error::InvalidInput(format!(
                    "{what}: analytic tail must start after the explicit blocks (start {})",
                    t.start
                )));
            }
            t.start
        }
        None => last_key + 1,
    };
    let mut head = Vec::with_capacity((end - first).max(0) as usize);
    for k in first..end {
        let m = blocks
            .get(&k)
            .cloned()
            .unwrap_or_else(|| Mat::zeros(rows, cols));
        expect_shape(&m, rows, cols, &format!("{what}({k})"))?;
        head.push(m);
    }
    let tail = match tail {
        Some(t) => Some(AnalyticTail {
            weights: t.weights.clone(),
            profile: from_rows(&t.profile)?,
        }),
        None => None,
    };
    BlockFamily::new(first, rows, cols, head, tail)
}

fn tail_wire(f: &BlockFamily) -> Option<TailWire> {
    f.tail().map(|t| TailWire {
        start: f.head_end(),
        weights: t.weights.clone(),
        profile: to_rows(&t.profile),
    })
}

impl ChainSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let wire: ChainWire = serde_json::from_str(text)?;
        let (m0, m1) = (wire.m0, wire.m1);
        let a = parse_keys(&wire.a_blocks, "A")?;
        let mut b = parse_keys(&wire.b_blocks, "B")?;
        if let Some(k) = a.keys().find(|k| **k < -1) {
            return Err(Error::InvalidInput(format!(
                "A({k}) is below the lowest jump -1"
            )));
        }
        if let Some(k) = b.keys().find(|k| **k < -1) {
            return Err(Error::InvalidInput(format!(
                "B({k}) is below the lowest jump -1"
            )));
        }
        let (ta, tb) = match &wire.tail_form {
            TailFormWire::FiniteSupport => (None, None),
            TailFormWire::Analytic { a, b } => (a.as_ref(), b.as_ref()),
        };
        let a = family(&a, -1, m1, m1, ta, "A")?;
        let b_down = b.remove(&-1).unwrap_or_else(|| Mat::zeros(m1, m0));
        expect_shape(&b_down, m1, m0, "B(-1)")?;
        let b0 = b.remove(&0).unwrap_or_else(|| Mat::zeros(m0, m0));
        expect_shape(&b0, m0, m0, "B(0)")?;
        let b_up = family(&b, 1, m0, m1, tb, "B")?;
        ChainSpec::new(a, b_down, b0, b_up)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut a_blocks = BTreeMap::new();
        for (i, m) in self.a_family().head().iter().enumerate() {
            a_blocks.insert((i as i64 - 1).to_string(), to_rows(m));
        }
        let mut b_blocks = BTreeMap::new();
        b_blocks.insert("-1".to_string(), to_rows(self.b_down()));
        b_blocks.insert("0".to_string(), to_rows(self.b0()));
        for (i, m) in self.b_up_family().head().iter().enumerate() {
            b_blocks.insert((i as i64 + 1).to_string(), to_rows(m));
        }
        let (ta, tb) = (tail_wire(self.a_family()), tail_wire(self.b_up_family()));
        let tail_form = if ta.is_none() && tb.is_none() {
            TailFormWire::FiniteSupport
        } else {
            TailFormWire::Analytic { a: ta, b: tb }
        };
        let wire = ChainWire {
            m0: self.m0(),
            m1: self.m1(),
            a_blocks,
            b_blocks,
            tail_form,
        };
        Ok(serde_json::to_string_pretty(&wire)?)
    }
}
