//! `.khg` hypergraph files and `.wts` weight files.
//!
//! `.khg`: first non-comment line `k n`, then one edge per line as `k`
//! ascending vertex ids. Lines starting with `#` and blank lines are skipped.
//!
//! `.wts`: a `# graph-digest: <hex>` header, then one weight per line in edge
//! id order, written with 17 significant digits.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;

const DIGEST_PREFIX: &str = "# graph-digest:";

pub fn parse_khg(text: &str) -> Result<Hypergraph> {
    let mut header: Option<(usize, usize)> = None;
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let nums: Vec<usize> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| err(format!("`{t}` is not a vertex id")))
            })
            .collect::<Result<_>>()?;
        let Some((k, n)) = header else {
            if nums.len() != 2 {
                return Err(err("header must be `k n`".into()));
            }
            if nums[0] < 1 {
                return Err(err("k must be at least 1".into()));
            }
            header = Some((nums[0], nums[1]));
            continue;
        };
        if nums.len() != k {
            return Err(err(format!(
                "edge has {} vertices, expected k = {k}",
                nums.len()
            )));
        }
        if nums.windows(2).any(|w| w[0] >= w[1]) {
            return Err(err("edge vertices must be strictly ascending".into()));
        }
        if let Some(v) = nums.iter().find(|&&v| v >= n) {
            return Err(err(format!("vertex {v} out of range [0, {n})")));
        }
        if !seen.insert(nums.clone()) {
            return Err(err(format!("duplicate edge {nums:?}")));
        }
        edges.push(nums);
    }
    let (k, n) = header.ok_or(Error::Parse {
        line: 0,
        msg: "missing `k n` header".into(),
    })?;
    Hypergraph::new(k, n, edges)
}

pub fn read_hypergraph(path: impl AsRef<Path>) -> Result<Hypergraph> {
    parse_khg(&fs::read_to_string(path)?)
}

pub fn write_hypergraph(g: &Hypergraph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, g.to_khg_string())?;
    Ok(())
}

pub fn weights_to_string(g: &Hypergraph, w: &[f64]) -> String {
    let mut out = format!("{DIGEST_PREFIX} {}\n", g.digest());
    for x in w {
        out.push_str(&format!("{x:.16e}\n"));
    }
    out
}

/// Parsed weight file: values plus the recorded graph digest, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightsFile {
    pub digest: Option<String>,
    pub weights: Vec<f64>,
}

pub fn parse_weights(text: &str) -> Result<WeightsFile> {
    let mut digest = None;
    let mut weights = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix(DIGEST_PREFIX) {
            digest = Some(rest.trim().to_string());
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let x: f64 = line.parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("`{line}` is not a number"),
        })?;
        weights.push(x);
    }
    Ok(WeightsFile { digest, weights })
}

/// Reads weights for `g`, checking the length and, when recorded, the digest.
pub fn read_weights(g: &Hypergraph, path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let file = parse_weights(&fs::read_to_string(path)?)?;
    if let Some(d) = &file.digest {
        if *d != g.digest() {
            return Err(Error::InvalidArgument(format!(
                "weights were written for graph {d}, not {}",
                g.digest()
            )));
        }
    }
    if file.weights.len() != g.num_edges() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} edges",
            file.weights.len(),
            g.num_edges()
        )));
    }
    Ok(file.weights)
}

pub fn write_weights(g: &Hypergraph, w: &[f64], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, weights_to_string(g, w))?;
    Ok(())
}
