//! Text serialization of the tables.
//!
//! One record per line, `<table>.<index> <hex64> [<hex64>]`, preceded by a
//! header carrying the SHA-256 of everything after it. Certification
//! results are kept as `# cert` comment lines.

use super::{Certificate, Exp2dTables, Exp2fTables, Log2fTables, LogdTable, Tables, LOG_TABLE_SIZE};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

const HEADER: &str = "# crvec tables v1 sha256=";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArtifactError {
    #[error("missing or malformed header")]
    Header,
    #[error("content hash mismatch: header {expected}, content {actual}")]
    Hash { expected: String, actual: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing record {0}")]
    Missing(String),
    #[error(transparent)]
    Fit(#[from] super::fit::FitError),
}

pub type Record = (String, Vec<u64>);

fn push(out: &mut Vec<Record>, key: String, vals: &[f64]) {
    out.push((key, vals.iter().map(|v| v.to_bits()).collect()));
}

/// Records in artifact order.
pub fn records(t: &Tables) -> Vec<Record> {
    let mut r = Vec::new();
    for (k, v) in t.exp2f.t.iter().enumerate() {
        push(&mut r, format!("exp2f.T.{k}"), &[*v]);
    }
    for (k, v) in t.exp2f.c.iter().enumerate() {
        push(&mut r, format!("exp2f.c.{k}"), &[*v]);
    }
    for (d, row) in t.log2f.c.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            push(&mut r, format!("log2f.c{d}.{j}"), &[*v]);
        }
    }
    let e = &t.exp2d;
    for (name, tab) in [("T1", &e.t1), ("T2", &e.t2), ("T3", &e.t3)] {
        for (i, v) in tab.iter().enumerate() {
            push(&mut r, format!("exp2d.{name}.{i}"), v);
        }
    }
    push(&mut r, "exp2d.c1".into(), &e.c1);
    for (k, v) in e.q.iter().enumerate() {
        push(&mut r, format!("exp2d.q.{k}"), &[*v]);
    }
    push(&mut r, "exp2d.eps".into(), &[e.eps]);
    let l = &t.logd;
    for (i, v) in l.rcp.iter().enumerate() {
        push(&mut r, format!("logd.rcp.{i}"), &[*v]);
    }
    for (i, v) in l.l.iter().enumerate() {
        r.push((format!("logd.L.{i}"), vec![*v as u64]));
    }
    for (i, v) in l.corr.iter().enumerate() {
        r.push((format!("logd.corr.{i}"), vec![*v as u64]));
    }
    push(&mut r, "logd.ln2".into(), &l.ln2);
    for (k, v) in l.q.iter().enumerate() {
        push(&mut r, format!("logd.q.{k}"), &[*v]);
    }
    push(&mut r, "logd.r_max".into(), &[l.r_max]);
    push(&mut r, "logd.eps_rel".into(), &[l.eps_rel]);
    push(&mut r, "logd.eps_abs".into(), &[l.eps_abs]);
    r
}

fn body(t: &Tables, certs: &[Certificate]) -> String {
    let mut s = String::new();
    for c in certs {
        s += &format!(
            "# cert {} degree={} bound={:e} budget={:e} points={}\n",
            c.name, c.degree, c.bound, c.budget, c.grid_points
        );
    }
    for (k, vals) in records(t) {
        s += &k;
        for v in vals {
            s += &format!(" {v:016x}");
        }
        s.push('\n');
    }
    s
}

fn digest(body: &str) -> String {
    Sha256::digest(body.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn format(t: &Tables, certs: &[Certificate]) -> String {
    let b = body(t, certs);
    format!("{HEADER}{}\n{b}", digest(&b))
}

fn split_header(text: &str) -> Result<(&str, &str), ArtifactError> {
    let (head, rest) = text.split_once('\n').ok_or(ArtifactError::Header)?;
    let hash = head.strip_prefix(HEADER).ok_or(ArtifactError::Header)?;
    Ok((hash.trim(), rest))
}

/// Records of an artifact after checking its header hash.
pub fn parse_records(text: &str) -> Result<Vec<Record>, ArtifactError> {
    let (hash, rest) = split_header(text)?;
    let actual = digest(rest);
    if actual != hash {
        return Err(ArtifactError::Hash { expected: hash.into(), actual });
    }
    let mut out = Vec::new();
    for (n, line) in rest.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let key = it.next().expect("nonempty line");
        let vals = it
            .map(|h| u64::from_str_radix(h, 16))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ArtifactError::Syntax { line: n + 2, msg: e.to_string() })?;
        if vals.is_empty() {
            return Err(ArtifactError::Syntax { line: n + 2, msg: format!("{key} has no value") });
        }
        out.push((key.to_string(), vals));
    }
    Ok(out)
}

struct Lookup(BTreeMap<String, Vec<u64>>);

impl Lookup {
    fn get(&self, key: &str, n: usize) -> Result<&[u64], ArtifactError> {
        match self.0.get(key) {
            Some(v) if v.len() == n => Ok(v),
            _ => Err(ArtifactError::Missing(key.to_string())),
        }
    }
    fn f(&self, key: &str) -> Result<f64, ArtifactError> {
        Ok(f64::from_bits(self.get(key, 1)?[0]))
    }
    fn pair(&self, key: &str) -> Result<[f64; 2], ArtifactError> {
        let v = self.get(key, 2)?;
        Ok([f64::from_bits(v[0]), f64::from_bits(v[1])])
    }
    fn array<const N: usize>(&self, prefix: &str) -> Result<[f64; N], ArtifactError> {
        let mut out = [0.0; N];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.f(&format!("{prefix}.{i}"))?;
        }
        Ok(out)
    }
    fn pairs<const N: usize>(&self, prefix: &str) -> Result<[[f64; 2]; N], ArtifactError> {
        let mut out = [[0.0; 2]; N];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.pair(&format!("{prefix}.{i}"))?;
        }
        Ok(out)
    }
    fn vec(&self, prefix: &str) -> Vec<f64> {
        (0..).map_while(|i| self.f(&format!("{prefix}.{i}")).ok()).collect()
    }
}

pub fn parse(text: &str) -> Result<Tables, ArtifactError> {
    let m = Lookup(parse_records(text)?.into_iter().collect());
    let exp2f = Exp2fTables { t: m.array("exp2f.T")?, c: m.array("exp2f.c")? };
    let mut c = [[0.0; 8]; 10];
    for (d, row) in c.iter_mut().enumerate() {
        *row = m.array(&format!("log2f.c{d}"))?;
    }
    let log2f = Log2fTables { c };
    let exp2d = Exp2dTables {
        t1: m.pairs("exp2d.T1")?,
        t2: m.pairs("exp2d.T2")?,
        t3: m.pairs("exp2d.T3")?,
        c1: m.pair("exp2d.c1")?,
        q: m.vec("exp2d.q"),
        eps: m.f("exp2d.eps")?,
    };
    let ints = |prefix: &str| -> Result<[i64; LOG_TABLE_SIZE], ArtifactError> {
        let mut out = [0i64; LOG_TABLE_SIZE];
        for (i, o) in out.iter_mut().enumerate() {
            *o = m.get(&format!("{prefix}.{i}"), 1)?[0] as i64;
        }
        Ok(out)
    };
    let logd = LogdTable {
        rcp: m.array("logd.rcp")?,
        l: ints("logd.L")?,
        corr: ints("logd.corr")?,
        ln2: m.pair("logd.ln2")?,
        q: m.vec("logd.q"),
        r_max: m.f("logd.r_max")?,
        eps_rel: m.f("logd.eps_rel")?,
        eps_abs: m.f("logd.eps_abs")?,
    };
    if exp2d.q.is_empty() {
        return Err(ArtifactError::Missing("exp2d.q.0".into()));
    }
    if logd.q.is_empty() {
        return Err(ArtifactError::Missing("logd.q.0".into()));
    }
    Ok(Tables { exp2f, log2f, exp2d, logd })
}

/// Result of comparing an artifact with a fresh generation.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCheck {
    /// Up to 10 differing entries as `key: artifact -> regenerated`.
    pub mismatches: Vec<String>,
    pub total_mismatches: usize,
    /// The full texts are byte-identical.
    pub identical: bool,
}

impl TableCheck {
    pub fn passed(&self) -> bool {
        self.identical
    }
}

fn show(v: Option<&Vec<u64>>) -> String {
    match v {
        None => "absent".into(),
        Some(v) => v.iter().map(|x| format!("{x:016x}")).collect::<Vec<_>>().join(" "),
    }
}

/// Compares `artifact` against an already generated text.
pub fn compare(artifact: &str, fresh: &str) -> Result<TableCheck, ArtifactError> {
    let new: BTreeMap<_, _> = parse_records(fresh)?.into_iter().collect();
    // a corrupt artifact is still compared record by record
    let old: BTreeMap<_, _> = match parse_records(artifact) {
        Ok(r) => r.into_iter().collect(),
        Err(ArtifactError::Hash { .. }) => {
            let (_, rest) = split_header(artifact)?;
            parse_records(&format!("{HEADER}{}\n{rest}", digest(rest)))?.into_iter().collect()
        }
        Err(e) => return Err(e),
    };
    let mut diffs = Vec::new();
    let keys: std::collections::BTreeSet<_> = old.keys().chain(new.keys()).collect();
    for k in keys {
        let (a, b) = (old.get(k), new.get(k));
        if a != b {
            diffs.push(format!("{k}: {} -> {}", show(a), show(b)));
        }
    }
    let total = diffs.len();
    diffs.truncate(10);
    Ok(TableCheck { mismatches: diffs, total_mismatches: total, identical: artifact == fresh })
}

/// Regenerates every table and compares bit-exactly with `artifact`.
pub fn verify_tables(artifact: &str) -> Result<TableCheck, ArtifactError> {
    let (t, certs) = super::gen_all_tables()?;
    compare(artifact, &format(&t, &certs))
}
