//! Transaction, address-kind and label ingestion; graph construction and pruning.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRANSACTIONS_HEADER: [&str; 4] = ["from_address", "to_address", "value_wei", "block_timestamp"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: value {value} does not fit in 128 bits")]
    Overflow { line: u64, value: String },
    #[error("format error: {0}")]
    Format(String),
    #[error("conflicting duplicate rows for address {address}")]
    Conflict { address: Address },
    #[error("invalid graph snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    /// Line number of the offending row, if the error is tied to one.
    pub fn line(&self) -> Option<u64> {
        match self {
            IngestError::Row { line, .. } | IngestError::Overflow { line, .. } => Some(*line),
            IngestError::Csv(e) => e.position().map(|p| p.line()),
            _ => None,
        }
    }
}

/// A 20-byte Ethereum address, displayed as lowercase `0x`-prefixed hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(pub [u8; 20]);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed address {0:?}: expected 0x followed by 40 hex characters")]
pub struct AddressParseError(pub String);

impl FromStr for Address {
    type Err = AddressParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body =
            s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).ok_or_else(|| AddressParseError(s.to_string()))?;
        if body.len() != 40 {
            return Err(AddressParseError(s.to_string()));
        }
        let mut out = [0u8; 20];
        hex::decode_to_slice(body, &mut out).map_err(|_| AddressParseError(s.to_string()))?;
        Ok(Address(out))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Address {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Eoa,
    Contract,
}

impl FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eoa" => Ok(NodeKind::Eoa),
            "contract" => Ok(NodeKind::Contract),
            other => Err(format!("kind must be eoa or contract, got {other:?}")),
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Eoa => "eoa",
            NodeKind::Contract => "contract",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxRecord {
    pub from_address: Address,
    pub to_address: Address,
    pub value_wei: u128,
    pub timestamp: u64,
}

/// Scam labels keyed by contract address (1 = scam).
pub type LabelMap = BTreeMap<Address, u8>;
pub type KindMap = BTreeMap<Address, NodeKind>;

fn header_positions<R: Read>(reader: &mut csv::Reader<R>, wanted: &[&str]) -> Result<Vec<usize>, IngestError> {
    let headers = reader.headers()?.clone();
    wanted
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| IngestError::Format(format!("missing column {name:?}")))
        })
        .collect()
}

fn row_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_address(field: &str, line: u64, column: &str) -> Result<Address, IngestError> {
    let field = field.trim();
    if field.is_empty() {
        return Err(IngestError::Row { line, message: format!("empty {column}") });
    }
    field.parse().map_err(|e: AddressParseError| IngestError::Row { line, message: format!("{column}: {e}") })
}

fn parse_wei(field: &str, line: u64) -> Result<u128, IngestError> {
    let field = field.trim();
    if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
        return Err(IngestError::Row { line, message: format!("value_wei must be a decimal integer, got {field:?}") });
    }
    field.parse::<u128>().map_err(|_| IngestError::Overflow { line, value: field.to_string() })
}

/// Parses `transactions.csv`. Rows with an empty `to_address` (contract
/// creations) are rejected.
pub fn parse_transactions<R: Read>(input: R) -> Result<Vec<TxRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let cols = header_positions(&mut reader, &TRANSACTIONS_HEADER)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = row_line(&record);
        let field = |i: usize| -> Result<&str, IngestError> {
            record
                .get(cols[i])
                .ok_or_else(|| IngestError::Format(format!("line {line}: missing column {}", TRANSACTIONS_HEADER[i])))
        };
        let from_address = parse_address(field(0)?, line, "from_address")?;
        let to_address = parse_address(field(1)?, line, "to_address")?;
        let value_wei = parse_wei(field(2)?, line)?;
        let ts = field(3)?.trim();
        let timestamp = ts.parse::<u64>().map_err(|_| IngestError::Row {
            line,
            message: format!("block_timestamp must be unsigned seconds, got {ts:?}"),
        })?;
        out.push(TxRecord { from_address, to_address, value_wei, timestamp });
    }
    Ok(out)
}

/// Writes records in the `transactions.csv` format.
pub fn write_transactions<W: std::io::Write>(records: &[TxRecord], out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRANSACTIONS_HEADER)?;
    for r in records {
        w.write_record([
            r.from_address.to_string(),
            r.to_address.to_string(),
            r.value_wei.to_string(),
            r.timestamp.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn load_keyed<R: Read, T: PartialEq + Copy>(
    input: R,
    value_column: &str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<BTreeMap<Address, T>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let cols = header_positions(&mut reader, &["address", value_column])?;
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = row_line(&record);
        let addr = parse_address(record.get(cols[0]).unwrap_or(""), line, "address")?;
        let raw = record
            .get(cols[1])
            .ok_or_else(|| IngestError::Format(format!("line {line}: missing column {value_column}")))?;
        let value = parse(raw).map_err(|message| IngestError::Row { line, message })?;
        match out.get(&addr) {
            Some(prev) if *prev != value => return Err(IngestError::Conflict { address: addr }),
            Some(_) => {}
            None => {
                out.insert(addr, value);
            }
        }
    }
    Ok(out)
}

/// Parses `labels.csv` (`address,label`, label in {0,1}).
pub fn load_labels<R: Read>(input: R) -> Result<LabelMap, IngestError> {
    load_keyed(input, "label", |raw| match raw.trim() {
        "0" => Ok(0u8),
        "1" => Ok(1u8),
        other => Err(format!("label must be 0 or 1, got {other:?}")),
    })
}

/// Parses `kinds.csv` (`address,kind`, kind in {eoa,contract}).
pub fn load_kinds<R: Read>(input: R) -> Result<KindMap, IngestError> {
    load_keyed(input, "kind", |raw| raw.parse::<NodeKind>())
}

pub fn write_kinds<W: std::io::Write>(kinds: &KindMap, out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["address", "kind"])?;
    for (a, k) in kinds {
        w.write_record([a.to_string(), k.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_labels<W: std::io::Write>(labels: &LabelMap, out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["address", "label"])?;
    for (a, l) in labels {
        w.write_record([a.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Directed simple graph over addresses. Parallel transactions are collapsed
/// into one edge carrying the summed Wei value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TxGraph {
    nodes: BTreeMap<Address, NodeKind>,
    edges: BTreeMap<(Address, Address), u128>,
}

impl TxGraph {
    /// Builds a graph from explicit parts, checking that every edge endpoint is a node.
    pub fn from_parts(
        nodes: BTreeMap<Address, NodeKind>,
        edges: BTreeMap<(Address, Address), u128>,
    ) -> Result<Self, IngestError> {
        for (from, to) in edges.keys() {
            for end in [from, to] {
                if !nodes.contains_key(end) {
                    return Err(IngestError::Snapshot(format!("edge endpoint {end} is not a node")));
                }
            }
        }
        Ok(Self { nodes, edges })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &BTreeMap<Address, NodeKind> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeMap<(Address, Address), u128> {
        &self.edges
    }

    pub fn kind(&self, a: &Address) -> Option<NodeKind> {
        self.nodes.get(a).copied()
    }

    pub fn contains(&self, a: &Address) -> bool {
        self.nodes.contains_key(a)
    }

    pub fn weight(&self, from: &Address, to: &Address) -> Option<u128> {
        self.edges.get(&(*from, *to)).copied()
    }

    pub fn contracts(&self) -> impl Iterator<Item = &Address> {
        self.nodes.iter().filter(|(_, k)| **k == NodeKind::Contract).map(|(a, _)| a)
    }

    /// Dense integer view of the graph, nodes numbered in address order.
    pub fn index(&self) -> GraphIndex {
        let addresses: Vec<Address> = self.nodes.keys().copied().collect();
        let position: HashMap<Address, usize> = addresses.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        let kinds = self.nodes.values().copied().collect();
        let n = addresses.len();
        let mut out = vec![Vec::new(); n];
        let mut inn = vec![Vec::new(); n];
        // BTreeMap order keeps both adjacency lists sorted by neighbor index.
        for ((from, to), w) in &self.edges {
            let (u, v) = (position[from], position[to]);
            out[u].push((v, *w));
            inn[v].push((u, *w));
        }
        for list in inn.iter_mut() {
            list.sort_unstable_by_key(|(u, _)| *u);
        }
        GraphIndex { addresses, position, kinds, out, inn }
    }

    pub fn to_snapshot(&self) -> GraphSnapshot {
        GraphSnapshot {
            nodes: self.nodes.iter().map(|(a, k)| SnapshotNode { address: *a, kind: *k }).collect(),
            edges: self
                .edges
                .iter()
                .map(|((f, t), w)| SnapshotEdge { from: *f, to: *t, weight_wei: w.to_string() })
                .collect(),
        }
    }

    pub fn from_snapshot(s: &GraphSnapshot) -> Result<Self, IngestError> {
        let mut nodes = BTreeMap::new();
        for n in &s.nodes {
            if nodes.insert(n.address, n.kind).is_some() {
                return Err(IngestError::Snapshot(format!("duplicate node {}", n.address)));
            }
        }
        let mut edges = BTreeMap::new();
        for e in &s.edges {
            let w: u128 = e
                .weight_wei
                .parse()
                .map_err(|_| IngestError::Snapshot(format!("bad weight_wei {:?}", e.weight_wei)))?;
            if edges.insert((e.from, e.to), w).is_some() {
                return Err(IngestError::Snapshot(format!("duplicate edge {} -> {}", e.from, e.to)));
            }
        }
        Self::from_parts(nodes, edges)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_snapshot()).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let snap: GraphSnapshot = serde_json::from_str(text).map_err(|e| IngestError::Snapshot(e.to_string()))?;
        Self::from_snapshot(&snap)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotNode {
    pub address: Address,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotEdge {
    pub from: Address,
    pub to: Address,
    pub weight_wei: String,
}

/// Graph snapshot file format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub nodes: Vec<SnapshotNode>,
    pub edges: Vec<SnapshotEdge>,
}

/// Index-based adjacency of a [`TxGraph`]. Adjacency lists hold
/// `(neighbor, weight_wei)` pairs sorted by neighbor index; a self-loop
/// appears once in `out[v]` and once in `inn[v]`.
#[derive(Debug, Clone)]
pub struct GraphIndex {
    pub addresses: Vec<Address>,
    pub position: HashMap<Address, usize>,
    pub kinds: Vec<NodeKind>,
    pub out: Vec<Vec<(usize, u128)>>,
    pub inn: Vec<Vec<(usize, u128)>>,
}

impl GraphIndex {
    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }

    pub fn total_degree(&self, v: usize) -> usize {
        self.out[v].len() + self.inn[v].len()
    }
}

/// Builds the collapsed graph. Addresses without a kind entry are EOAs.
pub fn build_graph(records: &[TxRecord], kinds: &KindMap) -> TxGraph {
    let mut nodes = BTreeMap::new();
    let mut edges: BTreeMap<(Address, Address), u128> = BTreeMap::new();
    for r in records {
        for a in [r.from_address, r.to_address] {
            nodes.entry(a).or_insert_with(|| kinds.get(&a).copied().unwrap_or(NodeKind::Eoa));
        }
        let w = edges.entry((r.from_address, r.to_address)).or_insert(0);
        *w = w.saturating_add(r.value_wei);
    }
    log::debug!("built graph: {} nodes, {} edges", nodes.len(), edges.len());
    TxGraph { nodes, edges }
}

/// Removes nodes whose in+out degree is below `min_total_degree`, repeating
/// until every survivor meets the threshold (the combined-degree k-core).
pub fn prune_low_degree(g: &TxGraph, min_total_degree: usize) -> TxGraph {
    let idx = g.index();
    let n = idx.len();
    let mut degree: Vec<usize> = (0..n).map(|v| idx.total_degree(v)).collect();
    let mut removed = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| degree[v] < min_total_degree).collect();
    for &v in &stack {
        removed[v] = true;
    }
    while let Some(v) = stack.pop() {
        for &(u, _) in idx.out[v].iter().chain(idx.inn[v].iter()) {
            if u == v || removed[u] {
                continue;
            }
            degree[u] -= 1;
            if degree[u] < min_total_degree {
                removed[u] = true;
                stack.push(u);
            }
        }
    }
    let keep: BTreeSet<Address> = (0..n).filter(|&v| !removed[v]).map(|v| idx.addresses[v]).collect();
    let nodes = g.nodes.iter().filter(|(a, _)| keep.contains(a)).map(|(a, k)| (*a, *k)).collect();
    let edges =
        g.edges.iter().filter(|((f, t), _)| keep.contains(f) && keep.contains(t)).map(|(e, w)| (*e, *w)).collect();
    log::debug!("pruned graph: {} -> {} nodes", n, keep.len());
    TxGraph { nodes, edges }
}
