//! Reading and writing DyTAGs: edge/node CSV or JSONL files, the on-disk
//! graph directory, and a streaming ingest for large edge files.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::graph::{DyTag, GraphError, NodeRecord, Origin, Role, TemporalEdge};
use crate::timestamp::Timestamp;

pub const EDGE_COLUMNS: [&str; 5] = ["src", "dst", "ts", "label", "text"];
pub const NODE_COLUMNS: [&str; 3] = ["node_id", "role", "text"];

pub const EDGES_FILE: &str = "edges.csv";
pub const NODES_FILE: &str = "nodes.csv";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(e) if e == "jsonl" || e == "ndjson" || e == "json" => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub bipartite: bool,
    pub node_count: usize,
    pub edge_count: usize,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> GraphError {
    GraphError::Io(format!("{}: {e}", path.display()))
}

fn open(path: &Path, what: &str) -> Result<File, GraphError> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => GraphError::Io(format!("{what} file not found: {}", path.display())),
        _ => io_err(path, e),
    })
}

fn csv_err(row: usize, e: csv::Error) -> GraphError {
    match e.kind() {
        csv::ErrorKind::Io(_) => GraphError::Io(e.to_string()),
        _ => GraphError::Malformed { row, reason: e.to_string() },
    }
}

/// Column positions for the required names; extra columns are logged once.
fn locate(headers: &csv::StringRecord, required: &[&str], optional: &[&str]) -> Result<Vec<usize>, GraphError> {
    let mut pos = Vec::with_capacity(required.len());
    for name in required {
        let i = headers
            .iter()
            .position(|h| h.trim() == *name)
            .ok_or_else(|| GraphError::Malformed { row: 0, reason: format!("missing column `{name}`") })?;
        pos.push(i);
    }
    let extra: Vec<&str> =
        headers.iter().filter(|h| !required.contains(&h.trim()) && !optional.contains(&h.trim())).collect();
    if !extra.is_empty() {
        log::warn!("ignoring extra columns: {}", extra.join(", "));
    }
    Ok(pos)
}

fn cell<'r>(rec: &'r csv::StringRecord, i: usize, row: usize, name: &str) -> Result<&'r str, GraphError> {
    rec.get(i).ok_or_else(|| GraphError::Malformed { row, reason: format!("missing `{name}` cell") })
}

fn parse_ts(raw: &str, row: usize) -> Result<Timestamp, GraphError> {
    Timestamp::parse(raw)
        .ok_or_else(|| GraphError::Malformed { row, reason: format!("timestamp `{raw}` is not a finite number") })
}

fn node_from_record(
    rec: &csv::StringRecord,
    pos: &[usize],
    origin_col: Option<usize>,
    row: usize,
) -> Result<NodeRecord, GraphError> {
    let node_id = cell(rec, pos[0], row, "node_id")?.to_string();
    if node_id.is_empty() {
        return Err(GraphError::Malformed { row, reason: "empty node_id".into() });
    }
    let role: Role = cell(rec, pos[1], row, "role")?.parse().map_err(|reason| GraphError::Malformed { row, reason })?;
    let text = cell(rec, pos[2], row, "text")?.to_string();
    let origin = match origin_col.and_then(|i| rec.get(i)) {
        Some(raw) => raw.parse::<Origin>().map_err(|reason| GraphError::Malformed { row, reason })?,
        None => Origin::Dataset,
    };
    Ok(NodeRecord { node_id, role, text, origin })
}

pub fn read_nodes(path: &Path) -> Result<Vec<NodeRecord>, GraphError> {
    let file = open(path, "node")?;
    match Format::from_path(path) {
        Format::Jsonl => read_jsonl(file, path),
        Format::Csv => {
            let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(BufReader::new(file));
            let headers = rdr.headers().map_err(|e| csv_err(0, e))?.clone();
            let pos = locate(&headers, &NODE_COLUMNS, &["origin"])?;
            let origin_col = headers.iter().position(|h| h.trim() == "origin");
            let mut out = Vec::new();
            for (i, rec) in rdr.records().enumerate() {
                let row = i + 1;
                let rec = rec.map_err(|e| csv_err(row, e))?;
                out.push(node_from_record(&rec, &pos, origin_col, row)?);
            }
            Ok(out)
        }
    }
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(file: File, path: &Path) -> Result<Vec<T>, GraphError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| GraphError::Malformed { row: i + 1, reason: e.to_string() })?;
        out.push(v);
    }
    Ok(out)
}

/// Edges in file order. A timestamp column stays integral only if every
/// cell parses as an integer.
pub fn read_edges(path: &Path) -> Result<Vec<TemporalEdge>, GraphError> {
    let file = open(path, "edge")?;
    let mut edges: Vec<TemporalEdge> = match Format::from_path(path) {
        Format::Jsonl => read_jsonl(file, path)?,
        Format::Csv => {
            let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(BufReader::new(file));
            let headers = rdr.headers().map_err(|e| csv_err(0, e))?.clone();
            let pos = locate(&headers, &EDGE_COLUMNS, &[])?;
            let mut out = Vec::new();
            for (i, rec) in rdr.records().enumerate() {
                let row = i + 1;
                let rec = rec.map_err(|e| csv_err(row, e))?;
                out.push(edge_from_record(&rec, &pos, row)?);
            }
            out
        }
    };
    unify_timestamps(&mut edges);
    Ok(edges)
}

fn edge_from_record(rec: &csv::StringRecord, pos: &[usize], row: usize) -> Result<TemporalEdge, GraphError> {
    Ok(TemporalEdge {
        src: cell(rec, pos[0], row, "src")?.to_string(),
        dst: cell(rec, pos[1], row, "dst")?.to_string(),
        timestamp: parse_ts(cell(rec, pos[2], row, "ts")?, row)?,
        label: cell(rec, pos[3], row, "label")?.to_string(),
        text: cell(rec, pos[4], row, "text")?.to_string(),
    })
}

fn unify_timestamps(edges: &mut [TemporalEdge]) {
    if edges.iter().any(|e| !e.timestamp.is_integral()) {
        for e in edges.iter_mut() {
            e.timestamp = e.timestamp.to_decimal();
        }
    }
}

/// Load and validate a graph from an edge file and a node file.
pub fn load_graph(edges: &Path, nodes: &Path, bipartite: bool) -> Result<DyTag, GraphError> {
    let node_records = read_nodes(nodes)?;
    let edge_records = read_edges(edges)?;
    DyTag::from_records(node_records, edge_records, bipartite)
}

pub fn write_nodes_csv<W: Write>(out: W, nodes: &[NodeRecord]) -> Result<(), GraphError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| GraphError::Io(e.to_string());
    w.write_record(["node_id", "role", "text", "origin"]).map_err(err)?;
    for n in nodes {
        w.write_record([n.node_id.as_str(), n.role.as_str(), n.text.as_str(), n.origin.as_str()]).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_edges_csv<W: Write>(out: W, edges: &[TemporalEdge]) -> Result<(), GraphError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| GraphError::Io(e.to_string());
    w.write_record(EDGE_COLUMNS).map_err(err)?;
    for e in edges {
        let ts = e.timestamp.to_string();
        w.write_record([e.src.as_str(), e.dst.as_str(), ts.as_str(), e.label.as_str(), e.text.as_str()])
            .map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, GraphError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?))
}

fn write_meta(dir: &Path, meta: &GraphMeta) -> Result<(), GraphError> {
    let path = dir.join(META_FILE);
    let text = serde_json::to_string_pretty(meta).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

/// Write `edges.csv`, `nodes.csv` and `meta.json` into `dir`.
pub fn save_graph_dir(dir: &Path, graph: &DyTag) -> Result<(), GraphError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_edges_csv(create(&dir.join(EDGES_FILE))?, graph.edges())?;
    write_nodes_csv(create(&dir.join(NODES_FILE))?, graph.nodes())?;
    write_meta(
        dir,
        &GraphMeta { bipartite: graph.is_bipartite(), node_count: graph.node_count(), edge_count: graph.edge_count() },
    )
}

pub fn load_graph_dir(dir: &Path) -> Result<DyTag, GraphError> {
    let meta_path = dir.join(META_FILE);
    let meta: GraphMeta = match std::fs::read_to_string(&meta_path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| io_err(&meta_path, e))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(GraphError::Io(format!("not a graph directory (no {META_FILE}): {}", dir.display())))
        }
        Err(e) => return Err(io_err(&meta_path, e)),
    };
    load_graph(&dir.join(EDGES_FILE), &dir.join(NODES_FILE), meta.bipartite)
}

/// Where a graph lives on disk: either a graph directory or an explicit
/// edge/node file pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphSource {
    Dir(PathBuf),
    Files { edges: PathBuf, nodes: PathBuf, bipartite: bool },
}

impl GraphSource {
    pub fn load(&self) -> Result<DyTag, GraphError> {
        match self {
            GraphSource::Dir(d) => load_graph_dir(d),
            GraphSource::Files { edges, nodes, bipartite } => load_graph(edges, nodes, *bipartite),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub nodes: usize,
    pub edges: usize,
    pub already_sorted: bool,
    pub integral_timestamps: bool,
    pub first_timestamp: Option<Timestamp>,
    pub last_timestamp: Option<Timestamp>,
    pub labels: BTreeMap<String, usize>,
}

/// Validate a CSV edge file against a node file and write a graph
/// directory, without holding edge texts in memory.
///
/// The first pass keeps only (timestamp, byte offset) per edge; the second
/// copies records in timestamp order, seeking when the input is unsorted.
pub fn ingest_csv(edges: &Path, nodes: &Path, bipartite: bool, out_dir: &Path) -> Result<IngestStats, GraphError> {
    let node_records = read_nodes(nodes)?;
    let mut registry = DyTag::new(bipartite);
    for n in node_records {
        registry.add_node(n)?;
    }
    let roles: HashMap<&str, Role> = registry.nodes().iter().map(|n| (n.node_id.as_str(), n.role)).collect();

    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(open(edges, "edge")?);
    let headers = rdr.headers().map_err(|e| csv_err(0, e))?.clone();
    let pos = locate(&headers, &EDGE_COLUMNS, &[])?;

    let mut keys: Vec<(Timestamp, u64)> = Vec::new();
    let mut rec = csv::StringRecord::new();
    let mut row = 0usize;
    let mut sorted = true;
    let mut integral = true;
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    loop {
        let more = rdr.read_record(&mut rec).map_err(|e| csv_err(row + 1, e))?;
        if !more {
            break;
        }
        row += 1;
        let offset = rec.position().map(|p| p.byte()).unwrap_or(0);
        let src = cell(&rec, pos[0], row, "src")?;
        let dst = cell(&rec, pos[1], row, "dst")?;
        let ts = parse_ts(cell(&rec, pos[2], row, "ts")?, row)?;
        let src_role = *roles.get(src).ok_or_else(|| GraphError::DanglingEndpoint { row, node_id: src.to_string() })?;
        let dst_role = *roles.get(dst).ok_or_else(|| GraphError::DanglingEndpoint { row, node_id: dst.to_string() })?;
        if bipartite && (src_role != Role::Source || dst_role != Role::Destination) {
            return Err(GraphError::BipartiteViolation {
                context: format!("edge {row}"),
                detail: format!("`{src}` ({src_role}) -> `{dst}` ({dst_role}) must run source -> destination"),
            });
        }
        let label = cell(&rec, pos[3], row, "label")?;
        match labels.get_mut(label) {
            Some(c) => *c += 1,
            None => {
                labels.insert(label.to_string(), 1);
            }
        }
        integral &= ts.is_integral();
        if let Some((last, _)) = keys.last() {
            sorted &= *last <= ts;
        }
        keys.push((ts, offset));
    }

    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut w = csv::Writer::from_writer(create(&out_dir.join(EDGES_FILE))?);
    let werr = |e: csv::Error| GraphError::Io(e.to_string());
    w.write_record(EDGE_COLUMNS).map_err(werr)?;
    let mut emit = |rec: &csv::StringRecord, row: usize| -> Result<(), GraphError> {
        let ts = parse_ts(&rec[pos[2]], row)?;
        let ts = if integral { ts } else { ts.to_decimal() }.to_string();
        w.write_record([&rec[pos[0]], &rec[pos[1]], ts.as_str(), &rec[pos[3]], &rec[pos[4]]]).map_err(werr)
    };

    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(open(edges, "edge")?);
    rdr.headers().map_err(|e| csv_err(0, e))?;
    if sorted {
        let mut row = 0;
        while rdr.read_record(&mut rec).map_err(|e| csv_err(row + 1, e))? {
            row += 1;
            emit(&rec, row)?;
        }
    } else {
        let mut order: Vec<usize> = (0..keys.len()).collect();
        order.sort_by(|&a, &b| keys[a].0.cmp(&keys[b].0));
        for i in order {
            let mut p = csv::Position::new();
            p.set_byte(keys[i].1).set_line(1).set_record(0);
            rdr.seek(p).map_err(|e| csv_err(i + 1, e))?;
            if !rdr.read_record(&mut rec).map_err(|e| csv_err(i + 1, e))? {
                return Err(GraphError::Io(format!("{} changed during ingest", edges.display())));
            }
            emit(&rec, i + 1)?;
        }
    }
    w.flush()?;

    write_nodes_csv(create(&out_dir.join(NODES_FILE))?, registry.nodes())?;
    write_meta(out_dir, &GraphMeta { bipartite, node_count: registry.node_count(), edge_count: keys.len() })?;
    let span = |t: Timestamp| if integral { t } else { t.to_decimal() };
    Ok(IngestStats {
        nodes: registry.node_count(),
        edges: keys.len(),
        already_sorted: sorted,
        integral_timestamps: integral,
        first_timestamp: keys.iter().map(|k| k.0).min().map(span),
        last_timestamp: keys.iter().map(|k| k.0).max().map(span),
        labels,
    })
}

/// Write `items` as JSON lines.
pub fn write_jsonl<T: Serialize, W: Write>(mut out: W, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn reads_csv_with_quotes_and_extra_columns() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = write(
            dir.path(),
            "n.csv",
            "node_id,role,text\nu1,source,\"likes, \"\"matte\"\" finish\"\np1,destination,Serum\n",
        );
        let edges = write(dir.path(), "e.csv", "src,dst,ts,label,text,extra\nu1,p1,5,4,\"line one\nline two\",x\n");
        let g = load_graph(&edges, &nodes, true).unwrap();
        assert_eq!(g.node("u1").unwrap().text, "likes, \"matte\" finish");
        assert_eq!(g.edges()[0].text, "line one\nline two");
        assert!(g.edges()[0].timestamp.is_integral());
    }

    #[test]
    fn mixed_column_becomes_decimal() {
        let dir = tempfile::tempdir().unwrap();
        let edges = write(dir.path(), "e.csv", "src,dst,ts,label,text\na,b,1,x,\na,b,1.5,x,\n");
        let e = read_edges(&edges).unwrap();
        assert!(e.iter().all(|e| !e.timestamp.is_integral()));
    }

    #[test]
    fn error_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = write(dir.path(), "n.csv", "node_id,role,text\na,both,\nb,both,\n");
        let bad_ts = write(dir.path(), "e1.csv", "src,dst,ts,label,text\na,b,1,x,\na,b,soon,x,\n");
        assert!(matches!(load_graph(&bad_ts, &nodes, false), Err(GraphError::Malformed { row: 2, .. })));
        let dangling = write(dir.path(), "e2.csv", "src,dst,ts,label,text\na,b,1,x,\na,X9,2,x,\n");
        assert_eq!(
            load_graph(&dangling, &nodes, false),
            Err(GraphError::DanglingEndpoint { row: 1, node_id: "X9".into() })
        );
        let missing = load_graph(&dangling, &dir.path().join("none.csv"), false).unwrap_err();
        assert!(missing.to_string().contains("node file not found"));
        let no_col = write(dir.path(), "e3.csv", "src,dst,label,text\n");
        assert!(matches!(read_edges(&no_col), Err(GraphError::Malformed { row: 0, .. })));
    }

    #[test]
    fn jsonl_input() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = write(
            dir.path(),
            "n.jsonl",
            "{\"node_id\":\"a\",\"role\":\"both\",\"text\":\"A\"}\n{\"node_id\":\"b\",\"role\":\"both\",\"text\":\"B\",\"origin\":\"generated\"}\n",
        );
        let edges =
            write(dir.path(), "e.jsonl", "{\"src\":\"a\",\"dst\":\"b\",\"ts\":\"7\",\"label\":\"l\",\"text\":\"t\"}\n");
        let g = load_graph(&edges, &nodes, false).unwrap();
        assert_eq!(g.node("b").unwrap().origin, Origin::Generated);
        assert_eq!(g.edges()[0].timestamp, Timestamp::Int(7));
    }

    #[test]
    fn graph_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut g = DyTag::new(false);
        g.add_node(NodeRecord::new("a", Role::Both, "x,y")).unwrap();
        g.add_node(NodeRecord::generated("G00001", Role::Both, "new\nline")).unwrap();
        g.push_edge(TemporalEdge::new("a", "G00001", Timestamp::Dec(2.0), "5", "\"quoted\"")).unwrap();
        g.push_edge(TemporalEdge::new("a", "a", Timestamp::Dec(1.25), "", "")).unwrap();
        save_graph_dir(dir.path(), &g).unwrap();
        assert_eq!(load_graph_dir(dir.path()).unwrap(), g);
    }

    #[test]
    fn ingest_sorts_and_matches_in_memory_load() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = write(dir.path(), "n.csv", "node_id,role,text\nu,source,U\np,destination,P\nq,destination,Q\n");
        let edges = write(
            dir.path(),
            "e.csv",
            "src,dst,ts,label,text\nu,p,3,a,\"third, with comma\"\nu,q,1,b,first\nu,p,2,c,\"multi\nline\"\nu,q,1,d,first again\n",
        );
        let out = dir.path().join("g");
        let stats = ingest_csv(&edges, &nodes, true, &out).unwrap();
        assert!(!stats.already_sorted);
        assert_eq!(stats.edges, 4);
        let a = load_graph_dir(&out).unwrap();
        let b = load_graph(&edges, &nodes, true).unwrap();
        assert_eq!(a, b);
        let labels: Vec<&str> = a.edges().iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, ["b", "d", "c", "a"]);
    }
}
