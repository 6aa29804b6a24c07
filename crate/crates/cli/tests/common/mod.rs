#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dytag"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn dytag")
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Cheap deterministic hash for fixture choices.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A user/product review stream with skewed product popularity, written as
/// `edges.csv` and `nodes.csv` under `dir`. Returns (edges, nodes) paths.
pub fn write_reviews(dir: &Path, users: usize, products: usize, edges: usize) -> (PathBuf, PathBuf) {
    std::fs::create_dir_all(dir).unwrap();
    let mut nodes = String::from("node_id,role,text\n");
    for u in 0..users {
        let _ = writeln!(nodes, "u{u},source,\"user {u}, likes item {}\"", u % 7);
    }
    for i in 0..products {
        let _ = writeln!(nodes, "p{i},destination,\"product {i} in aisle {}\"", i % 9);
    }
    let mut out = String::from("src,dst,ts,label,text\n");
    for t in 0..edges {
        let h = mix(t as u64);
        let u = (h % users as u64) as usize;
        // squaring a uniform skews towards low product ids
        let r = ((h >> 20) % 1000) as f64 / 1000.0;
        let item = ((r * r) * products as f64) as usize;
        let _ = writeln!(out, "u{u},p{item},{},{},\"review {t} of p{item}\"", 1000 + t * 3, 1 + (h >> 40) % 5);
    }
    let e = dir.join("edges.csv");
    let n = dir.join("nodes.csv");
    std::fs::write(&e, out).unwrap();
    std::fs::write(&n, nodes).unwrap();
    (e, n)
}

/// Ingest a review fixture and slice off a seed of `seed_edges`.
/// Returns (graph dir, seed dir, continuation dir).
pub fn prepared(root: &Path, edges: usize, seed_edges: usize) -> (PathBuf, PathBuf, PathBuf) {
    let (e, n) = write_reviews(&root.join("raw"), 300, 120, edges);
    let graph = root.join("graph");
    assert_ok(&run(&["ingest", "--edges", p(&e), "--nodes", p(&n), "--out", p(&graph), "--bipartite"]));
    let seed = root.join("seed");
    let cont = root.join("cont");
    assert_ok(&run(&[
        "slice-seed",
        "--graph",
        p(&graph),
        "--edges",
        &seed_edges.to_string(),
        "--seed-out",
        p(&seed),
        "--continuation-out",
        p(&cont),
    ]));
    (graph, seed, cont)
}

pub fn edge_count(graph_dir: &Path) -> usize {
    dytag_core::io::load_graph_dir(graph_dir).unwrap().edge_count()
}
