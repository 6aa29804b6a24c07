//! Snapshot tests for rendered scenario prompts.
//!
//! Set `UPDATE_GOLDEN=1` to rewrite the snapshots after an intentional
//! template change.

use std::path::PathBuf;

use dytag_llm::Scenario;

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn check(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() || !path.exists() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert_eq!(actual, expected, "rendered prompt differs from {}", path.display());
}

#[test]
fn sephora_interaction_prompt() {
    let s = Scenario::sephora();
    let r = s
        .select
        .render_pairs(&[
            ("node_info", "Author ID: 5182718480, Skin Tone: light, Eye Color: brown, Skin Type: dry, Hair Color: blonde, Total Negative Feedback Count: 0, Total Positive Feedback Count: 3"),
            ("node_memory", "[2023-02-14] reviewed P420652 (rating 5): Lightweight and hydrating"),
            ("node_items", "Item ID: P420652, Product Name: Lip Sleeping Mask\nItem ID: P443833, Product Name: Night Cream"),
            ("interaction_example", "{\"review\": {\"item_id\": \"P420652\", \"timestamp\": \"2023-02-14\", \"rating\": 5}}"),
        ])
        .unwrap();
    check("sephora_interaction.txt", &r.text);
}

#[test]
fn weibo_request_prompt() {
    let s = Scenario::weibo();
    let r = s
        .request
        .as_ref()
        .unwrap()
        .render_pairs(&[
            ("node_info", "User ID: 1001\nUser Name: techfan"),
            ("node_memory", "[2022-05-01 10-00-00] comment with 1002"),
            ("item_info", "User ID: 1002\nUser Name: gadgetdaily"),
            ("item_memory", "(no history)"),
            ("interaction_example", "{\"interact\": {\"item_id\": \"1002\", \"label\": \"repost\"}}"),
        ])
        .unwrap();
    check("weibo_request.txt", &r.text);
}

#[test]
fn rendering_is_stable_across_runs() {
    let s = Scenario::sephora();
    let pairs = [("recent_node_info", "Product ID: P1")];
    let a = s.destination_generation.render_pairs(&pairs).unwrap();
    let b = s.destination_generation.render_pairs(&pairs).unwrap();
    assert_eq!(a, b);
}
