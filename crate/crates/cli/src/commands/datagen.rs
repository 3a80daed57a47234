use super::load_config;
use crate::data::{CORPUS_FILE, DOWNSTREAM_DIR, PLANTED_FILE, VOCAB_FILE};
use gil_core::datagen::generate_all;
use gil_core::io::{save_expression, save_vocabulary, write_atomic};
use gil_core::Result;
use std::path::Path;

pub fn run(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = load_config(config)?.datagen;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let g = generate_all(&cfg)?;
    std::fs::create_dir_all(out.join(DOWNSTREAM_DIR))?;
    save_vocabulary(&out.join(VOCAB_FILE), &g.vocab)?;
    save_expression(&out.join(CORPUS_FILE), &g.corpus)?;
    for d in &g.downstream {
        save_expression(&out.join(DOWNSTREAM_DIR).join(format!("{}.jsonl", d.name)), &d.samples)?;
    }
    let mut planted = serde_json::to_string_pretty(&g.planted)?;
    planted.push('\n');
    write_atomic(&out.join(PLANTED_FILE), planted.as_bytes())?;
    log::info!(
        "wrote {} samples over {} genes and {} downstream sets",
        g.corpus.len(),
        g.vocab.len(),
        g.downstream.len()
    );
    Ok(())
}
