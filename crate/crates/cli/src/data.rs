use gil_core::gil::Corpus;
use gil_core::io::{load_expression, load_vocabulary};
use gil_core::{ExpressionSample, GeneVocabulary, GilError, Result};
use std::path::{Path, PathBuf};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const PLANTED_FILE: &str = "planted.json";
pub const DOWNSTREAM_DIR: &str = "downstream";

/// A data directory as written by `gil datagen`.
#[derive(Debug)]
pub struct DataDir {
    pub root: PathBuf,
    pub vocab: GeneVocabulary,
    pub corpus: Corpus,
}

impl DataDir {
    pub fn load(root: &Path) -> Result<Self> {
        let vocab = load_vocabulary(&root.join(VOCAB_FILE))?;
        let corpus = Corpus::new(load_expression(&root.join(CORPUS_FILE))?)?;
        if let Some(g) = corpus.samples().iter().flat_map(|s| &s.gene_indices).find(|&&g| g >= vocab.len()) {
            return Err(GilError::Vocabulary { index: *g, size: vocab.len() });
        }
        Ok(Self { root: root.to_path_buf(), vocab, corpus })
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.root.join(CORPUS_FILE)
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.root.join(VOCAB_FILE)
    }

    /// Downstream datasets in the order of `names`, or all files sorted by name.
    pub fn downstream(&self, names: &[String]) -> Result<Vec<(String, Vec<ExpressionSample>)>> {
        let dir = self.root.join(DOWNSTREAM_DIR);
        let names = if names.is_empty() { list_datasets(&dir)? } else { names.to_vec() };
        names
            .into_iter()
            .map(|n| {
                let path = dir.join(format!("{n}.jsonl"));
                if !path.exists() {
                    return Err(GilError::Data(format!("missing downstream dataset {}", path.display())));
                }
                Ok((n, load_expression(&path)?))
            })
            .collect()
    }
}

fn list_datasets(dir: &Path) -> Result<Vec<String>> {
    if !dir.exists() {
        return Ok(vec![]);
    }
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Dataset name of a downstream file (its stem).
pub fn dataset_name(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| GilError::Usage(format!("cannot name dataset {}", path.display())))
}
