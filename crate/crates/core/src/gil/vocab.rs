use crate::error::{GilError, Result};
use std::collections::HashMap;

/// Ordered gene symbols; a symbol's index is its position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneVocabulary {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl GeneVocabulary {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(GilError::Data(format!("invalid gene symbol {s:?} at index {i}")));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(GilError::Data(format!("duplicate gene symbol {s:?}")));
            }
        }
        Ok(Self { symbols, index })
    }

    /// `G0000`, `G0001`, ... for synthetic data.
    pub fn synthetic(n: usize) -> Self {
        let width = n.saturating_sub(1).to_string().len().max(4);
        let symbols = (0..n).map(|i| format!("G{i:0width$}")).collect();
        Self::new(symbols).expect("synthetic symbols are unique")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, index: usize) -> Option<&str> {
        self.symbols.get(index).map(String::as_str)
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bijection_and_duplicates() {
        let v = GeneVocabulary::new(vec!["A".into(), "B".into(), "C".into()]).unwrap();
        for i in 0..v.len() {
            assert_eq!(v.index_of(v.symbol(i).unwrap()), Some(i));
        }
        assert!(GeneVocabulary::new(vec!["A".into(), "A".into()]).is_err());
        assert!(GeneVocabulary::new(vec!["A B".into()]).is_err());
    }

    #[test]
    fn synthetic_names() {
        let v = GeneVocabulary::synthetic(12);
        assert_eq!(v.symbol(3), Some("G0003"));
        assert_eq!(v.len(), 12);
    }
}
