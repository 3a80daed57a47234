use super::files::write_atomic;
use crate::error::{GilError, Result};
use crate::gil::{ExpressionSample, GeneVocabulary};
use std::fs;
use std::path::Path;

/// One compact JSON object per line, newline-terminated.
pub fn write_expression(samples: &[ExpressionSample]) -> Result<String> {
    let mut out = String::new();
    for s in samples {
        s.validate()?;
        out.push_str(&serde_json::to_string(s)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_expression(text: &str) -> Result<Vec<ExpressionSample>> {
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s: ExpressionSample =
            serde_json::from_str(line).map_err(|e| GilError::Parse { line: i + 1, message: e.to_string() })?;
        s.validate()?;
        samples.push(s);
    }
    Ok(samples)
}

pub fn save_expression(path: &Path, samples: &[ExpressionSample]) -> Result<()> {
    write_atomic(path, write_expression(samples)?.as_bytes())
}

pub fn load_expression(path: &Path) -> Result<Vec<ExpressionSample>> {
    parse_expression(&fs::read_to_string(path)?)
}

pub fn save_vocabulary(path: &Path, vocab: &GeneVocabulary) -> Result<()> {
    let mut out = String::new();
    for s in vocab.symbols() {
        out.push_str(s);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn load_vocabulary(path: &Path) -> Result<GeneVocabulary> {
    let text = fs::read_to_string(path)?;
    GeneVocabulary::new(text.lines().map(str::to_owned).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_byte_identical() {
        let samples = vec![
            ExpressionSample::new(0, vec![1, 5], vec![0.1, 2.5e-3], None).unwrap(),
            ExpressionSample::new(7, vec![], vec![], Some(2)).unwrap(),
        ];
        let text = write_expression(&samples).unwrap();
        assert_eq!(parse_expression(&text).unwrap(), samples);
        assert_eq!(write_expression(&parse_expression(&text).unwrap()).unwrap(), text);
        assert!(text.starts_with(r#"{"id":0,"genes":[1,5],"values":[0.1,0.0025]}"#));
    }

    #[test]
    fn errors_cite_line_and_id() {
        let bad = "{\"id\":0,\"genes\":[],\"values\":[]}\n{oops}\n";
        assert!(matches!(parse_expression(bad), Err(GilError::Parse { line: 2, .. })));
        let unsorted = r#"{"id":42,"genes":[3,1],"values":[1.0,1.0]}"#;
        match parse_expression(unsorted) {
            Err(GilError::Data(m)) => assert!(m.contains("42")),
            other => panic!("{other:?}"),
        }
        assert!(parse_expression("").unwrap().is_empty());
        assert!(parse_expression(r#"{"id":1,"genes":[],"values":[],"extra":1}"#).is_err());
    }
}
