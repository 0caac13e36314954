//! Einsum subscript grammar: single letters, comma-separated inputs, one
//! `->`, explicit output. No ellipsis, no repeated letters within an
//! input, no repeated output letters.

use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EinsumSpec {
    pub inputs: Vec<Vec<char>>,
    pub output: Vec<char>,
}

impl FromStr for EinsumSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut parts = compact.split("->");
        let lhs = parts.next().unwrap_or("");
        let rhs = parts
            .next()
            .ok_or_else(|| Error::Spec(format!("missing '->' in '{s}'")))?;
        if parts.next().is_some() {
            return Err(Error::Spec(format!("more than one '->' in '{s}'")));
        }
        if lhs.is_empty() {
            return Err(Error::Spec("no input subscripts".into()));
        }
        let mut inputs = Vec::new();
        for part in lhs.split(',') {
            let letters: Vec<char> = part.chars().collect();
            if letters.iter().any(|c| !c.is_ascii_alphabetic()) {
                return Err(Error::Spec(format!("non-letter subscript in '{part}'")));
            }
            let mut seen = letters.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != letters.len() {
                return Err(Error::Spec(format!(
                    "repeated letter within one input: '{part}'"
                )));
            }
            inputs.push(letters);
        }
        let output: Vec<char> = rhs.chars().collect();
        if output.iter().any(|c| !c.is_ascii_alphabetic()) {
            return Err(Error::Spec(format!("non-letter subscript in '{rhs}'")));
        }
        let mut out_sorted = output.clone();
        out_sorted.sort_unstable();
        out_sorted.dedup();
        if out_sorted.len() != output.len() {
            return Err(Error::Spec(format!("repeated output letter in '{rhs}'")));
        }
        for &c in &output {
            if !inputs.iter().any(|inp| inp.contains(&c)) {
                return Err(Error::Spec(format!(
                    "output letter '{c}' does not appear in any input"
                )));
            }
        }
        Ok(Self { inputs, output })
    }
}

impl EinsumSpec {
    pub fn parse(s: &str) -> Result<Self> {
        s.parse()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_specs() {
        let spec = EinsumSpec::parse("ij,j->i").unwrap();
        assert_eq!(spec.inputs, vec![vec!['i', 'j'], vec!['j']]);
        assert_eq!(spec.output, vec!['i']);
        let spec = EinsumSpec::parse("i,i->").unwrap();
        assert!(spec.output.is_empty());
        assert!(EinsumSpec::parse(" ij , jk -> ik ").is_ok());
    }

    #[test]
    fn rejects_malformed_specs() {
        assert!(EinsumSpec::parse("ij,jk").is_err()); // no ->
        assert!(EinsumSpec::parse("ii->i").is_err()); // trace
        assert!(EinsumSpec::parse("ij->ii").is_err()); // repeated output
        assert!(EinsumSpec::parse("ij->ik").is_err()); // unknown output letter
        assert!(EinsumSpec::parse("i2->i").is_err()); // non-letter
        assert!(EinsumSpec::parse("ij->i->j").is_err()); // two arrows
        assert!(EinsumSpec::parse("->").is_err()); // empty
    }
}
