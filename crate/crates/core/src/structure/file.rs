//! JSON model definitions.
//!
//! ```json
//! {"d": 1, "left_invariant": true, "c": [[1, 2, 0, 1.0]]}
//! ```
//!
//! Each entry `[α, β, γ, value]` sets `c_{αβ}^γ`; the antisymmetric partner
//! is filled in and omitted entries are zero.

use serde::Deserialize;

use super::models::LeftInvariantModel;
use crate::error::StructureError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    d: usize,
    #[serde(default = "default_true")]
    left_invariant: bool,
    #[serde(default)]
    name: Option<String>,
    c: Vec<(usize, usize, usize, f64)>,
}

fn default_true() -> bool {
    true
}

/// Parses a model file without checking the contact invariants, so that a
/// validation report can describe what is wrong with it.
pub fn parse_model_unchecked(text: &str) -> Result<LeftInvariantModel, StructureError> {
    let f: ModelFile = serde_json::from_str(text).map_err(|e| StructureError::Parse(e.to_string()))?;
    if f.d == 0 {
        return Err(StructureError::Parse("d must be at least 1".into()));
    }
    if !f.left_invariant {
        return Err(StructureError::Parse(
            "only left-invariant models can be defined by a file of constants".into(),
        ));
    }
    let n = 2 * f.d + 1;
    let mut c = vec![0.0; n * n * n];
    let mut set = vec![false; n * n * n];
    for &(a, b, g, v) in &f.c {
        if a >= n || b >= n || g >= n {
            return Err(StructureError::Parse(format!("index out of range in entry [{a}, {b}, {g}] for d = {}", f.d)));
        }
        if !v.is_finite() {
            return Err(StructureError::Parse(format!("non-finite value in entry [{a}, {b}, {g}]")));
        }
        if a == b {
            if v != 0.0 {
                return Err(StructureError::Parse(format!("c_{{{a}{a}}}^{g} must vanish")));
            }
            continue;
        }
        let (i, j) = ((a * n + b) * n + g, (b * n + a) * n + g);
        if (set[i] && c[i] != v) || (set[j] && c[j] != -v) {
            return Err(StructureError::Parse(format!("conflicting entries for c_{{{a}{b}}}^{g}")));
        }
        c[i] = v;
        c[j] = -v;
        set[i] = true;
        set[j] = true;
    }
    Ok(LeftInvariantModel::new_unchecked(f.name.unwrap_or_else(|| "file".into()), f.d, c))
}

/// Parses a model file and rejects it unless every invariant holds.
pub fn parse_model(text: &str) -> Result<LeftInvariantModel, StructureError> {
    let m = parse_model_unchecked(text)?;
    LeftInvariantModel::new(super::ContactModel::name(&m), super::ContactModel::d(&m), m.constants().to_vec())
}

/// Reads and parses a model file from disk.
pub fn load_model(path: &std::path::Path) -> Result<LeftInvariantModel, StructureError> {
    let text = std::fs::read_to_string(path).map_err(|e| StructureError::Parse(format!("{}: {e}", path.display())))?;
    parse_model(&text)
}
