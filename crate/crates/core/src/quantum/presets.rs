//! Named single-qubit operators and their tensor products.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use crate::error::{Error, Result};
use crate::linalg::{kron, CMatrix, C64, I, ONE, ZERO};

pub const PRESET_NAMES: [&str; 9] = ["I", "X", "Y", "Z", "H", "S", "T", "P0", "P1"];

/// Textbook matrix for a preset name, or `None` if the name is unknown.
pub fn preset(name: &str) -> Option<CMatrix> {
    let h = C64::from(FRAC_1_SQRT_2);
    let entries = match name {
        "I" => [ONE, ZERO, ZERO, ONE],
        "X" => [ZERO, ONE, ONE, ZERO],
        "Y" => [ZERO, -I, I, ZERO],
        "Z" => [ONE, ZERO, ZERO, -ONE],
        "H" => [h, h, h, -h],
        "S" => [ONE, ZERO, ZERO, I],
        "T" => [ONE, ZERO, ZERO, C64::from_polar(1.0, FRAC_PI_4)],
        "P0" => [ONE, ZERO, ZERO, ZERO],
        "P1" => [ZERO, ZERO, ZERO, ONE],
        _ => return None,
    };
    Some(CMatrix::from_row_slice(2, 2, &entries))
}

/// `names[0] ⊗ names[1] ⊗ …`.
pub fn kron_presets<S: AsRef<str>>(names: &[S]) -> Result<CMatrix> {
    let mut iter = names.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::BadConfig("empty kron list".into()))?;
    let mut acc = lookup(first.as_ref())?;
    for name in iter {
        acc = kron(&acc, &lookup(name.as_ref())?);
    }
    Ok(acc)
}

fn lookup(name: &str) -> Result<CMatrix> {
    preset(name).ok_or_else(|| Error::BadConfig(format!("unknown operator preset `{name}`")))
}
