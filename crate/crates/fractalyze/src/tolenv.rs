//! `FRACTALYZE_TOL=critical=1e-8,series=1e-13` overrides.

use fractalyze_core::Tol;

use crate::error::{AppError, AppResult};

pub const VAR: &str = "FRACTALYZE_TOL";

pub fn parse_overrides(text: &str, mut tol: Tol) -> AppResult<Tol> {
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| AppError::Usage(format!("{VAR}: expected key=value, got `{item}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| AppError::Usage(format!("{VAR}: `{value}` is not a number")))?;
        if !(value > 0.0 && value.is_finite()) {
            return Err(AppError::Usage(format!("{VAR}: {key} must be positive and finite")));
        }
        if !tol.set(key.trim(), value) {
            return Err(AppError::Usage(format!(
                "{VAR}: unknown key `{key}`; expected structural, cluster, critical, null, limit or series"
            )));
        }
    }
    Ok(tol)
}

pub fn from_env() -> AppResult<Tol> {
    match std::env::var(VAR) {
        Ok(text) => parse_overrides(&text, Tol::default()),
        Err(_) => Ok(Tol::default()),
    }
}
