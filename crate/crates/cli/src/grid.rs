//! Sweep grid files: CSV with a header naming any of
//! `r0,r1,r2,alpha,b0,b1,b2,x0,a,t`. Empty cells fall back to the config
//! model; `b` cells may use the coefficient expressions.

use std::collections::HashMap;

use nlbranch::montecarlo::SweepPoint;

use crate::config::Coef;
use crate::CliError;

const COLUMNS: [&str; 10] = ["r0", "r1", "r2", "alpha", "b0", "b1", "b2", "x0", "a", "t"];

/// `template_alpha` and `template_b0` resolve expressions in rows that
/// do not set them.
pub fn parse_grid(
    text: &str,
    origin: &str,
    template_alpha: f64,
    template_b0: Option<f64>,
) -> Result<Vec<SweepPoint>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Config(format!("{origin}: {e}")))?
        .clone();
    for h in headers.iter() {
        if !COLUMNS.contains(&h) {
            return Err(CliError::Config(format!(
                "{origin}: unknown column {h:?}; expected a subset of {}",
                COLUMNS.join(",")
            )));
        }
    }

    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let cells: HashMap<&str, &str> = headers
            .iter()
            .zip(record.iter())
            .filter(|(_, v)| !v.is_empty())
            .collect();
        let where_ = |col: &str| format!("{origin}:{line}: column {col}");
        let num = |col: &str| -> Result<Option<f64>, CliError> {
            cells
                .get(col)
                .map(|v| {
                    v.parse::<f64>().map_err(|_| {
                        CliError::Config(format!("{}: {v:?} is not a number", where_(col)))
                    })
                })
                .transpose()
        };
        let alpha = num("alpha")?;
        let a = alpha.unwrap_or(template_alpha);
        let coef = |col: &str, b0: Option<f64>| -> Result<Option<f64>, CliError> {
            cells
                .get(col)
                .map(|v| {
                    let c = v
                        .parse::<f64>()
                        .map(Coef::Value)
                        .unwrap_or_else(|_| Coef::Expr(v.to_string()));
                    c.resolve(&where_(col), a, b0)
                })
                .transpose()
        };
        let b0 = coef("b0", None)?;
        let b0_eff = b0.or(template_b0);
        points.push(SweepPoint {
            r0: num("r0")?,
            r1: num("r1")?,
            r2: num("r2")?,
            alpha,
            b0,
            b1: coef("b1", b0_eff)?,
            b2: coef("b2", b0_eff)?,
            x0: num("x0")?,
            a: num("a")?,
            t: num("t")?,
        });
    }
    Ok(points)
}
