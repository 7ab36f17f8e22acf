//! Sweep grids given on the command line.
//!
//! Accepted forms: a comma list (`4,6,8`), `lin:start:stop:count` and
//! `log:start:stop:count` (both endpoints included).

use qmetro_core::optimize::SweepAxis;

use crate::error::{CliError, Result};

pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: String| CliError::Grid(m);
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(format!("`{s}` is not a number")))
    };
    let grid = if let Some((kind, rest)) = spec
        .split_once(':')
        .filter(|(k, _)| matches!(*k, "lin" | "log"))
    {
        let parts: Vec<&str> = rest.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(bad(format!(
                "expected {kind}:start:stop:count, got `{spec}`"
            )));
        };
        let (a, b) = (number(a)?, number(b)?);
        let n: usize = n
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 2)
            .ok_or_else(|| bad(format!("count in `{spec}` must be an integer >= 2")))?;
        if kind == "log" {
            if !(a > 0.0 && b > 0.0) {
                return Err(bad("log grids need positive endpoints".into()));
            }
            logspace(a, b, n)
        } else {
            linspace(a, b, n)
        }
    } else {
        spec.split(',').map(number).collect::<Result<Vec<_>>>()?
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(bad(format!("`{spec}` gives no finite values")));
    }
    Ok(grid)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.log10(), b.log10());
    linspace(la, lb, n)
        .into_iter()
        .enumerate()
        .map(|(i, e)| match i {
            0 => a,
            _ if i + 1 == n => b,
            _ => 10f64.powf(e),
        })
        .collect()
}

pub fn default_grid(axis: SweepAxis) -> Vec<f64> {
    match axis {
        SweepAxis::Photons => vec![4.0, 6.0, 8.0, 10.0, 12.0],
        SweepAxis::Depth => vec![1.0, 2.0, 3.0, 4.0, 5.0],
        SweepAxis::Kappa => logspace(1e-3, 1e1, 5),
        SweepAxis::UBound => logspace(1e-5, 1e1, 13),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("4, 6,8").unwrap(), vec![4.0, 6.0, 8.0]);
        assert_eq!(
            parse_grid("lin:1:5:5").unwrap(),
            vec![1.0, 2.0, 3.0, 4.0, 5.0]
        );
        let g = parse_grid("log:1e-5:1e1:13").unwrap();
        assert_eq!(g.len(), 13);
        assert_eq!((g[0], g[12]), (1e-5, 10.0));
        assert!((g[6] - 1e-2).abs() < 1e-15);
        assert!(parse_grid("log:0:1:3").is_err());
        assert!(parse_grid("lin:1:2").is_err());
        assert!(parse_grid("a,b").is_err());
        assert_eq!(
            default_grid(SweepAxis::Kappa),
            vec![1e-3, 1e-2, 1e-1, 1.0, 10.0]
        );
    }
}
