use crate::error::{Error, Result};

/// `n` points from `min` to `max` inclusive, evenly spaced.
pub fn linear_grid(min: f64, max: f64, n: usize) -> Result<Vec<f64>> {
    check_range(min, max, n)?;
    let step = (max - min) / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|k| min + step * k as f64).collect();
    g[n - 1] = max;
    Ok(g)
}

/// `n` points from `min` to `max` inclusive, evenly spaced in log.
pub fn log_grid(min: f64, max: f64, n: usize) -> Result<Vec<f64>> {
    check_range(min, max, n)?;
    if !(min > 0.0) {
        return Err(Error::InvalidArgument(format!("log grid requires min > 0 (got {min})")));
    }
    let (a, b) = (min.ln(), max.ln());
    let step = (b - a) / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|k| (a + step * k as f64).exp()).collect();
    g[0] = min;
    g[n - 1] = max;
    Ok(g)
}

fn check_range(min: f64, max: f64, n: usize) -> Result<()> {
    if !(min.is_finite() && max.is_finite()) || !(min < max) {
        return Err(Error::InvalidArgument(format!("grid range requires min < max (got {min}, {max})")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("grid needs at least 2 points (got {n})")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        assert_eq!(linear_grid(-1.0, 3.0, 2).unwrap(), vec![-1.0, 3.0]);
        let g = linear_grid(0.1, 0.7, 7).unwrap();
        assert_eq!(g[6], 0.7);
        let l = log_grid(1e-2, 1e2, 5).unwrap();
        assert_eq!((l[0], l[4]), (1e-2, 1e2));
        assert!((l[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bad_ranges() {
        assert!(linear_grid(1.0, 1.0, 5).is_err());
        assert!(linear_grid(0.0, 1.0, 1).is_err());
        assert!(log_grid(0.0, 1.0, 3).is_err());
    }
}
