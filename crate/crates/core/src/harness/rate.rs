use crate::error::{Error, Result};

/// Errors below this are treated as round-off and left out of rate fits.
pub const ROUND_OFF_FLOOR: f64 = 1e-12;

/// Least-squares slope `p` of `log(err) = c + p log(h)`.
pub fn fit_convergence_rate(hs: &[f64], errs: &[f64]) -> Result<f64> {
    if hs.len() != errs.len() {
        return Err(Error::RateData(format!("{} step sizes but {} errors", hs.len(), errs.len())));
    }
    if hs.len() < 2 {
        return Err(Error::RateData("need at least two points".into()));
    }
    if let Some(h) = hs.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::RateData(format!("step size {h} is not positive")));
    }
    if let Some(e) = errs.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::RateData(format!("error {e} is not positive")));
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::RateData("step sizes must be distinct".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_square_law() {
        let rate = fit_convergence_rate(&[1.0, 0.5, 0.25], &[1e-2, 2.5e-3, 6.25e-4]).unwrap();
        assert!((rate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn arbitrary_power_law() {
        let hs: Vec<f64> = (3..8).map(|k| 0.5f64.powi(k)).collect();
        let errs: Vec<f64> = hs.iter().map(|h| 0.37 * h.powf(3.7)).collect();
        assert!((fit_convergence_rate(&hs, &errs).unwrap() - 3.7).abs() < 1e-12);
    }

    #[test]
    fn published_crank_nicolson_row() {
        let hs: Vec<f64> = [8.0, 16.0, 32.0, 64.0, 128.0].iter().map(|n| 1.0 / n).collect();
        let errs = [8.077e-05, 2.041e-05, 5.146e-06, 1.304e-06, 3.323e-07];
        let rate = fit_convergence_rate(&hs, &errs).unwrap();
        assert!((rate - 1.981).abs() <= 1e-3, "{rate}");
    }

    #[test]
    fn rejects_bad_data() {
        assert!(fit_convergence_rate(&[1.0], &[1.0]).is_err());
        assert!(fit_convergence_rate(&[1.0, 0.5], &[1.0]).is_err());
        assert!(fit_convergence_rate(&[1.0, 0.5], &[1.0, 0.0]).is_err());
        assert!(fit_convergence_rate(&[1.0, -0.5], &[1.0, 0.1]).is_err());
        assert!(fit_convergence_rate(&[0.5, 0.5], &[1.0, 0.1]).is_err());
    }
}
