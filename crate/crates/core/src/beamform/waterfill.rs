use super::{zf, DistributionWeights, PowerBudget};
use crate::error::{Error, Result};
use crate::numerics::CMatrix;

/// Effective gains `|h_k^H p_k|^2` of the unit-norm ZF directions `p_k`.
pub fn effective_gains(h: &CMatrix) -> Result<Vec<f64>> {
    let w = zf(h)?;
    Ok((0..h.ncols())
        .map(|k| {
            let p = w.column(k) / num_complex::Complex64::new(w.column(k).norm(), 0.0);
            h.column(k).dotc(&p).norm_sqr()
        })
        .collect())
}

/// Water-filling amplitudes `b_k = sigma * sqrt(max(0, mu - 1/gamma_k))` with
/// the water level `mu` set so that `sum_k b_k^2 = p_tot`.
pub fn waterfill_gains(gains: &[f64], p_tot: f64, noise_var: f64) -> Result<Vec<f64>> {
    if gains.is_empty() {
        return Err(Error::domain("water-filling over zero channels"));
    }
    if gains.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
        return Err(Error::domain("water-filling gains must be positive and finite"));
    }
    if !(p_tot > 0.0 && noise_var > 0.0) {
        return Err(Error::domain("water-filling needs positive power and noise"));
    }
    let mut floors: Vec<f64> = gains.iter().map(|g| 1.0 / g).collect();
    floors.sort_by(f64::total_cmp);

    // Largest active set whose weakest member still sits below the level.
    let budget = p_tot / noise_var;
    let mut level = 0.0;
    let mut prefix = 0.0;
    for (n, &floor) in floors.iter().enumerate() {
        let candidate = (budget + prefix + floor) / (n + 1) as f64;
        if candidate <= floor {
            break;
        }
        prefix += floor;
        level = candidate;
    }
    Ok(gains
        .iter()
        .map(|g| noise_var.sqrt() * (level - 1.0 / g).max(0.0).sqrt())
        .collect())
}

/// Water-filling distribution weights over the normalized ZF channels of `h`.
pub fn waterfill(h: &CMatrix, budget: &PowerBudget, noise_var: f64) -> Result<DistributionWeights> {
    let gains = effective_gains(h)?;
    DistributionWeights::new(waterfill_gains(&gains, budget.p_tot(), noise_var)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{standard_complex_normal, stream_rng};

    #[test]
    fn single_user_takes_everything() {
        let b = waterfill_gains(&[0.3], 2.0, 0.5).unwrap();
        assert!((b[0] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn equal_gains_split_evenly() {
        let b = waterfill_gains(&[2.0, 2.0], 1.0, 1.0).unwrap();
        assert!((b[0] - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((b[1] - b[0]).abs() < 1e-15);
    }

    #[test]
    fn weak_user_is_switched_off() {
        // levels: with all three active mu = (1 + 0.1 + 1 + 100) / 3 < 100
        let b = waterfill_gains(&[10.0, 1.0, 0.01], 1.0, 1.0).unwrap();
        assert_eq!(b[2], 0.0);
        let mu = (1.0 + 0.1 + 1.0) / 2.0;
        assert!((b[0] * b[0] - (mu - 0.1)).abs() < 1e-12);
        assert!((b[1] * b[1] - (mu - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        assert!(waterfill_gains(&[], 1.0, 1.0).is_err());
        assert!(waterfill_gains(&[0.0], 1.0, 1.0).is_err());
        assert!(waterfill_gains(&[1.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn zf_gains_are_inverse_column_norms() {
        let mut rng = stream_rng(51, 0);
        let h = CMatrix::from_fn(6, 3, |_, _| standard_complex_normal(&mut rng));
        let w = zf(&h).unwrap();
        let g = effective_gains(&h).unwrap();
        for k in 0..3 {
            assert!((g[k] - 1.0 / w.column(k).norm_squared()).abs() < 1e-10 * g[k]);
        }
        let budget = PowerBudget::new(1.0, 6).unwrap();
        let b = waterfill(&h, &budget, 0.1).unwrap();
        assert!((b.squared_norm() - 1.0).abs() < 1e-12);
    }
}
