use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hysteresis band, in units of the detrended signal's standard deviation.
pub const HYSTERESIS: f64 = 0.3;

/// Largest spread of the maxima spacings, relative to their mean, that
/// still counts as one period.
pub const MAX_SPREAD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub mean: f64,
    /// Standard deviation of the spacings.
    pub std: f64,
    /// Number of maxima used.
    pub maxima: usize,
}

/// Mean spacing of the positive-lobe maxima of `signal` after removing a
/// linear trend.
///
/// A lobe opens when the signal rises above `HYSTERESIS * std` and closes
/// when it falls below `-HYSTERESIS * std`; each closed lobe contributes
/// its largest sample. Small ripples riding on a lobe are ignored.
/// Spacings that scatter by more than `MAX_SPREAD` of their mean are
/// reported as [`Error::IrregularPeriod`].
pub fn oscillation_period(times: &[f64], signal: &[f64]) -> Result<Period> {
    if times.len() != signal.len() {
        return Err(Error::GridMismatch {
            expected: times.len(),
            found: signal.len(),
        });
    }
    let n = times.len() as f64;
    if times.len() < 3 {
        return Err(Error::NonOscillatory(0));
    }
    let tm = times.iter().sum::<f64>() / n;
    let sm = signal.iter().sum::<f64>() / n;
    let (mut cov, mut var) = (0.0, 0.0);
    for (t, s) in times.iter().zip(signal) {
        cov += (t - tm) * (s - sm);
        var += (t - tm) * (t - tm);
    }
    let slope = if var > 0.0 { cov / var } else { 0.0 };
    let residual: Vec<f64> = times.iter().zip(signal).map(|(t, s)| s - sm - slope * (t - tm)).collect();
    let std = (residual.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    if std == 0.0 {
        return Err(Error::NonOscillatory(0));
    }
    let band = HYSTERESIS * std;

    let mut maxima = Vec::new();
    let mut state = 0i8;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for (t, r) in times.iter().zip(&residual) {
        match state {
            1 => {
                if *r > best.0 {
                    best = (*r, *t);
                }
                if *r < -band {
                    maxima.push(best.1);
                    state = -1;
                }
            }
            _ => {
                if *r > band {
                    state = 1;
                    best = (*r, *t);
                }
            }
        }
    }
    if maxima.len() < 3 {
        return Err(Error::NonOscillatory(maxima.len()));
    }
    let spacings: Vec<f64> = maxima.windows(2).map(|w| w[1] - w[0]).collect();
    let m = spacings.len() as f64;
    let mean = spacings.iter().sum::<f64>() / m;
    let std = (spacings.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / m).sqrt();
    if std > MAX_SPREAD * mean {
        return Err(Error::IrregularPeriod { mean, std });
    }
    Ok(Period {
        mean,
        std,
        maxima: maxima.len(),
    })
}
