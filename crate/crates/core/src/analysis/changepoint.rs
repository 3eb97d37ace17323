use serde::{Deserialize, Serialize};

use super::{bin_average, AnalysisError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// Trailing window length in bins; also the refractory period.
    pub window: usize,
    pub z_threshold: f64,
    pub bin_size: usize,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            window: 20,
            z_threshold: 6.0,
            bin_size: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub bin: usize,
    /// Last environment step of the flagged bin.
    pub step: u64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChangepointReport {
    pub detections: Vec<Detection>,
    pub params: DetectorParams,
}

impl ChangepointReport {
    /// Whether some detection lies within `tolerance` bins of `bin`.
    pub fn detects_near(&self, bin: usize, tolerance: usize) -> bool {
        self.detections.iter().any(|d| d.bin.abs_diff(bin) <= tolerance)
    }
}

/// Trailing z-score detector over already-binned values.
pub fn detect_in_bins(bins: &[f64], params: DetectorParams) -> Result<ChangepointReport, AnalysisError> {
    let w = params.window;
    if w < 2 || bins.len() <= 2 * w {
        return Err(AnalysisError::TooShort {
            needed: 2 * w + 1,
            found: bins.len(),
        });
    }
    let mut detections = Vec::new();
    let mut resume = w;
    for b in w..bins.len() {
        if b < resume {
            continue;
        }
        let window = &bins[b - w..b];
        let mean = window.iter().sum::<f64>() / w as f64;
        let var = window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w - 1) as f64;
        let sd = var.sqrt().max(1e-12 * (1.0 + mean.abs()));
        let z = (bins[b] - mean) / sd;
        if z >= params.z_threshold {
            detections.push(Detection {
                bin: b,
                step: ((b + 1) * params.bin_size - 1) as u64,
                z,
            });
            resume = b + 1 + w;
        }
    }
    Ok(ChangepointReport { detections, params })
}

/// Bins a per-step loss trace and flags bins whose mean exceeds the trailing
/// window mean by `z_threshold` trailing standard deviations. After a
/// detection the next `window` bins are skipped.
pub fn detect_changepoints(trace: &[f64], params: DetectorParams) -> Result<ChangepointReport, AnalysisError> {
    detect_in_bins(&bin_average(trace, params.bin_size), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noisy(len: usize, level: f64, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = Normal::new(level, sigma).unwrap();
        (0..len).map(|_| n.sample(rng)).collect()
    }

    #[test]
    fn flat_trace_has_no_detections() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trace = noisy(60_000, 0.1, 1e-4, &mut rng);
        assert!(detect_changepoints(&trace, DetectorParams::default()).unwrap().detections.is_empty());
    }

    #[test]
    fn single_jump_detected_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = 37_400;
        let mut trace = noisy(k, 0.1, 0.01, &mut rng);
        trace.extend(noisy(30_000, 1.0, 0.01, &mut rng));
        let p = DetectorParams::default();
        let r = detect_changepoints(&trace, p).unwrap();
        assert_eq!(r.detections.len(), 1);
        let s = r.detections[0].step as usize;
        assert!(s >= k && s <= k + p.window * p.bin_size);
        assert!(r.detections[0].z >= p.z_threshold);
    }

    #[test]
    fn two_separated_jumps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut trace = noisy(30_000, 0.1, 0.01, &mut rng);
        trace.extend(noisy(30_000, 1.0, 0.01, &mut rng));
        trace.extend(noisy(30_000, 5.0, 0.01, &mut rng));
        let r = detect_changepoints(&trace, DetectorParams::default()).unwrap();
        let bins: Vec<usize> = r.detections.iter().map(|d| d.bin).collect();
        assert_eq!(bins, vec![30, 60]);
        assert!(r.detects_near(61, 2));
    }

    #[test]
    fn short_trace_errors() {
        let trace = vec![0.0; 40_000];
        assert!(detect_changepoints(&trace, DetectorParams::default()).is_err());
    }
}
