//! Hand activity detection: an STA/LTA trigger that fires on the tail of a
//! gesture.
//!
//! Per cycle `l` the range-weighted magnitude `x(l) = A_max · r_max^β` is
//! smoothed by an EMA, `M(l) = (1−α)·M(l−1) + α·x(l)` with `M(−1) = 0`. A tail
//! is declared at cycle `l` when
//!
//! ```text
//! Σ_{l−L2+1..l} x ≥ γ1   and   STA(l) / LTA(l) ≤ γ2
//! STA(l) = mean M(l+1 .. l+L1),   LTA(l) = mean M(l−L2+1 .. l)
//! ```
//!
//! STA looks L1 cycles ahead, so the decision about cycle `l` is only taken
//! once cycle `l + L1` has been consumed.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::radar_model::RadarParams;
use crate::rd_processing::PointList;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HadConfig {
    /// EMA smoothing α ∈ [0, 1].
    pub alpha: f64,
    /// Range-compensation exponent β.
    pub beta: f64,
    /// Short (look-ahead) window L1, cycles.
    pub short_window: usize,
    /// Long (look-back) window L2, cycles.
    pub long_window: usize,
    /// Energy threshold on the long-window RWM sum. `INFINITY` until
    /// calibrated.
    pub gamma1: f64,
    /// Ratio threshold in (0, 1).
    pub gamma2: f64,
    /// Minimum tail-to-tail spacing of detections, cycles.
    pub refractory: usize,
}

impl Default for HadConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 1.0,
            short_window: 4,
            long_window: 16,
            gamma1: f64::INFINITY,
            gamma2: 0.5,
            refractory: crate::feature_encoder::DEFAULT_IL / 2,
        }
    }
}

impl HadConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ParameterDomain(m));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !self.beta.is_finite() {
            return bad("beta must be finite".into());
        }
        if self.short_window < 1 || self.short_window >= self.long_window {
            return bad(format!(
                "need 1 <= L1 < L2, got L1={} L2={}",
                self.short_window, self.long_window
            ));
        }
        if !(self.gamma2 > 0.0 && self.gamma2 < 1.0) {
            return bad(format!("gamma2 {} outside (0, 1)", self.gamma2));
        }
        if self.gamma1.is_nan() {
            return bad("gamma1 is NaN".into());
        }
        Ok(())
    }

    pub fn is_calibrated(&self) -> bool {
        self.gamma1.is_finite()
    }
}

/// A detected gesture tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DetectionEvent {
    /// Cycle judged to be the end of the gesture.
    pub tail_cycle: u64,
    /// Cycle after which the decision was taken, `tail_cycle + L1`.
    pub decision_cycle: u64,
}

/// `A_max · r_max^β`.
pub fn rwm_value(a_max: f64, r_max_m: f64, beta: f64) -> f64 {
    a_max * r_max_m.powf(beta)
}

/// RWM of one cycle. The strongest point is the first of the list; its range
/// bin is converted to metres before exponentiation.
pub fn rwm(points: &PointList, beta: f64, params: &RadarParams) -> f64 {
    match points.points.first() {
        Some(p) => rwm_value(p.magnitude, p.range_m(params), beta),
        None => 0.0,
    }
}

/// Rolling history for the detector.
#[derive(Debug, Clone)]
pub struct HadState {
    short: usize,
    long: usize,
    x: VecDeque<f64>,
    m: VecDeque<f64>,
    last_m: f64,
    /// Index of the next cycle to be consumed.
    next_cycle: u64,
    last_tail: Option<u64>,
}

impl HadState {
    pub fn new(config: &HadConfig) -> Self {
        Self::starting_at(config, 0)
    }

    pub fn starting_at(config: &HadConfig, first_cycle: u64) -> Self {
        let cap = config.short_window + config.long_window;
        Self {
            short: config.short_window,
            long: config.long_window,
            x: VecDeque::with_capacity(cap + 1),
            m: VecDeque::with_capacity(cap + 1),
            last_m: 0.0,
            next_cycle: first_cycle,
            last_tail: None,
        }
    }

    /// Latest EMA value, `M(−1) = 0` before any input.
    pub fn ema(&self) -> f64 {
        self.last_m
    }

    pub fn cycles_consumed(&self) -> u64 {
        self.next_cycle
    }

    fn oldest_cycle(&self) -> u64 {
        self.next_cycle - self.m.len() as u64
    }

    /// `(STA(l), LTA(l))`, available once cycles `l−L2+1 ..= l+L1` are held.
    pub fn sta_lta(&self, l: u64) -> Result<(f64, f64)> {
        let lo = (l + 1).checked_sub(self.long as u64);
        let hi = l + self.short as u64;
        match lo {
            Some(lo) if !self.m.is_empty() && lo >= self.oldest_cycle() && hi < self.next_cycle => {
                let base = (lo - self.oldest_cycle()) as usize;
                let lta = self.m.range(base..base + self.long).sum::<f64>() / self.long as f64;
                let sta = self
                    .m
                    .range(base + self.long..base + self.long + self.short)
                    .sum::<f64>()
                    / self.short as f64;
                Ok((sta, lta))
            }
            _ => Err(Error::NotReady(format!("history does not cover cycle {l}"))),
        }
    }

    fn long_sum_x(&self, l: u64) -> f64 {
        let base = (l + 1 - self.long as u64 - self.oldest_cycle()) as usize;
        self.x.range(base..base + self.long).sum()
    }
}

/// Applies the EMA recurrence for one new RWM value and returns `M(l)`.
pub fn ema_update(state: &mut HadState, x: f64, alpha: f64) -> f64 {
    let m = (1.0 - alpha) * state.last_m + alpha * x;
    state.last_m = m;
    state.x.push_back(x);
    state.m.push_back(m);
    let cap = state.short + state.long;
    while state.m.len() > cap {
        state.m.pop_front();
        state.x.pop_front();
    }
    state.next_cycle += 1;
    m
}

/// Evaluates the tail condition for the cycle `L1` behind the newest one.
pub fn detect_tail(state: &mut HadState, config: &HadConfig) -> Option<DetectionEvent> {
    let newest = state.next_cycle.checked_sub(1)?;
    let l = newest.checked_sub(config.short_window as u64)?;
    if let Some(t) = state.last_tail {
        if l < t + config.refractory as u64 {
            return None;
        }
    }
    let (sta, lta) = state.sta_lta(l).ok()?;
    if state.long_sum_x(l) < config.gamma1 || lta <= 0.0 || sta / lta > config.gamma2 {
        return None;
    }
    state.last_tail = Some(l);
    Some(DetectionEvent {
        tail_cycle: l,
        decision_cycle: newest,
    })
}

/// Incremental detector: one [`push`](Self::push) per cycle.
#[derive(Debug, Clone)]
pub struct HadDetector {
    config: HadConfig,
    state: HadState,
}

impl HadDetector {
    pub fn new(config: HadConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            state: HadState::new(&config),
            config,
        })
    }

    pub fn config(&self) -> &HadConfig {
        &self.config
    }

    pub fn state(&self) -> &HadState {
        &self.state
    }

    pub fn push(&mut self, x: f64) -> Option<DetectionEvent> {
        ema_update(&mut self.state, x, self.config.alpha);
        detect_tail(&mut self.state, &self.config)
    }

    pub fn push_points(&mut self, points: &PointList, params: &RadarParams) -> Option<DetectionEvent> {
        self.push(rwm(points, self.config.beta, params))
    }
}

/// Sums of `x` over every full sliding window of `len` cycles.
pub fn window_sums(xs: &[f64], len: usize) -> Vec<f64> {
    if len == 0 || xs.len() < len {
        return Vec::new();
    }
    xs.windows(len).map(|w| w.iter().sum()).collect()
}

/// γ1 = `factor` × the `quantile` of long-window RWM sums over a noise-only
/// stream.
pub fn calibrate_gamma1(noise_x: &[f64], long_window: usize, quantile: f64, factor: f64) -> Result<f64> {
    let mut sums = window_sums(noise_x, long_window);
    if sums.is_empty() {
        return Err(Error::NotReady(format!(
            "need at least {long_window} noise cycles, got {}",
            noise_x.len()
        )));
    }
    sums.sort_unstable_by(|a, b| a.total_cmp(b));
    let rank = ((quantile * sums.len() as f64).ceil() as usize).clamp(1, sums.len()) - 1;
    Ok(factor * sums[rank])
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    use crate::rd_processing::Point;

    fn config(alpha: f64, gamma1: f64) -> HadConfig {
        HadConfig {
            alpha,
            gamma1,
            ..HadConfig::default()
        }
    }

    fn point(range_bin: usize, magnitude: f64) -> Point {
        Point {
            range_bin,
            doppler_bin: 0,
            magnitude,
            amplitudes: [Complex64::new(0.0, 0.0); 3],
        }
    }

    /// Straight evaluation of the recurrence and the two conditions over a
    /// whole sequence, with the same refractory rule.
    fn offline(xs: &[f64], c: &HadConfig) -> Vec<u64> {
        let mut m = Vec::with_capacity(xs.len());
        let mut prev = 0.0;
        for &x in xs {
            prev = (1.0 - c.alpha) * prev + c.alpha * x;
            m.push(prev);
        }
        let (l1, l2) = (c.short_window, c.long_window);
        let mut out: Vec<u64> = Vec::new();
        for l in (l2 - 1)..xs.len().saturating_sub(l1) {
            if let Some(&t) = out.last() {
                if (l as u64) < t + c.refractory as u64 {
                    continue;
                }
            }
            let sum_x: f64 = xs[l + 1 - l2..=l].iter().sum();
            let lta: f64 = m[l + 1 - l2..=l].iter().sum::<f64>() / l2 as f64;
            let sta: f64 = m[l + 1..=l + l1].iter().sum::<f64>() / l1 as f64;
            if sum_x >= c.gamma1 && lta > 0.0 && sta / lta <= c.gamma2 {
                out.push(l as u64);
            }
        }
        out
    }

    fn stream(xs: &[f64], c: HadConfig) -> Vec<DetectionEvent> {
        let mut d = HadDetector::new(c).unwrap();
        xs.iter().filter_map(|&x| d.push(x)).collect()
    }

    #[test]
    fn rwm_formula() {
        assert_eq!(rwm_value(2.0, 3.0, 1.0), 6.0);
        assert_eq!(rwm_value(2.0, 0.37, 0.0), 2.0);
    }

    #[test]
    fn rwm_uses_strongest_point() {
        // near 5 @ 0.2 m, far 4 @ 0.8 m, β = 2 → 5 · 0.04
        let p = RadarParams::default();
        let dr = p.range_resolution_m();
        let near = ((0.2 / dr).round()) as usize;
        let far = ((0.8 / dr).round()) as usize;
        let pts = PointList {
            points: vec![point(near, 5.0), point(far, 4.0)],
            cycle_index: 0,
        };
        let want = 5.0 * (near as f64 * dr).powi(2);
        assert!((rwm(&pts, 2.0, &p) - want).abs() < 1e-12);
        let candidates = [5.0 * (near as f64 * dr).powi(2), 4.0 * (far as f64 * dr).powi(2)];
        assert!(candidates[1] > candidates[0], "largest RWM is not what is used");
        // at exact metres: 5 · 0.2² = 0.2
        assert!((rwm_value(5.0, 0.2, 2.0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn ema_edge_cases() {
        let c = config(1.0, 1.0);
        let mut s = HadState::new(&c);
        for x in [0.5, 2.0, -1.0] {
            assert_eq!(ema_update(&mut s, x, 1.0), x);
        }
        let mut s = HadState::new(&c);
        for x in [0.5, 2.0] {
            assert_eq!(ema_update(&mut s, x, 0.0), 0.0);
        }
        let mut s = HadState::new(&c);
        let m: Vec<f64> = [0.0, 1.0, 1.0].iter().map(|&x| ema_update(&mut s, x, 0.5)).collect();
        assert_eq!(m, vec![0.0, 0.5, 0.75]);
    }

    fn state_with_m(ms: &[f64]) -> HadState {
        // α = 1 makes M equal to the input
        let c = HadConfig {
            alpha: 1.0,
            ..HadConfig::default()
        };
        let mut s = HadState::new(&c);
        for &m in ms {
            ema_update(&mut s, m, 1.0);
        }
        s
    }

    #[test]
    fn sta_lta_constant_and_step() {
        let s = state_with_m(&[2.0; 20]);
        assert_eq!(s.sta_lta(15).unwrap(), (2.0, 2.0));

        let mut ms = vec![1.0; 16];
        ms.extend([0.0; 4]);
        let s = state_with_m(&ms);
        assert_eq!(s.sta_lta(15).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn sta_lta_ramp_offset() {
        let ramp: Vec<f64> = (0..40).map(f64::from).collect();
        let s = state_with_m(&ramp);
        let (sta, lta) = s.sta_lta(35).unwrap();
        assert!((sta - lta - 10.0).abs() < 1e-12);
    }

    #[test]
    fn sta_lta_needs_history() {
        let s = state_with_m(&[1.0; 19]);
        assert!(matches!(s.sta_lta(15), Err(Error::NotReady(_))));
        assert!(s.sta_lta(3).is_err());
        let s = state_with_m(&[1.0; 20]);
        assert!(s.sta_lta(15).is_ok());
        assert!(s.sta_lta(16).is_err());
    }

    #[test]
    fn silence_and_constant_activity_never_fire() {
        assert!(stream(&[0.0; 500], config(0.3, 1e-9)).is_empty());
        assert!(stream(&[1.0; 500], config(0.3, 1.0)).is_empty());
    }

    #[test]
    fn burst_tail_matches_offline_evaluation() {
        let mut xs = vec![0.0; 100];
        xs[10..=50].fill(1.0);
        let c = HadConfig {
            alpha: 0.5,
            short_window: 4,
            long_window: 16,
            gamma1: 8.0,
            gamma2: 0.5,
            ..HadConfig::default()
        };
        let events = stream(&xs, c);
        let tails: Vec<u64> = events.iter().map(|e| e.tail_cycle).collect();
        assert_eq!(tails, offline(&xs, &c));
        // at l = 49 the look-ahead mean is (1 + ½ + ¼ + ⅛)/4 = 0.469 of LTA,
        // so with α = 0.5 the trigger leads the last active cycle by one
        assert_eq!(tails, vec![49]);
        assert!(events.iter().all(|e| e.decision_cycle == e.tail_cycle + 4));

        // the slower default EMA fires on the last active cycle itself
        let d = HadConfig { alpha: 0.3, ..c };
        let tails: Vec<u64> = stream(&xs, d).iter().map(|e| e.tail_cycle).collect();
        assert_eq!(tails, vec![50]);
    }

    #[test]
    fn ratio_condition_is_scale_invariant() {
        let mut xs = vec![0.01; 200];
        for (i, x) in xs.iter_mut().enumerate() {
            if (30..55).contains(&i) || (110..130).contains(&i) {
                *x = 1.0 + 0.3 * ((i as f64) * 0.7).sin();
            }
        }
        let c = config(0.3, 0.0);
        let base: Vec<u64> = stream(&xs, c).iter().map(|e| e.tail_cycle).collect();
        assert!(!base.is_empty());
        for k in [1e-3, 0.5, 7.0, 1e4] {
            let scaled: Vec<f64> = xs.iter().map(|x| x * k).collect();
            let got: Vec<u64> = stream(&scaled, c).iter().map(|e| e.tail_cycle).collect();
            assert_eq!(got, base, "scale {k}");
        }
    }

    #[test]
    fn refractory_spacing() {
        let mut xs = vec![0.0; 300];
        for start in (20..280).step_by(12) {
            xs[start..start + 5].fill(1.0);
        }
        for r in [0usize, 5, 20, 37] {
            let c = HadConfig {
                refractory: r,
                gamma1: 0.5,
                ..HadConfig::default()
            };
            let ev = stream(&xs, c);
            assert_eq!(ev.iter().map(|e| e.tail_cycle).collect::<Vec<_>>(), offline(&xs, &c));
            for w in ev.windows(2) {
                assert!(w[1].tail_cycle - w[0].tail_cycle >= r.max(1) as u64);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(HadConfig::default().validate().is_ok());
        assert!(!HadConfig::default().is_calibrated());
        for bad in [
            HadConfig { alpha: 1.5, ..HadConfig::default() },
            HadConfig { short_window: 16, ..HadConfig::default() },
            HadConfig { short_window: 0, ..HadConfig::default() },
            HadConfig { gamma2: 1.0, ..HadConfig::default() },
            HadConfig { gamma1: f64::NAN, ..HadConfig::default() },
        ] {
            assert!(HadDetector::new(bad).is_err());
        }
    }

    #[test]
    fn calibration_quantile() {
        let xs: Vec<f64> = (0..1015).map(|i| (i % 10) as f64 * 0.01).collect();
        let sums = window_sums(&xs, 16);
        assert_eq!(sums.len(), 1000);
        let g = calibrate_gamma1(&xs, 16, 0.95, 3.0).unwrap();
        let mut sorted = sums.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        assert!((g - 3.0 * sorted[949]).abs() < 1e-12);
        assert!(calibrate_gamma1(&xs[..10], 16, 0.95, 3.0).is_err());
    }
}
