//! Exact incremental SVM with hinge loss.
//!
//! Every stored sample carries its multiplier `alpha ∈ [0, C]` and margin
//! gradient `g = y·f(x) − 1`. Samples are partitioned into margin vectors
//! (`0 < alpha < C`, `g = 0`), error vectors (`alpha = C`, `g ≤ 0`) and reserve
//! vectors (`alpha = 0`, `g ≥ 0`). Inserting a sample raises its multiplier in
//! the largest step that keeps the margin vectors on the margin and the
//! equality constraint `Σ alpha·y = 0` satisfied, migrating samples between
//! sets whenever one of them reaches a boundary.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const STEP_TOL: f64 = 1e-10;
const MAX_STEPS_PER_SAMPLE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SvmKernel {
    Linear,
    /// `exp(-‖a − b‖² / (2σ²))`.
    Gaussian { sigma: f64 },
}

impl SvmKernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            SvmKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            SvmKernel::Gaussian { sigma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginSet {
    Margin,
    Error,
    Reserve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmSample {
    pub features: Vec<f64>,
    pub label: f64,
    pub alpha: f64,
    pub gradient: f64,
    pub set: MarginSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementalSvm {
    c: f64,
    kernel: SvmKernel,
    samples: Vec<SvmSample>,
    /// Dense kernel matrix over stored samples.
    gram: Vec<Vec<f64>>,
    bias: f64,
}

enum Event {
    CandidateMargin,
    CandidateError,
    ToError(usize),
    ToReserve(usize),
    ToMargin(usize),
}

/// Largest violations of the optimality conditions, for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub equality_residual: f64,
    pub max_margin_gradient: f64,
    pub max_violation: f64,
    pub alphas_in_box: bool,
}

impl IncrementalSvm {
    pub fn new(c: f64, kernel: SvmKernel) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!("SVM regularization {c} must be positive")));
        }
        if let SvmKernel::Gaussian { sigma } = kernel {
            if sigma <= 0.0 {
                return Err(Error::Config(format!("SVM kernel width {sigma} must be positive")));
            }
        }
        Ok(Self { c, kernel, samples: Vec::new(), gram: Vec::new(), bias: 0.0 })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn kernel(&self) -> SvmKernel {
        self.kernel
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn samples(&self) -> &[SvmSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, set: MarginSet) -> usize {
        self.samples.iter().filter(|s| s.set == set).count()
    }

    /// Margin plus error vectors.
    pub fn support_vector_count(&self) -> usize {
        self.samples.iter().filter(|s| s.set != MarginSet::Reserve).count()
    }

    fn q(&self, i: usize, j: usize) -> f64 {
        self.samples[i].label * self.samples[j].label * self.gram[i][j]
    }

    fn raw_output(&self, kernel_row: impl Fn(usize) -> f64) -> f64 {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.alpha > 0.0)
            .map(|(i, s)| s.alpha * s.label * kernel_row(i))
            .sum::<f64>()
            + self.bias
    }

    /// Decision value `Σ alpha·y·K(x_i, x) + b`.
    pub fn score(&self, features: &[f64]) -> Result<f64> {
        if self.samples.is_empty() {
            return Err(Error::NoModel);
        }
        self.check_dim(features)?;
        Ok(self.raw_output(|i| self.kernel.eval(&self.samples[i].features, features)))
    }

    fn check_dim(&self, features: &[f64]) -> Result<()> {
        if let Some(first) = self.samples.first() {
            if first.features.len() != features.len() {
                return Err(Error::DimensionMismatch(format!(
                    "model has {}-dimensional samples, got {}",
                    first.features.len(),
                    features.len()
                )));
            }
        }
        Ok(())
    }

    fn refresh_gradients(&mut self) {
        let grads: Vec<f64> = (0..self.samples.len())
            .map(|i| self.samples[i].label * self.raw_output(|j| self.gram[i][j]) - 1.0)
            .collect();
        for (s, g) in self.samples.iter_mut().zip(grads) {
            s.gradient = if s.set == MarginSet::Margin { 0.0 } else { g };
        }
    }

    /// Inserts one labeled sample and restores optimality on all stored samples.
    pub fn increment(&mut self, features: Vec<f64>, label: f64) -> Result<()> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite SVM features".into()));
        }
        if label != 1.0 && label != -1.0 {
            return Err(Error::Input(format!("label must be ±1, got {label}")));
        }
        self.check_dim(&features)?;
        let row: Vec<f64> = self.samples.iter().map(|s| self.kernel.eval(&s.features, &features)).collect();
        let self_k = self.kernel.eval(&features, &features);
        for (g, k) in self.gram.iter_mut().zip(&row) {
            g.push(*k);
        }
        let mut full = row;
        full.push(self_k);
        self.gram.push(full);
        let c_idx = self.samples.len();
        let out = self.raw_output(|j| self.gram[c_idx][j]);
        self.samples.push(SvmSample { features, label, alpha: 0.0, gradient: label * out - 1.0, set: MarginSet::Reserve });

        for _ in 0..MAX_STEPS_PER_SAMPLE {
            let cand = &self.samples[c_idx];
            if cand.alpha == 0.0 && cand.gradient >= 0.0 {
                self.samples[c_idx].set = MarginSet::Reserve;
                self.refresh_gradients();
                return Ok(());
            }
            let margin: Vec<usize> = (0..self.samples.len())
                .filter(|&i| i != c_idx && self.samples[i].set == MarginSet::Margin)
                .collect();
            let done = if margin.is_empty() {
                self.bias_step(c_idx)
            } else {
                self.adiabatic_step(c_idx, &margin)?
            };
            if done {
                self.refresh_gradients();
                return Ok(());
            }
        }
        Err(Error::Numerical { component: c_idx, reason: "incremental SVM did not converge".into() })
    }

    /// With no margin vectors only the bias can move.
    fn bias_step(&mut self, c: usize) -> bool {
        let yc = self.samples[c].label;
        let mut best = (-self.samples[c].gradient, Event::CandidateMargin);
        for (i, s) in self.samples.iter().enumerate() {
            if i == c {
                continue;
            }
            let rate = s.label * yc;
            let t = match s.set {
                MarginSet::Reserve if rate < 0.0 => s.gradient / -rate,
                MarginSet::Error if rate > 0.0 => -s.gradient / rate,
                _ => continue,
            };
            if t < best.0 {
                best = (t, Event::ToMargin(i));
            }
        }
        let t = best.0.max(0.0);
        self.bias += yc * t;
        for s in self.samples.iter_mut() {
            s.gradient += s.label * yc * t;
        }
        match best.1 {
            Event::ToMargin(i) => {
                self.samples[i].gradient = 0.0;
                self.samples[i].set = MarginSet::Margin;
                false
            }
            _ => {
                let cand = &mut self.samples[c];
                cand.gradient = 0.0;
                cand.set = if cand.alpha > 0.0 { MarginSet::Margin } else { MarginSet::Reserve };
                true
            }
        }
    }

    fn sensitivities(&self, c: usize, margin: &[usize]) -> Result<DVector<f64>> {
        let s = margin.len();
        let mut m = DMatrix::<f64>::zeros(s + 1, s + 1);
        let mut rhs = DVector::<f64>::zeros(s + 1);
        rhs[0] = -self.samples[c].label;
        for (a, &i) in margin.iter().enumerate() {
            m[(0, a + 1)] = self.samples[i].label;
            m[(a + 1, 0)] = self.samples[i].label;
            rhs[a + 1] = -self.q(i, c);
            for (b, &j) in margin.iter().enumerate() {
                m[(a + 1, b + 1)] = self.q(i, j);
            }
        }
        if let Some(beta) = m.clone().lu().solve(&rhs).filter(|b| b.iter().all(|v| v.is_finite())) {
            return Ok(beta);
        }
        for a in 1..=s {
            m[(a, a)] += 1e-10;
        }
        m.lu()
            .solve(&rhs)
            .filter(|b| b.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Numerical { component: c, reason: "singular margin system".into() })
    }

    /// One step of raising the candidate's multiplier with the margin set fixed.
    fn adiabatic_step(&mut self, c: usize, margin: &[usize]) -> Result<bool> {
        let beta = self.sensitivities(c, margin)?;
        let beta_b = beta[0];
        let n = self.samples.len();
        let mut in_margin = vec![false; n];
        for &i in margin {
            in_margin[i] = true;
        }
        let gamma: Vec<f64> = (0..n)
            .map(|i| {
                if in_margin[i] {
                    return 0.0;
                }
                let mut v = self.q(i, c) + self.samples[i].label * beta_b;
                for (a, &j) in margin.iter().enumerate() {
                    v += self.q(i, j) * beta[a + 1];
                }
                v
            })
            .collect();

        let cand = &self.samples[c];
        let mut best = (self.c - cand.alpha, Event::CandidateError);
        if gamma[c] > STEP_TOL {
            let t = -cand.gradient / gamma[c];
            if t < best.0 {
                best = (t, Event::CandidateMargin);
            }
        }
        for (a, &j) in margin.iter().enumerate() {
            let b = beta[a + 1];
            let s = &self.samples[j];
            let t = if b > STEP_TOL {
                ((self.c - s.alpha) / b, Event::ToError(j))
            } else if b < -STEP_TOL {
                (-s.alpha / b, Event::ToReserve(j))
            } else {
                continue;
            };
            if t.0 < best.0 {
                best = t;
            }
        }
        for (i, s) in self.samples.iter().enumerate() {
            if i == c || in_margin[i] {
                continue;
            }
            let g = gamma[i];
            let t = match s.set {
                MarginSet::Error if g > STEP_TOL => -s.gradient / g,
                MarginSet::Reserve if g < -STEP_TOL => -s.gradient / g,
                _ => continue,
            };
            if t < best.0 {
                best = (t, Event::ToMargin(i));
            }
        }

        let t = best.0.max(0.0);
        self.samples[c].alpha += t;
        self.bias += beta_b * t;
        for (a, &j) in margin.iter().enumerate() {
            self.samples[j].alpha += beta[a + 1] * t;
        }
        for (i, s) in self.samples.iter_mut().enumerate() {
            if !in_margin[i] {
                s.gradient += gamma[i] * t;
            }
        }

        Ok(match best.1 {
            Event::CandidateMargin => {
                let s = &mut self.samples[c];
                s.gradient = 0.0;
                s.set = MarginSet::Margin;
                true
            }
            Event::CandidateError => {
                let s = &mut self.samples[c];
                s.alpha = self.c;
                s.set = MarginSet::Error;
                true
            }
            Event::ToError(j) => {
                let s = &mut self.samples[j];
                s.alpha = self.c;
                s.set = MarginSet::Error;
                false
            }
            Event::ToReserve(j) => {
                let s = &mut self.samples[j];
                s.alpha = 0.0;
                s.set = MarginSet::Reserve;
                false
            }
            Event::ToMargin(i) => {
                let s = &mut self.samples[i];
                s.gradient = 0.0;
                s.set = MarginSet::Margin;
                false
            }
        })
    }

    pub fn kkt_report(&self) -> KktReport {
        let mut report = KktReport {
            equality_residual: self.samples.iter().map(|s| s.alpha * s.label).sum::<f64>().abs(),
            max_margin_gradient: 0.0,
            max_violation: 0.0,
            alphas_in_box: self.samples.iter().all(|s| s.alpha >= 0.0 && s.alpha <= self.c),
        };
        for (i, s) in self.samples.iter().enumerate() {
            let g = s.label * self.raw_output(|j| self.gram[i][j]) - 1.0;
            let violation = match s.set {
                MarginSet::Margin => {
                    report.max_margin_gradient = report.max_margin_gradient.max(g.abs());
                    g.abs()
                }
                MarginSet::Error => g.max(0.0),
                MarginSet::Reserve => (-g).max(0.0),
            };
            report.max_violation = report.max_violation.max(violation);
        }
        report
    }

    fn remove_indices(&mut self, mut drop: Vec<usize>) {
        drop.sort_unstable();
        drop.dedup();
        for &i in drop.iter().rev() {
            self.samples.remove(i);
            self.gram.remove(i);
            for row in &mut self.gram {
                row.remove(i);
            }
        }
    }

    /// Drops reserve vectors with the largest margins beyond `max_reserve`.
    /// Reserve vectors carry no weight, so the solution is unchanged.
    pub fn prune_reserve(&mut self, max_reserve: usize) -> usize {
        let mut reserve: Vec<usize> = (0..self.samples.len()).filter(|&i| self.samples[i].set == MarginSet::Reserve).collect();
        if reserve.len() <= max_reserve {
            return 0;
        }
        reserve.sort_by(|&a, &b| self.samples[a].gradient.total_cmp(&self.samples[b].gradient));
        let drop = reserve.split_off(max_reserve);
        let n = drop.len();
        self.remove_indices(drop);
        n
    }

    /// Keeps the `max_sv` support vectors with the smallest `|g|`, drops the
    /// rest, and re-solves on the survivors. Repeats until the budget holds.
    /// Returns the number of samples removed.
    pub fn maintain_budget(&mut self, max_sv: usize) -> Result<usize> {
        let mut removed = 0;
        while self.support_vector_count() > max_sv {
            let mut svs: Vec<usize> = (0..self.samples.len()).filter(|&i| self.samples[i].set != MarginSet::Reserve).collect();
            svs.sort_by(|&a, &b| self.samples[a].gradient.abs().total_cmp(&self.samples[b].gradient.abs()).then(a.cmp(&b)));
            let drop = svs.split_off(max_sv);
            removed += drop.len();
            self.remove_indices(drop);
            self.retrain()?;
        }
        Ok(removed)
    }

    fn retrain(&mut self) -> Result<()> {
        let samples = std::mem::take(&mut self.samples);
        self.gram.clear();
        self.bias = 0.0;
        for s in samples {
            self.increment(s.features, s.label)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_kkt(svm: &IncrementalSvm) {
        let r = svm.kkt_report();
        assert!(r.alphas_in_box);
        assert!(r.equality_residual < 1e-6, "{r:?}");
        assert!(r.max_margin_gradient < 1e-4, "{r:?}");
        assert!(r.max_violation < 1e-6, "{r:?}");
    }

    #[test]
    fn two_point_problem() {
        let mut svm = IncrementalSvm::new(2.0, SvmKernel::Linear).unwrap();
        svm.increment(vec![1.0], 1.0).unwrap();
        svm.increment(vec![-1.0], -1.0).unwrap();
        assert_kkt(&svm);
        // Dual optimum: alpha = 0.5 on both, b = 0, f(x) = x.
        for s in svm.samples() {
            assert!((s.alpha - 0.5).abs() < 1e-9);
            assert_eq!(s.set, MarginSet::Margin);
        }
        assert!(svm.score(&[0.0]).unwrap().abs() < 1e-9);
        assert!((svm.score(&[1.0]).unwrap() - 1.0).abs() < 1e-9);
        assert!(svm.score(&[-3.0]).unwrap() < 0.0);
    }

    #[test]
    fn far_sample_joins_reserve_without_changing_the_model() {
        let mut svm = IncrementalSvm::new(2.0, SvmKernel::Linear).unwrap();
        svm.increment(vec![1.0], 1.0).unwrap();
        svm.increment(vec![-1.0], -1.0).unwrap();
        let before: Vec<f64> = svm.samples().iter().map(|s| s.alpha).collect();
        let bias = svm.bias();
        svm.increment(vec![5.0], 1.0).unwrap();
        assert_eq!(svm.count(MarginSet::Reserve), 1);
        assert_eq!(svm.samples()[2].alpha, 0.0);
        assert_eq!(svm.bias(), bias);
        assert_eq!(svm.samples()[..2].iter().map(|s| s.alpha).collect::<Vec<_>>(), before);
    }

    #[test]
    fn kkt_holds_after_every_insertion() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut svm = IncrementalSvm::new(2.0, SvmKernel::Gaussian { sigma: 1.0 }).unwrap();
        for _ in 0..60 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let noisy = rng.gen_bool(0.1);
            let y = if (x[0] + 0.5 * x[1] > 0.0) ^ noisy { 1.0 } else { -1.0 };
            svm.increment(x, y).unwrap();
            assert_kkt(&svm);
        }
        for (i, s) in svm.samples().iter().enumerate() {
            if s.set == MarginSet::Margin {
                let f = svm.score(&svm.samples()[i].features).unwrap();
                assert!((f - s.label).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn errors_and_empty_model() {
        let mut svm = IncrementalSvm::new(2.0, SvmKernel::Gaussian { sigma: 0.5 }).unwrap();
        assert!(matches!(svm.score(&[0.0]), Err(Error::NoModel)));
        assert!(svm.increment(vec![f64::NAN], 1.0).is_err());
        assert!(svm.increment(vec![1.0], 0.5).is_err());
        svm.increment(vec![1.0, 2.0], 1.0).unwrap();
        assert!(svm.increment(vec![1.0], 1.0).is_err());
        assert!(IncrementalSvm::new(0.0, SvmKernel::Linear).is_err());
    }

    #[test]
    fn budget_keeps_smallest_margins() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut svm = IncrementalSvm::new(2.0, SvmKernel::Gaussian { sigma: 0.7 }).unwrap();
        while svm.support_vector_count() < 13 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            svm.increment(x, y).unwrap();
        }
        let count = svm.support_vector_count();
        assert_eq!(svm.maintain_budget(count).unwrap(), 0);

        let budget = count - 3;
        let mut svs: Vec<&SvmSample> = svm.samples().iter().filter(|s| s.set != MarginSet::Reserve).collect();
        svs.sort_by(|a, b| a.gradient.abs().total_cmp(&b.gradient.abs()));
        let expected: Vec<Vec<f64>> = svs[..budget].iter().map(|s| s.features.clone()).collect();
        let dropped: Vec<Vec<f64>> = svs[budget..].iter().map(|s| s.features.clone()).collect();

        let mut trimmed = svm.clone();
        trimmed.maintain_budget(budget).unwrap();
        assert!(trimmed.support_vector_count() <= budget);
        for f in &expected {
            assert!(trimmed.samples().iter().any(|s| &s.features == f));
        }
        for f in &dropped {
            assert!(!trimmed.samples().iter().any(|s| &s.features == f));
        }
        assert_kkt(&trimmed);
    }

    #[test]
    fn reserve_pruning_keeps_the_solution() {
        let mut svm = IncrementalSvm::new(2.0, SvmKernel::Linear).unwrap();
        svm.increment(vec![1.0], 1.0).unwrap();
        svm.increment(vec![-1.0], -1.0).unwrap();
        for k in 2..8 {
            svm.increment(vec![k as f64], 1.0).unwrap();
        }
        assert_eq!(svm.count(MarginSet::Reserve), 6);
        let before = svm.score(&[0.3]).unwrap();
        assert_eq!(svm.prune_reserve(2), 4);
        assert_eq!(svm.count(MarginSet::Reserve), 2);
        assert_eq!(svm.score(&[0.3]).unwrap(), before);
        // The two closest to the margin survive.
        let kept: Vec<f64> = svm.samples().iter().filter(|s| s.set == MarginSet::Reserve).map(|s| s.features[0]).collect();
        assert_eq!(kept, vec![2.0, 3.0]);
    }
}
