//! Per-step learner records, cumulative accuracy, and the trace CSV.

use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub correct: bool,
    pub predicted: usize,
    pub label: usize,
    pub probs: Vec<f64>,
}

/// Everything a learner produced over one episode. A numeric fault truncates
/// the trace and is recorded in `fault`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricTrace {
    pub records: Vec<StepRecord>,
    pub fault: Option<String>,
}

impl MetricTrace {
    pub fn push(&mut self, r: StepRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn correctness(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.correct).collect()
    }

    pub fn total_loss(&self) -> f64 {
        self.records.iter().map(|r| r.loss).sum()
    }

    pub fn cumulative_accuracy(&self) -> Vec<f64> {
        cumulative_accuracy(&self.correctness())
    }

    /// Final cumulative accuracy (0 for an empty trace).
    pub fn final_accuracy(&self) -> f64 {
        self.cumulative_accuracy().last().copied().unwrap_or(0.0)
    }

    /// Accuracy over the even-indexed (second) presentations of a
    /// repeated-pairs stream.
    pub fn second_presentation_accuracy(&self) -> f64 {
        let seconds: Vec<bool> = self.records.iter().skip(1).step_by(2).map(|r| r.correct).collect();
        if seconds.is_empty() {
            return 0.0;
        }
        seconds.iter().filter(|&&c| c).count() as f64 / seconds.len() as f64
    }

    /// CSV with columns `step,loss,correct,predicted,label,prob_0..prob_{B-1}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let classes = self.records.first().map_or(0, |r| r.probs.len());
        write!(w, "step,loss,correct,predicted,label")?;
        for c in 0..classes {
            write!(w, ",prob_{c}")?;
        }
        writeln!(w)?;
        for r in &self.records {
            write!(w, "{},{},{},{},{}", r.step, r.loss, u8::from(r.correct), r.predicted, r.label)?;
            for p in &r.probs {
                write!(w, ",{p}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Running mean of correctness: `curve[t] = (1/(t+1)) * sum_{s<=t} c_s`.
pub fn cumulative_accuracy(correct: &[bool]) -> Vec<f64> {
    let mut hits = 0usize;
    correct
        .iter()
        .enumerate()
        .map(|(t, &c)| {
            hits += usize::from(c);
            hits as f64 / (t + 1) as f64
        })
        .collect()
}

/// Pointwise mean and (population) standard deviation of equal-length curves.
pub fn mean_std(curves: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    let k = curves.len() as f64;
    let mut mean = vec![0.0; len];
    let mut std = vec![0.0; len];
    for t in 0..len {
        let m = curves.iter().map(|c| c[t]).sum::<f64>() / k;
        let v = curves.iter().map(|c| (c[t] - m).powi(2)).sum::<f64>() / k;
        mean[t] = m;
        std[t] = v.sqrt();
    }
    (mean, std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn worked_example() {
        let c = cumulative_accuracy(&[true, false, true, true]);
        let expect = [1.0, 0.5, 2.0 / 3.0, 0.75];
        for (a, b) in c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(cumulative_accuracy(&[false; 5]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn chance_level_guessing() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let c: Vec<bool> = (0..2000).map(|_| rng.gen_range(0..10) == rng.gen_range(0..10)).collect();
        let last = *cumulative_accuracy(&c).last().unwrap();
        assert!((last - 0.1).abs() < 0.02, "{last}");
    }

    #[test]
    fn csv_columns() {
        let mut t = MetricTrace::default();
        t.push(StepRecord { step: 0, loss: 0.5, correct: true, predicted: 1, label: 1, probs: vec![0.25, 0.75] });
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "step,loss,correct,predicted,label,prob_0,prob_1\n0,0.5,1,1,1,0.25,0.75\n"
        );
    }

    #[test]
    fn second_presentations() {
        let mk = |c: bool| StepRecord { step: 0, loss: 0.0, correct: c, predicted: 0, label: 0, probs: vec![] };
        let t = MetricTrace {
            records: vec![mk(false), mk(true), mk(false), mk(false), mk(true), mk(true)],
            fault: None,
        };
        assert!((t.second_presentation_accuracy() - 2.0 / 3.0).abs() < 1e-15);
    }
}
