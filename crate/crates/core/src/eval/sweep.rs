use rayon::prelude::*;
use serde::Serialize;

use super::select::{select_indices, zero_out, RelevanceOrder, SelectionStrategy, StrategyKind};
use crate::error::{Error, Result};
use crate::lrp::{explain, LrpConfig};
use crate::nn::{Mode, Model};
use crate::seed;
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub strategies: Vec<StrategyKind>,
    pub fractions: Vec<f64>,
    pub relevance_order: RelevanceOrder,
    pub lrp: LrpConfig,
    /// Root of the per-example random selections. Random sets are drawn
    /// afresh for every fraction.
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            strategies: StrategyKind::ALL.to_vec(),
            fractions: vec![0.0, 0.01, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0],
            relevance_order: RelevanceOrder::Signed,
            lrp: LrpConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub strategy: StrategyKind,
    pub fraction: f64,
    pub accuracy: f64,
    pub correct: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationCurve {
    pub task: String,
    pub clean_accuracy: f64,
    pub chance: f64,
    pub points: Vec<CurvePoint>,
}

impl PerturbationCurve {
    pub fn point(&self, strategy: StrategyKind, fraction: f64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.strategy == strategy && p.fraction == fraction)
    }

    /// Mean accuracy of `strategy` over the listed fractions.
    pub fn mean_accuracy(&self, strategy: StrategyKind, fractions: &[f64]) -> Option<f64> {
        let accs = fractions
            .iter()
            .map(|&f| self.point(strategy, f).map(|p| p.accuracy))
            .collect::<Option<Vec<_>>>()?;
        Some(accs.iter().sum::<f64>() / accs.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("task,strategy,fraction,accuracy,n,chance\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.task, p.strategy, p.fraction, p.accuracy, p.n, self.chance
            ));
        }
        s
    }
}

/// One manipulated example.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    pub example: usize,
    pub strategy: StrategyKind,
    pub fraction: f64,
    pub selected: usize,
    pub eligible: usize,
    pub predicted: usize,
    pub label: usize,
}

impl AuditRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("audit records serialize")
    }
}

/// Zeroes growing fractions of every input under each strategy and records
/// the accuracy against the true labels. Relevance is computed once per
/// example, on the clean input, for the clean prediction.
pub fn perturbation_sweep<F: Real>(
    task: &str,
    model: &Model<F>,
    examples: &[(Tensor<F>, usize)],
    cfg: &SweepConfig,
) -> Result<(PerturbationCurve, Vec<AuditRecord>)> {
    if examples.is_empty() {
        return Err(Error::Data("perturbation sweep over an empty fold".into()));
    }
    if let Some(f) = cfg.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::Config(format!("fraction {f} outside [0, 1]")));
    }
    cfg.lrp.validate()?;

    let per_example: Vec<(bool, Vec<AuditRecord>)> = examples
        .par_iter()
        .enumerate()
        .map(|(idx, (x, label))| {
            let (logits, trace) = model.forward_traced(x, Mode::Eval)?;
            let clean = logits.argmax();
            let signal = x.to_f64_vec();
            let eligible = signal.iter().filter(|v| **v != 0.0).count();
            let relevance = if cfg.strategies.contains(&StrategyKind::Relevance) {
                Some(explain(model, &trace, clean, &cfg.lrp)?.relevance.to_f64_vec())
            } else {
                None
            };
            let mut audit = Vec::with_capacity(cfg.strategies.len() * cfg.fractions.len());
            for &kind in &cfg.strategies {
                for (fi, &fraction) in cfg.fractions.iter().enumerate() {
                    let (strategy, rel) = match kind {
                        StrategyKind::Random => (
                            SelectionStrategy::Random {
                                seed: seed::derive(cfg.seed, &format!("perturb/{idx}/{fi}")),
                            },
                            None,
                        ),
                        StrategyKind::Amplitude => (SelectionStrategy::Amplitude, None),
                        StrategyKind::Relevance => (
                            SelectionStrategy::Relevance { order: cfg.relevance_order },
                            relevance.as_deref(),
                        ),
                    };
                    let chosen = select_indices(strategy, &signal, rel, fraction)?;
                    let predicted = if chosen.is_empty() {
                        clean
                    } else {
                        let manipulated = Tensor::from_f64(x.shape().to_vec(), &zero_out(&signal, &chosen)?)?;
                        model.forward(&manipulated, Mode::Eval)?.argmax()
                    };
                    audit.push(AuditRecord {
                        example: idx,
                        strategy: kind,
                        fraction,
                        selected: chosen.len(),
                        eligible,
                        predicted,
                        label: *label,
                    });
                }
            }
            Ok((clean == *label, audit))
        })
        .collect::<Result<_>>()?;

    let n = examples.len();
    let clean_correct = per_example.iter().filter(|(c, _)| *c).count();
    let mut points = Vec::new();
    let mut audit = Vec::with_capacity(n * cfg.strategies.len() * cfg.fractions.len());
    for (si, &strategy) in cfg.strategies.iter().enumerate() {
        for (fi, &fraction) in cfg.fractions.iter().enumerate() {
            let slot = si * cfg.fractions.len() + fi;
            let correct = per_example.iter().filter(|(_, a)| a[slot].predicted == a[slot].label).count();
            points.push(CurvePoint {
                strategy,
                fraction,
                accuracy: correct as f64 / n as f64,
                correct,
                n,
            });
        }
    }
    for (_, a) in per_example {
        audit.extend(a);
    }
    Ok((
        PerturbationCurve {
            task: task.to_string(),
            clean_accuracy: clean_correct as f64 / n as f64,
            chance: 1.0 / model.spec().classes() as f64,
            points,
        },
        audit,
    ))
}
