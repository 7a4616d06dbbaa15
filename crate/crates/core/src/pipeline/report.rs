//! Plain-text renderings of evaluation results and training curves.

use std::fmt::Write;

use crate::error::{Error, Result};

use super::{EpochStats, EvalReport};

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"))
}

impl EvalReport {
    /// Human-readable summary. `class_names` may be shorter than the class
    /// count, in which case indices are used.
    pub fn to_text(&self, class_names: &[String]) -> String {
        let mut s = String::new();
        let name = |c: usize| class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
        writeln!(s, "clips\t{}", self.scores.len()).unwrap();
        writeln!(s, "accuracy\t{:.6}", self.accuracy).unwrap();
        writeln!(s, "mean_ap\t{}", fmt_opt(self.mean_average_precision)).unwrap();
        for (c, ap) in self.per_class_ap.iter().enumerate() {
            writeln!(s, "ap\t{}\t{}", name(c), fmt_opt(*ap)).unwrap();
        }
        if let Some(att) = &self.attention {
            let mass: Vec<String> = att.region_mass.iter().map(|m| format!("{m:.4}")).collect();
            let ent: Vec<String> = att.step_entropy.iter().map(|e| format!("{e:.4}")).collect();
            writeln!(s, "attention_blocks\t{}", att.blocks).unwrap();
            writeln!(s, "region_mass\t{}", mass.join(",")).unwrap();
            writeln!(s, "step_entropy\t{}", ent.join(",")).unwrap();
        }
        s
    }

    /// One row per clip: id, comma-separated labels, then a score per class.
    pub fn score_table(&self) -> String {
        let classes = self.per_class_ap.len();
        let mut s = String::from("clip\tlabels");
        for c in 0..classes {
            write!(s, "\tscore_{c}").unwrap();
        }
        s.push('\n');
        for ((id, labels), row) in self.clip_ids.iter().zip(&self.labels).zip(&self.scores) {
            let l: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
            write!(s, "{id}\t{}", l.join(",")).unwrap();
            for v in row {
                write!(s, "\t{v:.8}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// Two columns: epoch and mean training loss.
pub fn loss_curve_text(history: &[EpochStats]) -> String {
    let mut s = String::from("epoch\tloss\n");
    for e in history {
        writeln!(s, "{}\t{:.10}", e.epoch, e.mean_loss).unwrap();
    }
    s
}

/// Parses [`loss_curve_text`] output.
pub fn read_loss_curve(text: &str) -> Result<Vec<(usize, f64)>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, line)| {
            let bad = || Error::Data(format!("loss curve line {}: {line:?}", n + 2));
            let (a, b) = line.split_once('\t').ok_or_else(bad)?;
            Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
        })
        .collect()
}
