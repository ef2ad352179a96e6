use std::io::Write;

use anyhow::Result;
use graphfolk::predict::{Learner, NUM_CLASSES};
use graphfolk::{EvalReport, Task};
use serde::Serialize;
use serde_json::{Map, Value};

fn learner_label(l: &Learner) -> String {
    match l {
        Learner::LogisticOva { l2 } => format!("logistic l2={l2:e}"),
        Learner::Ridge { l2 } => format!("ridge l2={l2:e}"),
        Learner::KernelRidge { l2, gamma } => format!("kernel-ridge l2={l2:e} gamma={gamma:.4e}"),
    }
}

fn opt(x: Option<f64>, prec: usize) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.prec$}"))
}

pub fn write_table(report: &EvalReport, w: &mut dyn Write) -> Result<()> {
    let task = match report.task {
        Task::Classification => "occupational class",
        Task::Regression => "income",
    };
    writeln!(w, "task: {task}")?;
    writeln!(w, "samples: {}", report.n_samples)?;
    writeln!(w)?;
    let metric = match report.task {
        Task::Classification => "accuracy",
        Task::Regression => "mae       rho",
    };
    writeln!(w, "{:>4} {:>7} {:>6}  {:<10} {:<40} {:>12}  {metric}", "fold", "train", "test", "view", "learner", "inner")?;
    for f in &report.folds {
        let value = match report.task {
            Task::Classification => opt(f.accuracy, 2),
            Task::Regression => format!("{:<9} {}", opt(f.mae, 1), opt(f.rho, 3)),
        };
        writeln!(
            w,
            "{:>4} {:>7} {:>6}  {:<10} {:<40} {:>12.4}  {value}",
            f.fold,
            f.n_train,
            f.n_test,
            f.chosen.view,
            learner_label(&f.chosen.learner),
            f.inner_score
        )?;
    }
    writeln!(w)?;
    let a = &report.aggregate;
    match report.task {
        Task::Classification => {
            writeln!(w, "accuracy (fold mean): {}", opt(a.accuracy, 2))?;
            writeln!(w, "accuracy (pooled):    {}", opt(a.pooled_accuracy, 2))?;
            writeln!(w, "majority baseline:    {}", opt(a.majority_baseline, 2))?;
            if let Some(m) = &a.misclassification {
                writeln!(w)?;
                writeln!(w, "misclassification (rows true class, columns predicted)")?;
                write!(w, "    ")?;
                for c in 1..=NUM_CLASSES {
                    write!(w, "{c:>6}")?;
                }
                writeln!(w)?;
                for (t, row) in m.iter().enumerate() {
                    write!(w, "{:>4}", t + 1)?;
                    for n in row {
                        write!(w, "{n:>6}")?;
                    }
                    writeln!(w)?;
                }
            }
        }
        Task::Regression => {
            writeln!(w, "mae (pooled):         {}", opt(a.mae, 2))?;
            writeln!(w, "mae (fold mean):      {}", opt(a.mae_fold_mean, 2))?;
            writeln!(w, "pearson rho:          {}", opt(a.rho, 4))?;
            writeln!(w, "mean-predictor mae:   {}", opt(a.mean_baseline_mae, 2))?;
        }
    }
    Ok(())
}

fn tagged<T: Serialize>(record: &str, value: &T) -> Result<Value> {
    let mut map = Map::new();
    map.insert("record".into(), Value::from(record));
    match serde_json::to_value(value)? {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("value".into(), other);
        }
    }
    Ok(Value::Object(map))
}

/// One `{"record":"fold",...}` line per outer fold, then one aggregate line.
pub fn write_jsonl(report: &EvalReport, w: &mut dyn Write) -> Result<()> {
    for f in &report.folds {
        serde_json::to_writer(&mut *w, &tagged("fold", f)?)?;
        writeln!(w)?;
    }
    let mut agg = tagged("aggregate", &report.aggregate)?;
    if let Value::Object(m) = &mut agg {
        m.insert("task".into(), serde_json::to_value(report.task)?);
        m.insert("n_samples".into(), Value::from(report.n_samples));
    }
    serde_json::to_writer(&mut *w, &agg)?;
    writeln!(w)?;
    Ok(())
}
