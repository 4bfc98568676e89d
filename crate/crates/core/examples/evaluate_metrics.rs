//! The evaluation harness on its own: one-vs-rest accuracy, macro
//! precision/recall/F1 and k-fold splitting.
//!
//!     cargo run --example evaluate_metrics

use viso::label::Label;
use viso::metrics::{confusion, kfold_split, ConfusionMatrix};

fn print_matrix(cm: &ConfusionMatrix) {
    println!("{:>10} {:>6} {:>10} {:>6}", "gold\\pred", "CLEAN", "OFFENSIVE", "HATE");
    for (g, row) in cm.counts.iter().enumerate() {
        println!("{:>10} {:>6} {:>10} {:>6}", Label::ALL[g].as_str(), row[0], row[1], row[2]);
    }
}

fn main() -> anyhow::Result<()> {
    use Label::*;
    let golds = [Clean, Clean, Offensive, Offensive, Hate, Hate, Clean, Hate, Offensive, Clean];
    let preds = [Clean, Clean, Offensive, Hate, Hate, Hate, Offensive, Clean, Offensive, Clean];
    let cm = confusion(&preds, &golds)?;
    print_matrix(&cm);

    let r = cm.report()?;
    println!("\naccuracy (mean one-vs-rest) {:.4}", r.accuracy);
    println!("macro precision              {:.4}", r.precision_macro);
    println!("macro recall                 {:.4}", r.recall_macro);
    println!("macro F1                     {:.4}", r.f1);
    println!("plain accuracy               {:.4}", r.standard_accuracy);
    println!("mean per-class F1            {:.4}", r.per_class_f1_mean);
    println!("\n{}", serde_json::to_string_pretty(&r)?);

    for (i, fold) in kfold_split(golds.len(), 3, 42)?.iter().enumerate() {
        println!("fold {i}: {fold:?}");
    }
    Ok(())
}
