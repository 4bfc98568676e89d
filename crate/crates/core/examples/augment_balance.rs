//! Balances a skewed labeled corpus with EDA (synonym replacement, random
//! insertion, swap and deletion) and shows a few generated examples.
//!
//!     cargo run --example augment_balance

use viso::augment::{balance_dataset, EdaConfig, LabeledExample};
use viso::label::{Label, LabelCounts};
use viso::pipeline::{bundled_synonyms, Preprocessor};
use viso::synth::{labeled_comments, SynthConfig};

fn main() -> anyhow::Result<()> {
    let pre = Preprocessor::bundled();
    let data: Vec<LabeledExample> = labeled_comments(400, "s", &SynthConfig::default())
        .into_iter()
        .map(|(c, label)| LabeledExample {
            tokens: pre.tokens(&c.text),
            id: c.id,
            label,
        })
        .filter(|e| !e.tokens.is_empty())
        .collect();

    let before = LabelCounts::of(data.iter().map(|e| e.label));
    let clean = before.get(Label::Clean);
    let targets = LabelCounts::new(clean, clean / 2, clean * 3 / 4);
    let cfg = EdaConfig {
        seed: 1,
        synonyms: bundled_synonyms(),
        stopwords: pre.phase2.stopwords.clone(),
        ..EdaConfig::default()
    };
    let balanced = balance_dataset(&data, targets, &cfg)?;
    let after = LabelCounts::of(balanced.iter().map(|e| e.label));
    println!("before {:?}\nafter  {:?}", before.0, after.0);

    let source = |aug: &LabeledExample| {
        let base = aug.id.split('#').next().unwrap_or_default();
        data.iter().find(|e| e.id == base).expect("augmented from an original")
    };
    let generated = &balanced[data.len()..];
    let changed: Vec<&LabeledExample> = generated.iter().filter(|a| a.tokens != source(a).tokens).collect();
    // synonym replacement and deletion can leave a short sentence as it was
    println!("{} of {} generated sentences differ from their source", changed.len(), generated.len());
    for aug in changed.iter().step_by(41).take(6) {
        println!("\n{} [{}]\n  from: {}\n  to:   {}", aug.id, aug.label, source(aug).tokens.join(" "), aug.tokens.join(" "));
    }
    Ok(())
}
