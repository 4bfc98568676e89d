//! TF-IDF over unigrams and bigrams with multinomial Naive Bayes, scored by
//! 5-fold cross-validation on synthetic comments.
//!
//!     cargo run --example baseline_mnb

use viso::baseline::{BaselineModel, DEFAULT_ALPHA};
use viso::label::Label;
use viso::metrics::{confusion, kfold_pairs};
use viso::pipeline::Preprocessor;
use viso::synth::{labeled_comments, SynthConfig};

fn main() -> anyhow::Result<()> {
    let pre = Preprocessor::bundled();
    let (docs, labels): (Vec<Vec<String>>, Vec<Label>) = labeled_comments(1500, "b", &SynthConfig::default())
        .into_iter()
        .map(|(c, l)| (pre.tokens(&c.text), l))
        .unzip();

    let mut f1s = Vec::new();
    for (fold, (train, test)) in kfold_pairs(docs.len(), 5, 0)?.into_iter().enumerate() {
        let x: Vec<&[String]> = train.iter().map(|&i| docs[i].as_slice()).collect();
        let y: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
        let model = BaselineModel::fit(&x, &y, DEFAULT_ALPHA)?;
        let mut preds = Vec::with_capacity(test.len());
        for &i in &test {
            preds.push(model.predict(&docs[i])?.0);
        }
        let golds: Vec<Label> = test.iter().map(|&i| labels[i]).collect();
        let r = confusion(&preds, &golds)?.report()?;
        println!(
            "fold {fold}: vocabulary {:>5}  accuracy {:.3}  P {:.3}  R {:.3}  F1 {:.3}",
            model.tfidf.vocab_size(),
            r.accuracy,
            r.precision_macro,
            r.recall_macro,
            r.f1
        );
        f1s.push(r.f1);
    }
    println!("mean macro-F1 {:.3}", f1s.iter().sum::<f64>() / f1s.len() as f64);

    let model = BaselineModel::fit(&docs, &labels, DEFAULT_ALPHA)?;
    for text in ["bài hát hay quá", "ngu vãi", "lũ ba que cút đi"] {
        let (label, probs) = model.predict(&pre.tokens(text))?;
        println!("{text:?} -> {label} {probs:.3?}");
    }
    Ok(())
}
