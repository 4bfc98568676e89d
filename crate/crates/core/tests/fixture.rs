use viso::pipeline::{CnnClassifier, Preprocessor};
use viso::synth::{train_fixture, FixtureRecipe};
use viso::textcnn::model_version;

#[test]
fn retraining_reproduces_the_shipped_fixture() {
    let (table, outcome) = train_fixture(&FixtureRecipe::default(), &Preprocessor::bundled()).unwrap();
    let shipped = CnnClassifier::fixture();
    assert_eq!(model_version(&outcome.params), model_version(shipped.params()));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("embeddings.txt");
    table.save(&path).unwrap();
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/embeddings.txt");
    assert_eq!(std::fs::read(path).unwrap(), std::fs::read(fixture).unwrap());
}
