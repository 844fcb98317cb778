use std::path::Path;

use emodyn::corpus::{load_headlines, tokenize, Emotion, SourceRecord};
use emodyn::evalstats::pearson;
use emodyn::lexicons::{LexiconSet, WordFeatureMatrix};
use emodyn::pipeline::{feature_matrix, train_verse_model};
use emodyn::verse_model::{train_ridge_multi, verse_features, RidgeOptions, VerseModel};

fn fixture() -> (Vec<SourceRecord>, WordFeatureMatrix) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let lex = LexiconSet::load_dir(&dir.join("lexicons")).unwrap();
    let source = load_headlines(&dir.join("headlines.tsv")).unwrap();
    let docs: Vec<Vec<String>> = source.iter().map(|r| tokenize(&r.text)).collect();
    let matrix = feature_matrix(&lex, &docs, Some(3)).unwrap();
    (source, matrix)
}

fn rows(source: &[SourceRecord], matrix: &WordFeatureMatrix) -> Vec<Vec<f64>> {
    source
        .iter()
        .map(|r| verse_features(&tokenize(&r.text), matrix))
        .collect()
}

fn trained() -> (Vec<SourceRecord>, WordFeatureMatrix, VerseModel) {
    let (source, matrix) = fixture();
    let model = train_verse_model(&source, &matrix, &RidgeOptions::default()).unwrap();
    (source, matrix, model)
}

#[test]
fn linear_fixture_is_fit_almost_exactly() {
    let (source, matrix, model) = trained();
    let x = rows(&source, &matrix);
    assert_eq!(x[0].len(), 2 * 267);
    let preds = model.predict_all(&x, false).unwrap();
    for e in Emotion::ALL {
        let p: Vec<f64> = preds.iter().map(|r| r[e.index()]).collect();
        let g: Vec<f64> = source.iter().map(|r| r.scores.get(e)).collect();
        let r = pearson(&p, &g).unwrap();
        assert!(r > 0.999, "{e}: r = {r}");
    }
}

#[test]
fn refit_is_not_far_below_cross_validation() {
    let (source, matrix, model) = trained();
    let x = rows(&source, &matrix);
    for m in &model.models {
        let p = m.predict(&x, false).unwrap();
        let g: Vec<f64> = source.iter().map(|r| r.scores.get(m.emotion)).collect();
        let refit = pearson(&p, &g).unwrap();
        let cv = m.cv_r.expect("defined CV score");
        assert!(
            refit >= cv - 0.05,
            "{}: refit {refit} vs cv {cv}",
            m.emotion
        );
    }
}

#[test]
fn training_is_bitwise_deterministic() {
    let (_, _, a) = trained();
    let (_, _, b) = trained();
    assert_eq!(a.to_tsv(), b.to_tsv());
}

#[test]
fn predictions_are_affine_in_features() {
    let (source, matrix, model) = trained();
    let x = rows(&source, &matrix);
    let m = &model.models[0];
    let zero = vec![0.0; x[0].len()];
    assert_eq!(m.predict_one(&zero).unwrap(), m.intercept);
    let sum: Vec<f64> = x[0].iter().zip(&x[1]).map(|(a, b)| a + b).collect();
    let lhs = m.predict_one(&sum).unwrap() - m.predict_one(&x[1]).unwrap();
    let rhs = m.predict_one(&x[0]).unwrap() - m.predict_one(&zero).unwrap();
    assert!((lhs - rhs).abs() < 1e-9);
}

fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
    idx
}

#[test]
fn label_scaling_keeps_prediction_order() {
    let (source, matrix) = fixture();
    let x = rows(&source, &matrix);
    let labels: Vec<Vec<f64>> = source
        .iter()
        .map(|r| vec![r.scores.get(Emotion::Fear) / 100.0])
        .collect();
    let scaled: Vec<Vec<f64>> = labels.iter().map(|l| vec![l[0] * 7.0]).collect();
    let opts = RidgeOptions::default();
    let a = train_ridge_multi(&x, &labels, &[Emotion::Fear], 100.0, &opts).unwrap();
    let b = train_ridge_multi(&x, &scaled, &[Emotion::Fear], 100.0 / 7.0, &opts).unwrap();
    assert_eq!(a[0].lambda, b[0].lambda);
    let pa = a[0].predict(&x, false).unwrap();
    let pb = b[0].predict(&x, false).unwrap();
    assert_eq!(argsort(&pa), argsort(&pb));
}

#[test]
fn emotions_train_independently() {
    let (mut source, matrix) = fixture();
    let before = train_verse_model(&source, &matrix, &RidgeOptions::default()).unwrap();
    for (i, r) in source.iter_mut().enumerate() {
        let joy = r.scores.get(Emotion::Joy);
        let mut s = r.scores.to_array();
        s[Emotion::Joy.index()] = (joy + 17.0 * (i % 3) as f64).min(100.0);
        r.scores = emodyn::corpus::EmotionScores::from_array(s);
    }
    let after = train_verse_model(&source, &matrix, &RidgeOptions::default()).unwrap();
    for e in Emotion::ALL {
        if e != Emotion::Joy {
            assert_eq!(before.model(e), after.model(e), "{e} changed");
        }
    }
    assert_ne!(before.model(Emotion::Joy), after.model(Emotion::Joy));
}
