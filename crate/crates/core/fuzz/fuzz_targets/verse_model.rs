#![no_main]

use emodyn::verse_model::VerseModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = VerseModel::parse_tsv(text, "fuzz") {
        for m in &model.models {
            let _ = m.predict_one(&vec![0.5; m.feature_dim]);
        }
    }
});
