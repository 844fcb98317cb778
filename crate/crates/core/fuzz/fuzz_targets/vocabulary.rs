#![no_main]

use emodyn::lexicons::Vocabulary;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(vocab) = Vocabulary::parse_tsv(text) {
        for (i, w) in vocab.words().iter().enumerate() {
            assert_eq!(vocab.index_of(w), Some(i));
        }
    }
});
