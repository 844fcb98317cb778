#![no_main]

use emodyn::verse_model::{parse_predictions, write_predictions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(songs) = parse_predictions(text, "fuzz") {
        for s in &songs {
            assert_eq!(s.verse_ids.len(), s.scores.len());
        }
        let again = parse_predictions(&write_predictions(&songs), "again")
            .expect("written predictions reparse");
        assert_eq!(again.len(), songs.len());
    }
});
