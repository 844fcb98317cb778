#![no_main]

use emodyn::lexicons::{parse_lexicon_bytes, LEXICON_SCHEMAS};
use libfuzzer_sys::fuzz_target;

// First byte picks the schema.
fuzz_target!(|data: &[u8]| {
    let Some((&pick, rest)) = data.split_first() else {
        return;
    };
    let schema = LEXICON_SCHEMAS[pick as usize % LEXICON_SCHEMAS.len()];
    if let Ok(table) = parse_lexicon_bytes(rest, "fuzz", schema) {
        for line in String::from_utf8_lossy(rest).lines() {
            if let Some(word) = line.split('\t').next() {
                if let Some(v) = table.get(word) {
                    assert_eq!(v.len(), schema.width);
                }
            }
        }
    }
});
