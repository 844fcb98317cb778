#![no_main]

use emodyn::corpus::{parse_songs, write_songs};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(songs) = parse_songs(data, "fuzz") {
        let again = parse_songs(write_songs(&songs).as_bytes(), "again")
            .expect("written songs reparse");
        assert_eq!(again, songs);
    }
});
