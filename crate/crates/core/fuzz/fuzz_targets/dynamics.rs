#![no_main]

use emodyn::plot::{parse_dynamics_csv, plot_csv, plot_svg};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(traces) = parse_dynamics_csv(text, "fuzz") {
        for t in &traces {
            t.validate().expect("parsed traces are valid");
        }
        let _ = plot_csv(&traces);
        let _ = plot_svg(&traces);
    }
});
