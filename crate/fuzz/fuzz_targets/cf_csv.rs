#![no_main]

use kac_relax::wild::CfSolution;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // whatever parses must survive a write/read cycle unchanged
    if let Ok(sol) = CfSolution::from_csv(text) {
        let again = CfSolution::from_csv(&sol.to_csv()).expect("re-parse");
        assert_eq!(again.to_csv(), sol.to_csv());
    }
});
