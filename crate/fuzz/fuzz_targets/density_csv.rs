#![no_main]

use kac_relax::config::parse_density_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((v, f)) = parse_density_csv(text) {
        assert_eq!(v.len(), f.len());
    }
});
