#![no_main]

use kac_relax::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = parse_config(text) {
        assert!(config.times.windows(2).all(|w| w[0] < w[1]));
        assert!(config.times.iter().all(|t| t.is_finite() && *t >= 0.0));
    }
});
