#![no_main]

use kac_relax::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(body) = std::str::from_utf8(data) else {
        return;
    };
    if body.contains("grid_path") {
        return;
    }
    let text = format!("subcommand = \"solve\"\n[datum]\n{body}");
    let Ok(config) = parse_config(&text) else {
        return;
    };
    let Some(spec) = config.datum else {
        return;
    };
    let Ok(datum) = spec.build(std::path::Path::new(".")) else {
        return;
    };
    let z = datum.eval_cf(0.0);
    assert!((z.re - 1.0).abs() < 1e-9 && z.im.abs() < 1e-9, "cf(0) = {z}");
    for xi in [0.1, 1.0, 7.5] {
        assert!(datum.eval_cf(xi).norm() <= 1.0 + 1e-9);
    }
});
