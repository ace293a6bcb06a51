#![no_main]

use libfuzzer_sys::fuzz_target;
use randcoef::io::parse_sample_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(ing) = parse_sample_csv(data, None) {
        assert_eq!(ing.sample.x.len(), ing.sample.len() * ing.sample.p);
        assert!(ing.sample.y.iter().chain(&ing.sample.x).all(|v| v.is_finite()));
    }
});
