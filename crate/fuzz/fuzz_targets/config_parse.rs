#![no_main]

use libfuzzer_sys::fuzz_target;
use randcoef_cli::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::load(Some(text), &[]) {
            // rendered output must parse back
            RunConfig::load(Some(&cfg.render()), &[]).expect("rendered config reparses");
        }
    }
});
