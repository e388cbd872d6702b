#![no_main]

use jetsurro::cli::Config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = Config::from_json(text) {
        let round = serde_json::to_string(&cfg).unwrap();
        assert_eq!(Config::from_json(&round).unwrap(), cfg);
    }
});
