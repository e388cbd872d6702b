#![no_main]

use jetsurro::dataset::ScalerParams;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(s) = ScalerParams::from_json(text) {
        let back = ScalerParams::from_json(&s.to_json()).unwrap();
        assert_eq!(back.to_json(), s.to_json());
        for col in 0..s.names.len() {
            let _ = s.invert_value(col, s.apply_value(col, 1.0));
        }
    }
});
