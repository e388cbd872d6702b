#![no_main]

use jetsurro::dataset::{self, Dataset};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = dataset::read_external_csv(data) {
        let _ = dataset::merge_external(&Dataset::new(), &records);
    }
});
