#![no_main]

use jetsurro::dataset::Dataset;
use libfuzzer_sys::fuzz_target;

// Anything that parses must re-serialize to bytes that parse identically.
fuzz_target!(|data: &[u8]| {
    let Ok(ds) = Dataset::read_csv(data) else {
        return;
    };
    let mut first = Vec::new();
    ds.write_csv(&mut first).unwrap();
    let again = Dataset::read_csv(first.as_slice()).unwrap();
    let mut second = Vec::new();
    again.write_csv(&mut second).unwrap();
    assert_eq!(first, second);
});
