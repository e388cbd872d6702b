#![no_main]

use jetsurro::models::Grid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = Grid::from_json(text) {
        assert_eq!(grid.points().len(), grid.len());
    }
});
