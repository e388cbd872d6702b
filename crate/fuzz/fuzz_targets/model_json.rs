#![no_main]

use jetsurro::models::TrainedModel;
use libfuzzer_sys::fuzz_target;
use ndarray::Array2;

// A model that loads must predict without panicking.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = TrainedModel::from_json(text) {
        let x = Array2::from_elem((2, model.feature_names().len()), 0.5);
        let _ = model.predict(x.view());
    }
});
