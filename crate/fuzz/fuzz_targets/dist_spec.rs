#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsedag::estimators::EstimatorKind;
use sparsedag::graphs::WeightDist;
use sparsedag::simulate::NoiseKind;

// Spec strings such as `gaussian:0:2` or `gumbel:1`. Display output must parse back.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(w) = text.parse::<WeightDist>() {
        assert_eq!(w.to_string().parse::<WeightDist>().unwrap(), w);
    }
    if let Ok(n) = text.parse::<NoiseKind>() {
        assert_eq!(n.to_string().parse::<NoiseKind>().unwrap(), n);
    }
    let _ = text.parse::<EstimatorKind>();
});
