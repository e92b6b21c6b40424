//! Fixtures shared by the benchmarks.

use segmetrics::synthetic::{random_scenario, ScenarioParams};
use segmetrics::LabelMap;

/// A street-scene sized pair: 1024x512, 19 classes.
pub fn large_pair(seed: u64) -> (LabelMap, LabelMap) {
    random_scenario(seed, &large_params())
}

pub fn large_params() -> ScenarioParams {
    ScenarioParams {
        width: 1024,
        height: 512,
        num_classes: 19,
        max_regions: 40,
        ignore_rate: 0.01,
        noise_rate: 0.002,
    }
}

/// The 48x48, 4-class pairs used by the oracle cross-check.
pub fn small_pair(seed: u64) -> (LabelMap, LabelMap) {
    random_scenario(seed, &ScenarioParams::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_the_advertised_shape() {
        let (gt, pred) = large_pair(0);
        assert_eq!((gt.width(), gt.height(), gt.num_classes()), (1024, 512, 19));
        assert!(gt.same_shape(&pred));
        assert_eq!(small_pair(1).0.len(), 48 * 48);
    }
}
