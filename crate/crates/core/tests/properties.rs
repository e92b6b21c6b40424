//! Property tests across the public API.

use proptest::prelude::*;
use segmetrics::baseline::pixel_stats;
use segmetrics::harness::{evaluate_pair, EvalConfig};
use segmetrics::mask::overlap_graphs;
use segmetrics::synthetic::{oracle_record, random_overlap_graph, random_scenario, ScenarioParams};
use segmetrics::{rom, rum, Connectivity, LabelMap, Labeling};

fn label_map(w: usize, h: usize, k: u16) -> impl Strategy<Value = LabelMap> {
    prop::collection::vec(prop_oneof![8 => 0..k, 1 => Just(255u16)], w * h)
        .prop_map(move |data| LabelMap::new(w, h, k, 255, data).unwrap())
}

fn map_pair() -> impl Strategy<Value = (LabelMap, LabelMap)> {
    (2usize..12, 2usize..12, 2u16..5).prop_flat_map(|(w, h, k)| (label_map(w, h, k), label_map(w, h, k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn measures_stay_in_unit_interval(seed in any::<u64>()) {
        let g = random_overlap_graph(seed, 8);
        let (o, u) = (rom(&g), rum(&g));
        prop_assert!((0.0..=1.0).contains(&o.rom));
        prop_assert!((0.0..=1.0).contains(&u.rum));
        prop_assert_eq!(o.rom == 0.0, o.m_o == 0);
        prop_assert_eq!(u.rum.to_bits(), rom(&g.transpose()).rom.to_bits());
    }

    #[test]
    fn region_areas_partition_the_class((gt, _) in map_pair(), four in any::<bool>()) {
        let c = if four { Connectivity::Four } else { Connectivity::Eight };
        let lab = Labeling::new(&gt, c);
        for k in 0..gt.num_classes() {
            let total: u64 = lab.areas(k).iter().sum();
            let pixels = gt.data().iter().filter(|&&v| v == k).count() as u64;
            prop_assert_eq!(total, pixels);
        }
    }

    #[test]
    fn four_connectivity_never_has_fewer_regions((gt, _) in map_pair()) {
        let four = Labeling::new(&gt, Connectivity::Four);
        let eight = Labeling::new(&gt, Connectivity::Eight);
        for k in 0..gt.num_classes() {
            prop_assert!(four.region_count(k) >= eight.region_count(k));
        }
    }

    #[test]
    fn overlap_graph_intersections_match_pixel_stats((gt, pred) in map_pair()) {
        let c = Connectivity::Eight;
        let graphs = overlap_graphs(&Labeling::new(&gt, c), &Labeling::new(&pred, c), gt.num_classes()).unwrap();
        let stats = pixel_stats(&gt, &pred).unwrap();
        for (g, s) in graphs.iter().zip(&stats.per_class) {
            let inter: u64 = g.edges().iter().map(|e| e.intersection).sum();
            prop_assert_eq!(inter, s.intersection);
        }
    }

    #[test]
    fn evaluation_matches_oracle_on_arbitrary_maps((gt, pred) in map_pair()) {
        let cfg = EvalConfig::new(gt.num_classes());
        let fast = evaluate_pair(&gt, &pred, None, &cfg).unwrap();
        let slow = oracle_record(&gt, &pred, None, &cfg).unwrap();
        prop_assert_eq!(fast.valid_pixels, slow.valid_pixels);
        prop_assert_eq!(fast.classes.len(), slow.classes.len());
        for (a, b) in fast.classes.iter().zip(&slow.classes) {
            let (x, y) = (a.scalars(), b.scalars());
            prop_assert_eq!(x.keys().collect::<Vec<_>>(), y.keys().collect::<Vec<_>>());
            for (k, v) in &x {
                prop_assert!((v - y[k]).abs() <= 1e-12, "class {} {}: {} vs {}", a.class_id, k, v, y[k]);
            }
        }
    }

    #[test]
    fn swapping_maps_swaps_over_and_under(seed in 0u64..500) {
        let p = ScenarioParams { ignore_rate: 0.0, ..ScenarioParams::default() };
        let (a, b) = random_scenario(seed, &p);
        let cfg = EvalConfig::new(p.num_classes);
        let ab = evaluate_pair(&a, &b, None, &cfg).unwrap();
        let ba = evaluate_pair(&b, &a, None, &cfg).unwrap();
        prop_assert_eq!(ab.classes.len(), ba.classes.len());
        for (x, y) in ab.classes.iter().zip(&ba.classes) {
            let (Some(x), Some(y)) = (&x.regions, &y.regions) else {
                prop_assert_eq!(x.class_id, 0);
                continue;
            };
            prop_assert_eq!(x.over.unwrap().rom.to_bits(), y.under.unwrap().rum.to_bits());
            prop_assert_eq!(x.under.unwrap().rum.to_bits(), y.over.unwrap().rom.to_bits());
        }
    }
}
