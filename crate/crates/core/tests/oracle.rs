mod common;

use proptest::prelude::*;

use quest::descriptor::{lbp_encode_map, quest_encode_map, QuadAssignment, QuestConfig};
use quest::imageio::GrayImage;

fn image() -> impl Strategy<Value = Vec<Vec<u8>>> {
    (3usize..12, 3usize..12).prop_flat_map(|(w, h)| prop::collection::vec(prop::collection::vec(any::<u8>(), w), h))
}

fn rows(codes: &[u8], w: usize) -> Vec<Vec<u32>> {
    codes.chunks(w).map(|r| r.iter().map(|&c| c as u32).collect()).collect()
}

proptest! {
    #[test]
    fn quest_matches_naive(px in image(), rule in prop::sample::select(vec!["v3", "v4", "alt"])) {
        let img = GrayImage::new(px[0].len(), px.len(), common::flatten(&px)).unwrap();
        let qa: QuadAssignment = rule.parse().unwrap();
        let map = quest_encode_map(&img, &QuestConfig::new(qa)).unwrap();
        prop_assert_eq!(rows(map.codes(), map.width()), common::naive_quest(&px, rule));
    }

    #[test]
    fn lbp_matches_naive(px in image()) {
        let img = GrayImage::new(px[0].len(), px.len(), common::flatten(&px)).unwrap();
        let map = lbp_encode_map(&img).unwrap();
        prop_assert_eq!(rows(map.codes(), map.width()), common::naive_lbp(&px));
    }
}

#[test]
fn flat_image_has_a_single_code() {
    for v in [0u8, 1, 128, 255] {
        let img = GrayImage::filled(9, 7, v).unwrap();
        let map = quest_encode_map(&img, &QuestConfig::default()).unwrap();
        let want = if v == 0 { 63 } else { 15 };
        assert!(map.codes().iter().all(|&c| c == want), "value {v}");
    }
}
