mod support;

#[test]
fn ml100k_counts() {
    let r = support::ml100k_ref();
    let ds = r.load().unwrap();
    let stats = ds.stats();
    assert_eq!(stats.users, 943);
    assert_eq!(stats.items, 1682);
    assert_eq!(stats.ratings, 100_000);
    // 100000 / (943 * 1682)
    assert!((stats.density - 0.063047).abs() < 1e-6, "{}", stats.density);
    assert!(!stats.metadata_incomplete);
    assert_eq!(ds.display_title(recstudy_core::ItemId(1)), "Toy Story (1995)");
    assert!(ds.users().iter().all(|u| u.len() >= 20));
}
