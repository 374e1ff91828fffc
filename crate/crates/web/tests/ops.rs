use web::{oracle, rank, rollout};

#[test]
fn rank_covers_the_library_best_first() {
    let r = rank("stir", "", "").unwrap();
    assert_eq!(r.len(), 33);
    assert!(r.windows(2).all(|w| w[0].score >= w[1].score));
    assert!(r[0].descriptor.contains("spatula"));
    let custom = rank("polish", "rag", "spoon").unwrap();
    assert!(custom
        .iter()
        .all(|t| t.descriptor.contains("rag") && t.descriptor.contains("spoon")));
}

#[test]
fn rollout_matches_oracle_scene() {
    let ex = rollout("wipe", 16, 1).unwrap();
    assert_eq!(ex.frames.len(), ex.progress.len());
    assert_eq!(ex.coverage.len(), ex.scene_size * ex.scene_size);
    assert_eq!(ex.frames[0].len(), ex.frame_size * ex.frame_size);
    let ranking = oracle("wipe", 1).unwrap();
    assert_eq!(ranking.len(), 33);
    assert!(ranking.windows(2).all(|w| w[0].mean_progress >= w[1].mean_progress));
}

#[test]
fn bad_inputs_are_errors() {
    assert!(rollout("wipe", 33, 0).is_err());
    assert!(rollout("knead", 0, 0).is_err());
    assert!(rank("knead", "", "").is_err());
    assert!(oracle("", 0).is_err());
}
