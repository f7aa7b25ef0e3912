use ppts::attack::{run_boundary_trial, CertainInference, lemma2_worst_case};

#[test]
fn undefended_worst_case_is_exposed() {
    let t = run_boundary_trial(7, false, true, 128).unwrap();
    assert!(t.all_old && t.bit);
    assert_eq!(t.violations, 0);
    assert_eq!(t.report.moves_observed, 1);
    assert_eq!(t.report.guesses.len(), 3);
    assert!(t.report.guesses.iter().all(|g| g.certain && g.correct == Some(true)));
    assert_eq!(lemma2_worst_case(2, 3, true), Some(CertainInference::AllEqualOld));
}

#[test]
fn defended_moves_leave_no_certainty() {
    let mut naive_fired = 0;
    let mut naive_wrong = 0;
    for seed in 0..200 {
        let t = run_boundary_trial(seed, true, false, 128).unwrap();
        assert_eq!(t.violations, 0);
        assert_eq!(t.report.defended_moves, 1);
        assert_eq!(t.report.certain_correct(), 0);
        assert!(t.report.guesses.iter().all(|g| !g.certain && g.confidence < 1.0));
        naive_fired += t.report.naive_fired();
        naive_wrong += t.report.naive_wrong();
    }
    // the same view arises with and without the worst-case coloring
    assert!(naive_fired > 0 && naive_wrong > 0, "{naive_fired} {naive_wrong}");
}
