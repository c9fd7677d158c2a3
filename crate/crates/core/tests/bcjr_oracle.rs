mod common;

use common::bcjr_vs_enumeration;

#[test]
fn bcjr_matches_enumeration_on_short_frames() {
    for d in [1, 2] {
        for m_tx in [1, 2] {
            for m in [1, 2] {
                let err = bcjr_vs_enumeration(d, m_tx, m, 25, 40 + d as u64);
                assert!(err < 1e-9, "d={d} M_Tx={m_tx} M={m}: {err:e}");
            }
        }
    }
}

#[test]
fn iud_source_matches_enumeration() {
    // d = 0 is the unconstrained source
    let err = bcjr_vs_enumeration(0, 1, 2, 25, 7);
    assert!(err < 1e-9, "{err:e}");
}
