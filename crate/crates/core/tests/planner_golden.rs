//! Golden plans for 500 sampled belief states of the preset layout.
//!
//! Regenerate with `UPDATE_GOLDEN=1 cargo test -p reservoir-sim --test planner_golden`.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use reservoir_sim::geometry::hex_six_layout;
use reservoir_sim::planner::{plan_buffer_refill, plan_target_fill};
use reservoir_sim::Occupancy;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/planner_golden.txt")
}

fn render() -> String {
    let layout = hex_six_layout::<f64>();
    let n = layout.len();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut masks: Vec<u64> = sample(&mut rng, 1 << n, 500).into_iter().map(|m| m as u64).collect();
    masks.sort_unstable();

    let mut out = String::from("# belief | fill moves src>dst | total um | refill order\n");
    for mask in masks {
        let belief = Occupancy::from_mask(n, mask);
        let plan = plan_target_fill(&belief, &layout).unwrap();
        let moves: Vec<String> = plan.moves.iter().map(|m| format!("{}>{}", m.src, m.dst)).collect();
        let mut after = belief.clone();
        for m in &plan.moves {
            if let reservoir_sim::MoveSource::Site(s) = m.src {
                after.set(layout.index_of(s).unwrap(), reservoir_sim::SiteState::Empty);
            }
            after.set(layout.index_of(m.dst).unwrap(), reservoir_sim::SiteState::Occupied);
        }
        let refill: Vec<String> = plan_buffer_refill(&after, &layout).unwrap().iter().map(|s| s.to_string()).collect();
        writeln!(out, "{belief} | {} | {:.6} | {}", moves.join(" "), plan.total_distance, refill.join(" ")).unwrap();
    }
    out
}

#[test]
fn plans_match_golden_file() {
    let actual = render();
    let path = golden_path();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).expect("golden file missing; run with UPDATE_GOLDEN=1");
    for (i, (a, e)) in actual.lines().zip(expected.lines()).enumerate() {
        assert_eq!(a, e, "golden mismatch at line {}", i + 1);
    }
    assert_eq!(actual.lines().count(), expected.lines().count());
}

#[test]
fn rendering_is_stable_within_a_run() {
    assert_eq!(render(), render());
}
