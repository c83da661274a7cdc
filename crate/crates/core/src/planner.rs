//! Rearrangement planning against the controller's belief.
//!
//! [`Planner::plan_target_fill`] is the shortest-move heuristic: repeatedly take
//! the closest remaining (vacancy, source) pair until the target is full or
//! the buffer section has no atoms left. [`optimal_assignment`] is the exact
//! minimum-cost matching used to measure how far the heuristic is from
//! optimal.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{distance, ArrayLayout, Position, Role, SiteId};
use crate::scalar::Real;

/// Instances up to this size on both sides are solved by enumeration.
pub const EXHAUSTIVE_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteState {
    Empty,
    Occupied,
}

/// Occupancy of every site of a layout, stored in layout order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Occupancy {
    states: Vec<SiteState>,
}

impl Occupancy {
    pub fn empty(n_sites: usize) -> Self {
        Self { states: vec![SiteState::Empty; n_sites] }
    }

    pub fn empty_for<T: Real>(layout: &ArrayLayout<T>) -> Self {
        Self::empty(layout.len())
    }

    /// Bit `i` of `mask` is site `i` in layout order.
    pub fn from_mask(n_sites: usize, mask: u64) -> Self {
        assert!(n_sites <= 64);
        let states = (0..n_sites)
            .map(|i| if mask >> i & 1 == 1 { SiteState::Occupied } else { SiteState::Empty })
            .collect();
        Self { states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, index: usize) -> SiteState {
        self.states[index]
    }

    pub fn is_occupied(&self, index: usize) -> bool {
        self.states[index] == SiteState::Occupied
    }

    pub fn set(&mut self, index: usize, state: SiteState) {
        self.states[index] = state;
    }

    pub fn count_occupied(&self) -> usize {
        self.states.iter().filter(|s| **s == SiteState::Occupied).count()
    }

    /// Occupied sites with the given role.
    pub fn count_role<T: Real>(&self, layout: &ArrayLayout<T>, role: Role) -> usize {
        layout.indices_with_role(role).filter(|&i| self.is_occupied(i)).count()
    }

    pub fn covers<T: Real>(&self, layout: &ArrayLayout<T>) -> bool {
        self.states.len() == layout.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = SiteState> + '_ {
        self.states.iter().copied()
    }
}

/// `0`/`1` per site in layout order.
impl fmt::Display for Occupancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.states {
            f.write_str(if *s == SiteState::Occupied { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveSource {
    Reservoir,
    Site(SiteId),
}

impl fmt::Display for MoveSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MoveSource::Reservoir => f.write_str("R"),
            MoveSource::Site(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Move<T> {
    pub src: MoveSource,
    pub dst: SiteId,
    /// µm
    pub dist: T,
    /// s
    pub duration: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovePlan<T> {
    pub moves: Vec<Move<T>>,
    pub total_distance: T,
}

impl<T: Real> MovePlan<T> {
    pub fn new(moves: Vec<Move<T>>) -> Self {
        let total_distance = moves.iter().map(|m| m.dist).sum();
        Self { moves, total_distance }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }
}

impl<T: Real> Default for MovePlan<T> {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

/// Per-move duration: two intensity ramps plus the translation.
///
/// With `speed` set the translation time is `dist / speed` instead of the
/// fixed `t_move`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveTiming<T> {
    pub t_ramp: T,
    pub t_move: T,
    /// µm/s
    pub speed: Option<T>,
}

impl<T: Real> MoveTiming<T> {
    pub fn duration(&self, dist: T) -> T {
        let translate = match self.speed {
            Some(v) => dist / v,
            None => self.t_move,
        };
        self.t_ramp + self.t_ramp + translate
    }
}

impl<T: Real> Default for MoveTiming<T> {
    fn default() -> Self {
        Self { t_ramp: T::lit(130e-6), t_move: T::lit(310e-6), speed: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerStrategy {
    /// Closest (vacancy, source) pair over all remaining pairs, repeatedly.
    #[default]
    GlobalGreedy,
    /// Vacancies in id order, each taking its nearest remaining source.
    PerVacancy,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("occupancy has {got} sites but the layout has {expected}")]
    SizeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Planner<T> {
    pub strategy: PlannerStrategy,
    pub timing: MoveTiming<T>,
}

impl<T: Real> Default for Planner<T> {
    fn default() -> Self {
        Self { strategy: PlannerStrategy::default(), timing: MoveTiming::default() }
    }
}

impl<T: Real> Planner<T> {
    pub fn new(strategy: PlannerStrategy, timing: MoveTiming<T>) -> Self {
        Self { strategy, timing }
    }

    /// Moves atoms from believed-occupied buffers into believed-empty targets.
    ///
    /// The plan has `min(#vacancies, #occupied buffers)` moves, no site
    /// appears twice as source or destination, and ties on distance go to the
    /// smaller destination id, then the smaller source id.
    pub fn plan_target_fill(&self, belief: &Occupancy, layout: &ArrayLayout<T>) -> Result<MovePlan<T>, PlanError> {
        check_cover(belief, layout)?;
        let sites = layout.sites();
        let mut vacancies: Vec<usize> = layout.indices_with_role(Role::Target).filter(|&i| !belief.is_occupied(i)).collect();
        let mut sources: Vec<usize> = layout.indices_with_role(Role::Buffer).filter(|&i| belief.is_occupied(i)).collect();
        vacancies.sort_by_key(|&i| sites[i].id);
        sources.sort_by_key(|&i| sites[i].id);

        let mut moves = Vec::with_capacity(vacancies.len().min(sources.len()));
        match self.strategy {
            PlannerStrategy::GlobalGreedy => {
                while !vacancies.is_empty() && !sources.is_empty() {
                    let mut best: Option<(T, usize, usize)> = None;
                    // Both lists are id-sorted, so a strict `<` keeps the
                    // lexicographically smallest (dst, src) among equal distances.
                    for (vi, &v) in vacancies.iter().enumerate() {
                        for (si, &s) in sources.iter().enumerate() {
                            let d = distance(sites[s].pos, sites[v].pos);
                            if best.is_none_or(|(bd, _, _)| d < bd) {
                                best = Some((d, vi, si));
                            }
                        }
                    }
                    let (d, vi, si) = best.expect("nonempty candidate set");
                    let (v, s) = (vacancies.remove(vi), sources.remove(si));
                    moves.push(self.make_move(MoveSource::Site(sites[s].id), sites[v].id, d));
                }
            }
            PlannerStrategy::PerVacancy => {
                for v in vacancies {
                    let Some((si, d)) = sources
                        .iter()
                        .enumerate()
                        .map(|(si, &s)| (si, distance(sites[s].pos, sites[v].pos)))
                        .fold(None, |acc: Option<(usize, T)>, (si, d)| match acc {
                            Some((_, bd)) if bd <= d => acc,
                            _ => Some((si, d)),
                        })
                    else {
                        break;
                    };
                    let s = sources.remove(si);
                    moves.push(self.make_move(MoveSource::Site(sites[s].id), sites[v].id, d));
                }
            }
        }
        Ok(MovePlan::new(moves))
    }

    /// Buffers believed empty, nearest to the reservoir first (ties by id).
    pub fn plan_buffer_refill(&self, belief: &Occupancy, layout: &ArrayLayout<T>) -> Result<Vec<SiteId>, PlanError> {
        check_cover(belief, layout)?;
        let r = layout.reservoir_pos();
        let mut empty: Vec<(T, SiteId)> = layout
            .indices_with_role(Role::Buffer)
            .filter(|&i| !belief.is_occupied(i))
            .map(|i| (distance(r, layout.sites()[i].pos), layout.sites()[i].id))
            .collect();
        empty.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
        Ok(empty.into_iter().map(|(_, id)| id).collect())
    }

    /// Reservoir-to-buffer moves for a refill list, for logging.
    pub fn refill_moves(&self, refill: &[SiteId], layout: &ArrayLayout<T>) -> Vec<Move<T>> {
        refill
            .iter()
            .filter_map(|&id| layout.site(id))
            .map(|s| self.make_move(MoveSource::Reservoir, s.id, distance(layout.reservoir_pos(), s.pos)))
            .collect()
    }

    fn make_move(&self, src: MoveSource, dst: SiteId, dist: T) -> Move<T> {
        Move { src, dst, dist, duration: self.timing.duration(dist) }
    }
}

/// [`Planner::plan_target_fill`] with the default planner.
pub fn plan_target_fill<T: Real>(belief: &Occupancy, layout: &ArrayLayout<T>) -> Result<MovePlan<T>, PlanError> {
    Planner::default().plan_target_fill(belief, layout)
}

/// [`Planner::plan_buffer_refill`] with the default planner.
pub fn plan_buffer_refill<T: Real>(belief: &Occupancy, layout: &ArrayLayout<T>) -> Result<Vec<SiteId>, PlanError> {
    Planner::default().plan_buffer_refill(belief, layout)
}

fn check_cover<T: Real>(belief: &Occupancy, layout: &ArrayLayout<T>) -> Result<(), PlanError> {
    if belief.covers(layout) {
        Ok(())
    } else {
        Err(PlanError::SizeMismatch { expected: layout.len(), got: belief.len() })
    }
}

/// A matching between vacancies and sources.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    /// `(vacancy index, source index)`, sorted by vacancy index.
    pub pairs: Vec<(usize, usize)>,
    pub total: T,
}

/// Minimum total-distance matching of size `min(|vacancies|, |sources|)`.
///
/// Enumerates all injections when both sides have at most
/// [`EXHAUSTIVE_LIMIT`] points, otherwise runs the Hungarian algorithm.
pub fn optimal_assignment<T: Real>(vacancies: &[Position<T>], sources: &[Position<T>]) -> Assignment<T> {
    if vacancies.len() <= EXHAUSTIVE_LIMIT && sources.len() <= EXHAUSTIVE_LIMIT {
        exhaustive_assignment(vacancies, sources)
    } else {
        hungarian_assignment(vacancies, sources)
    }
}

fn cost_matrix<T: Real>(rows: &[Position<T>], cols: &[Position<T>]) -> Vec<Vec<T>> {
    rows.iter().map(|r| cols.iter().map(|c| distance(*r, *c)).collect()).collect()
}

/// Orients the problem so rows are the smaller side and maps the result back.
fn solve_oriented<T: Real>(
    vacancies: &[Position<T>],
    sources: &[Position<T>],
    solve: impl Fn(&[Vec<T>]) -> Vec<usize>,
) -> Assignment<T> {
    let transpose = vacancies.len() > sources.len();
    let (rows, cols) = if transpose { (sources, vacancies) } else { (vacancies, sources) };
    if rows.is_empty() {
        return Assignment { pairs: Vec::new(), total: T::zero() };
    }
    let cost = cost_matrix(rows, cols);
    let row_to_col = solve(&cost);
    let mut pairs: Vec<(usize, usize)> = row_to_col
        .iter()
        .enumerate()
        .map(|(r, &c)| if transpose { (c, r) } else { (r, c) })
        .collect();
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(v, s)| distance(vacancies[v], sources[s])).sum();
    Assignment { pairs, total }
}

/// Depth-first enumeration of every injection from the smaller side.
pub fn exhaustive_assignment<T: Real>(vacancies: &[Position<T>], sources: &[Position<T>]) -> Assignment<T> {
    solve_oriented(vacancies, sources, |cost| {
        let n = cost.len();
        let mut used = vec![false; cost[0].len()];
        let mut current = Vec::with_capacity(n);
        let mut best = (T::infinity(), Vec::new());
        search(cost, 0, T::zero(), &mut used, &mut current, &mut best);
        best.1
    })
}

fn search<T: Real>(
    cost: &[Vec<T>],
    row: usize,
    acc: T,
    used: &mut [bool],
    current: &mut Vec<usize>,
    best: &mut (T, Vec<usize>),
) {
    if row == cost.len() {
        if acc < best.0 {
            *best = (acc, current.clone());
        }
        return;
    }
    for c in 0..used.len() {
        if used[c] {
            continue;
        }
        let next = acc + cost[row][c];
        if next >= best.0 {
            continue;
        }
        used[c] = true;
        current.push(c);
        search(cost, row + 1, next, used, current, best);
        current.pop();
        used[c] = false;
    }
}

/// Hungarian algorithm with row/column potentials, O(n²m) for n ≤ m.
pub fn hungarian_assignment<T: Real>(vacancies: &[Position<T>], sources: &[Position<T>]) -> Assignment<T> {
    solve_oriented(vacancies, sources, |cost| {
        let n = cost.len();
        let m = cost[0].len();
        // 1-based with column 0 as the virtual start.
        let mut u = vec![T::zero(); n + 1];
        let mut v = vec![T::zero(); m + 1];
        let mut owner = vec![0usize; m + 1];
        let mut way = vec![0usize; m + 1];
        for i in 1..=n {
            owner[0] = i;
            let mut j0 = 0;
            let mut minv = vec![T::infinity(); m + 1];
            let mut used = vec![false; m + 1];
            loop {
                used[j0] = true;
                let i0 = owner[j0];
                let mut delta = T::infinity();
                let mut j1 = 0;
                for j in 1..=m {
                    if used[j] {
                        continue;
                    }
                    let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if reduced < minv[j] {
                        minv[j] = reduced;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
                for j in 0..=m {
                    if used[j] {
                        u[owner[j]] = u[owner[j]] + delta;
                        v[j] = v[j] - delta;
                    } else {
                        minv[j] = minv[j] - delta;
                    }
                }
                j0 = j1;
                if owner[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = way[j0];
                owner[j0] = owner[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }
        let mut row_to_col = vec![0usize; n];
        for j in 1..=m {
            if owner[j] != 0 {
                row_to_col[owner[j] - 1] = j - 1;
            }
        }
        row_to_col
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::hex_six_layout;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn p(x: f64, y: f64) -> Position<f64> {
        Position::new(x, y)
    }

    fn layout() -> ArrayLayout<f64> {
        hex_six_layout()
    }

    /// Buffers are indices 0..7, targets 7..13 in the preset.
    fn belief(buffers: &[usize], targets: &[usize]) -> Occupancy {
        let mut o = Occupancy::empty(13);
        for &b in buffers {
            o.set(b, SiteState::Occupied);
        }
        for &t in targets {
            o.set(7 + t, SiteState::Occupied);
        }
        o
    }

    #[test]
    fn full_target_gives_empty_plan() {
        let plan = plan_target_fill(&belief(&[0, 1, 2], &[0, 1, 2, 3, 4, 5]), &layout()).unwrap();
        assert!(plan.is_empty());
        assert_eq!(plan.total_distance, 0.0);
    }

    #[test]
    fn four_buffers_six_vacancies_gives_four_moves() {
        let l = layout();
        let plan = plan_target_fill(&belief(&[0, 2, 4, 6], &[]), &l).unwrap();
        assert_eq!(plan.len(), 4);
        let srcs: HashSet<_> = plan.moves.iter().map(|m| m.src).collect();
        let dsts: HashSet<_> = plan.moves.iter().map(|m| m.dst).collect();
        assert_eq!(srcs.len(), 4);
        assert_eq!(dsts.len(), 4);
        for m in &plan.moves {
            assert_eq!(l.site(m.dst).unwrap().role, Role::Target);
            assert!((m.duration - 570e-6).abs() < 1e-15);
        }
        let sum: f64 = plan.moves.iter().map(|m| m.dist).sum();
        assert!((plan.total_distance - sum).abs() < 1e-12);
    }

    #[test]
    fn single_vacancy_takes_nearest_buffer() {
        let l = layout();
        for t in 0..6 {
            let targets: Vec<usize> = (0..6).filter(|&x| x != t).collect();
            let plan = plan_target_fill(&belief(&[0, 1, 2, 3, 4, 5, 6], &targets), &l).unwrap();
            assert_eq!(plan.len(), 1);
            let dst = l.sites()[7 + t].pos;
            let brute = (0..7).map(|b| distance(l.sites()[b].pos, dst)).fold(f64::INFINITY, f64::min);
            assert_eq!(plan.moves[0].dist, brute);
        }
    }

    #[test]
    fn tie_breaks_by_destination_then_source() {
        // The only vacancy is site 10 at (3p, 0); buffers 2 at (p/2, h) and
        // 6 at (p/2, -h) are mirror images, so the smaller source id wins.
        let l = layout();
        let o = belief(&[2, 6], &[0, 1, 2, 4, 5]);
        let plan = plan_target_fill(&o, &l).unwrap();
        assert_eq!(plan.moves[0].src, MoveSource::Site(SiteId(2)));
        assert_eq!(plan.moves[0].dst, SiteId(10));
    }

    #[test]
    fn mismatched_belief_is_rejected() {
        assert_eq!(
            plan_target_fill(&Occupancy::empty(5), &layout()),
            Err(PlanError::SizeMismatch { expected: 13, got: 5 })
        );
        assert!(plan_buffer_refill(&Occupancy::empty(14), &layout()).is_err());
    }

    #[test]
    fn refill_list_examples() {
        let l = layout();
        assert!(plan_buffer_refill(&belief(&[0, 1, 2, 3, 4, 5, 6], &[]), &l).unwrap().is_empty());

        let all = plan_buffer_refill(&Occupancy::empty(13), &l).unwrap();
        assert_eq!(all.len(), 7);
        assert_eq!(all[0], SiteId(4));
        assert!((distance(l.reservoir_pos(), l.site(all[0]).unwrap().pos) - 41.0).abs() < 1e-12);
        let d: Vec<f64> = all.iter().map(|id| distance(l.reservoir_pos(), l.site(*id).unwrap().pos)).collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1]));

        let some = plan_buffer_refill(&belief(&[0, 2, 4, 5], &[]), &l).unwrap();
        let ids: HashSet<_> = some.into_iter().collect();
        assert_eq!(ids, [SiteId(1), SiteId(3), SiteId(6)].into_iter().collect());
    }

    #[test]
    fn refill_moves_come_from_reservoir() {
        let l = layout();
        let planner = Planner::<f64>::default();
        let moves = planner.refill_moves(&[SiteId(4)], &l);
        assert_eq!(moves[0].src, MoveSource::Reservoir);
        assert!((moves[0].dist - 41.0).abs() < 1e-12);
    }

    #[test]
    fn distance_proportional_duration() {
        let t = MoveTiming { t_ramp: 130e-6, t_move: 310e-6, speed: Some(1.0e5) };
        assert!((t.duration(31.0f64) - (260e-6 + 310e-6)).abs() < 1e-15);
    }

    #[test]
    fn per_vacancy_strategy_fills_in_id_order() {
        let l = layout();
        let planner = Planner::new(PlannerStrategy::PerVacancy, MoveTiming::default());
        let plan = planner.plan_target_fill(&belief(&[0, 1], &[]), &l).unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan.moves[0].dst, SiteId(7));
        assert_eq!(plan.moves[1].dst, SiteId(8));
    }

    #[test]
    fn assignment_examples() {
        let one = optimal_assignment(&[p(0.0, 0.0)], &[p(3.0, 4.0)]);
        assert_eq!(one.pairs, vec![(0, 0)]);
        assert_eq!(one.total, 5.0);

        let two = optimal_assignment(&[p(0.0, 0.0), p(10.0, 0.0)], &[p(1.0, 0.0), p(11.0, 0.0)]);
        assert_eq!(two.pairs, vec![(0, 0), (1, 1)]);
        assert!((two.total - 2.0).abs() < 1e-12);

        let none = optimal_assignment::<f64>(&[], &[p(1.0, 1.0)]);
        assert!(none.pairs.is_empty());
        assert_eq!(none.total, 0.0);
    }

    #[test]
    fn rectangular_assignment_uses_smaller_side() {
        let a = optimal_assignment(&[p(0.0, 0.0), p(50.0, 0.0), p(100.0, 0.0)], &[p(49.0, 0.0)]);
        assert_eq!(a.pairs, vec![(1, 0)]);
        let h = hungarian_assignment(&[p(0.0, 0.0), p(50.0, 0.0), p(100.0, 0.0)], &[p(49.0, 0.0)]);
        assert_eq!(h.pairs, a.pairs);
    }

    #[test]
    fn assignment_in_f32() {
        let a = optimal_assignment(&[Position::new(0.0f32, 0.0), Position::new(10.0, 0.0)], &[
            Position::new(1.0f32, 0.0),
            Position::new(11.0, 0.0),
        ]);
        assert!((a.total - 2.0).abs() < 1e-5);
    }

    fn positions(max: usize) -> impl Strategy<Value = Vec<Position<f64>>> {
        prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 0..=max)
            .prop_map(|v| v.into_iter().map(|(x, y)| p(x, y)).collect())
    }

    proptest! {
        #[test]
        fn hungarian_matches_enumeration(v in positions(7), s in positions(7)) {
            let e = exhaustive_assignment(&v, &s);
            let h = hungarian_assignment(&v, &s);
            prop_assert_eq!(e.pairs.len(), v.len().min(s.len()));
            prop_assert_eq!(h.pairs.len(), e.pairs.len());
            prop_assert!((e.total - h.total).abs() <= 1e-9 * (1.0 + e.total));
        }

        #[test]
        fn large_instances_are_valid_matchings(v in positions(14), s in positions(14)) {
            let a = optimal_assignment(&v, &s);
            prop_assert_eq!(a.pairs.len(), v.len().min(s.len()));
            let vs: HashSet<_> = a.pairs.iter().map(|x| x.0).collect();
            let ss: HashSet<_> = a.pairs.iter().map(|x| x.1).collect();
            prop_assert_eq!(vs.len(), a.pairs.len());
            prop_assert_eq!(ss.len(), a.pairs.len());
        }

        #[test]
        fn greedy_plan_invariants(mask in 0u64..(1 << 13), per_vacancy in any::<bool>()) {
            let l = layout();
            let o = Occupancy::from_mask(13, mask);
            let strategy = if per_vacancy { PlannerStrategy::PerVacancy } else { PlannerStrategy::GlobalGreedy };
            let plan = Planner::new(strategy, MoveTiming::default()).plan_target_fill(&o, &l).unwrap();
            let vac = l.indices_with_role(Role::Target).filter(|&i| !o.is_occupied(i)).count();
            let src = l.indices_with_role(Role::Buffer).filter(|&i| o.is_occupied(i)).count();
            prop_assert_eq!(plan.len(), vac.min(src));
            let mut srcs = HashSet::new();
            let mut dsts = HashSet::new();
            for m in &plan.moves {
                let MoveSource::Site(s) = m.src else { panic!("fill move from reservoir") };
                prop_assert!(o.is_occupied(l.index_of(s).unwrap()));
                prop_assert!(!o.is_occupied(l.index_of(m.dst).unwrap()));
                prop_assert!(srcs.insert(s));
                prop_assert!(dsts.insert(m.dst));
            }
            prop_assert_eq!(plan.clone(), Planner::new(strategy, MoveTiming::default()).plan_target_fill(&o, &l).unwrap());
        }
    }
}
