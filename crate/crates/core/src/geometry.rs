//! Trap layout: hexagonal lattice generation, site roles, the reservoir
//! position and the Euclidean metric used by the planner.
//!
//! Coordinates are plain µm values in the tweezer plane. Nothing here indexes
//! an integer lattice, so square grids or larger arrays can be described in a
//! config file just as well as the hexagonal preset.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Name under which [`hex_six_layout`] can be selected from a config file.
pub const HEX_SIX_PRESET: &str = "hex-six";

/// Lattice pitch of the microlens foci, µm.
pub const MLA_PITCH_UM: f64 = 7.9;
/// Lateral distance between the reservoir focus and the nearest buffer trap, µm.
pub const RESERVOIR_OFFSET_UM: f64 = 41.0;
/// Square half-width reachable by the transport tweezers, µm.
pub const SCAN_RANGE_UM: f64 = 250.0;

/// Relative slack allowed on the minimum-spacing check, floored at a few
/// ulps of the scalar type.
const SPACING_RTOL: f64 = 1e-9;

/// A point in the tweezer plane, µm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Position<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance_to(&self, other: &Self) -> T {
        distance(*self, *other)
    }
}

/// Euclidean distance between two positions.
#[inline]
pub fn distance<T: Real>(a: Position<T>, b: Position<T>) -> T {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Identifier of a trap site, unique within a layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub u32);

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Buffer,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapSite<T> {
    pub id: SiteId,
    pub pos: Position<T>,
    pub role: Role,
}

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("layout has no trap sites")]
    Empty,
    #[error("duplicate site id {0}")]
    DuplicateId(SiteId),
    #[error("site {0} has a non-finite coordinate")]
    NonFiniteSite(SiteId),
    #[error("reservoir position is not finite")]
    NonFiniteReservoir,
    #[error("base pitch must be positive and finite, got {0}")]
    BadPitch(f64),
    #[error("scan range must be positive and finite, got {0}")]
    BadScanRange(f64),
    #[error("sites {a} and {b} are {dist} µm apart, below the effective pitch {pitch} µm")]
    TooClose { a: SiteId, b: SiteId, dist: f64, pitch: f64 },
    #[error("{what} lies outside the ±{range} µm scan box around the layout centroid")]
    OutOfScanRange { what: String, range: f64 },
}

/// Generates a centred hexagonal lattice: the origin plus `6k` points on ring
/// `k` for `k = 1..=rings`, `1 + 3·rings·(rings + 1)` points in total.
///
/// Ring `k` walks the hexagon with corners at `k·pitch` and angles `0°, 60°, …`,
/// counter-clockwise from the positive x axis.
pub fn build_hex_grid<T: Real>(rings: u32, pitch: T) -> Vec<Position<T>> {
    assert!(pitch > T::zero(), "hex grid pitch must be positive");
    let n = 1 + 3 * rings as usize * (rings as usize + 1);
    let mut out = Vec::with_capacity(n);
    out.push(Position::new(T::zero(), T::zero()));
    let corners: Vec<Position<T>> = (0..6)
        .map(|i| {
            let angle = T::lit(60.0 * i as f64).to_radians();
            Position::new(angle.cos(), angle.sin())
        })
        .collect();
    for k in 1..=rings {
        let radius = pitch * T::lit(k as f64);
        for i in 0..6 {
            let (a, b) = (corners[i], corners[(i + 1) % 6]);
            for j in 0..k {
                let t = T::lit(j as f64) / T::lit(k as f64);
                out.push(Position::new(
                    radius * (a.x + (b.x - a.x) * t),
                    radius * (a.y + (b.y - a.y) * t),
                ));
            }
        }
    }
    out
}

/// Trap sites, reservoir location and transport reach.
///
/// Construction validates every invariant; a value of this type is always
/// internally consistent and is immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLayout<T> {
    sites: Vec<TrapSite<T>>,
    base_pitch: T,
    pitch_doubling: bool,
    effective_pitch: T,
    reservoir_pos: Position<T>,
    scan_range: T,
    metadata: BTreeMap<String, String>,
    index: BTreeMap<SiteId, usize>,
}

impl<T: Real> ArrayLayout<T> {
    pub fn new(
        sites: Vec<TrapSite<T>>,
        base_pitch: T,
        pitch_doubling: bool,
        reservoir_pos: Position<T>,
        scan_range: T,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, LayoutError> {
        if sites.is_empty() {
            return Err(LayoutError::Empty);
        }
        if !(base_pitch > T::zero() && base_pitch.is_finite()) {
            return Err(LayoutError::BadPitch(base_pitch.to_f64().unwrap_or(f64::NAN)));
        }
        if !(scan_range > T::zero() && scan_range.is_finite()) {
            return Err(LayoutError::BadScanRange(scan_range.to_f64().unwrap_or(f64::NAN)));
        }
        if !reservoir_pos.is_finite() {
            return Err(LayoutError::NonFiniteReservoir);
        }

        let mut index = BTreeMap::new();
        for (i, site) in sites.iter().enumerate() {
            if !site.pos.is_finite() {
                return Err(LayoutError::NonFiniteSite(site.id));
            }
            if index.insert(site.id, i).is_some() {
                return Err(LayoutError::DuplicateId(site.id));
            }
        }

        let effective_pitch = if pitch_doubling { base_pitch + base_pitch } else { base_pitch };
        let rtol = T::lit(SPACING_RTOL).max(T::epsilon() * T::lit(16.0));
        let min_allowed = effective_pitch * (T::one() - rtol);
        for (i, a) in sites.iter().enumerate() {
            for b in &sites[i + 1..] {
                let d = distance(a.pos, b.pos);
                if d < min_allowed {
                    return Err(LayoutError::TooClose {
                        a: a.id,
                        b: b.id,
                        dist: d.to_f64().unwrap_or(f64::NAN),
                        pitch: effective_pitch.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }

        let layout = Self {
            sites,
            base_pitch,
            pitch_doubling,
            effective_pitch,
            reservoir_pos,
            scan_range,
            metadata,
            index,
        };

        let c = layout.centroid();
        let inside = |p: Position<T>| (p.x - c.x).abs() <= scan_range && (p.y - c.y).abs() <= scan_range;
        let range = scan_range.to_f64().unwrap_or(f64::NAN);
        for s in &layout.sites {
            if !inside(s.pos) {
                return Err(LayoutError::OutOfScanRange { what: format!("site {}", s.id), range });
            }
        }
        if !inside(reservoir_pos) {
            return Err(LayoutError::OutOfScanRange { what: "reservoir".into(), range });
        }
        Ok(layout)
    }

    pub fn sites(&self) -> &[TrapSite<T>] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn base_pitch(&self) -> T {
        self.base_pitch
    }

    pub fn pitch_doubling(&self) -> bool {
        self.pitch_doubling
    }

    pub fn effective_pitch(&self) -> T {
        self.effective_pitch
    }

    pub fn reservoir_pos(&self) -> Position<T> {
        self.reservoir_pos
    }

    pub fn scan_range(&self) -> T {
        self.scan_range
    }

    /// Inert physical constants carried through to output headers.
    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    /// Position of `id` in [`sites`](Self::sites).
    pub fn index_of(&self, id: SiteId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn site(&self, id: SiteId) -> Option<&TrapSite<T>> {
        self.index_of(id).map(|i| &self.sites[i])
    }

    pub fn indices_with_role(&self, role: Role) -> impl Iterator<Item = usize> + '_ {
        self.sites.iter().enumerate().filter(move |(_, s)| s.role == role).map(|(i, _)| i)
    }

    pub fn count_role(&self, role: Role) -> usize {
        self.sites.iter().filter(|s| s.role == role).count()
    }

    /// Mean position of all trap sites (the reservoir is not included).
    pub fn centroid(&self) -> Position<T> {
        let n = T::lit(self.sites.len() as f64);
        let sx: T = self.sites.iter().map(|s| s.pos.x).sum();
        let sy: T = self.sites.iter().map(|s| s.pos.y).sum();
        Position::new(sx / n, sy / n)
    }

    /// Looks up a named preset layout.
    pub fn preset(name: &str) -> Option<Self> {
        (name == HEX_SIX_PRESET).then(hex_six_layout)
    }
}

/// The 13-site preset: a filled 7-site hexagon of buffer traps next to the
/// reservoir and a 6-site hexagonal ring of target traps four lattice columns
/// further along +x.
///
/// All sites sit on the doubled-pitch lattice (15.8 µm). Buffer ids are 0–6
/// (centre first, then the ring counter-clockwise from +x), target ids 7–12.
/// The reservoir is on the −x side, 41 µm from the outermost buffer trap.
pub fn hex_six_layout<T: Real>() -> ArrayLayout<T> {
    let base = T::lit(MLA_PITCH_UM);
    let pitch = base + base;
    let target_centre = Position::new(pitch * T::lit(4.0), T::zero());

    let mut sites = Vec::with_capacity(13);
    for (i, p) in build_hex_grid(1, pitch).into_iter().enumerate() {
        sites.push(TrapSite { id: SiteId(i as u32), pos: p, role: Role::Buffer });
    }
    for (i, p) in build_hex_grid(1, pitch).into_iter().skip(1).enumerate() {
        sites.push(TrapSite {
            id: SiteId(7 + i as u32),
            pos: Position::new(target_centre.x + p.x, target_centre.y + p.y),
            role: Role::Target,
        });
    }
    let reservoir = Position::new(-pitch - T::lit(RESERVOIR_OFFSET_UM), T::zero());

    let metadata = [
        ("array_trap_depth_uK", "600(200)"),
        ("array_waist_um", "2.0(2)"),
        ("reservoir_trap_depth_uK", "600(200)"),
        ("reservoir_waist_um", "14.6(1)"),
        ("transport_depth_reservoir_uK", "800(200)"),
        ("transport_depth_array_uK", "1600(400)"),
        ("transport_waist_um", "2.2(1)"),
        ("mla_pitch_um", "7.9(1)"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();

    ArrayLayout::new(sites, base, true, reservoir, T::lit(SCAN_RANGE_UM), metadata)
        .expect("preset layout is valid")
}
