//! Time-decaying contamination trail left behind unhealthy pedestrians.
//!
//! Every accepted update from an unhealthy pedestrian drops a puff: a circle
//! the size of their bubble whose contamination percentage decays linearly
//! to zero over the airborne time. Puffs at zero are pruned. Together with
//! the live bubbles of unhealthy peers they form the set of red zones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{bubble_of, Circle, DecayLaw, EngineParams, PedestrianState};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("query time {now} ms precedes puff birth {born} ms")]
pub struct ClockSkew {
    pub now: u64,
    pub born: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationPuff<T> {
    pub area: Circle<T>,
    /// Milliseconds since the session epoch.
    pub born: u64,
    pub c_start: T,
    pub emitter: String,
}

impl<T: Scalar> ContaminationPuff<T> {
    pub fn age_s(&self, now: u64) -> Result<T, ClockSkew> {
        if now < self.born {
            return Err(ClockSkew { now, born: self.born });
        }
        Ok(T::lit((now - self.born) as f64 / 1000.0))
    }
}

/// Returns the puff left by `s` at `now`, or `None` for a healthy pedestrian.
pub fn emit_puff<T: Scalar>(s: &PedestrianState<T>, p: &EngineParams<T>, now: u64) -> Option<ContaminationPuff<T>> {
    if s.healthy {
        return None;
    }
    Some(ContaminationPuff { area: bubble_of(s, p), born: now, c_start: p.c_start, emitter: s.id.clone() })
}

/// Contamination percentage of `puff` at `now`, clamped to `[0, c_start]`.
pub fn contamination_level<T: Scalar>(
    puff: &ContaminationPuff<T>,
    p: &EngineParams<T>,
    now: u64,
) -> Result<T, ClockSkew> {
    let t = puff.age_s(now)?;
    let c0 = puff.c_start;
    let level = match p.decay {
        DecayLaw::LinearToZero => {
            if t >= p.t_airborne {
                return Ok(T::zero());
            }
            c0 * (T::one() - t / p.t_airborne)
        }
        DecayLaw::InverseStart => c0 - T::lit(100.0) / (c0 * p.t_airborne) * t,
    };
    Ok(level.max(T::zero()).min(c0))
}

/// Puffs in emission order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContaminationField<T> {
    pub puffs: Vec<ContaminationPuff<T>>,
}

impl<T: Scalar> ContaminationField<T> {
    pub fn new() -> Self {
        ContaminationField { puffs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.puffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.puffs.is_empty()
    }

    pub fn push(&mut self, puff: ContaminationPuff<T>) {
        self.puffs.push(puff);
    }

    /// In-place form of [`prune_expired`].
    pub fn prune(&mut self, p: &EngineParams<T>, now: u64) {
        // a puff from the future has not started decaying
        self.puffs.retain(|puff| contamination_level(puff, p, now).map_or(true, |c| c > T::zero()));
    }

    pub fn count_from(&self, emitter: &str) -> usize {
        self.puffs.iter().filter(|p| p.emitter == emitter).count()
    }
}

/// Field holding exactly the puffs still above zero at `now`, order preserved.
pub fn prune_expired<T: Scalar>(f: ContaminationField<T>, p: &EngineParams<T>, now: u64) -> ContaminationField<T> {
    let mut f = f;
    f.prune(p, now);
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZoneKind {
    LivePedestrian,
    Trail,
}

impl ZoneKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ZoneKind::LivePedestrian => "LivePedestrian",
            ZoneKind::Trail => "Trail",
        }
    }
}

/// A circle to stay out of.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedZone<T> {
    pub area: Circle<T>,
    /// Percent in (0, 100].
    pub level: T,
    pub kind: ZoneKind,
    /// Pedestrian whose bubble or trail this is.
    pub source: String,
}

/// Live bubbles of unhealthy peers followed by surviving puffs, in emission
/// order. Anything originating from `viewer` is left out.
pub fn active_red_zones<'a, T, I>(
    f: &ContaminationField<T>,
    peers: I,
    p: &EngineParams<T>,
    now: u64,
    viewer: Option<&str>,
) -> Vec<RedZone<T>>
where
    T: Scalar,
    I: IntoIterator<Item = &'a PedestrianState<T>>,
{
    let not_viewer = |id: &str| viewer != Some(id);
    let live = peers.into_iter().filter(|s| !s.healthy && not_viewer(&s.id)).map(|s| RedZone {
        area: bubble_of(s, p),
        level: p.c_start,
        kind: ZoneKind::LivePedestrian,
        source: s.id.clone(),
    });
    let trail = f.puffs.iter().filter(|puff| not_viewer(&puff.emitter)).filter_map(|puff| {
        let level = contamination_level(puff, p, now).ok()?;
        (level > T::zero()).then(|| RedZone {
            area: puff.area,
            level,
            kind: ZoneKind::Trail,
            source: puff.emitter.clone(),
        })
    });
    live.chain(trail).collect()
}
