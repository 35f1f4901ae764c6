use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::sor::SorTable;

/// One feeder outage. `duration_hours` is already cut at the horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutageEvent {
    pub feeder_id: String,
    pub start_hour: usize,
    pub duration_hours: usize,
}

impl OutageEvent {
    pub fn end_hour(&self) -> usize {
        self.start_hour + self.duration_hours
    }

    pub fn covers(&self, hour: usize) -> bool {
        (self.start_hour..self.end_hour()).contains(&hour)
    }
}

/// Whole hours a fault keeps a feeder down.
pub fn repair_duration(repair_hours: f64) -> usize {
    (repair_hours.ceil() as usize).max(1)
}

/// Independent stream for one (seed, replication, feeder) triple, so results
/// do not depend on scheduling or on which other feeders exist.
pub fn feeder_rng(master_seed: u64, replication: usize, feeder_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update((replication as u64).to_le_bytes());
    hasher.update(feeder_id.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 8];
    seed.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(seed))
}

/// Samples outages on one feeder. One uniform is drawn for every hour, even
/// while the feeder is already down, so the start draws for a given stream
/// do not depend on the repair time.
pub fn sample_feeder_outages<R: Rng + ?Sized>(
    feeder_id: &str,
    sor: &[f64],
    duration: usize,
    rng: &mut R,
) -> Vec<OutageEvent> {
    let horizon = sor.len();
    let mut events = Vec::new();
    let mut down_until = 0;
    for (hour, p) in sor.iter().enumerate() {
        let u: f64 = rng.random();
        if hour < down_until {
            continue;
        }
        if u < *p {
            let end = (hour + duration).min(horizon);
            events.push(OutageEvent {
                feeder_id: feeder_id.to_string(),
                start_hour: hour,
                duration_hours: end - hour,
            });
            down_until = end;
        }
    }
    events
}

/// Samples every feeder of `sor` from a single stream, feeder by feeder.
pub fn sample_outages<R: Rng + ?Sized>(
    sor: &SorTable,
    repair_hours: f64,
    rng: &mut R,
) -> Vec<OutageEvent> {
    let duration = repair_duration(repair_hours);
    sor.feeders()
        .iter()
        .enumerate()
        .flat_map(|(i, f)| sample_feeder_outages(f, sor.series(i), duration, rng))
        .collect()
}

/// Re-times a set of outage starts for a longer repair, merging overlaps.
pub(crate) fn retime(events: &[OutageEvent], duration: usize, horizon: usize) -> Vec<OutageEvent> {
    let mut out: Vec<OutageEvent> = Vec::new();
    for e in events {
        let end = (e.start_hour + duration).min(horizon);
        match out.last_mut() {
            Some(last) if last.feeder_id == e.feeder_id && e.start_hour < last.end_hour() => {
                last.duration_hours = end.max(last.end_hour()) - last.start_hour;
            }
            _ => out.push(OutageEvent {
                feeder_id: e.feeder_id.clone(),
                start_hour: e.start_hour,
                duration_hours: end - e.start_hour,
            }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(p: f64, horizon: usize) -> SorTable {
        SorTable::uniform(&["F1".to_string()], horizon, p).unwrap()
    }

    #[test]
    fn certain_outage_with_long_repair_is_truncated() {
        let mut sor = vec![0.0; 24];
        sor[22] = 1.0;
        let mut rng = feeder_rng(1, 0, "F1");
        let events = sample_feeder_outages("F1", &sor, 4, &mut rng);
        assert_eq!(
            events,
            vec![OutageEvent {
                feeder_id: "F1".into(),
                start_hour: 22,
                duration_hours: 2
            }]
        );
    }

    #[test]
    fn zero_probability_never_fails() {
        let mut rng = feeder_rng(9, 3, "F1");
        assert!(sample_outages(&table(0.0, 24), 1.0, &mut rng).is_empty());
    }

    #[test]
    fn certain_failure_restarts_after_repair() {
        let mut rng = feeder_rng(9, 3, "F1");
        let events = sample_outages(&table(1.0, 7), 3.0, &mut rng);
        let starts: Vec<_> = events
            .iter()
            .map(|e| (e.start_hour, e.duration_hours))
            .collect();
        assert_eq!(starts, vec![(0, 3), (3, 3), (6, 1)]);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| feeder_rng(5, 1, "F2").random()).collect();
        let b: Vec<u64> = (0..4).map(|_| feeder_rng(5, 1, "F2").random()).collect();
        assert_eq!(a, b);
        let c: u64 = feeder_rng(5, 2, "F2").random();
        let d: u64 = feeder_rng(5, 1, "F3").random();
        assert_ne!(a[0], c);
        assert_ne!(a[0], d);
    }

    #[test]
    fn retime_merges_overlaps() {
        let ev = |s, d| OutageEvent {
            feeder_id: "F1".into(),
            start_hour: s,
            duration_hours: d,
        };
        let merged = retime(&[ev(2, 1), ev(4, 1), ev(9, 1)], 3, 10);
        assert_eq!(merged, vec![ev(2, 5), ev(9, 1)]);
        assert_eq!(
            retime(&[ev(2, 1), ev(4, 1)], 1, 10),
            vec![ev(2, 1), ev(4, 1)]
        );
    }
}
