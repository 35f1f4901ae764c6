use std::collections::HashMap;

use super::SorError;

/// Complete (feeder, hour) -> outage probability grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SorTable {
    feeders: Vec<String>,
    horizon: usize,
    /// `values[feeder][hour]`
    values: Vec<Vec<f64>>,
}

impl SorTable {
    /// Same probability everywhere.
    pub fn uniform(feeders: &[String], horizon: usize, probability: f64) -> Result<Self, SorError> {
        let entries = feeders
            .iter()
            .flat_map(|f| (0..horizon).map(move |h| (f.clone(), h, probability)));
        Self::from_entries(entries, feeders, horizon)
    }

    /// Builds a table that must cover exactly `feeders` x `0..horizon`.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (String, usize, f64)>,
        feeders: &[String],
        horizon: usize,
    ) -> Result<Self, SorError> {
        let index: HashMap<&str, usize> = feeders
            .iter()
            .enumerate()
            .map(|(i, f)| (f.as_str(), i))
            .collect();
        let mut values = vec![vec![f64::NAN; horizon]; feeders.len()];
        for (feeder, hour, value) in entries {
            let Some(&fi) = index.get(feeder.as_str()) else {
                return Err(SorError::UnknownFeeder(feeder));
            };
            if hour >= horizon {
                return Err(SorError::BeyondHorizon {
                    feeder,
                    hour,
                    horizon,
                });
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(SorError::OutOfRange {
                    feeder,
                    hour,
                    value,
                });
            }
            if !values[fi][hour].is_nan() {
                return Err(SorError::Duplicate { feeder, hour });
            }
            values[fi][hour] = value;
        }
        for (fi, row) in values.iter().enumerate() {
            if let Some(hour) = row.iter().position(|v| v.is_nan()) {
                return Err(SorError::Incomplete {
                    feeder: feeders[fi].clone(),
                    hour,
                });
            }
        }
        Ok(Self {
            feeders: feeders.to_vec(),
            horizon,
            values,
        })
    }

    /// Takes the feeder set (in first-seen order) and horizon from the entries.
    pub fn infer(entries: Vec<(String, usize, f64)>) -> Result<Self, SorError> {
        let mut feeders: Vec<String> = Vec::new();
        let mut horizon = 0;
        for (feeder, hour, _) in &entries {
            if !feeders.contains(feeder) {
                feeders.push(feeder.clone());
            }
            horizon = horizon.max(hour + 1);
        }
        Self::from_entries(entries, &feeders, horizon)
    }

    pub fn feeders(&self) -> &[String] {
        &self.feeders
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn get(&self, feeder: &str, hour: usize) -> Option<f64> {
        let fi = self.feeders.iter().position(|f| f == feeder)?;
        self.values[fi].get(hour).copied()
    }

    /// Hourly series for the feeder at position `index`.
    pub fn series(&self, index: usize) -> &[f64] {
        &self.values[index]
    }

    pub fn feeder_index(&self, feeder: &str) -> Option<usize> {
        self.feeders.iter().position(|f| f == feeder)
    }

    /// Rows in feeder-major, hour-minor order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, usize, f64)> + '_ {
        self.feeders.iter().zip(&self.values).flat_map(|(f, row)| {
            row.iter()
                .enumerate()
                .map(move |(h, v)| (f.as_str(), h, *v))
        })
    }

    /// Same table, re-indexed to the given feeder order.
    pub fn reordered(&self, feeders: &[String]) -> Result<Self, SorError> {
        let entries: Vec<_> = self
            .entries()
            .map(|(f, h, v)| (f.to_string(), h, v))
            .collect();
        Self::from_entries(entries, feeders, self.horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("F{i}")).collect()
    }

    #[test]
    fn all_zero_table() {
        let feeders = ids(10);
        let entries = feeders
            .iter()
            .flat_map(|f| (0..24).map(move |h| (f.clone(), h, 0.0)));
        let table = SorTable::from_entries(entries, &feeders, 24).unwrap();
        assert!(table.entries().all(|(_, _, v)| v == 0.0));
        assert_eq!(table.entries().count(), 240);
    }

    #[test]
    fn missing_cell_is_named() {
        let feeders = ids(10);
        let entries = feeders
            .iter()
            .flat_map(|f| (0..24).map(move |h| (f.clone(), h, 0.1)))
            .filter(|(f, h, _)| !(f == "F3" && *h == 17));
        assert_eq!(
            SorTable::from_entries(entries, &feeders, 24),
            Err(SorError::Incomplete {
                feeder: "F3".into(),
                hour: 17
            })
        );
    }

    #[test]
    fn out_of_range_and_duplicates_are_rejected() {
        let feeders = ids(1);
        let err = SorTable::from_entries(vec![("F1".into(), 0, 1.3)], &feeders, 1).unwrap_err();
        assert!(matches!(err, SorError::OutOfRange { value, .. } if value == 1.3));
        let err = SorTable::from_entries(
            vec![("F1".into(), 0, 0.1), ("F1".into(), 0, 0.2)],
            &feeders,
            1,
        )
        .unwrap_err();
        assert_eq!(
            err,
            SorError::Duplicate {
                feeder: "F1".into(),
                hour: 0
            }
        );
        let err = SorTable::from_entries(vec![("F7".into(), 0, 0.1)], &feeders, 1).unwrap_err();
        assert_eq!(err, SorError::UnknownFeeder("F7".into()));
    }
}
