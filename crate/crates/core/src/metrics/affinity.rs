use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SculptError};

/// Docking energies (kcal/mol) of one pocket.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PocketEnergies {
    pub reference: Option<f64>,
    pub generated: Vec<f64>,
}

/// Energies per pocket, in file order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTable {
    pub pockets: IndexMap<String, PocketEnergies>,
}

#[derive(Debug, Deserialize)]
struct Row {
    pocket_id: String,
    role: String,
    energy: f64,
}

impl EnergyTable {
    /// Parses CSV with header `pocket_id,role,energy`, role `ref` or `gen`.
    pub fn parse_csv(text: &str, origin: &Path) -> Result<Self> {
        let file = origin.display().to_string();
        let parse = |line: usize, message: String| SculptError::Parse {
            file: file.clone(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| parse(1, e.to_string()))?;
        if header.iter().collect::<Vec<_>>() != ["pocket_id", "role", "energy"] {
            return Err(parse(1, "expected header \"pocket_id,role,energy\"".into()));
        }
        let mut table = EnergyTable::default();
        for (k, record) in reader.deserialize::<Row>().enumerate() {
            let line = k + 2;
            let row = record.map_err(|e| parse(line, e.to_string()))?;
            if !row.energy.is_finite() {
                return Err(parse(line, format!("energy {} is not finite", row.energy)));
            }
            let entry = table.pockets.entry(row.pocket_id.clone()).or_default();
            match row.role.as_str() {
                "ref" => {
                    if entry.reference.replace(row.energy).is_some() {
                        return Err(parse(line, format!("second reference energy for pocket {}", row.pocket_id)));
                    }
                }
                "gen" => entry.generated.push(row.energy),
                other => return Err(parse(line, format!("role {other:?} is neither \"ref\" nor \"gen\""))),
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SculptError::io(path, e))?;
        EnergyTable::parse_csv(&text, path)
    }
}

/// Energies above zero are treated as failed docking runs.
pub fn is_valid_energy(e: f64) -> bool {
    e.is_finite() && e <= 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinitySummary {
    /// Mean of all valid generated energies.
    pub evina: f64,
    /// Percentage of valid generated ligands strictly below their pocket's
    /// reference; `None` when no pocket has a valid reference.
    pub imp_percent: Option<f64>,
    /// Mean over pockets of `(mean_gen - ref) / ref`, in percent.
    pub mpbg_percent: Option<f64>,
    pub valid_generated: usize,
    pub invalid_generated: usize,
}

pub fn affinity_aggregate(table: &EnergyTable) -> Result<AffinitySummary> {
    let mut pooled = Vec::new();
    let mut invalid = 0;
    let (mut better, mut compared) = (0usize, 0usize);
    let mut gains = Vec::new();
    for p in table.pockets.values() {
        let valid: Vec<f64> = p.generated.iter().copied().filter(|&e| is_valid_energy(e)).collect();
        invalid += p.generated.len() - valid.len();
        if let Some(r) = p.reference.filter(|&r| is_valid_energy(r) && r != 0.0) {
            compared += valid.len();
            better += valid.iter().filter(|&&e| e < r).count();
            if !valid.is_empty() {
                let mean = valid.iter().sum::<f64>() / valid.len() as f64;
                gains.push((mean - r) / r);
            }
        }
        pooled.extend(valid);
    }
    if pooled.is_empty() {
        return Err(SculptError::validation("no valid generated energies"));
    }
    Ok(AffinitySummary {
        evina: pooled.iter().sum::<f64>() / pooled.len() as f64,
        imp_percent: (compared > 0).then(|| 100.0 * better as f64 / compared as f64),
        mpbg_percent: (!gains.is_empty()).then(|| 100.0 * gains.iter().sum::<f64>() / gains.len() as f64),
        valid_generated: pooled.len(),
        invalid_generated: invalid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(csv: &str) -> EnergyTable {
        EnergyTable::parse_csv(csv, Path::new("e.csv")).unwrap()
    }

    #[test]
    fn worked_example() {
        let t = table("pocket_id,role,energy\np1,ref,-6\np1,gen,-7\np1,gen,-5\np1,gen,-6\n");
        let s = affinity_aggregate(&t).unwrap();
        assert_eq!(s.evina, -6.0);
        assert!((s.imp_percent.unwrap() - 100.0 / 3.0).abs() < 1e-9);
        assert_eq!(s.mpbg_percent, Some(0.0));
    }

    #[test]
    fn mpbg_ten_percent() {
        let t = table("pocket_id,role,energy\na,ref,-6.0\na,gen,-6.6\n");
        assert!((affinity_aggregate(&t).unwrap().mpbg_percent.unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn positive_energies_are_excluded() {
        let t = table("pocket_id,role,energy\na,ref,-6\na,gen,2.5\na,gen,-8\n");
        let s = affinity_aggregate(&t).unwrap();
        assert_eq!((s.evina, s.valid_generated, s.invalid_generated), (-8.0, 1, 1));
        let t = table("pocket_id,role,energy\na,gen,1.0\n");
        assert!(affinity_aggregate(&t).is_err());
    }

    #[test]
    fn malformed_rows() {
        let p = Path::new("e.csv");
        assert!(EnergyTable::parse_csv("pocket,role,energy\n", p).is_err());
        let err = EnergyTable::parse_csv("pocket_id,role,energy\na,ref,-6\na,best,-7\n", p).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(EnergyTable::parse_csv("pocket_id,role,energy\na,gen,abc\n", p).is_err());
        assert!(EnergyTable::parse_csv("pocket_id,role,energy\na,ref,-6\na,ref,-7\n", p).is_err());
    }
}
