use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::vec::dist2;
use crate::error::{Result, SculptError};
use crate::io::{Atom3D, ProteinPocket};

/// Van der Waals radii by element symbol (case-insensitive), in Å.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiiTable {
    pub radii: IndexMap<String, f64>,
    /// Radius for elements missing from `radii`; `None` makes them an error.
    pub other: Option<f64>,
}

impl Default for RadiiTable {
    /// Bondi radii with 1.70 Å for anything else.
    fn default() -> Self {
        let radii = [
            ("C", 1.70),
            ("N", 1.55),
            ("O", 1.52),
            ("F", 1.47),
            ("P", 1.80),
            ("S", 1.80),
            ("Cl", 1.75),
            ("Br", 1.85),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        RadiiTable {
            radii,
            other: Some(1.70),
        }
    }
}

impl RadiiTable {
    pub fn radius(&self, element: &str) -> Result<f64> {
        self.radii
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(element))
            .map(|(_, &r)| r)
            .or(self.other)
            .ok_or_else(|| SculptError::validation(format!("no van der Waals radius for element {element:?}")))
    }
}

/// Default clash tolerance in Å.
pub const CLASH_TOLERANCE: f64 = 0.5;

/// Number of ligand–protein atom pairs closer than `r_i + r_j - tolerance`.
pub fn count_clashes(
    ligand: &[Atom3D],
    pocket: &ProteinPocket,
    radii: &RadiiTable,
    tolerance: f64,
) -> Result<usize> {
    let lig_r = ligand
        .iter()
        .map(|a| radii.radius(&a.element))
        .collect::<Result<Vec<_>>>()?;
    let pocket_r = pocket
        .atoms()
        .iter()
        .map(|a| radii.radius(&a.atom.element))
        .collect::<Result<Vec<_>>>()?;
    let mut count = 0;
    for (a, ra) in ligand.iter().zip(&lig_r) {
        for (p, rp) in pocket.atoms().iter().zip(&pocket_r) {
            let limit = ra + rp - tolerance;
            if limit > 0.0 && dist2(a.position, p.atom.position) < limit * limit {
                count += 1;
            }
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::PocketAtom;

    fn carbon(p: [f64; 3]) -> Atom3D {
        Atom3D {
            element: "C".into(),
            position: p,
        }
    }

    fn pocket_of(atoms: Vec<Atom3D>) -> ProteinPocket {
        ProteinPocket::new(
            atoms
                .into_iter()
                .map(|atom| PocketAtom {
                    atom,
                    residue_id: 1,
                    residue_name: "ALA".into(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn carbon_pair() {
        let radii = RadiiTable::default();
        let pocket = pocket_of(vec![carbon([0.0; 3])]);
        assert_eq!(count_clashes(&[carbon([1.0, 0.0, 0.0])], &pocket, &radii, 0.5).unwrap(), 1);
        assert_eq!(count_clashes(&[carbon([3.0, 0.0, 0.0])], &pocket, &radii, 0.5).unwrap(), 0);
    }

    #[test]
    fn unknown_element_without_default() {
        let radii = RadiiTable {
            other: None,
            ..RadiiTable::default()
        };
        assert!(radii.radius("Se").is_err());
        assert_eq!(radii.radius("cl").unwrap(), 1.75);
        assert_eq!(RadiiTable::default().radius("Se").unwrap(), 1.70);
    }
}
