use std::path::Path;

use indexmap::IndexMap;
use proptest::prelude::*;
use sculpt::io::{Atom3D, Vec3};
use sculpt::metrics::{
    affinity_aggregate, bond_length_profile, distance_histogram, jsd, jsd_bl, Bond, BondOrder, BondedMolecule,
    pair_distances, DistanceMode, EnergyTable, Histogram, PocketEnergies,
};

const ELEMENTS: [&str; 4] = ["C", "C", "N", "O"];

fn histogram(masses: Vec<f64>) -> Histogram {
    let total: f64 = masses.iter().sum();
    Histogram {
        edges: (0..=masses.len()).map(|i| i as f64).collect(),
        masses: masses.into_iter().map(|m| m / total).collect(),
    }
}

fn brute_jsd(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = (a + b) / 2.0;
        if a > 0.0 {
            s += 0.5 * a * (a / m).ln() / std::f64::consts::LN_2;
        }
        if b > 0.0 {
            s += 0.5 * b * (b / m).ln() / std::f64::consts::LN_2;
        }
    }
    s
}

fn masses() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], 1..30)
        .prop_filter("non-empty mass", |m| m.iter().sum::<f64>() > 1e-6)
}

fn molecule() -> impl Strategy<Value = Vec<Atom3D>> {
    prop::collection::vec((0usize..4, [-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0]), 1..12).prop_map(|atoms| {
        atoms
            .into_iter()
            .map(|(e, p)| Atom3D {
                element: ELEMENTS[e].into(),
                position: p,
            })
            .collect()
    })
}

fn brute_distance_histogram(molecules: &[Vec<Atom3D>], carbon_only: bool, hi: f64, bins: usize) -> Option<Vec<f64>> {
    let mut counts = vec![0usize; bins];
    let mut total = 0;
    for m in molecules {
        for i in 0..m.len() {
            for j in 0..i {
                if carbon_only && (m[i].element != "C" || m[j].element != "C") {
                    continue;
                }
                let d = (0..3).map(|k| (m[i].position[k] - m[j].position[k]).powi(2)).sum::<f64>().sqrt();
                if d > hi {
                    continue;
                }
                let b = ((d / hi * bins as f64) as usize).min(bins - 1);
                counts[b] += 1;
                total += 1;
            }
        }
    }
    (total > 0).then(|| counts.into_iter().map(|c| c as f64 / total as f64).collect())
}

fn rotation(q: [f64; 4]) -> [[f64; 3]; 3] {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn apply(r: &[[f64; 3]; 3], t: Vec3, p: Vec3) -> Vec3 {
    let mut out = t;
    for (i, o) in out.iter_mut().enumerate() {
        *o += (0..3).map(|k| r[i][k] * p[k]).sum::<f64>();
    }
    out
}

fn energy_table() -> impl Strategy<Value = EnergyTable> {
    let pocket = (prop::option::weighted(0.9, -12.0f64..-1.0), prop::collection::vec(-14.0f64..2.0, 0..8));
    prop::collection::vec(pocket, 1..6).prop_map(|pockets| EnergyTable {
        pockets: pockets
            .into_iter()
            .enumerate()
            .map(|(i, (reference, generated))| (format!("p{i}"), PocketEnergies { reference, generated }))
            .collect::<IndexMap<_, _>>(),
    })
}

struct Spreadsheet {
    evina: Option<f64>,
    imp: Option<f64>,
    mpbg: Option<f64>,
}

/// Row-by-row recomputation, written independently of the library.
fn spreadsheet(table: &EnergyTable) -> Spreadsheet {
    let (mut sum, mut count) = (0.0, 0usize);
    let (mut wins, mut compared) = (0usize, 0usize);
    let (mut gain_sum, mut gain_count) = (0.0, 0usize);
    for p in table.pockets.values() {
        let (mut psum, mut pcount) = (0.0, 0usize);
        for &e in &p.generated {
            if e > 0.0 {
                continue;
            }
            sum += e;
            count += 1;
            psum += e;
            pcount += 1;
            if let Some(r) = p.reference {
                compared += 1;
                if e < r {
                    wins += 1;
                }
            }
        }
        if let (Some(r), true) = (p.reference, pcount > 0) {
            gain_sum += (psum / pcount as f64 - r) / r;
            gain_count += 1;
        }
    }
    Spreadsheet {
        evina: (count > 0).then(|| sum / count as f64),
        imp: (compared > 0).then(|| 100.0 * wins as f64 / compared as f64),
        mpbg: (gain_count > 0).then(|| 100.0 * gain_sum / gain_count as f64),
    }
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= 1e-9 * (1.0 + b.abs()),
        (None, None) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn jsd_matches_direct_summation(p in masses(), q_raw in masses()) {
        let n = p.len().min(q_raw.len());
        prop_assume!(p[..n].iter().sum::<f64>() > 1e-6 && q_raw[..n].iter().sum::<f64>() > 1e-6);
        let (p, q) = (histogram(p[..n].to_vec()), histogram(q_raw[..n].to_vec()));
        let d = jsd(&p, &q).unwrap();
        prop_assert!((d - brute_jsd(&p.masses, &q.masses)).abs() < 1e-9);
        prop_assert_eq!(d, jsd(&q, &p).unwrap());
        prop_assert_eq!(jsd(&p, &p).unwrap(), 0.0);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn distance_histograms_match_brute_force_binning(mols in prop::collection::vec(molecule(), 1..10)) {
        for (mode, carbon, hi, bins) in [(DistanceMode::Cc2, true, 2.0, 100), (DistanceMode::All12, false, 12.0, 120)] {
            match (distance_histogram(&mols, mode), brute_distance_histogram(&mols, carbon, hi, bins)) {
                (Ok(h), Some(expected)) => {
                    prop_assert_eq!(h.masses.len(), bins);
                    for (a, b) in h.masses.iter().zip(&expected) {
                        prop_assert!((a - b).abs() < 1e-9);
                    }
                }
                (Err(e), None) => prop_assert!(e.to_string().contains("no pairs in range")),
                (got, expected) => prop_assert!(false, "library {:?} vs brute force {:?}", got.is_ok(), expected.is_some()),
            }
        }
    }

    #[test]
    fn distance_histograms_are_rigid_motion_invariant(
        mols in prop::collection::vec(molecule(), 1..6),
        q in [-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0],
        t in [-20.0f64..20.0, -20.0f64..20.0, -20.0f64..20.0],
    ) {
        prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-3);
        let r = rotation(q);
        let moved: Vec<Vec<Atom3D>> = mols
            .iter()
            .map(|m| m.iter().map(|a| Atom3D { element: a.element.clone(), position: apply(&r, t, a.position) }).collect())
            .collect();
        let before = pair_distances(&mols, DistanceMode::All12);
        let after = pair_distances(&moved, DistanceMode::All12);
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        // A pair within roundoff of a bin edge may legitimately hop bins.
        prop_assume!(before.iter().all(|d| ((d * 50.0).round() - d * 50.0).abs() > 1e-7));
        for mode in [DistanceMode::Cc2, DistanceMode::All12] {
            let a = distance_histogram(&mols, mode).ok();
            let b = distance_histogram(&moved, mode).ok();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn affinity_matches_spreadsheet_recomputation(table in energy_table(), scale in 0.1f64..10.0) {
        let sheet = spreadsheet(&table);
        match affinity_aggregate(&table) {
            Ok(s) => {
                prop_assert!(close(Some(s.evina), sheet.evina));
                prop_assert!(close(s.imp_percent, sheet.imp));
                prop_assert!(close(s.mpbg_percent, sheet.mpbg));
                let scaled = EnergyTable {
                    pockets: table
                        .pockets
                        .iter()
                        .map(|(k, p)| (k.clone(), PocketEnergies {
                            reference: p.reference.map(|r| r * scale),
                            generated: p.generated.iter().map(|e| e * scale).collect(),
                        }))
                        .collect(),
                };
                let t = affinity_aggregate(&scaled).unwrap();
                prop_assert_eq!(t.imp_percent, s.imp_percent);
                prop_assert!((t.evina - scale * s.evina).abs() < 1e-9 * (1.0 + t.evina.abs()));
            }
            Err(_) => prop_assert!(sheet.evina.is_none()),
        }
    }

    #[test]
    fn bond_jsd_is_the_mean_of_per_class_divergences(
        gen in prop::collection::vec((0usize..4, 0usize..3, 0.8f64..2.0), 1..20),
        reference in prop::collection::vec((0usize..4, 0usize..3, 0.8f64..2.0), 1..20),
    ) {
        let build = |bonds: &[(usize, usize, f64)]| -> Vec<BondedMolecule> {
            bonds
                .iter()
                .map(|&(e, o, d)| BondedMolecule {
                    atoms: vec![
                        Atom3D { element: "C".into(), position: [0.0; 3] },
                        Atom3D { element: ["C", "N", "O", "S"][e].into(), position: [d, 0.0, 0.0] },
                    ],
                    bonds: vec![Bond { i: 0, j: 1, order: [BondOrder::Single, BondOrder::Double, BondOrder::Aromatic][o] }],
                })
                .collect()
        };
        let (g, r) = (build(&gen), build(&reference));
        let (pg, pr) = (bond_length_profile(&g).unwrap(), bond_length_profile(&r).unwrap());
        let labels: std::collections::BTreeSet<&String> = pg.classes.keys().chain(pr.classes.keys()).collect();
        match jsd_bl(&pg, &pr) {
            Ok(out) => {
                let mut sum = 0.0;
                for l in &labels {
                    sum += match (pg.classes.get(*l), pr.classes.get(*l)) {
                        (Some(a), Some(b)) => brute_jsd(&a.masses, &b.masses),
                        _ => 1.0,
                    };
                }
                prop_assert_eq!(out.per_class.len(), labels.len());
                prop_assert!((out.mean - sum / labels.len() as f64).abs() < 1e-9);
            }
            Err(_) => prop_assert!(labels.is_empty()),
        }
    }
}

#[test]
fn worked_affinity_example() {
    let csv = "pocket_id,role,energy\np1,ref,-6\np1,gen,-7\np1,gen,-5\np1,gen,-6\n";
    let s = affinity_aggregate(&EnergyTable::parse_csv(csv, Path::new("worked.csv")).unwrap()).unwrap();
    assert!((s.evina + 6.0).abs() < 1e-12);
    assert!((s.imp_percent.unwrap() - 33.33).abs() < 0.005);
    assert!(s.mpbg_percent.unwrap().abs() < 1e-12);
}

#[test]
fn mpbg_of_ten_percent() {
    let csv = "pocket_id,role,energy\np,ref,-6.0\np,gen,-6.6\n";
    let s = affinity_aggregate(&EnergyTable::parse_csv(csv, Path::new("mpbg.csv")).unwrap()).unwrap();
    assert!((s.mpbg_percent.unwrap() - 10.0).abs() < 1e-9);
}
