//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use fss_core::dataset::{ingest, PreprocessRules, RawTable};
use fss_core::Dataset;
use rand::Rng;
use std::fmt::Write;
use std::path::{Path, PathBuf};

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn desharnais_rules() -> PreprocessRules {
    let text = std::fs::read_to_string(workspace_root().join("rules/desharnais.toml")).unwrap();
    toml::from_str(&text).unwrap()
}

/// A synthetic table with the Desharnais header and value ranges: 81
/// projects, four of them with a "?" experience value. Effort grows with
/// size and duration. It exercises the pipeline; it is not the real data.
pub fn desharnais_like_csv(seed: u64) -> String {
    let mut rng = fss_core::rng::rng_from(seed);
    let mut s = String::from(
        "Project,TeamExp,ManagerExp,YearEnd,Length,Effort,Transactions,Entities,PointsNonAdjust,Adjustment,PointsAjust,Language\n",
    );
    for p in 1..=81 {
        let te: u32 = rng.gen_range(0..=4);
        let me: u32 = rng.gen_range(0..=7);
        let year: u32 = rng.gen_range(82..=88);
        let length: u32 = rng.gen_range(1..=39);
        let tr: u32 = rng.gen_range(9..=886);
        let en: u32 = rng.gen_range(7..=387);
        let pna = tr + en;
        let adj: u32 = rng.gen_range(5..=52);
        let pa = (pna as f64 * (0.65 + 0.01 * adj as f64)).round();
        let lang: u32 = rng.gen_range(1..=3);
        let noise: f64 = rng.gen_range(-0.35..0.35);
        let effort = (12.0 * pa.powf(0.85) * (length as f64).powf(0.3) * (1.0 - 0.04 * te as f64) * noise.exp())
            .round()
            .max(546.0);
        let te_cell = if p == 38 || p == 44 { "?".to_string() } else { te.to_string() };
        let me_cell = if p == 66 || p == 75 { "?".to_string() } else { me.to_string() };
        writeln!(
            s,
            "{p},{te_cell},{me_cell},{year},{length},{effort},{tr},{en},{pna},{adj},{pa},{lang}"
        )
        .unwrap();
    }
    s
}

pub fn desharnais_like(seed: u64) -> Dataset {
    let rules = desharnais_rules();
    let raw = RawTable::read_csv(desharnais_like_csv(seed).as_bytes(), &rules.table_schema()).unwrap();
    ingest(&raw, &rules).unwrap()
}
