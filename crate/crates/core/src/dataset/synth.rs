//! Calibrated synthetic listings.
//!
//! Each record is drawn as follows (all draws from one ChaCha8 stream seeded
//! with `seed`, in this order):
//!
//! 1. model, by catalog weight;
//! 2. year, uniform over the model's production years (age = 2019 - year);
//! 3. battery, uniform over the model's battery options;
//! 4. miles = age * U(5000, 13000) + U(0, 6000), rounded;
//! 5. listing month, uniform over Jan/Feb/Mar 2019;
//! 6. noise ~ N(0, 1).
//!
//! price = base * (1 + battery premium) * 0.9^age * exp(-miles / 200000)
//!         * (1 - 0.01 * month index) * (1 + 0.04 * noise),
//! rounded to whole dollars and floored at 5000. Model base prices are
//! calibrated so the per-model mean price of `synthesize(1600, 42)` lands on
//! the reference averages (Model 3 51332.67, Model S 49430.64,
//! Model X 83475.01, Roadstar 2dr 51493).

use chrono::NaiveDate;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, VehicleRecord};

pub struct CatalogEntry {
    pub model: &'static str,
    pub weight: f64,
    pub years: (i32, i32),
    pub base_price: f64,
    /// (battery label, relative price premium)
    pub batteries: &'static [(&'static str, f64)],
}

pub const MODEL_CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        model: "Model S",
        weight: 0.55,
        years: (2012, 2019),
        base_price: 74_500.0,
        batteries: &[
            ("Base", 0.0),
            ("60", -0.05),
            ("70D", 0.0),
            ("75D", 0.05),
            ("85", 0.05),
            ("90D", 0.12),
            ("P85D", 0.20),
            ("P90D", 0.25),
            ("100D", 0.22),
            ("P100D", 0.35),
            ("Performance", 0.15),
        ],
    },
    CatalogEntry {
        model: "Model X",
        weight: 0.18,
        years: (2016, 2019),
        base_price: 94_250.0,
        batteries: &[
            ("75D", 0.0),
            ("90D", 0.08),
            ("100D", 0.12),
            ("P90D", 0.18),
            ("P100D", 0.30),
        ],
    },
    CatalogEntry {
        model: "Model 3",
        weight: 0.23,
        years: (2018, 2019),
        base_price: 55_200.0,
        batteries: &[
            ("Standard", -0.10),
            ("Mid Range", -0.05),
            ("75", 0.0),
            ("Long Range", 0.08),
            ("Performance", 0.20),
        ],
    },
    CatalogEntry {
        model: "Roadstar 2dr",
        weight: 0.04,
        years: (2012, 2012),
        base_price: 143_100.0,
        batteries: &[("Base", 0.0), ("Sport", 0.10)],
    },
];

const REFERENCE_YEAR: i32 = 2019;
const MIN_PRICE: f64 = 5000.0;

/// `rows` synthetic listings, deterministic in `seed`.
pub fn synthesize(rows: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let models = WeightedIndex::new(MODEL_CATALOG.iter().map(|e| e.weight)).expect("catalog weights are positive");
    let records: Vec<VehicleRecord> = (0..rows)
        .map(|_| {
            let entry = &MODEL_CATALOG[models.sample(&mut rng)];
            let year = rng.random_range(entry.years.0..=entry.years.1);
            let (battery, premium) = entry.batteries[rng.random_range(0..entry.batteries.len())];
            let age = f64::from(REFERENCE_YEAR - year);
            let miles = (age * rng.random_range(5000.0..13000.0) + rng.random_range(0.0..6000.0)).round();
            let month = rng.random_range(0u32..3);
            let noise: f64 = rng.sample(StandardNormal);

            let price = entry.base_price
                * (1.0 + premium)
                * 0.9f64.powf(age)
                * (-miles / 200_000.0).exp()
                * (1.0 - 0.01 * f64::from(month))
                * (1.0 + 0.04 * noise);
            VehicleRecord {
                model: entry.model.to_string(),
                year,
                battery: battery.to_string(),
                price: Some(price.round().max(MIN_PRICE)),
                miles,
                date: NaiveDate::from_ymd_opt(REFERENCE_YEAR, month + 1, 1),
            }
        })
        .collect();
    Dataset::from_records(&records).expect("generated records satisfy invariants")
}
