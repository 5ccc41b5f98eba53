//! Clickstream ingestion: event logs in, one representative item per brand out.
//!
//! Input is a delimited text file with a header row. Required columns:
//! `event_type` (`view`, `cart` or `purchase`), `product_id`, `brand` and
//! `price`; `user_session` and any other columns are accepted and ignored.
//! This matches the public electronics-store event history layout.
//!
//! Per item, CVR is purchases over views. A brand's CVR is the mean over its
//! viewed items, its price the mean of those items' average observed prices.
//! Brands with fewer views than the threshold are dropped.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, LogNormal};
use sellerfair_core::{Catalog, Environment};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_VIEW_THRESHOLD: u64 = 10_000;

/// Prices are accumulated as integer micro-units so aggregates do not depend
/// on row order.
const PRICE_UNITS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    pub view_threshold: u64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            view_threshold: DEFAULT_VIEW_THRESHOLD,
        }
    }
}

/// One surviving brand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrandRow {
    pub brand: String,
    pub price: f64,
    pub cvr: f64,
    pub views: u64,
}

/// Brands sorted by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BrandTable {
    pub brands: Vec<BrandRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub table: BrandTable,
    /// Rows skipped as malformed (bad column count, unknown event type,
    /// unparsable price, empty brand or product).
    pub skipped_rows: usize,
    /// Brands removed by the view threshold.
    pub filtered_brands: usize,
}

#[derive(Default)]
struct ItemTally {
    views: u64,
    purchases: u64,
    price_units: i128,
    priced_rows: u64,
}

enum EventKind {
    View,
    Cart,
    Purchase,
}

fn column(headers: &csv::StringRecord, name: &'static str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or(Error::MissingColumn(name))
}

/// Aggregates an event log into a [`BrandTable`].
pub fn ingest_evs<R: Read>(reader: R, options: IngestOptions) -> Result<IngestReport> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = csv.headers()?.clone();
    let event_col = column(&headers, "event_type")?;
    let product_col = column(&headers, "product_id")?;
    let brand_col = column(&headers, "brand")?;
    let price_col = column(&headers, "price")?;

    let mut tallies: BTreeMap<String, BTreeMap<String, ItemTally>> = BTreeMap::new();
    let mut skipped = 0usize;
    let mut record = csv::StringRecord::new();
    loop {
        match csv.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                skipped += 1;
                continue;
            }
        }
        if record.len() != headers.len() {
            skipped += 1;
            continue;
        }
        let kind = match record[event_col].trim() {
            "view" => EventKind::View,
            "cart" => EventKind::Cart,
            "purchase" => EventKind::Purchase,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let brand = record[brand_col].trim();
        let product = record[product_col].trim();
        let price = record[price_col]
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|p| *p >= 0.0 && p.is_finite());
        let (Some(price), false, false) = (price, brand.is_empty(), product.is_empty()) else {
            skipped += 1;
            continue;
        };
        let item = tallies
            .entry(brand.to_owned())
            .or_default()
            .entry(product.to_owned())
            .or_default();
        match kind {
            EventKind::View => item.views += 1,
            EventKind::Purchase => item.purchases += 1,
            EventKind::Cart => {}
        }
        item.price_units += (price * PRICE_UNITS).round() as i128;
        item.priced_rows += 1;
    }

    let total_brands = tallies.len();
    let mut brands = Vec::new();
    for (brand, items) in tallies {
        let views: u64 = items.values().map(|i| i.views).sum();
        if views < options.view_threshold || views == 0 {
            continue;
        }
        let viewed: Vec<&ItemTally> = items.values().filter(|i| i.views > 0).collect();
        let n = viewed.len() as f64;
        let cvr = viewed
            .iter()
            .map(|i| (i.purchases as f64 / i.views as f64).min(1.0))
            .sum::<f64>()
            / n;
        let price = viewed
            .iter()
            .map(|i| i.price_units as f64 / i.priced_rows as f64 / PRICE_UNITS)
            .sum::<f64>()
            / n;
        brands.push(BrandRow {
            brand,
            price,
            cvr,
            views,
        });
    }
    if brands.is_empty() {
        return Err(Error::EmptyAfterFilter {
            threshold: options.view_threshold,
            skipped,
        });
    }
    Ok(IngestReport {
        filtered_brands: total_brands - brands.len(),
        table: BrandTable { brands },
        skipped_rows: skipped,
    })
}

/// Reads an event log file.
pub fn ingest_evs_file(path: &Path, options: IngestOptions) -> Result<IngestReport> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_evs(std::io::BufReader::new(file), options)
}

impl BrandTable {
    /// Writes `brand,price,cvr,views`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        for row in &self.brands {
            csv.serialize(row)?;
        }
        csv.flush().map_err(|e| Error::io("brands csv", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(reader);
        let brands = csv.deserialize().collect::<std::result::Result<Vec<BrandRow>, _>>()?;
        Ok(Self { brands })
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// One seller per brand with a single representative item; every click
    /// is a conversion, so the click rate is the brand CVR.
    ///
    /// With `normalize_prices` prices are divided by their mean, which keeps
    /// relative GMV comparisons intact while putting scores on a unit scale.
    pub fn to_environment(&self, normalize_prices: bool) -> Result<Environment> {
        let mut prices: Vec<f64> = self.brands.iter().map(|b| b.price).collect();
        if normalize_prices {
            let mean = prices.iter().sum::<f64>() / prices.len().max(1) as f64;
            if mean > 0.0 {
                prices.iter_mut().for_each(|p| *p /= mean);
            }
        }
        let catalog = Catalog::single_item(&prices)?;
        let rates = self.brands.iter().map(|b| b.cvr).collect();
        Ok(Environment::with_conversion_rates(catalog, rates)?)
    }
}

/// Shape of a generated event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticLogSpec {
    /// Brands expected to clear the view threshold.
    pub large_brands: usize,
    /// Brands generated below the threshold.
    pub small_brands: usize,
    pub view_threshold: u64,
    /// Views of a large brand are uniform in `[threshold, span * threshold]`.
    pub view_span: f64,
    pub max_items: usize,
    pub price_log_mean: f64,
    pub price_log_sd: f64,
    pub cvr_log_mean: f64,
    pub cvr_log_sd: f64,
    /// Fraction of views followed by a cart event.
    pub cart_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticLogSpec {
    fn default() -> Self {
        Self {
            large_brands: 50,
            small_brands: 10,
            view_threshold: DEFAULT_VIEW_THRESHOLD,
            view_span: 2.0,
            max_items: 4,
            price_log_mean: 5.0,
            price_log_sd: 0.5,
            cvr_log_mean: -4.6,
            cvr_log_sd: 0.5,
            cart_rate: 0.05,
            seed: 2024,
        }
    }
}

/// Writes a deterministic electronics-store style event log.
///
/// Rows are grouped by item; [`ingest_evs`] does not depend on row order.
pub fn write_synthetic_log<W: Write>(spec: &SyntheticLogSpec, writer: W) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let price_dist = LogNormal::new(spec.price_log_mean, spec.price_log_sd)
        .map_err(|e| Error::Config(format!("price distribution: {e}")))?;
    let cvr_dist = LogNormal::new(spec.cvr_log_mean, spec.cvr_log_sd)
        .map_err(|e| Error::Config(format!("cvr distribution: {e}")))?;
    let jitter = LogNormal::new(-0.02, 0.2).expect("constant parameters");
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "event_time",
        "event_type",
        "product_id",
        "brand",
        "price",
        "user_session",
    ])?;

    let threshold = spec.view_threshold as f64;
    let mut product = 100_000u64;
    let mut session = 0u64;
    for b in 0..spec.large_brands + spec.small_brands {
        let brand = format!("brand{b:03}");
        let views = if b < spec.large_brands {
            rng.random_range(threshold..=threshold * spec.view_span.max(1.0)) as u64
        } else {
            rng.random_range(threshold * 0.2..threshold * 0.999) as u64
        };
        let items = rng.random_range(1..=spec.max_items.max(1));
        let brand_cvr = cvr_dist.sample(&mut rng);
        let base_price = price_dist.sample(&mut rng);
        let mut remaining = views;
        for k in 0..items {
            let item_views = if k + 1 == items {
                remaining
            } else {
                let share = rng.random_range(0..=remaining / 2);
                remaining -= share;
                share
            };
            let cvr = (brand_cvr * jitter.sample(&mut rng)).min(1.0);
            let price = format!("{:.2}", base_price * jitter.sample(&mut rng));
            let purchases = Binomial::new(item_views, cvr).expect("cvr in [0,1]").sample(&mut rng);
            let carts = Binomial::new(item_views, spec.cart_rate.clamp(0.0, 1.0))
                .expect("rate in [0,1]")
                .sample(&mut rng);
            let id = product.to_string();
            product += 1;
            for (kind, count) in [("view", item_views), ("cart", carts), ("purchase", purchases)] {
                for _ in 0..count {
                    session += 1;
                    let time = format!("2020-10-{:02} 00:00:00 UTC", 1 + session % 28);
                    out.write_record([time.as_str(), kind, &id, &brand, &price, &format!("s{session}")])?;
                }
            }
        }
    }
    out.flush().map_err(|e| Error::io("synthetic log", e))?;
    Ok(())
}
