//! Ground-truth marketplace: true rates, outcome sampling and a synthetic
//! skewed market generator.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, LogNormal, Pareto};

use crate::domain::{Catalog, ItemRef, OutcomeBasis, OutcomeEvent};
use crate::error::{Error, Result};

/// Catalog plus per-item click rate and purchase-given-click rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    catalog: Catalog,
    ctr: Vec<f64>,
    cvr_given_click: Vec<f64>,
}

fn check_rates(what: &'static str, rates: &[f64], items: usize) -> Result<()> {
    if rates.len() != items {
        return Err(Error::DimensionMismatch {
            what,
            expected: items,
            got: rates.len(),
        });
    }
    if let Some((index, &value)) = rates.iter().enumerate().find(|(_, r)| !(0.0..=1.0).contains(*r)) {
        return Err(Error::RateOutOfRange { what, index, value });
    }
    Ok(())
}

impl Environment {
    pub fn new(catalog: Catalog, ctr: Vec<f64>, cvr_given_click: Vec<f64>) -> Result<Self> {
        check_rates("ctr", &ctr, catalog.num_items())?;
        check_rates("cvr_given_click", &cvr_given_click, catalog.num_items())?;
        Ok(Self {
            catalog,
            ctr,
            cvr_given_click,
        })
    }

    /// Environment where every click is a purchase, so `rates` is both CTR and CVR.
    pub fn with_conversion_rates(catalog: Catalog, rates: Vec<f64>) -> Result<Self> {
        let ones = alloc::vec![1.0; rates.len()];
        Self::new(catalog, rates, ones)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn ctr(&self) -> &[f64] {
        &self.ctr
    }

    pub fn cvr_given_click(&self) -> &[f64] {
        &self.cvr_given_click
    }

    /// Unconditional purchase probability per item.
    pub fn purchase_rates(&self) -> Vec<f64> {
        self.ctr.iter().zip(&self.cvr_given_click).map(|(c, v)| c * v).collect()
    }

    /// Probability of the event an estimator learns for `basis`.
    ///
    /// Revenue is learned through its purchase rate.
    pub fn target_rates(&self, basis: OutcomeBasis) -> Vec<f64> {
        match basis {
            OutcomeBasis::Click => self.ctr.clone(),
            OutcomeBasis::Purchase | OutcomeBasis::Revenue => self.purchase_rates(),
        }
    }

    /// Expected contribution to `a_j` of one display of flat item `index`.
    pub fn expected_outcome(&self, index: usize, basis: OutcomeBasis) -> f64 {
        let purchase = self.ctr[index] * self.cvr_given_click[index];
        match basis {
            OutcomeBasis::Click => self.ctr[index],
            OutcomeBasis::Purchase => purchase,
            OutcomeBasis::Revenue => purchase * self.catalog.prices()[index],
        }
    }

    /// Draws the outcome of displaying `item` once.
    pub fn sample_outcome<R: Rng + ?Sized>(&self, item: ItemRef, round: u64, rng: &mut R) -> OutcomeEvent {
        self.sample_at(self.catalog.index_of(item), round, rng)
    }

    pub(crate) fn sample_at<R: Rng + ?Sized>(&self, index: usize, round: u64, rng: &mut R) -> OutcomeEvent {
        let clicked = bernoulli(rng, self.ctr[index]);
        let purchased = clicked && bernoulli(rng, self.cvr_given_click[index]);
        OutcomeEvent {
            round,
            displayed: self.catalog.item_at(index),
            clicked,
            purchased,
            revenue: if purchased { self.catalog.prices()[index] } else { 0.0 },
        }
    }
}

fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    // Rates of exactly 0 or 1 draw nothing.
    p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p)
}

/// Parameters of the synthetic marketplace.
///
/// Seller popularity is Pareto distributed, so a handful of head sellers
/// collect most of the clicks. Item prices are log-normal.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SynthSpec {
    pub sellers: usize,
    pub min_items: usize,
    pub max_items: usize,
    pub pareto_shape: f64,
    pub price_log_mean: f64,
    pub price_log_sd: f64,
    /// Average click rate across items before clipping.
    pub mean_ctr: f64,
    /// Spread of item rates around their seller's popularity.
    pub item_log_sd: f64,
    pub purchase_given_click: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            sellers: 50,
            min_items: 1,
            max_items: 4,
            pareto_shape: 1.2,
            price_log_mean: 0.0,
            price_log_sd: 0.5,
            mean_ctr: 0.02,
            item_log_sd: 0.25,
            purchase_given_click: 0.1,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("pareto_shape", self.pareto_shape),
            ("price_log_sd", self.price_log_sd),
            ("mean_ctr", self.mean_ctr),
            ("item_log_sd", self.item_log_sd),
            ("purchase_given_click", self.purchase_given_click),
        ];
        for (what, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NegativeParameter { what, index: 0, value });
            }
        }
        if !self.price_log_mean.is_finite() {
            return Err(Error::InvalidConfig("price_log_mean must be finite".into()));
        }
        if self.purchase_given_click > 1.0 {
            return Err(Error::RateOutOfRange {
                what: "purchase_given_click",
                index: 0,
                value: self.purchase_given_click,
            });
        }
        if self.sellers == 0 || self.min_items == 0 || self.min_items > self.max_items {
            return Err(Error::InvalidConfig(
                "need sellers >= 1 and 1 <= min_items <= max_items".into(),
            ));
        }
        Ok(())
    }
}

/// Builds a deterministic synthetic environment from `spec`.
pub fn build_synth(spec: &SynthSpec) -> Result<Environment> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let popularity_dist = Pareto::new(1.0, spec.pareto_shape).expect("validated shape");
    let price_dist = LogNormal::new(spec.price_log_mean, spec.price_log_sd).expect("validated sd");
    // Unit-mean multiplicative jitter.
    let jitter_dist =
        LogNormal::new(-0.5 * spec.item_log_sd * spec.item_log_sd, spec.item_log_sd).expect("validated sd");

    let popularity: Vec<f64> = (0..spec.sellers).map(|_| popularity_dist.sample(&mut rng)).collect();
    let mean_pop = popularity.iter().sum::<f64>() / spec.sellers as f64;

    let mut prices = Vec::with_capacity(spec.sellers);
    let mut ctr = Vec::new();
    for &pop in &popularity {
        let items = rng.random_range(spec.min_items..=spec.max_items);
        let mut seller_prices = Vec::with_capacity(items);
        for _ in 0..items {
            seller_prices.push(price_dist.sample(&mut rng));
            let rate = spec.mean_ctr * pop / mean_pop * jitter_dist.sample(&mut rng);
            ctr.push(rate.clamp(0.0, 1.0));
        }
        prices.push(seller_prices);
    }
    let catalog = Catalog::new(prices)?;
    let cvr = alloc::vec![spec.purchase_given_click; catalog.num_items()];
    Environment::new(catalog, ctr, cvr)
}

/// Forced-display calibration of one item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRow {
    pub item: ItemRef,
    pub true_ctr: f64,
    pub empirical_ctr: f64,
    pub ctr_z: f64,
    pub true_purchase_rate: f64,
    pub empirical_purchase_rate: f64,
    pub purchase_z: f64,
}

fn z_score(successes: u64, n: u64, p: f64) -> f64 {
    let n = n as f64;
    let sd = libm::sqrt(p * (1.0 - p) / n);
    if sd == 0.0 {
        0.0
    } else {
        (successes as f64 / n - p) / sd
    }
}

/// Displays every item `draws` times and compares empirical rates with the truth.
pub fn calibration_report<R: Rng + ?Sized>(env: &Environment, draws: u64, rng: &mut R) -> Result<Vec<CalibrationRow>> {
    if draws == 0 {
        return Err(Error::InvalidConfig("calibration needs at least one draw".into()));
    }
    let mut rows = Vec::with_capacity(env.catalog.num_items());
    for index in 0..env.catalog.num_items() {
        let ctr = env.ctr[index];
        let purchase = ctr * env.cvr_given_click[index];
        let clicks = Binomial::new(draws, ctr).expect("rate in [0,1]").sample(rng);
        let purchases = Binomial::new(clicks, env.cvr_given_click[index])
            .expect("rate in [0,1]")
            .sample(rng);
        let n = draws as f64;
        rows.push(CalibrationRow {
            item: env.catalog.item_at(index),
            true_ctr: ctr,
            empirical_ctr: clicks as f64 / n,
            ctr_z: z_score(clicks, draws, ctr),
            true_purchase_rate: purchase,
            empirical_purchase_rate: purchases as f64 / n,
            purchase_z: z_score(purchases, draws, purchase),
        });
    }
    Ok(rows)
}
