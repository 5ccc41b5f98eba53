//! Index space, parameters and outcome records shared by every module.
//!
//! Sellers and items are dense 0-based indices. Internally every item also
//! has a flat index in `0..H` (sellers laid out in order), which is what the
//! per-round loops use.

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};

/// Item `item` of seller `seller`. Ordered by `(seller, item)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ItemRef {
    pub seller: usize,
    pub item: usize,
}

impl ItemRef {
    pub const fn new(seller: usize, item: usize) -> Self {
        Self { seller, item }
    }
}

/// Sellers with their item prices.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    prices: Vec<f64>,
    offsets: Vec<usize>,
    owner: Vec<usize>,
}

impl Catalog {
    /// Builds a catalog from one price list per seller.
    pub fn new(prices: Vec<Vec<f64>>) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::InvalidCatalog("at least one seller is required"));
        }
        let mut flat = Vec::new();
        let mut offsets = Vec::with_capacity(prices.len() + 1);
        let mut owner = Vec::new();
        offsets.push(0);
        for (seller, items) in prices.into_iter().enumerate() {
            if items.is_empty() {
                return Err(Error::InvalidCatalog("every seller needs at least one item"));
            }
            for p in items {
                if !(p >= 0.0 && p.is_finite()) {
                    return Err(Error::NegativeParameter {
                        what: "price",
                        index: flat.len(),
                        value: p,
                    });
                }
                flat.push(p);
                owner.push(seller);
            }
            offsets.push(flat.len());
        }
        Ok(Self {
            prices: flat,
            offsets,
            owner,
        })
    }

    /// One item per seller.
    pub fn single_item(prices: &[f64]) -> Result<Self> {
        Self::new(prices.iter().map(|&p| alloc::vec![p]).collect())
    }

    pub fn num_sellers(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total item count `H = Σ_j K_j`.
    pub fn num_items(&self) -> usize {
        self.prices.len()
    }

    pub fn items_of(&self, seller: usize) -> usize {
        self.offsets[seller + 1] - self.offsets[seller]
    }

    /// Flat index range of a seller's items.
    pub fn seller_range(&self, seller: usize) -> Range<usize> {
        self.offsets[seller]..self.offsets[seller + 1]
    }

    /// Flat prices, indexed by [`Catalog::index_of`].
    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn price(&self, item: ItemRef) -> f64 {
        self.prices[self.index_of(item)]
    }

    pub fn contains(&self, item: ItemRef) -> bool {
        item.seller < self.num_sellers() && item.item < self.items_of(item.seller)
    }

    pub fn index_of(&self, item: ItemRef) -> usize {
        debug_assert!(self.contains(item));
        self.offsets[item.seller] + item.item
    }

    pub fn item_at(&self, index: usize) -> ItemRef {
        let seller = self.owner[index];
        ItemRef::new(seller, index - self.offsets[seller])
    }

    /// Seller owning flat index `index`.
    pub fn seller_of(&self, index: usize) -> usize {
        self.owner[index]
    }

    /// Flat owner table, one seller index per item.
    pub fn owners(&self) -> &[usize] {
        &self.owner
    }

    pub fn mean_price(&self, seller: usize) -> f64 {
        let range = self.seller_range(seller);
        let n = range.len() as f64;
        self.prices[range].iter().sum::<f64>() / n
    }

    /// Every item in `(seller, item)` order.
    pub fn items(&self) -> impl Iterator<Item = ItemRef> + '_ {
        (0..self.num_items()).map(|i| self.item_at(i))
    }
}

/// Which regularizer `r(a)` is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RegularizerKind {
    #[default]
    None,
    /// `Σ_j β_j·min(a_j, α_j)`
    AboveTarget,
    /// `β·min_j a_j`
    MaxMin,
}

/// What the per-seller aggregate `a_j` counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OutcomeBasis {
    #[default]
    Click,
    Purchase,
    Revenue,
}

/// Regularizer variant with per-seller targets `alpha` and weights `beta`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub outcome_basis: OutcomeBasis,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl RegularizerSpec {
    /// No regularizer over `sellers` sellers; `λ` stays pinned at zero.
    pub fn none(sellers: usize, outcome_basis: OutcomeBasis) -> Self {
        Self {
            kind: RegularizerKind::None,
            outcome_basis,
            alpha: alloc::vec![0.0; sellers],
            beta: alloc::vec![0.0; sellers],
        }
    }

    pub fn above_target(outcome_basis: OutcomeBasis, alpha: Vec<f64>, beta: Vec<f64>) -> Self {
        Self {
            kind: RegularizerKind::AboveTarget,
            outcome_basis,
            alpha,
            beta,
        }
    }

    pub fn max_min(outcome_basis: OutcomeBasis, beta: f64, sellers: usize) -> Self {
        Self {
            kind: RegularizerKind::MaxMin,
            outcome_basis,
            alpha: alloc::vec![0.0; sellers],
            beta: alloc::vec![beta; sellers],
        }
    }

    pub fn num_sellers(&self) -> usize {
        self.beta.len()
    }

    /// Weight actually in force for seller `j` (zero when `kind` is `None`).
    pub fn effective_beta(&self, seller: usize) -> f64 {
        match self.kind {
            RegularizerKind::None => 0.0,
            _ => self.beta[seller],
        }
    }

    pub fn max_beta(&self) -> f64 {
        (0..self.num_sellers())
            .map(|j| self.effective_beta(j))
            .fold(0.0, f64::max)
    }
}

/// Checks that `catalog` and `spec` agree jointly.
pub fn validate(catalog: &Catalog, spec: &RegularizerSpec) -> Result<()> {
    let m = catalog.num_sellers();
    for (what, values) in [("alpha", &spec.alpha), ("beta", &spec.beta)] {
        if values.len() != m {
            return Err(Error::DimensionMismatch {
                what,
                expected: m,
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::NegativeParameter { what, index, value });
        }
    }
    if spec.kind == RegularizerKind::MaxMin {
        let first = spec.beta[0];
        if let Some((index, &value)) = spec.beta.iter().enumerate().find(|(_, b)| **b != first) {
            return Err(Error::UnequalMaxMinWeight { index, value, first });
        }
    }
    Ok(())
}

/// Per-seller dual prices `λ_j`, kept inside `[0, β_j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    lambda: Vec<f64>,
}

impl DualState {
    pub fn zeros(sellers: usize) -> Self {
        Self {
            lambda: alloc::vec![0.0; sellers],
        }
    }

    /// Projects `lambda` into the boxes.
    pub fn projected(mut lambda: Vec<f64>, boxes: &[(f64, f64)]) -> Self {
        for (l, &(lo, hi)) in lambda.iter_mut().zip(boxes) {
            *l = l.clamp(lo, hi);
        }
        Self { lambda }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambda
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.lambda
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.lambda
    }
}

/// What happened when an item was shown.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OutcomeEvent {
    pub round: u64,
    pub displayed: ItemRef,
    pub clicked: bool,
    pub purchased: bool,
    pub revenue: f64,
}

impl OutcomeEvent {
    /// Contribution of this event to the displayed seller's aggregate.
    pub fn outcome(&self, basis: OutcomeBasis) -> f64 {
        match basis {
            OutcomeBasis::Click => f64::from(u8::from(self.clicked)),
            OutcomeBasis::Purchase => f64::from(u8::from(self.purchased)),
            OutcomeBasis::Revenue => self.revenue,
        }
    }
}
