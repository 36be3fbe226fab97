//! Two-weight bump characteristics over dyadic rectangle families.
//!
//! The per-rectangle value is the geometric prefactor
//! `|Q|^(alpha/n - 1/t) |P|^(beta/m - 1/t)` times the B-quantity, the
//! bumped weight integrals
//! `(iint omega^(pt))^(1/pt) (iint sigma^(-pt/(p-1)))^((p-1)/(pt))`.
//! Suprema are taken over the finite aligned lattice family; reports carry
//! the family size so comparisons stay like for like. When `q > p` the
//! generalized averaged form takes over, with prefactor exponent
//! `alpha/n - 1/p + 1/q` and averaged integrals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    dilate_rectangle, enumerate_dyadic_rectangles, DyadicRectangle, ExponentConfig, Factor,
    GridFunction, ProductGrid, RectangleFilter,
};
use crate::sum::CompensatedSum;
use std::sync::Arc;

/// A weight pair (omega, sigma) on a shared grid. Omega is nonnegative and
/// sigma strictly positive, so no rectangle is trivial by construction.
#[derive(Debug, Clone)]
pub struct WeightPair {
    omega: GridFunction,
    sigma: GridFunction,
}

impl WeightPair {
    pub fn new(omega: GridFunction, sigma: GridFunction) -> Result<Self> {
        if !omega.same_grid(&sigma) {
            return Err(Error::GridMismatch);
        }
        if let Some(index) = omega.values().iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidWeight { constraint: "omega >= 0", index });
        }
        if let Some(index) = sigma.values().iter().position(|&v| v <= 0.0) {
            return Err(Error::InvalidWeight { constraint: "sigma > 0", index });
        }
        Ok(Self { omega, sigma })
    }

    /// Unit weights on the grid.
    pub fn unit(grid: &Arc<ProductGrid>) -> Self {
        Self {
            omega: GridFunction::constant(grid, 1.0).expect("constant is finite"),
            sigma: GridFunction::constant(grid, 1.0).expect("constant is finite"),
        }
    }

    pub fn omega(&self) -> &GridFunction {
        &self.omega
    }

    pub fn sigma(&self) -> &GridFunction {
        &self.sigma
    }

    pub fn grid(&self) -> &Arc<ProductGrid> {
        self.omega.grid()
    }
}

/// Analytic power-weight family:
/// `omega(x, y) = (|x| + delta)^-a (|y| + delta)^-b`,
/// `sigma(x, y) = (|x| + delta)^c (|y| + delta)^d`.
///
/// The offset `delta` keeps the singularity off the grid; it defaults to one
/// cell step of the grid the family is first sampled on, and stays fixed
/// when the same family is resampled on a dilated configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerWeightSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub delta: f64,
}

impl PowerWeightSpec {
    pub fn omega_at(&self, x: &[f64], y: &[f64]) -> f64 {
        (norm(x) + self.delta).powf(-self.a) * (norm(y) + self.delta).powf(-self.b)
    }

    pub fn sigma_at(&self, x: &[f64], y: &[f64]) -> f64 {
        (norm(x) + self.delta).powf(self.c) * (norm(y) + self.delta).powf(self.d)
    }

    pub fn sample(&self, grid: &Arc<ProductGrid>) -> Result<WeightPair> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::InvalidExponent {
                name: "delta",
                value: self.delta,
                constraint: "delta > 0".into(),
            });
        }
        let omega = GridFunction::from_fn(grid, |x, y| self.omega_at(x, y))?;
        let sigma = GridFunction::from_fn(grid, |x, y| self.sigma_at(x, y))?;
        WeightPair::new(omega, sigma)
    }
}

fn norm(v: &[f64]) -> f64 {
    match v.len() {
        1 => v[0].abs(),
        _ => (v[0] * v[0] + v[1] * v[1]).sqrt(),
    }
}

/// Supremum report: the value, where it was attained, and over how many
/// rectangles. Ties break to the first rectangle in enumeration order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacteristicReport {
    pub value: f64,
    pub argmax: DyadicRectangle,
    pub argmax_eccentricity: Option<i32>,
    pub family_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_rectangle: Option<Vec<RectangleValue>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RectangleValue {
    pub rectangle: DyadicRectangle,
    pub eccentricity: Option<i32>,
    pub value: f64,
}

/// Result of the B-quantity dilation-ratio probe.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BRatioProbe {
    pub ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Bumped weight integrals over a rectangle:
/// `(iint omega^(pt), iint sigma^(-pt/(p-1)))` by the midpoint rule.
/// Rectangles cover whole cells, so no partial-cell weighting exists.
fn rectangle_integrals(
    w: &WeightPair,
    rect: &DyadicRectangle,
    p: f64,
    t: f64,
) -> Result<(f64, f64)> {
    let grid = w.grid();
    rect.validate(grid)?;
    let vol = grid.cell_vol();
    let e_omega = p * t;
    let e_sigma = -p * t / (p - 1.0);
    let mut acc_omega = CompensatedSum::new();
    let mut acc_sigma = CompensatedSum::new();
    for ix in rect.q_cells(grid) {
        for iy in rect.p_cells(grid) {
            acc_omega.add(w.omega.value(ix, iy).powf(e_omega) * vol);
            acc_sigma.add(w.sigma.value(ix, iy).powf(e_sigma) * vol);
        }
    }
    let i_sigma = acc_sigma.value();
    if !i_sigma.is_finite() {
        return Err(Error::TrivialWeight);
    }
    Ok((acc_omega.value(), i_sigma))
}

/// The characteristic without its geometric prefactor.
pub fn b_quantity(w: &WeightPair, rect: &DyadicRectangle, p: f64, t: f64) -> Result<f64> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidExponent {
            name: "p",
            value: p,
            constraint: "p > 1".into(),
        });
    }
    if !(t.is_finite() && t > 1.0) {
        return Err(Error::InvalidExponent {
            name: "t",
            value: t,
            constraint: "t > 1".into(),
        });
    }
    let (i_omega, i_sigma) = rectangle_integrals(w, rect, p, t)?;
    Ok(i_omega.powf(1.0 / (p * t)) * i_sigma.powf((p - 1.0) / (p * t)))
}

/// Per-rectangle bump characteristic. For `q = p` this is the endpoint
/// non-averaged form, exactly `prefactor * b_quantity`; for `q > p` the
/// generalized averaged form is used instead.
pub fn bump_characteristic_rectangle(
    w: &WeightPair,
    rect: &DyadicRectangle,
    cfg: &ExponentConfig,
    t: f64,
) -> Result<f64> {
    cfg.validate_t(t, false)?;
    if !cfg.matches_grid(w.grid()) {
        return Err(Error::GridMismatch);
    }
    let grid = w.grid();
    let q_measure = rect.q_measure(grid);
    let p_measure = rect.p_measure(grid);
    if cfg.q > cfg.p {
        // averaged (p, q) form with omega bumped through q
        rect.validate(grid)?;
        let vol = grid.cell_vol();
        let e_omega = cfg.q * t;
        let e_sigma = -cfg.p * t / (cfg.p - 1.0);
        let mut acc_omega = CompensatedSum::new();
        let mut acc_sigma = CompensatedSum::new();
        for ix in rect.q_cells(grid) {
            for iy in rect.p_cells(grid) {
                acc_omega.add(w.omega.value(ix, iy).powf(e_omega) * vol);
                acc_sigma.add(w.sigma.value(ix, iy).powf(e_sigma) * vol);
            }
        }
        if !acc_sigma.value().is_finite() {
            return Err(Error::TrivialWeight);
        }
        let measure = q_measure * p_measure;
        let exp_geo = |m: f64, order: f64, dim: f64| {
            m.powf(order / dim - 1.0 / cfg.p + 1.0 / cfg.q)
        };
        let avg_omega = (acc_omega.value() / measure).powf(1.0 / (cfg.q * t));
        let avg_sigma = (acc_sigma.value() / measure).powf((cfg.p - 1.0) / (cfg.p * t));
        Ok(exp_geo(q_measure, cfg.alpha, cfg.n as f64)
            * exp_geo(p_measure, cfg.beta, cfg.m as f64)
            * avg_omega
            * avg_sigma)
    } else {
        let b = b_quantity(w, rect, cfg.p, t)?;
        let prefactor = q_measure.powf(cfg.alpha / cfg.n as f64 - 1.0 / t)
            * p_measure.powf(cfg.beta / cfg.m as f64 - 1.0 / t);
        Ok(prefactor * b)
    }
}

/// Supremum of the per-rectangle characteristic over the enumerated family.
pub fn bump_characteristic_sup(
    w: &WeightPair,
    cfg: &ExponentConfig,
    t: f64,
    filter: RectangleFilter,
) -> Result<CharacteristicReport> {
    sup_impl(w, cfg, t, filter, false)
}

/// Same supremum, retaining the per-rectangle value table.
pub fn bump_characteristic_sup_with_table(
    w: &WeightPair,
    cfg: &ExponentConfig,
    t: f64,
    filter: RectangleFilter,
) -> Result<CharacteristicReport> {
    sup_impl(w, cfg, t, filter, true)
}

fn sup_impl(
    w: &WeightPair,
    cfg: &ExponentConfig,
    t: f64,
    filter: RectangleFilter,
    keep_table: bool,
) -> Result<CharacteristicReport> {
    let grid = w.grid();
    let family = enumerate_dyadic_rectangles(grid, filter);
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mut best_value = f64::NEG_INFINITY;
    let mut best_rect = family[0];
    let mut table = keep_table.then(|| Vec::with_capacity(family.len()));
    for rect in &family {
        let value = bump_characteristic_rectangle(w, rect, cfg, t)?;
        if let Some(tab) = table.as_mut() {
            tab.push(RectangleValue {
                rectangle: *rect,
                eccentricity: rect.eccentricity_int(grid),
                value,
            });
        }
        if value > best_value {
            best_value = value;
            best_rect = *rect;
        }
    }
    Ok(CharacteristicReport {
        value: best_value,
        argmax: best_rect,
        argmax_eccentricity: best_rect.eccentricity_int(grid),
        family_size: family.len(),
        per_rectangle: table,
    })
}

/// Ratio of B-quantities between the concentric first-factor shrink and the
/// original rectangle, compared against the dilation bound
/// `2^(l (alpha - n/t))` with a caller-supplied slack constant.
pub fn b_ratio_probe(
    w: &WeightPair,
    rect: &DyadicRectangle,
    cfg: &ExponentConfig,
    t: f64,
    ell: i32,
    slack: f64,
) -> Result<BRatioProbe> {
    cfg.validate_t(t, false)?;
    let grid = w.grid();
    let dilated = dilate_rectangle(grid, rect, ell, Factor::First)?;
    let denom = b_quantity(w, rect, cfg.p, t)?;
    if denom == 0.0 {
        return Err(Error::TrivialWeight);
    }
    let ratio = b_quantity(w, &dilated, cfg.p, t)? / denom;
    let bound = 2f64.powf(ell as f64 * (cfg.alpha - cfg.n as f64 / t));
    Ok(BRatioProbe { ratio, bound, holds: ratio <= slack * bound })
}
