//! Weighted norms, operator-vs-characteristic ratio measurement, per-cone
//! decay profiles, and the log-linear decay-rate fit.
//!
//! Operator norms are probed from below by finite test corpora while
//! characteristic suprema are computed exactly over the lattice family, so
//! decay assertions live on the characteristic profile and are corroborated
//! on the norm profile.

use serde::{Deserialize, Serialize};

use crate::characteristic::{bump_characteristic_sup, WeightPair};
use crate::error::{Error, Result};
use crate::grid::{
    enumerate_dyadic_rectangles, ExponentConfig, GridFunction, ProductGrid, RectangleFilter,
};
use crate::operator::{cone_decomposition, strong_fractional_integral};
use crate::rng::SplitMix64;
use crate::sum::CompensatedSum;
use std::sync::Arc;

/// What a decay profile measures per eccentricity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantityKind {
    Characteristic,
    NormRatio,
}

/// Per-eccentricity positive quantities with an optional fitted decay rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub kind: QuantityKind,
    pub ell_values: Vec<i32>,
    pub quantities: Vec<f64>,
    pub fitted_epsilon: Option<f64>,
    pub fit_residual: Option<f64>,
    /// Eccentricities dropped because their entry vanished or the rectangle
    /// family was empty.
    pub dropped: Vec<i32>,
}

/// Nonnegative, not-identically-zero test functions with provenance labels.
#[derive(Debug, Clone)]
pub struct TestCorpus {
    pub functions: Vec<GridFunction>,
    pub description: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusKind {
    /// One indicator per aligned dyadic rectangle, in enumeration order.
    DyadicIndicators,
    /// I.i.d. uniform (0, 1] cell values, deterministic in the seed.
    Random,
    /// One indicator per product cell, in flat index order.
    SingleCells,
}

/// Two-weight inequality measurement for one test function.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InequalityRatio {
    pub lhs: f64,
    pub rhs_norm: f64,
    pub ratio: f64,
}

/// Weighted p-norm `(sum |g w|^p vol)^(1/p)` by the midpoint rule.
pub fn weighted_norm(g: &GridFunction, w: &GridFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent {
            name: "p",
            value: p,
            constraint: "p >= 1".into(),
        });
    }
    if !g.same_grid(w) {
        return Err(Error::GridMismatch);
    }
    let vol = g.grid().cell_vol();
    let mut acc = CompensatedSum::new();
    for (a, b) in g.values().iter().zip(w.values()) {
        acc.add((a * b).abs().powf(p) * vol);
    }
    Ok(acc.value().powf(1.0 / p))
}

/// Ratio `|| omega I f ||_p / || f sigma ||_p` with the separable operator
/// path on the numerator.
pub fn inequality_ratio(
    f: &GridFunction,
    w: &WeightPair,
    cfg: &ExponentConfig,
) -> Result<InequalityRatio> {
    let rhs_norm = weighted_norm(f, w.sigma(), cfg.p)?;
    if rhs_norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let out = strong_fractional_integral(f, cfg)?;
    let lhs = weighted_norm(&out.result, w.omega(), cfg.p)?;
    Ok(InequalityRatio { lhs, rhs_norm, ratio: lhs / rhs_norm })
}

/// Largest inequality ratio over a corpus.
pub fn max_inequality_ratio(
    corpus: &TestCorpus,
    w: &WeightPair,
    cfg: &ExponentConfig,
) -> Result<f64> {
    if corpus.functions.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut best = 0.0f64;
    for f in &corpus.functions {
        best = best.max(inequality_ratio(f, w, cfg)?.ratio);
    }
    Ok(best)
}

/// Per-cone operator-norm lower bounds: for each eccentricity in the range,
/// the maximum over the corpus of
/// `|| omega (cone-l I) f ||_p / || f sigma ||_p`.
/// Vanishing entries (empty cones) are dropped and recorded.
pub fn cone_norm_profile(
    w: &WeightPair,
    cfg: &ExponentConfig,
    l_range: (i32, i32),
    corpus: &TestCorpus,
) -> Result<DecayReport> {
    if corpus.functions.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (l_min, l_max) = l_range;
    let buckets = (l_max - l_min + 1).max(0) as usize;
    let mut maxima = vec![0.0f64; buckets];
    for f in &corpus.functions {
        let rhs = weighted_norm(f, w.sigma(), cfg.p)?;
        if rhs == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let decomp = cone_decomposition(f, cfg, l_min, l_max)?;
        for (b, part) in decomp.parts.iter().enumerate() {
            let ratio = weighted_norm(part, w.omega(), cfg.p)? / rhs;
            if ratio > maxima[b] {
                maxima[b] = ratio;
            }
        }
    }
    let mut ell_values = Vec::new();
    let mut quantities = Vec::new();
    let mut dropped = Vec::new();
    for (b, &q) in maxima.iter().enumerate() {
        let ell = l_min + b as i32;
        if q > 0.0 {
            ell_values.push(ell);
            quantities.push(q);
        } else {
            dropped.push(ell);
        }
    }
    Ok(DecayReport {
        kind: QuantityKind::NormRatio,
        ell_values,
        quantities,
        fitted_epsilon: None,
        fit_residual: None,
        dropped,
    })
}

/// Per-eccentricity characteristic suprema at bump exponent `t`, strictly
/// inside `(1, theta)`. Empty families are dropped and recorded.
pub fn characteristic_decay_profile(
    w: &WeightPair,
    cfg: &ExponentConfig,
    t: f64,
    l_range: (i32, i32),
) -> Result<DecayReport> {
    cfg.validate_t(t, true)?;
    let (l_min, l_max) = l_range;
    let mut ell_values = Vec::new();
    let mut quantities = Vec::new();
    let mut dropped = Vec::new();
    for ell in l_min..=l_max {
        match bump_characteristic_sup(w, cfg, t, RectangleFilter::Eccentricity(ell)) {
            Ok(report) if report.value > 0.0 => {
                ell_values.push(ell);
                quantities.push(report.value);
            }
            Ok(_) | Err(Error::EmptyFamily) => dropped.push(ell),
            Err(e) => return Err(e),
        }
    }
    Ok(DecayReport {
        kind: QuantityKind::Characteristic,
        ell_values,
        quantities,
        fitted_epsilon: None,
        fit_residual: None,
        dropped,
    })
}

/// Least-squares fit of `log2(quantity)` against `-|l|` over entries with
/// `|l| >= 1`; the slope is the decay rate, the residual its RMS misfit in
/// log2 units.
pub fn fit_decay_rate(report: &DecayReport) -> Result<DecayReport> {
    let points: Vec<(f64, f64)> = report
        .ell_values
        .iter()
        .zip(&report.quantities)
        .filter(|(ell, q)| ell.abs() >= 1 && **q > 0.0)
        .map(|(ell, q)| (-(ell.abs() as f64), q.log2()))
        .collect();
    if points.len() < 3 {
        return Err(Error::FitTooFewPoints { have: points.len() });
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::FitTooFewPoints { have: 1 });
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let rss: f64 = points
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let mut out = report.clone();
    out.fitted_epsilon = Some(slope);
    out.fit_residual = Some((rss / n).sqrt());
    Ok(out)
}

/// Deterministic test-function corpus. `count` caps the deterministic kinds
/// and is the exact size of the random kind.
pub fn build_corpus(
    grid: &Arc<ProductGrid>,
    kind: CorpusKind,
    count: usize,
    seed: u64,
) -> Result<TestCorpus> {
    if count == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut functions = Vec::new();
    let mut description = Vec::new();
    match kind {
        CorpusKind::DyadicIndicators => {
            let family = enumerate_dyadic_rectangles(grid, RectangleFilter::All);
            for rect in family.into_iter().take(count) {
                functions.push(GridFunction::rectangle_indicator(grid, &rect)?);
                description.push(format!(
                    "dyadic Q[{},{},s{}]xP[{},{},s{}]",
                    rect.q_corner[0], rect.q_corner[1], rect.q_side,
                    rect.p_corner[0], rect.p_corner[1], rect.p_side,
                ));
            }
        }
        CorpusKind::Random => {
            let mut rng = SplitMix64::new(seed);
            for i in 0..count {
                let values = (0..grid.total_cells())
                    .map(|_| rng.next_unit_open_closed())
                    .collect();
                functions.push(GridFunction::from_values(grid, values)?);
                description.push(format!("random[seed={seed},i={i}]"));
            }
        }
        CorpusKind::SingleCells => {
            let fcy = grid.factor_cells_y();
            for i in 0..grid.total_cells().min(count) {
                functions.push(GridFunction::single_cell(grid, i / fcy, i % fcy)?);
                description.push(format!("cell[{i}]"));
            }
        }
    }
    Ok(TestCorpus { functions, description })
}
