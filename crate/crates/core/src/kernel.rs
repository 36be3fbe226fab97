//! Product Riesz kernel evaluation with exact handling of the diagonal
//! singularity, and dyadic cone membership for distance ratios.
//!
//! For distinct cells the factor kernel is `|a - b|^(alpha - n)` on cell
//! centers. The self cell keeps its exact cell average instead of being
//! dropped: the kernel is locally integrable for `alpha > 0`, so the average
//! exists and preserves positivity of the discrete operator. A drop-diagonal
//! rule is available for sensitivity checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the singular self cell of one factor is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelfCellRule {
    /// Closed-form cell average of `|t|^(alpha-1)`, dimension 1 only.
    Analytic1d,
    /// Self-similar 4x4 refinement of the centered square, dimension 2 only:
    /// the 12 outer subcells take midpoint values, the central 2x2 block is
    /// a half-size copy of the cell and recurses; truncated when a level
    /// contributes less than 1e-14 of the running sum.
    RefinedSubgrid,
    /// Self cell contributes zero (sensitivity flag).
    DropDiagonal,
}

impl SelfCellRule {
    /// The rule a given factor dimension uses by default.
    pub fn default_for(dim: u32) -> SelfCellRule {
        if dim == 1 {
            SelfCellRule::Analytic1d
        } else {
            SelfCellRule::RefinedSubgrid
        }
    }
}

/// Kernel exponents and self-cell rules for both factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub alpha: f64,
    pub n: u32,
    pub beta: f64,
    pub m: u32,
    pub self_cell_rule_x: SelfCellRule,
    pub self_cell_rule_y: SelfCellRule,
}

impl KernelSpec {
    pub fn new(alpha: f64, n: u32, beta: f64, m: u32) -> Result<Self> {
        validate_order(alpha, n, "alpha")?;
        validate_order(beta, m, "beta")?;
        Ok(Self {
            alpha,
            n,
            beta,
            m,
            self_cell_rule_x: SelfCellRule::default_for(n),
            self_cell_rule_y: SelfCellRule::default_for(m),
        })
    }
}

fn validate_order(alpha: f64, dim: u32, name: &'static str) -> Result<()> {
    if !(alpha > 0.0 && alpha < dim as f64) {
        return Err(Error::InvalidExponent {
            name,
            value: alpha,
            constraint: format!("0 < {name} < {dim}"),
        });
    }
    Ok(())
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    match a.len() {
        1 => (a[0] - b[0]).abs(),
        _ => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt(),
    }
}

/// One factor of the product kernel, discretized per cell.
///
/// Distinct cells return `|a - b|^(alpha - n)`; the self cell returns the
/// exact cell average `vol^-1 * integral of |t|^(alpha-n)` per `rule`.
pub fn kernel_factor(
    center_a: &[f64],
    center_b: &[f64],
    cell_volume: f64,
    alpha: f64,
    n: u32,
    rule: SelfCellRule,
) -> Result<f64> {
    validate_order(alpha, n, "alpha")?;
    let dist = euclid(center_a, center_b);
    if dist > 0.0 {
        Ok(dist.powf(alpha - n as f64))
    } else {
        let step = cell_volume.powf(1.0 / n as f64);
        self_cell_average(alpha, n, step, rule)
    }
}

/// Cell average of `|t|^(alpha - n)` over the cell of side `step` centered
/// at the singularity.
pub fn self_cell_average(alpha: f64, n: u32, step: f64, rule: SelfCellRule) -> Result<f64> {
    validate_order(alpha, n, "alpha")?;
    match rule {
        SelfCellRule::DropDiagonal => Ok(0.0),
        SelfCellRule::Analytic1d => {
            if n != 1 {
                return Err(Error::InvalidExponent {
                    name: "self_cell_rule",
                    value: n as f64,
                    constraint: "analytic-1d rule requires n = 1".into(),
                });
            }
            // (1/h) * int_{-h/2}^{h/2} |t|^(alpha-1) dt = (1/h) * 2 (h/2)^alpha / alpha
            Ok(2.0 * (step / 2.0).powf(alpha) / (alpha * step))
        }
        SelfCellRule::RefinedSubgrid => {
            if n != 2 {
                return Err(Error::InvalidExponent {
                    name: "self_cell_rule",
                    value: n as f64,
                    constraint: "refined-subgrid rule requires n = 2".into(),
                });
            }
            Ok(refined_subgrid_average(alpha, step))
        }
    }
}

/// 4x4 self-similar refinement for the centered square cell in dimension 2.
fn refined_subgrid_average(alpha: f64, step: f64) -> f64 {
    let exponent = alpha - 2.0;
    let mut integral = 0.0;
    let mut side = step;
    // offsets of the 12 outer subcell centers in units of the subcell side
    const OUTER: [(f64, f64); 12] = [
        (-1.5, -1.5), (-1.5, -0.5), (-1.5, 0.5), (-1.5, 1.5),
        (-0.5, -1.5), (-0.5, 1.5),
        (0.5, -1.5), (0.5, 1.5),
        (1.5, -1.5), (1.5, -0.5), (1.5, 0.5), (1.5, 1.5),
    ];
    for _ in 0..2048 {
        let w = side / 4.0;
        let mut level = 0.0;
        for (ox, oy) in OUTER {
            let r2 = (ox * w).powi(2) + (oy * w).powi(2);
            level += r2.powf(exponent / 2.0) * w * w;
        }
        integral += level;
        if level < 1e-14 * integral {
            break;
        }
        // central 2x2 block is the centered square of half side
        side /= 2.0;
    }
    integral / (step * step)
}

/// The unique cone index `l` with `2^-l <= dx/dy < 2^-(l-1)`.
///
/// Pairs with a vanishing component belong to no cone. Exact at dyadic
/// ratios: the candidate from `ceil(-log2 ratio)` is corrected against the
/// half-open bracket evaluated with exact powers of two.
pub fn cone_index(dx_norm: f64, dy_norm: f64) -> Result<i32> {
    // NaN or zero components belong to no cone
    if !(dx_norm > 0.0 && dy_norm > 0.0) {
        return Err(Error::NotInAnyCone);
    }
    let ratio = dx_norm / dy_norm;
    if !ratio.is_finite() || ratio <= 0.0 {
        return Err(Error::NotInAnyCone);
    }
    let mut ell = (-ratio.log2()).ceil() as i32;
    // fix up floating-point slack at bracket boundaries
    loop {
        if ratio < 2f64.powi(-ell) {
            ell += 1;
        } else if ratio >= 2f64.powi(-ell + 1) {
            ell -= 1;
        } else {
            return Ok(ell);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dyadic-shell quadrature oracle for `int_{-s}^{s} |t|^(alpha-1) dt`,
    /// independent of the closed form: the outermost shell `[s/2, s]` is
    /// integrated by a million-point composite midpoint rule with Richardson
    /// extrapolation, and the scaling `shell_k = 2^(-alpha k) shell_0` sums
    /// the remaining shells as an exact geometric series.
    fn shell_quadrature_1d(alpha: f64, s: f64) -> f64 {
        let f = |t: f64| t.powf(alpha - 1.0);
        let midpoint = |a: f64, b: f64, pts: usize| -> f64 {
            let w = (b - a) / pts as f64;
            (0..pts).map(|i| f(a + (i as f64 + 0.5) * w) * w).sum::<f64>()
        };
        let coarse = midpoint(s / 2.0, s, 500_000);
        let fine = midpoint(s / 2.0, s, 1_000_000);
        let first_shell = (4.0 * fine - coarse) / 3.0;
        2.0 * first_shell / (1.0 - 2f64.powf(-alpha))
    }

    #[test]
    fn analytic_self_cell_matches_example() {
        let v = self_cell_average(0.5, 1, 0.5, SelfCellRule::Analytic1d).unwrap();
        assert!((v - 4.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn analytic_self_cell_matches_shell_oracle() {
        for (alpha, h) in [(0.5, 0.5), (0.25, 0.125), (0.9, 1.0), (0.5, 0.03125)] {
            let analytic = self_cell_average(alpha, 1, h, SelfCellRule::Analytic1d).unwrap();
            let oracle = shell_quadrature_1d(alpha, h / 2.0) / h;
            assert!(
                (analytic - oracle).abs() <= 1e-8 * oracle.abs(),
                "alpha={alpha} h={h}: analytic={analytic} oracle={oracle}"
            );
        }
    }

    #[test]
    fn distinct_cells_use_plain_power() {
        let v = kernel_factor(&[0.25], &[0.75], 0.5, 0.5, 1, SelfCellRule::Analytic1d).unwrap();
        assert!((v - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn order_out_of_range_is_rejected() {
        assert!(kernel_factor(&[0.0], &[1.0], 1.0, 1.5, 1, SelfCellRule::Analytic1d).is_err());
        assert!(self_cell_average(0.0, 1, 1.0, SelfCellRule::Analytic1d).is_err());
        assert!(self_cell_average(2.0, 2, 1.0, SelfCellRule::RefinedSubgrid).is_err());
    }

    #[test]
    fn rule_dimension_mismatch_is_rejected() {
        assert!(self_cell_average(0.5, 2, 1.0, SelfCellRule::Analytic1d).is_err());
        assert!(self_cell_average(0.5, 1, 1.0, SelfCellRule::RefinedSubgrid).is_err());
    }

    #[test]
    fn drop_diagonal_returns_zero() {
        let v = kernel_factor(&[0.25], &[0.25], 0.5, 0.5, 1, SelfCellRule::DropDiagonal).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn symmetry_is_exact() {
        let a = [0.125, -0.375];
        let b = [-0.625, 0.875];
        let ab = kernel_factor(&a, &b, 0.0625, 1.25, 2, SelfCellRule::RefinedSubgrid).unwrap();
        let ba = kernel_factor(&b, &a, 0.0625, 1.25, 2, SelfCellRule::RefinedSubgrid).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn monotone_decreasing_in_distance() {
        let mut prev = f64::INFINITY;
        for k in 1..=16 {
            let v = kernel_factor(&[0.0], &[k as f64 * 0.25], 0.25, 0.5, 1, SelfCellRule::Analytic1d)
                .unwrap();
            assert!(v < prev, "not strictly decreasing at k={k}");
            prev = v;
        }
    }

    /// Dense dyadic-frame oracle for the 2d centered cell average.
    fn dense_2d_average(alpha: f64, step: f64) -> f64 {
        let f = |x: f64, y: f64| (x * x + y * y).powf((alpha - 2.0) / 2.0);
        // integrate over frames between centered squares of sides s and s/2
        let mut total = 0.0;
        let mut side = step;
        for _ in 0..200 {
            let w = side / 4.0;
            let pts = 48usize;
            let sub = w / pts as f64;
            let mut frame = 0.0;
            for (ox, oy) in [
                (-1.5, -1.5,), (-1.5, -0.5), (-1.5, 0.5), (-1.5, 1.5),
                (-0.5, -1.5), (-0.5, 1.5), (0.5, -1.5), (0.5, 1.5),
                (1.5, -1.5), (1.5, -0.5), (1.5, 0.5), (1.5, 1.5),
            ] {
                let cx = ox * w - w / 2.0;
                let cy = oy * w - w / 2.0;
                for i in 0..pts {
                    for j in 0..pts {
                        let x = cx + (i as f64 + 0.5) * sub;
                        let y = cy + (j as f64 + 0.5) * sub;
                        frame += f(x, y) * sub * sub;
                    }
                }
            }
            total += frame;
            if frame < 1e-13 * total {
                break;
            }
            side /= 2.0;
        }
        total / (step * step)
    }

    #[test]
    fn refined_subgrid_tracks_dense_oracle() {
        for (alpha, step) in [(0.5, 0.5), (1.5, 0.25), (1.0, 1.0)] {
            let v = self_cell_average(alpha, 2, step, SelfCellRule::RefinedSubgrid).unwrap();
            let oracle = dense_2d_average(alpha, step);
            let rel = (v - oracle).abs() / oracle;
            assert!(v > 0.0);
            assert!(rel < 0.05, "alpha={alpha} step={step}: v={v} oracle={oracle} rel={rel}");
        }
    }

    #[test]
    fn cone_index_examples() {
        assert_eq!(cone_index(1.0, 1.0).unwrap(), 0);
        assert_eq!(cone_index(0.5, 1.0).unwrap(), 1);
        assert_eq!(cone_index(0.75, 1.0).unwrap(), 1);
        assert_eq!(cone_index(2.0, 1.0).unwrap(), -1);
        assert!(matches!(cone_index(0.0, 1.0), Err(Error::NotInAnyCone)));
        assert!(matches!(cone_index(1.0, 0.0), Err(Error::NotInAnyCone)));
    }

    #[test]
    fn cone_membership_is_exact_at_dyadic_ratios() {
        for k in -20i32..=20 {
            let ratio = 2f64.powi(-k);
            assert_eq!(cone_index(ratio, 1.0).unwrap(), k, "ratio 2^-{k}");
        }
    }

    #[test]
    fn cone_partition_over_8x8_cell_pairs() {
        let g = crate::grid::make_grid(1, 1, 1.0, 1.0, 8, 8).unwrap();
        for ax in 0..8 {
            for bx in 0..8 {
                for ay in 0..8 {
                    for by in 0..8 {
                        let dx = g.distance_x(ax, bx);
                        let dy = g.distance_y(ay, by);
                        if dx == 0.0 || dy == 0.0 {
                            assert!(cone_index(dx, dy).is_err());
                            continue;
                        }
                        let ratio = dx / dy;
                        let members: Vec<i32> = (-24..=24)
                            .filter(|&l| ratio >= 2f64.powi(-l) && ratio < 2f64.powi(-l + 1))
                            .collect();
                        assert_eq!(members.len(), 1, "ratio {ratio}");
                        assert_eq!(cone_index(dx, dy).unwrap(), members[0]);
                    }
                }
            }
        }
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cone_index_satisfies_bracket(dx in 1e-6f64..1e6, dy in 1e-6f64..1e6) {
                let ell = cone_index(dx, dy).unwrap();
                let ratio = dx / dy;
                prop_assert!(ratio >= 2f64.powi(-ell));
                prop_assert!(ratio < 2f64.powi(-ell + 1));
            }

            #[test]
            fn kernel_symmetric(a in -4.0f64..4.0, b in -4.0f64..4.0) {
                let ab = kernel_factor(&[a], &[b], 0.25, 0.5, 1, SelfCellRule::Analytic1d).unwrap();
                let ba = kernel_factor(&[b], &[a], 0.25, 0.5, 1, SelfCellRule::Analytic1d).unwrap();
                prop_assert_eq!(ab, ba);
            }
        }
    }
}
