use serde::{Deserialize, Serialize};

use super::{apply_function_spectral, SpectralFunction};
use crate::lattice_hamiltonian::{restrict_half_plane, OperatorMatrix};
use crate::{Error, Result};

/// Entries at or below this magnitude carry no information about decay.
pub const KERNEL_FLOOR: f64 = 1e-14;

/// Least-squares fits of the kernel envelope `max_{|x−y|=r} |A_xy|`.
///
/// `power_rate` is `p` in `|A| ~ (1+r)^{−p}`, `gaussian_rate` is `g` in
/// `|A| ~ e^{−g r²}`. An operator without off-diagonal entries above the floor
/// is reported as `exact` with infinite rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub power_rate: f64,
    pub power_residual: f64,
    pub gaussian_rate: f64,
    pub gaussian_residual: f64,
    pub exact: bool,
    pub pairs: usize,
    pub envelope: Vec<(f64, f64)>,
}

struct Fit {
    slope: f64,
    residual: f64,
}

fn linear_fit(points: &[(f64, f64)]) -> Fit {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxx, sxy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + (x - mx).powi(2), b + (x - mx) * (y - my)));
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rss: f64 = points.iter().map(|&(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    Fit { slope, residual: (rss / n).sqrt() }
}

/// Envelope of `|values|` grouped by `key`, rounded to `resolution`.
fn envelope(pairs: impl Iterator<Item = (f64, f64)>, resolution: f64) -> Vec<(f64, f64)> {
    let mut bins: std::collections::BTreeMap<i64, (f64, f64)> = Default::default();
    for (key, v) in pairs {
        let slot = bins.entry((key / resolution).round() as i64).or_insert((key, 0.0));
        slot.1 = slot.1.max(v);
    }
    bins.into_values().collect()
}

/// Fit of the off-diagonal decay of `A` over sites at least `margin` rows
/// and columns from artificial boundaries.
pub fn kernel_decay_report(a: &OperatorMatrix, margin: usize) -> Result<DecayReport> {
    let g = &a.geometry;
    let sites = g.interior(margin, true);
    let mut all_below = true;
    let mut pairs = 0;
    let mut raw = Vec::new();
    for &x in &sites {
        for &y in &sites {
            let v = a.entries[[x, y]].norm();
            all_below &= v <= KERNEL_FLOOR;
            if x != y {
                pairs += 1;
                raw.push((g.distance(x, y), v));
            }
        }
    }
    if all_below {
        return Err(Error::DegenerateFit(format!(
            "all {} kernel entries in the window are below {KERNEL_FLOOR:e}",
            sites.len().pow(2)
        )));
    }
    let env = envelope(raw.into_iter(), 1e-6 * g.a());
    let informative: Vec<(f64, f64)> = env.iter().copied().filter(|&(_, v)| v > KERNEL_FLOOR).collect();
    if informative.len() < 2 {
        return Ok(DecayReport {
            power_rate: f64::INFINITY,
            power_residual: 0.0,
            gaussian_rate: f64::INFINITY,
            gaussian_residual: 0.0,
            exact: true,
            pairs,
            envelope: env,
        });
    }
    let power = linear_fit(&informative.iter().map(|&(r, v)| ((1.0 + r).ln(), v.ln())).collect::<Vec<_>>());
    let gauss = linear_fit(&informative.iter().map(|&(r, v)| (r * r, v.ln())).collect::<Vec<_>>());
    Ok(DecayReport {
        power_rate: -power.slope,
        power_residual: power.residual,
        gaussian_rate: -gauss.slope,
        gaussian_residual: gauss.residual,
        exact: false,
        pairs,
        envelope: env,
    })
}

/// Decay of a strip kernel away from the Dirichlet wall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDecayReport {
    /// `(distance to the wall, max |K_xy|)` with the distance taken as
    /// `min(x₂ + s, y₂ + s)`.
    pub profile: Vec<(f64, f64)>,
    /// Non-increasing up to the numerical floor.
    pub monotone: bool,
    /// Slope of `log max|K|` against the distance (positive means decay).
    pub exponential_rate: f64,
}

/// Edge profile of `K` on a Dirichlet strip. Rows within `top_margin` of
/// the artificial top boundary are ignored.
pub fn edge_decay_profile(k: &OperatorMatrix, top_margin: usize) -> Result<EdgeDecayReport> {
    let g = &k.geometry;
    if g.edge_offset().is_none() {
        return Err(Error::Geometry("edge decay needs a Dirichlet strip".into()));
    }
    let rows = g.l2().saturating_sub(top_margin);
    let mut by_row = vec![0.0f64; rows];
    for x in 0..k.dim() {
        for y in 0..k.dim() {
            let r = g.lattice_coords(x)[1].min(g.lattice_coords(y)[1]);
            if g.lattice_coords(x)[1].max(g.lattice_coords(y)[1]) + top_margin < g.l2() {
                by_row[r] = by_row[r].max(k.entries[[x, y]].norm());
            }
        }
    }
    let s = g.edge_offset().unwrap_or(0.0);
    let profile: Vec<(f64, f64)> =
        by_row.iter().enumerate().map(|(r, &v)| (g.origin()[1] + g.a() * r as f64 + s, v)).collect();
    if profile.iter().all(|&(_, v)| v <= KERNEL_FLOOR) {
        return Err(Error::DegenerateFit("edge kernel vanishes identically".into()));
    }
    let monotone = profile.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-9) || w[1].1 <= KERNEL_FLOOR);
    let informative: Vec<(f64, f64)> =
        profile.iter().filter(|&&(_, v)| v > KERNEL_FLOOR).map(|&(d, v)| (d, v.ln())).collect();
    let exponential_rate = if informative.len() >= 2 { -linear_fit(&informative).slope } else { f64::INFINITY };
    Ok(EdgeDecayReport { profile, monotone, exponential_rate })
}

/// `K = F(Ĥ_s) − φ_s F(H) φ_s`: the boundary correction to the functional
/// calculus, both terms through the spectral path.
pub fn boundary_comparison_kernel(
    h_plane: &OperatorMatrix,
    s: f64,
    f: &dyn SpectralFunction,
) -> Result<OperatorMatrix> {
    let h_strip = restrict_half_plane(h_plane, s)?;
    let f_strip = apply_function_spectral(&h_strip, f)?;
    let f_plane = restrict_half_plane(&apply_function_spectral(h_plane, f)?, s)?;
    Ok(f_strip.with_entries(&f_strip.entries - &f_plane.entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_recovers_slope() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        let fit = linear_fit(&pts);
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn envelope_takes_bin_maximum() {
        let env = envelope([(1.0, 0.5), (1.0, 0.7), (2.0, 0.1)].into_iter(), 1e-6);
        assert_eq!(env, vec![(1.0, 0.7), (2.0, 0.1)]);
    }
}
