use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use super::ExpectileLevel;
use crate::error::{KereError, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// One component of a Gaussian mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Scalar laws used for noise terms and for population expectiles.
///
/// Every family except [`ScalarDistribution::Density`] has closed-form partial
/// moments `E(Y - b)₊`; a bare density falls back to adaptive quadrature.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScalarDistribution {
    Normal {
        mean: f64,
        sd: f64,
    },
    NormalMixture {
        components: Vec<MixtureComponent>,
    },
    StudentT {
        df: f64,
    },
    Laplace {
        location: f64,
        scale: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    Discrete {
        points: Vec<f64>,
        weights: Vec<f64>,
    },
    /// A density known only pointwise. `mean` and `sd` seed the root bracket
    /// and the integration window.
    #[serde(skip)]
    Density {
        pdf: fn(f64) -> f64,
        mean: f64,
        sd: f64,
    },
}

impl PartialEq for ScalarDistribution {
    fn eq(&self, other: &Self) -> bool {
        use ScalarDistribution::*;
        match (self, other) {
            (Normal { mean: a, sd: b }, Normal { mean: c, sd: d }) => a == c && b == d,
            (NormalMixture { components: a }, NormalMixture { components: b }) => a == b,
            (StudentT { df: a }, StudentT { df: b }) => a == b,
            (
                Laplace {
                    location: a,
                    scale: b,
                },
                Laplace {
                    location: c,
                    scale: d,
                },
            ) => a == c && b == d,
            (Uniform { low: a, high: b }, Uniform { low: c, high: d }) => a == c && b == d,
            (
                Discrete {
                    points: a,
                    weights: b,
                },
                Discrete {
                    points: c,
                    weights: d,
                },
            ) => a == c && b == d,
            // Identity of the density function, not of the law it describes.
            (
                Density {
                    pdf: f,
                    mean: a,
                    sd: b,
                },
                Density {
                    pdf: g,
                    mean: c,
                    sd: d,
                },
            ) => std::ptr::fn_addr_eq(*f, *g) && a == c && b == d,
            _ => false,
        }
    }
}

impl ScalarDistribution {
    pub fn normal(mean: f64, variance: f64) -> Result<Self> {
        if !(variance >= 0.0) || !mean.is_finite() || !variance.is_finite() {
            return Err(KereError::param("variance", format!("{variance}")));
        }
        Ok(ScalarDistribution::Normal {
            mean,
            sd: variance.sqrt(),
        })
    }

    /// Gaussian mixture from `(weight, mean, variance)` triples.
    pub fn normal_mixture(parts: &[(f64, f64, f64)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(KereError::param("components", "empty mixture"));
        }
        let total: f64 = parts.iter().map(|p| p.0).sum();
        if !(total > 0.0) || parts.iter().any(|p| p.0 < 0.0 || p.2 < 0.0) {
            return Err(KereError::param(
                "components",
                "weights and variances must be nonnegative",
            ));
        }
        Ok(ScalarDistribution::NormalMixture {
            components: parts
                .iter()
                .map(|&(w, m, v)| MixtureComponent {
                    weight: w / total,
                    mean: m,
                    sd: v.sqrt(),
                })
                .collect(),
        })
    }

    pub fn student_t(df: f64) -> Result<Self> {
        if !(df > 2.0) {
            return Err(KereError::param(
                "df",
                "a finite second moment needs df > 2",
            ));
        }
        Ok(ScalarDistribution::StudentT { df })
    }

    pub fn laplace(location: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(KereError::param("scale", format!("{scale}")));
        }
        Ok(ScalarDistribution::Laplace { location, scale })
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        if !(high > low) {
            return Err(KereError::param("high", "uniform needs low < high"));
        }
        Ok(ScalarDistribution::Uniform { low, high })
    }

    /// Empirical law of `points` with equal mass.
    pub fn empirical(points: &[f64]) -> Result<Self> {
        Self::discrete(points, &vec![1.0; points.len()])
    }

    pub fn discrete(points: &[f64], weights: &[f64]) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(KereError::param(
                "points",
                "need matching non-empty points and weights",
            ));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(KereError::param(
                "weights",
                "must be nonnegative with positive sum",
            ));
        }
        Ok(ScalarDistribution::Discrete {
            points: points.to_vec(),
            weights: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn point_mass(value: f64) -> Self {
        ScalarDistribution::Discrete {
            points: vec![value],
            weights: vec![1.0],
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ScalarDistribution::Normal { mean, .. } => *mean,
            ScalarDistribution::NormalMixture { components } => {
                components.iter().map(|c| c.weight * c.mean).sum()
            }
            ScalarDistribution::StudentT { .. } => 0.0,
            ScalarDistribution::Laplace { location, .. } => *location,
            ScalarDistribution::Uniform { low, high } => 0.5 * (low + high),
            ScalarDistribution::Discrete { points, weights } => {
                points.iter().zip(weights).map(|(p, w)| p * w).sum()
            }
            ScalarDistribution::Density { mean, .. } => *mean,
        }
    }

    pub fn sd(&self) -> f64 {
        let var = match self {
            ScalarDistribution::Normal { sd, .. } => sd * sd,
            ScalarDistribution::NormalMixture { components } => {
                let m = self.mean();
                components
                    .iter()
                    .map(|c| c.weight * (c.sd * c.sd + (c.mean - m).powi(2)))
                    .sum()
            }
            ScalarDistribution::StudentT { df } => df / (df - 2.0),
            ScalarDistribution::Laplace { scale, .. } => 2.0 * scale * scale,
            ScalarDistribution::Uniform { low, high } => (high - low).powi(2) / 12.0,
            ScalarDistribution::Discrete { points, weights } => {
                let m = self.mean();
                points
                    .iter()
                    .zip(weights)
                    .map(|(p, w)| w * (p - m).powi(2))
                    .sum()
            }
            ScalarDistribution::Density { sd, .. } => sd * sd,
        };
        var.sqrt()
    }

    /// `(E(Y - b)₊, E(b - Y)₊)`.
    pub fn partial_moments(&self, b: f64) -> (f64, f64) {
        match self {
            ScalarDistribution::Normal { mean, sd } => normal_partial(*mean, *sd, b),
            ScalarDistribution::NormalMixture { components } => {
                components.iter().fold((0.0, 0.0), |(up, down), c| {
                    let (u, d) = normal_partial(c.mean, c.sd, b);
                    (up + c.weight * u, down + c.weight * d)
                })
            }
            ScalarDistribution::StudentT { df } => {
                // ∫_b^∞ y f(y) dy = (ν + b²) f(b) / (ν - 1) for the standard t law.
                let t = StudentsT::new(0.0, 1.0, *df).expect("validated df");
                let upper = (df + b * b) / (df - 1.0) * t.pdf(b) - b * t.sf(b);
                (upper, upper + b)
            }
            ScalarDistribution::Laplace { location, scale } => {
                let z = (b - location) / scale;
                if z >= 0.0 {
                    let upper = 0.5 * scale * (-z).exp();
                    (upper, upper + b - location)
                } else {
                    let lower = 0.5 * scale * z.exp();
                    (lower + location - b, lower)
                }
            }
            ScalarDistribution::Uniform { low, high } => {
                let width = high - low;
                if b <= *low {
                    (0.5 * (low + high) - b, 0.0)
                } else if b >= *high {
                    (0.0, b - 0.5 * (low + high))
                } else {
                    (
                        (high - b).powi(2) / (2.0 * width),
                        (b - low).powi(2) / (2.0 * width),
                    )
                }
            }
            ScalarDistribution::Discrete { points, weights } => points
                .iter()
                .zip(weights)
                .fold((0.0, 0.0), |(up, down), (p, w)| {
                    (up + w * (p - b).max(0.0), down + w * (b - p).max(0.0))
                }),
            ScalarDistribution::Density { pdf, mean, sd } => {
                let reach = 40.0 * sd.max(f64::MIN_POSITIVE);
                let (lo, hi) = (mean - reach, mean + reach);
                let upper = if b < hi {
                    adaptive_simpson(&|y| (y - b) * pdf(y), b.max(lo), hi, 1e-9)
                } else {
                    0.0
                };
                let lower = if b > lo {
                    adaptive_simpson(&|y| (b - y) * pdf(y), lo, b.min(hi), 1e-9)
                } else {
                    0.0
                };
                (upper, lower)
            }
        }
    }

    /// First-order condition of the expectile, `ω E(Y-b)₊ - (1-ω) E(b-Y)₊`,
    /// which is strictly decreasing in `b`.
    pub fn expectile_condition(&self, level: ExpectileLevel, b: f64) -> f64 {
        let (up, down) = self.partial_moments(b);
        level.omega() * up - (1.0 - level.omega()) * down
    }

    /// The `ω`-expectile: the root of [`expectile_condition`](Self::expectile_condition),
    /// found by bisection until the condition is within `tol` of zero.
    pub fn expectile(&self, level: ExpectileLevel, tol: f64) -> Result<f64> {
        let center = self.mean();
        let spread = self.sd();
        if !center.is_finite() || !spread.is_finite() {
            return Err(KereError::DegenerateDistribution(format!(
                "mean {center}, sd {spread}"
            )));
        }
        let h = |b: f64| self.expectile_condition(level, b);
        let mut width = if spread > 0.0 { 10.0 * spread } else { 1.0 };
        let (mut lo, mut hi) = (center - width, center + width);
        let mut expansions = 0;
        loop {
            let (hl, hh) = (h(lo), h(hi));
            if hl.is_nan() || hh.is_nan() {
                return Err(KereError::DegenerateDistribution("condition is NaN".into()));
            }
            if hl >= 0.0 && hh <= 0.0 {
                break;
            }
            expansions += 1;
            if expansions > 64 {
                return Err(KereError::DegenerateDistribution(format!(
                    "no sign change on [{lo}, {hi}]"
                )));
            }
            width *= 2.0;
            if hl < 0.0 {
                lo = center - width;
            }
            if hh > 0.0 {
                hi = center + width;
            }
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            let hm = h(mid);
            if hm.abs() <= tol || hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
                return Ok(mid);
            }
            if hm > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// A prepared sampler. Bare densities cannot be sampled.
    pub fn sampler(&self) -> Result<Sampler> {
        let kind = match self {
            ScalarDistribution::Normal { mean, sd } => SamplerKind::Normal {
                mean: *mean,
                sd: *sd,
            },
            ScalarDistribution::NormalMixture { components } => SamplerKind::Mixture {
                cumulative: cumulative(components.iter().map(|c| c.weight)),
                components: components.clone(),
            },
            ScalarDistribution::StudentT { df } => SamplerKind::StudentT {
                df: *df,
                law: StudentsT::new(0.0, 1.0, *df)
                    .map_err(|e| KereError::param("df", e.to_string()))?,
            },
            ScalarDistribution::Laplace { location, scale } => SamplerKind::Laplace {
                location: *location,
                scale: *scale,
            },
            ScalarDistribution::Uniform { low, high } => SamplerKind::Uniform {
                low: *low,
                high: *high,
            },
            ScalarDistribution::Discrete { points, weights } => SamplerKind::Discrete {
                cumulative: cumulative(weights.iter().copied()),
                points: points.clone(),
            },
            ScalarDistribution::Density { .. } => {
                return Err(KereError::Unsupported(
                    "a density-only distribution cannot be sampled".into(),
                ))
            }
        };
        Ok(Sampler { kind })
    }
}

fn normal_partial(mean: f64, sd: f64, b: f64) -> (f64, f64) {
    if sd == 0.0 {
        return ((mean - b).max(0.0), (b - mean).max(0.0));
    }
    let z = (b - mean) / sd;
    let pdf = INV_SQRT_2PI * (-0.5 * z * z).exp();
    let cdf = 0.5 * erfc(-z / std::f64::consts::SQRT_2);
    let sf = 0.5 * erfc(z / std::f64::consts::SQRT_2);
    ((mean - b) * sf + sd * pdf, (b - mean) * cdf + sd * pdf)
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    // Split first so narrow bumps inside a wide window are not missed.
    let pieces = 64;
    let step = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let lo = a + k as f64 * step;
            let hi = if k + 1 == pieces { b } else { lo + step };
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = simpson(fa, fm, fb, lo, hi);
            recurse(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 40)
        })
        .sum()
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Normal {
        mean: f64,
        sd: f64,
    },
    Mixture {
        cumulative: Vec<f64>,
        components: Vec<MixtureComponent>,
    },
    StudentT {
        df: f64,
        law: StudentsT,
    },
    Laplace {
        location: f64,
        scale: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    Discrete {
        cumulative: Vec<f64>,
        points: Vec<f64>,
    },
}

/// Draws from a [`ScalarDistribution`]. The t and Laplace families use the
/// inverse CDF of a single uniform draw, so streams are reproducible from the seed.
#[derive(Debug, Clone)]
pub struct Sampler {
    kind: SamplerKind,
}

impl Sampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            SamplerKind::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            SamplerKind::Mixture {
                cumulative,
                components,
            } => {
                let u: f64 = rng.random();
                let c = &components[cumulative.partition_point(|&w| w <= u)];
                let z: f64 = StandardNormal.sample(rng);
                c.mean + c.sd * z
            }
            SamplerKind::StudentT { df, law } => {
                let u = open_unit(rng);
                if *df == 4.0 {
                    t4_quantile(u)
                } else {
                    law.inverse_cdf(u)
                }
            }
            SamplerKind::Laplace { location, scale } => {
                let u = open_unit(rng) - 0.5;
                location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            SamplerKind::Uniform { low, high } => {
                let u: f64 = rng.random();
                low + (high - low) * u
            }
            SamplerKind::Discrete { cumulative, points } => {
                let u: f64 = rng.random();
                points[cumulative.partition_point(|&w| w <= u)]
            }
        }
    }

    pub fn draw_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Closed-form quantile of Student's t with four degrees of freedom.
pub(crate) fn t4_quantile(p: f64) -> f64 {
    let alpha = 4.0 * p * (1.0 - p);
    let root = alpha.sqrt();
    let q = ((root.acos()) / 3.0).cos() / root;
    (p - 0.5).signum() * 2.0 * (q - 1.0).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lv(w: f64) -> ExpectileLevel {
        ExpectileLevel::new(w).unwrap()
    }

    #[test]
    fn standard_normal_center() {
        let d = ScalarDistribution::normal(0.0, 1.0).unwrap();
        assert!(d.expectile(lv(0.5), 1e-10).unwrap().abs() < 1e-9);
    }

    #[test]
    fn two_point_mean() {
        let d = ScalarDistribution::empirical(&[0.0, 1.0]).unwrap();
        assert!((d.expectile(lv(0.5), 1e-10).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn point_mass_expectile_is_the_point() {
        let d = ScalarDistribution::point_mass(3.25);
        for w in [0.05, 0.5, 0.95] {
            assert!((d.expectile(lv(w), 1e-12).unwrap() - 3.25).abs() < 1e-9);
        }
    }

    #[test]
    fn t4_quantile_matches_statrs() {
        let law = StudentsT::new(0.0, 1.0, 4.0).unwrap();
        for p in [1e-6, 0.01, 0.2, 0.5, 0.7, 0.99, 1.0 - 1e-6] {
            let a = t4_quantile(p);
            assert!((law.cdf(a) - p).abs() < 1e-10, "p={p}");
        }
    }

    #[test]
    fn analytic_partial_moments_match_quadrature() {
        fn mixture_pdf(y: f64) -> f64 {
            let n = |m: f64, s: f64| INV_SQRT_2PI / s * (-0.5 * ((y - m) / s).powi(2)).exp();
            0.5 * n(0.0, 0.5) + 0.5 * n(1.0, 0.25)
        }
        let analytic =
            ScalarDistribution::normal_mixture(&[(0.5, 0.0, 0.25), (0.5, 1.0, 1.0 / 16.0)])
                .unwrap();
        let numeric = ScalarDistribution::Density {
            pdf: mixture_pdf,
            mean: analytic.mean(),
            sd: analytic.sd(),
        };
        for b in [-1.0, 0.0, 0.3, 0.9, 2.0] {
            let (ua, da) = analytic.partial_moments(b);
            let (un, dn) = numeric.partial_moments(b);
            assert!((ua - un).abs() < 1e-8 && (da - dn).abs() < 1e-8, "b={b}");
        }
        for w in [0.1, 0.8] {
            let a = analytic.expectile(lv(w), 1e-10).unwrap();
            let n = numeric.expectile(lv(w), 1e-10).unwrap();
            assert!((a - n).abs() < 1e-7);
        }
    }

    #[test]
    fn laplace_and_t_partial_moments_are_consistent() {
        // E(Y-b)₊ - E(b-Y)₊ = E[Y] - b for every law.
        for d in [
            ScalarDistribution::laplace(0.3, 1.5).unwrap(),
            ScalarDistribution::student_t(4.0).unwrap(),
            ScalarDistribution::uniform(-1.0, 3.0).unwrap(),
        ] {
            for b in [-4.0, -0.5, 0.0, 0.7, 5.0] {
                let (u, l) = d.partial_moments(b);
                assert!((u - l - (d.mean() - b)).abs() < 1e-12, "{d:?} b={b}");
                assert!(u >= 0.0 && l >= 0.0);
            }
        }
    }

    #[test]
    fn expectile_monotone_in_level() {
        let d = ScalarDistribution::laplace(0.0, 1.0).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 1..20 {
            let b = d.expectile(lv(k as f64 / 20.0), 1e-10).unwrap();
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn sampler_is_deterministic_under_seed() {
        let d = ScalarDistribution::student_t(4.0).unwrap();
        let s = d.sampler().unwrap();
        let a = s.draw_n(&mut ChaCha8Rng::seed_from_u64(11), 50);
        let b = s.draw_n(&mut ChaCha8Rng::seed_from_u64(11), 50);
        assert_eq!(a, b);
    }

    #[test]
    fn laplace_sampler_has_unit_scale_moments() {
        let s = ScalarDistribution::laplace(0.0, 1.0)
            .unwrap()
            .sampler()
            .unwrap();
        let draws = s.draw_n(&mut ChaCha8Rng::seed_from_u64(3), 200_000);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() < 0.02);
        assert!((var - 2.0).abs() < 0.05);
    }

    #[test]
    fn density_cannot_be_sampled() {
        let d = ScalarDistribution::Density {
            pdf: |_| 0.0,
            mean: 0.0,
            sd: 1.0,
        };
        assert!(d.sampler().is_err());
    }
}
