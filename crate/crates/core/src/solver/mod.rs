//! Majorize–minimize fitting of kernel expectile regression.
//!
//! The objective for intercept `α₀` and coefficients `α` is
//!
//! ```text
//! F(α₀, α) = Σ φ_ω(y_i - α₀ - (Kα)_i) + λ αᵀKα
//! ```
//!
//! Each iteration minimises the quadratic majorizer built from the Lipschitz
//! constant of `φ'_ω`, i.e. `Δ = K_u⁻¹(-λK₀α + ½ Σ φ'(r_i) K_i)`. The
//! objective never increases and the gap shrinks geometrically.

mod ku_inverse;
mod rate;

pub use ku_inverse::{KuInverseFactory, LambdaUpdate, SHERMAN_MORRISON_GUARD};
pub use rate::{curvature_matrix, rate_bound, RATE_PD_FLOOR};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{KereError, Result};
use crate::kernel::GramBundle;
use crate::loss::ExpectileLevel;

/// Relative objective gap below which contraction ratios are not recorded;
/// smaller gaps are dominated by rounding in `F`.
pub const RATIO_GAP_FLOOR: f64 = 1e-5;

/// Intercept and kernel coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub intercept: f64,
    pub alpha: DVector<f64>,
}

impl Coefficients {
    pub fn zeros(n: usize) -> Self {
        Coefficients {
            intercept: 0.0,
            alpha: DVector::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// `α₀ + Kα` for a (cross-)Gram matrix with one row per evaluation point.
    pub fn predict(&self, gram: &nalgebra::DMatrix<f64>) -> DVector<f64> {
        (gram * &self.alpha).add_scalar(self.intercept)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Stopping tolerance; `None` means `1e-8 (1 + ‖y‖∞)`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    /// Compute the `O(n³)` worst-case rate `Γ`.
    pub rate_bound: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: None,
            max_iter: 100,
            rate_bound: false,
        }
    }
}

impl FitOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = Some(tol);
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_rate_bound(mut self, on: bool) -> Self {
        self.rate_bound = on;
        self
    }

    pub fn resolved_tol(&self, y: &DVector<f64>) -> f64 {
        self.tol.unwrap_or_else(|| 1e-8 * (1.0 + y.amax()))
    }

    fn validate(&self) -> Result<()> {
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(KereError::param(
                    "tol",
                    format!("must be positive, got {t}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// `F` at the start and after every update.
    pub objective_trace: Vec<f64>,
    /// `(F_{k+1} - F̂) / (F_k - F̂)` with `F̂` the final objective, recorded while
    /// the gap is resolvable.
    pub contraction_ratios: Vec<f64>,
    pub rate_bound: Option<f64>,
    /// Number of updates applied.
    pub iterations: usize,
    pub converged: bool,
    /// Scaled optimality certificate at the returned coefficients.
    pub stationarity_residual: f64,
    pub tol: f64,
}

impl FitDiagnostics {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }

    /// Largest recorded contraction ratio.
    pub fn max_contraction(&self) -> Option<f64> {
        self.contraction_ratios.iter().copied().reduce(f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub coefficients: Coefficients,
    pub diagnostics: FitDiagnostics,
}

fn check_lengths(bundle: &GramBundle, y: &DVector<f64>, coef: Option<&Coefficients>) -> Result<()> {
    let n = bundle.n();
    if y.len() != n {
        return Err(KereError::DimensionMismatch {
            context: "response",
            expected: n,
            actual: y.len(),
        });
    }
    if let Some(c) = coef {
        if c.len() != n {
            return Err(KereError::DimensionMismatch {
                context: "coefficients",
                expected: n,
                actual: c.len(),
            });
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(KereError::NonFinite("response"));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(KereError::param(
            "lambda",
            format!("must be positive, got {lambda}"),
        ))
    }
}

/// `r = y - α₀ - Kα`.
pub fn residuals(
    coef: &Coefficients,
    bundle: &GramBundle,
    y: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_lengths(bundle, y, Some(coef))?;
    Ok(y - coef.predict(bundle.gram()))
}

fn objective_parts(
    resid: &DVector<f64>,
    alpha: &DVector<f64>,
    k_alpha: &DVector<f64>,
    level: ExpectileLevel,
    lambda: f64,
) -> f64 {
    resid.iter().map(|&r| level.loss(r)).sum::<f64>() + lambda * alpha.dot(k_alpha)
}

/// `F(α₀, α) = Σ φ_ω(r_i) + λ αᵀKα`.
pub fn objective(
    coef: &Coefficients,
    bundle: &GramBundle,
    y: &DVector<f64>,
    level: ExpectileLevel,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    check_lengths(bundle, y, Some(coef))?;
    let k_alpha = bundle.gram() * &coef.alpha;
    let resid = y - k_alpha.add_scalar(coef.intercept);
    Ok(objective_parts(
        &resid,
        &coef.alpha,
        &k_alpha,
        level,
        lambda,
    ))
}

fn certificate_parts(alpha: &DVector<f64>, dphi: &DVector<f64>, lambda: f64, scale: f64) -> f64 {
    let station = alpha
        .iter()
        .zip(dphi.iter())
        .map(|(a, g)| (2.0 * lambda * a - g).abs())
        .fold(0.0, f64::max);
    station.max(2.0 * lambda * alpha.sum().abs()) / scale
}

/// `max(max_i |2λα_i - φ'(r_i)|, 2λ|Σα_i|) / (1 + ‖y‖∞)`.
///
/// Zero exactly at the minimiser of `F` (for any Gram matrix, the canonical
/// representative with `2λα = φ'(r)`).
pub fn optimality_certificate(
    coef: &Coefficients,
    bundle: &GramBundle,
    y: &DVector<f64>,
    level: ExpectileLevel,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    let resid = residuals(coef, bundle, y)?;
    let dphi = resid.map(|r| level.derivative(r));
    Ok(certificate_parts(
        &coef.alpha,
        &dphi,
        lambda,
        1.0 + y.amax(),
    ))
}

/// Dual objective `-Σ y_i α_i + ½ αᵀKα + 2λ Σ φ*_ω(α_i)` under `Σα = 0`.
///
/// At the optimum its minimum equals `-F̂ / (2λ)`.
pub fn dual_objective(
    alpha: &DVector<f64>,
    bundle: &GramBundle,
    y: &DVector<f64>,
    level: ExpectileLevel,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    check_lengths(bundle, y, None)?;
    if alpha.len() != bundle.n() {
        return Err(KereError::DimensionMismatch {
            context: "dual coefficients",
            expected: bundle.n(),
            actual: alpha.len(),
        });
    }
    let sum = alpha.sum();
    if sum.abs() > 1e-8 {
        return Err(KereError::DualConstraint(sum));
    }
    let quad = 0.5 * alpha.dot(&(bundle.gram() * alpha));
    let conj: f64 = alpha.iter().map(|&a| level.conjugate(a)).sum();
    Ok(-y.dot(alpha) + quad + 2.0 * lambda * conj)
}

/// One MM update from `coef` given its residuals.
pub fn mm_step(
    coef: &Coefficients,
    resid: &DVector<f64>,
    update: &LambdaUpdate<'_, '_>,
) -> Coefficients {
    let level = update.level();
    let dphi = resid.map(|r| level.derivative(r));
    let (d0, d) = update.displacement(&coef.alpha, &dphi);
    Coefficients {
        intercept: coef.intercept + d0,
        alpha: &coef.alpha + d,
    }
}

/// Fit at a single λ starting from `init`.
///
/// Requires an eigendecomposed bundle. Stops once both the largest update
/// and the optimality certificate are at most `tol`; running out of
/// iterations is reported through `converged = false`, not as an error.
pub fn fit(
    bundle: &GramBundle,
    y: &DVector<f64>,
    level: ExpectileLevel,
    lambda: f64,
    init: &Coefficients,
    options: &FitOptions,
) -> Result<Fit> {
    let factory = KuInverseFactory::new(bundle, level)?;
    fit_with(&factory, y, lambda, init, options)
}

/// [`fit`] reusing the λ-independent cache of a factory.
pub fn fit_with(
    factory: &KuInverseFactory<'_>,
    y: &DVector<f64>,
    lambda: f64,
    init: &Coefficients,
    options: &FitOptions,
) -> Result<Fit> {
    options.validate()?;
    check_lambda(lambda)?;
    check_lengths(factory.bundle(), y, Some(init))?;
    let update = factory.at(lambda)?;
    run_mm(
        factory.bundle(),
        factory.level(),
        y,
        lambda,
        init,
        options,
        |a, g| update.displacement(a, g),
    )
}

/// [`fit`] with the update applied through a freshly inverted dense `K_u(λ)`.
///
/// Reference implementation; only sensible on well-conditioned Gram matrices.
pub fn fit_dense_reference(
    bundle: &GramBundle,
    y: &DVector<f64>,
    level: ExpectileLevel,
    lambda: f64,
    init: &Coefficients,
    options: &FitOptions,
) -> Result<Fit> {
    options.validate()?;
    check_lambda(lambda)?;
    check_lengths(bundle, y, Some(init))?;
    let gram = bundle.gram();
    let n = bundle.n();
    let ku_inv = curvature_matrix(gram, level.weight_max(), lambda)
        .try_inverse()
        .ok_or_else(|| KereError::Singular("K_u".into()))?;
    run_mm(bundle, level, y, lambda, init, options, |alpha, dphi| {
        let mut rhs = DVector::zeros(n + 1);
        rhs[0] = 0.5 * dphi.sum();
        rhs.rows_mut(1, n)
            .copy_from(&(gram * (dphi * 0.5 - alpha * lambda)));
        let step = &ku_inv * rhs;
        (step[0], step.rows(1, n).into_owned())
    })
}

fn run_mm<F>(
    bundle: &GramBundle,
    level: ExpectileLevel,
    y: &DVector<f64>,
    lambda: f64,
    init: &Coefficients,
    options: &FitOptions,
    displacement: F,
) -> Result<Fit>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> (f64, DVector<f64>),
{
    let gram = bundle.gram();
    let tol = options.resolved_tol(y);
    let scale = 1.0 + y.amax();

    let mut coef = init.clone();
    let mut k_alpha = gram * &coef.alpha;
    let mut resid = y - k_alpha.add_scalar(coef.intercept);
    let mut trace = vec![objective_parts(
        &resid,
        &coef.alpha,
        &k_alpha,
        level,
        lambda,
    )];
    let mut converged = false;
    let mut iterations = 0;
    let mut certificate;

    loop {
        let dphi = resid.map(|r| level.derivative(r));
        certificate = certificate_parts(&coef.alpha, &dphi, lambda, scale);
        let (d0, d) = displacement(&coef.alpha, &dphi);
        let step = d.amax().max(d0.abs());
        if !step.is_finite() {
            return Err(KereError::NonFinite("MM update"));
        }
        if step <= tol && certificate <= tol {
            converged = true;
            break;
        }
        if iterations == options.max_iter {
            log::debug!("no convergence after {iterations} iterations at λ = {lambda:e}");
            break;
        }
        coef.intercept += d0;
        coef.alpha += d;
        k_alpha = gram * &coef.alpha;
        resid = y - k_alpha.add_scalar(coef.intercept);
        trace.push(objective_parts(
            &resid,
            &coef.alpha,
            &k_alpha,
            level,
            lambda,
        ));
        iterations += 1;
    }

    let rate = if options.rate_bound {
        match rate_bound(bundle, level, lambda) {
            Ok(g) => Some(g),
            Err(e) => {
                log::debug!("rate bound unavailable: {e}");
                None
            }
        }
    } else {
        None
    };

    let diagnostics = FitDiagnostics {
        contraction_ratios: contraction_ratios(&trace),
        objective_trace: trace,
        rate_bound: rate,
        iterations,
        converged,
        stationarity_residual: certificate,
        tol,
    };
    Ok(Fit {
        coefficients: coef,
        diagnostics,
    })
}

/// Ratios of successive gaps to the last objective value, skipping gaps
/// below the resolution floor.
pub fn contraction_ratios(trace: &[f64]) -> Vec<f64> {
    let Some(&last) = trace.last() else {
        return Vec::new();
    };
    let floor = RATIO_GAP_FLOOR * (1.0 + last.abs());
    trace
        .windows(2)
        .filter(|w| w[0] - last > floor && w[1] - last > floor)
        .map(|w| (w[1] - last) / (w[0] - last))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::kernel::{gram_matrix, KernelSpec};

    fn lv(w: f64) -> ExpectileLevel {
        ExpectileLevel::new(w).unwrap()
    }

    fn problem(n: usize, seed: u64) -> (GramBundle, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-3.0f64..3.0));
        let y = DVector::from_fn(n, |i, _| x[(i, 0)].sin() + rng.random_range(-0.5..0.5));
        let bundle = gram_matrix(&KernelSpec::rbf(1.0).unwrap(), &x).unwrap();
        (bundle.eigendecompose().unwrap(), y)
    }

    #[test]
    fn single_point_closed_form() {
        let bundle = GramBundle::from_gram(DMatrix::from_element(1, 1, 1.0))
            .unwrap()
            .eigendecompose()
            .unwrap();
        let y = DVector::from_element(1, 3.0);
        let fit = fit(
            &bundle,
            &y,
            lv(0.5),
            1.0,
            &Coefficients::zeros(1),
            &FitOptions::default(),
        )
        .unwrap();
        assert!((fit.coefficients.intercept - 3.0).abs() < 1e-12);
        assert!(fit.coefficients.alpha[0].abs() < 1e-12);
        assert!(fit.diagnostics.final_objective().abs() < 1e-20);
    }

    #[test]
    fn half_level_converges_in_one_step() {
        let (bundle, y) = problem(20, 1);
        let fit = fit(
            &bundle,
            &y,
            lv(0.5),
            0.1,
            &Coefficients::zeros(20),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(fit.diagnostics.converged);
        assert_eq!(fit.diagnostics.iterations, 1);
    }

    #[test]
    fn objective_is_monotone() {
        let (bundle, y) = problem(30, 2);
        for w in [0.05, 0.3, 0.9] {
            let fit = fit(
                &bundle,
                &y,
                lv(w),
                0.05,
                &Coefficients::zeros(30),
                &FitOptions::default().with_max_iter(60),
            )
            .unwrap();
            let t = &fit.diagnostics.objective_trace;
            for k in 1..t.len() {
                assert!(t[k] <= t[k - 1] + 1e-12 * (1.0 + t[k - 1].abs()));
            }
        }
    }

    #[test]
    fn converged_fit_satisfies_stationarity_and_duality() {
        let (bundle, y) = problem(25, 3);
        let level = lv(0.8);
        let lambda = 0.2;
        let fit = fit(
            &bundle,
            &y,
            level,
            lambda,
            &Coefficients::zeros(25),
            &FitOptions::default().with_max_iter(2000),
        )
        .unwrap();
        assert!(fit.diagnostics.converged);
        let c = &fit.coefficients;
        assert!(
            optimality_certificate(c, &bundle, &y, level, lambda).unwrap() <= fit.diagnostics.tol
        );
        let f_hat = fit.diagnostics.final_objective();
        let mut alpha = c.alpha.clone();
        alpha.add_scalar_mut(-alpha.mean());
        let dual = dual_objective(&alpha, &bundle, &y, level, lambda).unwrap();
        assert!((dual + f_hat / (2.0 * lambda)).abs() < 1e-6 * (1.0 + f_hat));
    }

    #[test]
    fn constant_response_gives_intercept_only() {
        let (bundle, _) = problem(15, 4);
        let y = DVector::from_element(15, 2.5);
        let fit = fit(
            &bundle,
            &y,
            lv(0.1),
            1.0,
            &Coefficients::zeros(15),
            &FitOptions::default().with_max_iter(5000),
        )
        .unwrap();
        assert!(fit.diagnostics.converged);
        assert!((fit.coefficients.intercept - 2.5).abs() < 1e-6);
        assert!(fit.coefficients.alpha.amax() < 1e-6);
        assert!(fit.diagnostics.final_objective() < 1e-10);
    }

    #[test]
    fn dual_rejects_unbalanced_coefficients() {
        let (bundle, y) = problem(5, 5);
        let alpha = DVector::from_element(5, 0.1);
        assert!(matches!(
            dual_objective(&alpha, &bundle, &y, lv(0.5), 1.0),
            Err(KereError::DualConstraint(_))
        ));
    }

    #[test]
    fn bad_inputs_error() {
        let (bundle, y) = problem(5, 6);
        let init = Coefficients::zeros(5);
        let opts = FitOptions::default();
        assert!(fit(&bundle, &y, lv(0.5), 0.0, &init, &opts).is_err());
        assert!(fit(
            &bundle,
            &y.rows(0, 4).into_owned(),
            lv(0.5),
            1.0,
            &init,
            &opts
        )
        .is_err());
        let undecomposed = GramBundle::from_gram(bundle.gram().clone()).unwrap();
        assert!(matches!(
            fit(&undecomposed, &y, lv(0.5), 1.0, &init, &opts),
            Err(KereError::NotDecomposed)
        ));
    }

    #[test]
    fn non_convergence_is_flagged() {
        let (bundle, y) = problem(30, 7);
        let fit = fit(
            &bundle,
            &y,
            lv(0.02),
            1e-3,
            &Coefficients::zeros(30),
            &FitOptions::default().with_max_iter(2),
        )
        .unwrap();
        assert!(!fit.diagnostics.converged);
        assert_eq!(fit.diagnostics.iterations, 2);
    }

    #[test]
    fn ratios_respect_rate_bound() {
        let (bundle, y) = problem(12, 8);
        let level = lv(0.2);
        let fit = fit(
            &bundle,
            &y,
            level,
            0.5,
            &Coefficients::zeros(12),
            &FitOptions::default()
                .with_max_iter(3000)
                .with_rate_bound(true),
        )
        .unwrap();
        if let Some(gamma) = fit.diagnostics.rate_bound {
            for r in &fit.diagnostics.contraction_ratios {
                assert!(*r <= gamma + 1e-9, "{r} > {gamma}");
            }
        }
    }
}
