//! Exceedance curves, polynomial fitting and inflection-based threshold
//! selection.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lstsq_qr, Matrix};

pub const DEFAULT_DEGREE: usize = 7;
pub const MIN_DEGREE: usize = 3;
pub const MAX_DEGREE: usize = 11;
pub const GRID_STEP: f64 = 0.01;
const BISECT_TOL: f64 = 1e-8;
const SCAN_POINTS: usize = 4000;

/// `[lo, hi)` in steps of 0.01, generated by index to avoid drift.
pub fn grid(lo: f64, hi: f64) -> Vec<f64> {
    let n = ((hi - lo) / GRID_STEP).round() as usize;
    (0..n).map(|i| lo + i as f64 * GRID_STEP).collect()
}

/// Grid for presentation and response distance.
pub fn distance_grid() -> Vec<f64> {
    grid(0.0, 2.0)
}

/// Grid for the engaged-user fraction.
pub fn fraction_grid() -> Vec<f64> {
    grid(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ratio {
    /// D_δ / D
    DisputedOverDisputed,
    /// D_δ / E_δ
    DisputedOverEntities,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceCurve {
    pub grid: Vec<f64>,
    pub ratio_dd: Vec<f64>,
    /// `None` where no entity reaches δ.
    pub ratio_de: Vec<Option<f64>>,
    /// E_δ and D_δ; empty when the curve was loaded from ratios only.
    pub entities_above: Vec<usize>,
    pub disputed_above: Vec<usize>,
}

impl ExceedanceCurve {
    /// Fitting points for one ratio, dropping undefined values.
    pub fn points(&self, ratio: Ratio) -> (Vec<f64>, Vec<f64>) {
        match ratio {
            Ratio::DisputedOverDisputed => (self.grid.clone(), self.ratio_dd.clone()),
            Ratio::DisputedOverEntities => self
                .grid
                .iter()
                .zip(&self.ratio_de)
                .filter_map(|(&x, y)| y.map(|y| (x, y)))
                .unzip(),
        }
    }

    pub fn value_at(&self, ratio: Ratio, delta: f64) -> Option<f64> {
        let i = self
            .grid
            .iter()
            .position(|&g| (g - delta).abs() < GRID_STEP / 2.0)?;
        match ratio {
            Ratio::DisputedOverDisputed => Some(self.ratio_dd[i]),
            Ratio::DisputedOverEntities => self.ratio_de[i],
        }
    }

    /// Reads a `delta,ratio_DD,ratio_DE` CSV; empty cells are undefined.
    pub fn from_csv(path: &Path) -> Result<ExceedanceCurve> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut curve = ExceedanceCurve {
            grid: vec![],
            ratio_dd: vec![],
            ratio_de: vec![],
            entities_above: vec![],
            disputed_above: vec![],
        };
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| -> Result<Option<f64>> {
                let s = rec.get(k).unwrap_or("").trim();
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse().map(Some).map_err(|_| Error::Parse {
                    file: path.display().to_string(),
                    line: i + 2,
                    message: format!("bad number {s:?}"),
                })
            };
            let missing = || Error::Parse {
                file: path.display().to_string(),
                line: i + 2,
                message: "missing delta or ratio_DD".into(),
            };
            curve.grid.push(field(0)?.ok_or_else(missing)?);
            curve.ratio_dd.push(field(1)?.ok_or_else(missing)?);
            curve.ratio_de.push(field(2)?);
        }
        if curve.grid.is_empty() {
            return Err(Error::EmptyInput("exceedance curve"));
        }
        Ok(curve)
    }
}

/// Counts entities and disputed entities with measure ≥ δ at each grid point.
pub fn exceedance_curve(values: &[f64], disputed: &[bool], grid: &[f64]) -> Result<ExceedanceCurve> {
    if values.len() != disputed.len() {
        return Err(Error::Shape {
            expected: values.len(),
            got: disputed.len(),
        });
    }
    if values.is_empty() {
        return Err(Error::EmptyInput("exceedance values"));
    }
    let total_d = disputed.iter().filter(|&&d| d).count();
    let mut e_sorted: Vec<f64> = values.to_vec();
    e_sorted.sort_by(f64::total_cmp);
    let mut d_sorted: Vec<f64> = values
        .iter()
        .zip(disputed)
        .filter(|(_, &d)| d)
        .map(|(&v, _)| v)
        .collect();
    d_sorted.sort_by(f64::total_cmp);
    let above = |sorted: &[f64], x: f64| sorted.len() - sorted.partition_point(|&v| v < x);

    let mut c = ExceedanceCurve {
        grid: grid.to_vec(),
        ratio_dd: Vec::with_capacity(grid.len()),
        ratio_de: Vec::with_capacity(grid.len()),
        entities_above: Vec::with_capacity(grid.len()),
        disputed_above: Vec::with_capacity(grid.len()),
    };
    for &x in grid {
        let e = above(&e_sorted, x);
        let d = above(&d_sorted, x);
        c.entities_above.push(e);
        c.disputed_above.push(d);
        c.ratio_dd.push(crate::stats::ratio(d as f64, total_d as f64));
        c.ratio_de.push((e > 0).then(|| d as f64 / e as f64));
    }
    Ok(c)
}

/// Least-squares polynomial in the scaled variable `t = (x - center) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFit {
    pub degree: usize,
    pub center: f64,
    pub scale: f64,
    /// Ascending powers of `t`.
    pub coeffs: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    pub rmse: f64,
}

impl PolynomialFit {
    fn t(&self, x: f64) -> f64 {
        (x - self.center) / self.scale
    }

    /// Coefficients of ascending powers of `x` itself.
    pub fn power_coefficients(&self) -> Vec<f64> {
        // Expand sum c_k ((x - m) / s)^k binomially.
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for (k, &c) in self.coeffs.iter().enumerate() {
            let ck = c / self.scale.powi(k as i32);
            let mut binom = 1.0;
            for j in 0..=k {
                out[j] += ck * binom * (-self.center).powi((k - j) as i32);
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        out
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    /// k-th derivative with respect to `x`.
    pub fn derivative(&self, x: f64, k: usize) -> f64 {
        let t = self.t(x);
        let mut acc = 0.0;
        for (p, &c) in self.coeffs.iter().enumerate().skip(k).rev() {
            let falling: f64 = (0..k).map(|j| (p - j) as f64).product();
            acc = acc * t + c * falling;
        }
        acc / self.scale.powi(k as i32)
    }
}

/// Least-squares fit of the given degree (at least 2).
pub fn fit_polynomial(x: &[f64], y: &[f64], degree: usize) -> Result<PolynomialFit> {
    if !(2..=MAX_DEGREE).contains(&degree) {
        return Err(Error::Config(format!(
            "polynomial degree {degree} outside 2..={MAX_DEGREE}"
        )));
    }
    if x.len() != y.len() {
        return Err(Error::Shape {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() <= degree {
        return Err(Error::Fit(format!(
            "{} points cannot determine a degree-{degree} polynomial",
            x.len()
        )));
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let center = 0.5 * (lo + hi);
    let scale = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
    let mut a = Matrix::zeros(x.len(), degree + 1);
    for (r, &xi) in x.iter().enumerate() {
        let t = (xi - center) / scale;
        let mut v = 1.0;
        for c in 0..=degree {
            a.set(r, c, v);
            v *= t;
        }
    }
    let coeffs = lstsq_qr(&a, y, 1e-12)
        .ok_or_else(|| Error::Fit(format!("rank-deficient design for degree {degree}")))?;
    let mut fit = PolynomialFit {
        degree,
        center,
        scale,
        coeffs,
        lo,
        hi,
        rmse: 0.0,
    };
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (fit.eval(xi) - yi).powi(2))
        .sum();
    fit.rmse = (rss / x.len() as f64).sqrt();
    Ok(fit)
}

/// Points in `[lo, hi]` where the second derivative changes sign.
pub fn inflection_points(fit: &PolynomialFit, lo: f64, hi: f64) -> Vec<f64> {
    let f2 = |x: f64| fit.derivative(x, 2);
    let h = (hi - lo) / SCAN_POINTS as f64;
    let mut out = Vec::new();
    let mut x0 = lo;
    let mut v0 = f2(x0);
    // Sign of the last non-zero sample, to handle exact zeros on the grid.
    let mut last_sign = if v0 != 0.0 { v0.signum() } else { 0.0 };
    let mut zero_start: Option<f64> = (v0 == 0.0).then_some(x0);
    for i in 1..=SCAN_POINTS {
        let x1 = if i == SCAN_POINTS { hi } else { lo + i as f64 * h };
        let v1 = f2(x1);
        if v1 == 0.0 {
            zero_start.get_or_insert(x1);
        } else {
            let s1 = v1.signum();
            if let Some(z) = zero_start.take() {
                if last_sign != 0.0 && s1 != last_sign {
                    out.push(0.5 * (z + x0));
                }
            } else if last_sign != 0.0 && s1 != last_sign {
                out.push(bisect(&f2, x0, x1, v0));
            }
            last_sign = s1;
        }
        x0 = x1;
        v0 = v1;
    }
    out
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    while b - a > BISECT_TOL {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionPolicy {
    SecondConcavityChange,
    First,
    /// 1-based index into the ordered inflection points.
    Index(usize),
}

impl SelectionPolicy {
    fn index(self) -> usize {
        match self {
            SelectionPolicy::SecondConcavityChange => 2,
            SelectionPolicy::First => 1,
            SelectionPolicy::Index(k) => k,
        }
    }
}

pub fn select_threshold(inflections: &[f64], policy: SelectionPolicy) -> Result<f64> {
    let k = policy.index();
    if k == 0 || k > inflections.len() {
        return Err(Error::Selection {
            needed: k,
            found: inflections.to_vec(),
        });
    }
    Ok(inflections[k - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    PresentationDistance,
    ResponseDistance,
    EngagedFraction,
}

impl Measure {
    pub fn grid(self) -> Vec<f64> {
        match self {
            Measure::EngagedFraction => fraction_grid(),
            _ => distance_grid(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    pub degree: usize,
    pub ratio: Ratio,
    pub policy: SelectionPolicy,
    /// Policy tried when the primary one finds too few inflections.
    pub fallback: Option<SelectionPolicy>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            degree: DEFAULT_DEGREE,
            ratio: Ratio::DisputedOverDisputed,
            policy: SelectionPolicy::Index(2),
            fallback: Some(SelectionPolicy::First),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDetail {
    pub measure: Measure,
    pub fit: PolynomialFit,
    pub inflections: Vec<f64>,
    pub threshold: f64,
    pub policy_used: SelectionPolicy,
    /// Set when neither policy applied and a substitute value was used.
    pub substituted: bool,
}

/// Fits the configured ratio of a curve and picks a threshold from the
/// inflection points.
pub fn find_threshold(
    curve: &ExceedanceCurve,
    measure: Measure,
    cfg: &ThresholdConfig,
) -> Result<ThresholdDetail> {
    if !(MIN_DEGREE..=MAX_DEGREE).contains(&cfg.degree) {
        return Err(Error::Config(format!(
            "threshold polynomial degree {} outside {MIN_DEGREE}..={MAX_DEGREE}",
            cfg.degree
        )));
    }
    let (x, y) = curve.points(cfg.ratio);
    let fit = fit_polynomial(&x, &y, cfg.degree)?;
    let inflections = inflection_points(&fit, fit.lo, fit.hi);
    let (threshold, policy_used) = match select_threshold(&inflections, cfg.policy) {
        Ok(t) => (t, cfg.policy),
        Err(e) => match cfg.fallback {
            Some(fb) => (select_threshold(&inflections, fb)?, fb),
            None => return Err(e),
        },
    };
    let (glo, ghi) = (curve.grid[0], curve.grid[curve.grid.len() - 1]);
    Ok(ThresholdDetail {
        measure,
        fit,
        inflections,
        threshold: threshold.clamp(glo, ghi),
        policy_used,
        substituted: false,
    })
}

/// Thresholds for the three indicator features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub delta_p: f64,
    pub delta_r: Option<f64>,
    pub rho_e: Option<f64>,
    pub details: Vec<ThresholdDetail>,
}

impl ThresholdResult {
    pub fn fixed(delta_p: f64, delta_r: Option<f64>, rho_e: Option<f64>) -> Self {
        ThresholdResult {
            delta_p,
            delta_r,
            rho_e,
            details: vec![],
        }
    }
}
