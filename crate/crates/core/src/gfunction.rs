//! N-functions `G` with controlled ellipticity.
//!
//! A [`GFunction`] represents the derivative `g = G'` of a convex function
//! `G` together with certified constants `0 < δ ≤ g₀` such that
//!
//! ```text
//!     δ ≤ t g'(t) / g(t) ≤ g₀    for all t > 0.
//! ```
//!
//! Everything downstream (the energy, the free-boundary slope, the
//! inequality battery) is phrased in terms of `g`, `G`, the inverse `g⁻¹`
//! and the Young conjugate `G̃` with `G̃' = g⁻¹`.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::rootfind;

/// Relative tolerance used for the scalar inversions (`g⁻¹`, `λ*`,
/// the Luxemburg norm).
const INV_REL_TOL: f64 = 1e-13;

/// Cumulative integrals at log-spaced knots so repeated evaluations of
/// `G` and `G̃` only integrate over one short panel. Built lazily,
/// shared between clones.
#[derive(Debug, Default)]
struct GTable {
    knots: Vec<f64>,
    cum: Vec<f64>,
}

impl GTable {
    /// Last knot index with `knots[k] <= t`, assuming
    /// `knots[0] <= t <= knots[last]`.
    fn locate(&self, t: f64) -> usize {
        self.knots.partition_point(|&x| x <= t) - 1
    }
}

fn log_knots() -> Vec<f64> {
    let per_decade = 24usize;
    let (lo_exp, hi_exp) = (-9i32, 14i32);
    let n = ((hi_exp - lo_exp) as usize) * per_decade + 1;
    (0..n)
        .map(|k| 10f64.powf(lo_exp as f64 + k as f64 / per_decade as f64))
        .collect()
}

/// Accumulate `head + Σ ∫_{knots[k-1]}^{knots[k]} f` panel by panel.
fn build_cum_table(head: f64, f: impl Fn(f64) -> f64, knots: Vec<f64>) -> GTable {
    let mut cum = Vec::with_capacity(knots.len());
    let mut acc = head;
    cum.push(acc);
    for k in 1..knots.len() {
        match quadrature::integrate(&f, knots[k - 1], knots[k], 1e-300, 1e-13) {
            Ok(v) => {
                acc += v;
                cum.push(acc);
            }
            Err(_) => return GTable::default(),
        }
    }
    GTable { knots, cum }
}

#[derive(Clone, Debug)]
pub enum GFamily {
    /// `g(t) = t^(p-1)`, i.e. `G(t) = t^p / p`.
    Power { p: f64 },
    /// `g(t) = t^a * ln(b t + c)` with `a, b > 0` and `c >= 1`.
    PowerLog { a: f64, b: f64, c: f64 },
    /// C¹ splice: `g(t) = c1 t^{a1}` for `t <= s`, `g(t) = c2 t^{a2} + d`
    /// for `t >= s`, with `c2` and `d` determined by matching value and
    /// slope at `s`.
    Spliced { a1: f64, a2: f64, s: f64, c1: f64, c2: f64, d: f64 },
    /// Positive linear combination `g = Σ wᵢ gᵢ`.
    Sum(Vec<(f64, GFunction)>),
    /// Pointwise product `g = g1 * g2`.
    Product(Box<GFunction>, Box<GFunction>),
    /// Composition `g = g1 ∘ g2`.
    Compose(Box<GFunction>, Box<GFunction>),
}

/// An N-function family member with certified ellipticity bounds.
#[derive(Clone, Debug)]
pub struct GFunction {
    family: GFamily,
    delta: f64,
    g0: f64,
    table: Arc<OnceLock<GTable>>,
    conj_table: Arc<OnceLock<GTable>>,
}

fn new_gfunction(family: GFamily, delta: f64, g0: f64) -> GFunction {
    GFunction {
        family,
        delta,
        g0,
        table: Arc::new(OnceLock::new()),
        conj_table: Arc::new(OnceLock::new()),
    }
}

/// `t^e` with fast paths for the exponents the energy loops hit.
#[inline]
fn fast_pow(t: f64, e: f64) -> f64 {
    if e == 1.0 {
        t
    } else if e == 2.0 {
        t * t
    } else if e == 3.0 {
        t * t * t
    } else if e == 0.5 {
        t.sqrt()
    } else if e == 4.0 {
        let s = t * t;
        s * s
    } else {
        t.powf(e)
    }
}

fn require_positive(what: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidArgument(format!("{what} must be positive and finite, got {v}")));
    }
    Ok(())
}

impl GFunction {
    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidArgument(format!("power family needs p > 1, got {p}")));
        }
        Ok(new_gfunction(GFamily::Power { p }, p - 1.0, p - 1.0))
    }

    /// `g(t) = t^a ln(bt + c)`. The restriction `c >= 1` keeps `g >= 0`
    /// near zero; for `0 < c < 1` the logarithm is negative there and the
    /// family leaves the admissible class.
    pub fn power_log(a: f64, b: f64, c: f64) -> Result<Self> {
        require_positive("a", a)?;
        require_positive("b", b)?;
        if !(c.is_finite() && c >= 1.0) {
            return Err(Error::InvalidArgument(format!("power-log family needs c >= 1, got {c}")));
        }
        Ok(new_gfunction(GFamily::PowerLog { a, b, c }, a, a + 1.0))
    }

    /// Spliced power family; the caller provides `(a1, a2, s, c1)` and the
    /// matching constants are solved from the C¹ conditions at `s`:
    /// `c2 = c1 (a1/a2) s^{a1-a2}` and `d = c1 s^{a1} (a2-a1)/a2`.
    pub fn spliced(a1: f64, a2: f64, s: f64, c1: f64) -> Result<Self> {
        require_positive("a1", a1)?;
        require_positive("a2", a2)?;
        require_positive("s", s)?;
        require_positive("c1", c1)?;
        let c2 = c1 * (a1 / a2) * s.powf(a1 - a2);
        let d = c1 * s.powf(a1) * (a2 - a1) / a2;
        Ok(new_gfunction(
            GFamily::Spliced { a1, a2, s, c1, c2, d },
            a1.min(a2),
            a1.max(a2),
        ))
    }

    /// Positive linear combination; `δ = min δᵢ`, `g₀ = max g₀ᵢ`.
    pub fn sum(parts: Vec<(f64, GFunction)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("sum family needs at least one part".into()));
        }
        for (w, _) in &parts {
            require_positive("sum weight", *w)?;
        }
        let delta = parts.iter().map(|(_, g)| g.delta).fold(f64::INFINITY, f64::min);
        let g0 = parts.iter().map(|(_, g)| g.g0).fold(0.0, f64::max);
        Ok(new_gfunction(GFamily::Sum(parts), delta, g0))
    }

    /// Pointwise product; `δ = δ¹ + δ²`, `g₀ = g₀¹ + g₀²`.
    pub fn product(g1: GFunction, g2: GFunction) -> Result<Self> {
        let delta = g1.delta + g2.delta;
        let g0 = g1.g0 + g2.g0;
        Ok(new_gfunction(GFamily::Product(Box::new(g1), Box::new(g2)), delta, g0))
    }

    /// Composition `g1 ∘ g2`; `δ = δ¹ δ²`, `g₀ = g₀¹ g₀²`.
    pub fn compose(g1: GFunction, g2: GFunction) -> Result<Self> {
        let delta = g1.delta * g2.delta;
        let g0 = g1.g0 * g2.g0;
        Ok(new_gfunction(GFamily::Compose(Box::new(g1), Box::new(g2)), delta, g0))
    }

    /// Certified lower ellipticity bound.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Certified upper ellipticity bound.
    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn family(&self) -> &GFamily {
        &self.family
    }

    /// Short human-readable family tag.
    pub fn describe(&self) -> String {
        match &self.family {
            GFamily::Power { p } => format!("power(p={p})"),
            GFamily::PowerLog { a, b, c } => format!("power-log(a={a}, b={b}, c={c})"),
            GFamily::Spliced { a1, a2, s, .. } => format!("spliced(a1={a1}, a2={a2}, s={s})"),
            GFamily::Sum(parts) => {
                let inner: Vec<String> =
                    parts.iter().map(|(w, g)| format!("{w}*{}", g.describe())).collect();
                format!("sum({})", inner.join(" + "))
            }
            GFamily::Product(g1, g2) => format!("product({}, {})", g1.describe(), g2.describe()),
            GFamily::Compose(g1, g2) => format!("compose({}, {})", g1.describe(), g2.describe()),
        }
    }

    fn check_t(t: f64) -> Result<()> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Domain { what: "t", value: t });
        }
        Ok(())
    }

    /// Evaluate `g(t)` for `t >= 0`.
    pub fn g(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        Ok(self.g_unchecked(t))
    }

    fn g_unchecked(&self, t: f64) -> f64 {
        match &self.family {
            GFamily::Power { p } => fast_pow(t, p - 1.0),
            GFamily::PowerLog { a, b, c } => {
                if t == 0.0 {
                    0.0
                } else {
                    t.powf(*a) * (c.ln() + (b * t / c).ln_1p())
                }
            }
            GFamily::Spliced { a1, a2, s, c1, c2, d } => {
                if t <= *s {
                    c1 * fast_pow(t, *a1)
                } else {
                    c2 * fast_pow(t, *a2) + d
                }
            }
            GFamily::Sum(parts) => parts.iter().map(|(w, g)| w * g.g_unchecked(t)).sum(),
            GFamily::Product(g1, g2) => g1.g_unchecked(t) * g2.g_unchecked(t),
            GFamily::Compose(g1, g2) => g1.g_unchecked(g2.g_unchecked(t)),
        }
    }

    /// Evaluate `g'(t)` for `t > 0` (closed form through the family tree).
    pub fn g_prime(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Domain { what: "t", value: t });
        }
        Ok(self.g_prime_unchecked(t))
    }

    fn g_prime_unchecked(&self, t: f64) -> f64 {
        match &self.family {
            GFamily::Power { p } => (p - 1.0) * fast_pow(t, p - 2.0),
            GFamily::PowerLog { a, b, c } => {
                a * t.powf(a - 1.0) * (c.ln() + (b * t / c).ln_1p()) + t.powf(*a) * b / (b * t + c)
            }
            GFamily::Spliced { a1, a2, s, c1, c2, .. } => {
                if t <= *s {
                    c1 * a1 * fast_pow(t, a1 - 1.0)
                } else {
                    c2 * a2 * fast_pow(t, a2 - 1.0)
                }
            }
            GFamily::Sum(parts) => parts.iter().map(|(w, g)| w * g.g_prime_unchecked(t)).sum(),
            GFamily::Product(g1, g2) => {
                g1.g_prime_unchecked(t) * g2.g_unchecked(t) + g1.g_unchecked(t) * g2.g_prime_unchecked(t)
            }
            GFamily::Compose(g1, g2) => {
                let inner = g2.g_unchecked(t);
                g1.g_prime_unchecked(inner) * g2.g_prime_unchecked(t)
            }
        }
    }

    /// Evaluate `G(t) = ∫_0^t g`. Closed form for power/spliced/sum trees,
    /// adaptive Simpson quadrature otherwise.
    pub fn big_g(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        self.big_g_unchecked(t)
    }

    fn big_g_unchecked(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        match &self.family {
            GFamily::Power { p } => Ok(fast_pow(t, *p) / p),
            GFamily::Spliced { a1, a2, s, c1, c2, d } => {
                if t <= *s {
                    Ok(c1 * t.powf(a1 + 1.0) / (a1 + 1.0))
                } else {
                    let at_s = c1 * s.powf(a1 + 1.0) / (a1 + 1.0);
                    Ok(at_s + c2 * (t.powf(a2 + 1.0) - s.powf(a2 + 1.0)) / (a2 + 1.0) + d * (t - s))
                }
            }
            GFamily::Sum(parts) => {
                let mut acc = 0.0;
                for (w, g) in parts {
                    acc += w * g.big_g_unchecked(t)?;
                }
                Ok(acc)
            }
            _ => {
                let tab = self.table.get_or_init(|| {
                    let knots = log_knots();
                    let head =
                        quadrature::integrate(|x| self.g_unchecked(x), 0.0, knots[0], 1e-300, 1e-13)
                            .unwrap_or(f64::NAN);
                    if head.is_nan() {
                        GTable::default()
                    } else {
                        build_cum_table(head, |x| self.g_unchecked(x), knots)
                    }
                });
                if tab.knots.is_empty() || t <= tab.knots[0] {
                    return quadrature::integrate_default(|x| self.g_unchecked(x), 0.0, t);
                }
                let k = tab.locate(t.min(*tab.knots.last().unwrap()));
                let tail = quadrature::integrate(
                    |x| self.g_unchecked(x),
                    tab.knots[k],
                    t,
                    1e-14 * tab.cum[k].abs().max(f64::MIN_POSITIVE),
                    1e-12,
                )?;
                Ok(tab.cum[k] + tail)
            }
        }
    }

    /// `F(t) = g(t)/t`, the flux weight; `F_η` with `t` replaced by
    /// `sqrt(t² + η²)` regularizes the degenerate origin.
    pub fn flux_weight(&self, t: f64, eta: f64) -> f64 {
        let te = (t * t + eta * eta).sqrt();
        if te == 0.0 {
            return 0.0;
        }
        self.g_unchecked(te) / te
    }

    /// Solve `g(x) = y` for `x >= 0` by safeguarded bracketed root finding.
    pub fn g_inverse(&self, y: f64) -> Result<f64> {
        if !(y.is_finite() && y >= 0.0) {
            return Err(Error::Domain { what: "y", value: y });
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        match &self.family {
            GFamily::Power { p } => Ok(y.powf(1.0 / (p - 1.0))),
            GFamily::Spliced { a1, a2, s, c1, c2, d } => {
                let gs = c1 * s.powf(*a1);
                if y <= gs {
                    Ok((y / c1).powf(1.0 / a1))
                } else {
                    Ok(((y - d) / c2).powf(1.0 / a2))
                }
            }
            _ => rootfind::solve_increasing_from_zero(&|x| self.g_unchecked(x), y, INV_REL_TOL),
        }
    }

    /// Young conjugate `G̃(y) = ∫_0^y g⁻¹`.
    pub fn gtilde(&self, y: f64) -> Result<f64> {
        if !(y.is_finite() && y >= 0.0) {
            return Err(Error::Domain { what: "y", value: y });
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        match &self.family {
            GFamily::Power { p } => {
                // g⁻¹(y) = y^{1/(p-1)}; conjugate exponent p' = p/(p-1).
                let q = 1.0 + 1.0 / (p - 1.0);
                Ok(y.powf(q) / q)
            }
            _ => {
                let inv = |x: f64| self.g_inverse(x).unwrap_or(f64::NAN);
                let tab = self.conj_table.get_or_init(|| {
                    let knots = log_knots();
                    // g⁻¹ has a vertical tangent at 0 when δ > 1, which
                    // stalls the Simpson recursion; on the head sliver
                    // substitute s = g(t), giving ∫_0^{g⁻¹(y0)} t g'(t) dt
                    // with a benign integrand.
                    let head = self.gtilde_head(knots[0]).unwrap_or(f64::NAN);
                    if head.is_nan() {
                        GTable::default()
                    } else {
                        build_cum_table(head, inv, knots)
                    }
                });
                if tab.knots.is_empty() || y <= tab.knots[0] {
                    return self.gtilde_head(y);
                }
                let k = tab.locate(y.min(*tab.knots.last().unwrap()));
                let tail = quadrature::integrate(
                    inv,
                    tab.knots[k],
                    y,
                    1e-14 * tab.cum[k].abs().max(f64::MIN_POSITIVE),
                    1e-12,
                )?;
                Ok(tab.cum[k] + tail)
            }
        }
    }

    /// `∫_0^y g⁻¹` for tiny `y` by the substitution `s = g(t)`.
    fn gtilde_head(&self, y: f64) -> Result<f64> {
        if y == 0.0 {
            return Ok(0.0);
        }
        let t1 = self.g_inverse(y)?;
        quadrature::integrate(
            |t| if t == 0.0 { 0.0 } else { t * self.g_prime_unchecked(t) },
            0.0,
            t1,
            1e-300,
            1e-12,
        )
    }

    /// Defect of the conjugate identity `G̃(g(t)) + G(t) - t g(t)`.
    pub fn conjugate_identity_defect(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Domain { what: "t", value: t });
        }
        let gt = self.g_unchecked(t);
        Ok(self.gtilde(gt)? + self.big_g(t)? - t * gt)
    }

    /// The free-boundary slope: the unique root of
    /// `Φ(s) = s g(s) - G(s) = λ`. `Φ` is strictly increasing since
    /// `Φ'(s) = s g'(s) > 0`.
    pub fn lambda_star(&self, lambda: f64) -> Result<f64> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Domain { what: "lambda", value: lambda });
        }
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let phi = |s: f64| match self.big_g_unchecked(s) {
            Ok(gg) => s * self.g_unchecked(s) - gg,
            Err(_) => f64::NAN,
        };
        rootfind::solve_increasing_from_zero(&phi, lambda, INV_REL_TOL)
    }

    /// `Φ(s) = s g(s) - G(s)`, the Legendre transform along the diagonal.
    pub fn phi(&self, s: f64) -> Result<f64> {
        Self::check_t(s)?;
        Ok(s * self.g_unchecked(s) - self.big_g_unchecked(s)?)
    }

    /// Sample `t g'(t)/g(t)` on a log-spaced grid and report the empirical
    /// range; the certified `(δ, g₀)` must bracket it.
    pub fn check_condition(&self, tmin: f64, tmax: f64, n: usize) -> Result<ConditionCheck> {
        if !(tmin.is_finite() && tmin > 0.0 && tmax > tmin) || n < 2 {
            return Err(Error::InvalidArgument(format!(
                "check_condition needs 0 < tmin < tmax and n >= 2, got [{tmin}, {tmax}] n={n}"
            )));
        }
        let grid = log_grid(tmin, tmax, n);
        let mut delta_emp = f64::INFINITY;
        let mut g0_emp = f64::NEG_INFINITY;
        let mut at_min = tmin;
        let mut at_max = tmin;
        for &t in &grid {
            let ratio = t * self.g_prime_unchecked(t) / self.g_unchecked(t);
            if !ratio.is_finite() {
                return Err(Error::Numerical(format!("non-finite ratio t g'/g at t = {t:e}")));
            }
            if ratio < delta_emp {
                delta_emp = ratio;
                at_min = t;
            }
            if ratio > g0_emp {
                g0_emp = ratio;
                at_max = t;
            }
        }
        let slack = 1e-9 * self.g0.max(1.0);
        Ok(ConditionCheck {
            delta_emp,
            g0_emp,
            at_min,
            at_max,
            bracketed: delta_emp >= self.delta - slack && g0_emp <= self.g0 + slack,
        })
    }

    /// Pointwise verification of the structural inequalities on
    /// `t_grid × s_grid`. Each entry reports its worst relative slack
    /// (nonnegative slack means the inequality holds).
    pub fn inequality_suite(&self, t_grid: &[f64], s_grid: &[f64]) -> Result<InequalityReport> {
        let delta = self.delta;
        let g0 = self.g0;

        let g_t: Vec<f64> = t_grid.iter().map(|&t| self.g_unchecked(t)).collect();
        let mut big_g_t = Vec::with_capacity(t_grid.len());
        let mut ginv_t = Vec::with_capacity(t_grid.len());
        let mut gtilde_t = Vec::with_capacity(t_grid.len());
        for &t in t_grid {
            big_g_t.push(self.big_g(t)?);
            ginv_t.push(self.g_inverse(t)?);
            gtilde_t.push(self.gtilde(t)?);
        }
        let mut big_g_s = Vec::with_capacity(s_grid.len());
        let mut gtilde_s = Vec::with_capacity(s_grid.len());
        for &s in s_grid {
            big_g_s.push(self.big_g(s)?);
            gtilde_s.push(self.gtilde(s)?);
        }

        let mut entries: Vec<InequalityEntry> = Vec::new();

        // (g1) and (G1) over the product grid.
        let mut g1_lo = Slack::new();
        let mut g1_hi = Slack::new();
        let mut big_g1_lo = Slack::new();
        let mut big_g1_hi = Slack::new();
        for (ti, &t) in t_grid.iter().enumerate() {
            for &s in s_grid {
                let st = s * t;
                if !st.is_finite() {
                    continue;
                }
                let gst = self.g_unchecked(st);
                let lo = s.powf(delta).min(s.powf(g0));
                let hi = s.powf(delta).max(s.powf(g0));
                g1_lo.update(lo * g_t[ti], gst, t, s);
                g1_hi.update(gst, hi * g_t[ti], t, s);

                let ggst = self.big_g(st)?;
                let lo1 = s.powf(delta + 1.0).min(s.powf(g0 + 1.0));
                let hi1 = s.powf(delta + 1.0).max(s.powf(g0 + 1.0));
                big_g1_lo.update(lo1 * big_g_t[ti] / (1.0 + g0), ggst, t, s);
                big_g1_hi.update(ggst, (1.0 + g0) * hi1 * big_g_t[ti], t, s);
            }
        }
        entries.push(g1_lo.entry("g1_lower"));
        entries.push(g1_hi.entry("g1_upper"));
        entries.push(big_g1_lo.entry("G1_lower"));
        entries.push(big_g1_hi.entry("G1_upper"));

        // (g3) on the t grid.
        let mut g3_lo = Slack::new();
        let mut g3_hi = Slack::new();
        for (ti, &t) in t_grid.iter().enumerate() {
            g3_lo.update(t * g_t[ti] / (1.0 + g0), big_g_t[ti], t, 0.0);
            g3_hi.update(big_g_t[ti], t * g_t[ti], t, 0.0);
        }
        entries.push(g3_lo.entry("g3_lower"));
        entries.push(g3_hi.entry("g3_upper"));

        // (G2): G(a+b) <= 2^{g0} (1+g0) (G(a)+G(b)), a from t grid, b from s grid.
        let mut g2 = Slack::new();
        let c_g2 = 2f64.powf(g0) * (1.0 + g0);
        for (ai, &a) in t_grid.iter().enumerate() {
            for (bi, &b) in s_grid.iter().enumerate() {
                let sum = a + b;
                if !sum.is_finite() {
                    continue;
                }
                g2.update(self.big_g(sum)?, c_g2 * (big_g_t[ai] + big_g_s[bi]), a, b);
            }
        }
        entries.push(g2.entry("G2"));

        // (g̃1) over the product grid.
        let mut gt1_lo = Slack::new();
        let mut gt1_hi = Slack::new();
        for (ti, &t) in t_grid.iter().enumerate() {
            for &s in s_grid {
                let st = s * t;
                if !st.is_finite() {
                    continue;
                }
                let inv_st = self.g_inverse(st)?;
                let lo = s.powf(1.0 / delta).min(s.powf(1.0 / g0));
                let hi = s.powf(1.0 / delta).max(s.powf(1.0 / g0));
                gt1_lo.update(lo * ginv_t[ti], inv_st, t, s);
                gt1_hi.update(inv_st, hi * ginv_t[ti], t, s);
            }
        }
        entries.push(gt1_lo.entry("gt1_lower"));
        entries.push(gt1_hi.entry("gt1_upper"));

        // (g̃2) on the t grid.
        let mut gt2_lo = Slack::new();
        let mut gt2_hi = Slack::new();
        for (ti, &t) in t_grid.iter().enumerate() {
            gt2_lo.update(delta * t * ginv_t[ti] / (1.0 + delta), gtilde_t[ti], t, 0.0);
            gt2_hi.update(gtilde_t[ti], t * ginv_t[ti], t, 0.0);
        }
        entries.push(gt2_lo.entry("gt2_lower"));
        entries.push(gt2_hi.entry("gt2_upper"));

        // (g̃3): a b <= ε G(a) + C(ε) G̃(b) with the constant from the proof
        // chain: ε' = (ε/(1+g0))^{1/(1+δ)}, C(ε) = (1+δ)/δ · ε'^{-(1+1/δ)}.
        let mut gt3 = Slack::new();
        let eps = 0.5;
        let eps_p = (eps / (1.0 + g0)).powf(1.0 / (1.0 + delta));
        let c_eps = (1.0 + delta) / delta * eps_p.powf(-(1.0 + 1.0 / delta));
        for (ai, &a) in t_grid.iter().enumerate() {
            for (bi, &b) in s_grid.iter().enumerate() {
                gt3.update(a * b, eps * big_g_t[ai] + c_eps * gtilde_s[bi], a, b);
            }
        }
        entries.push(gt3.entry("gt3"));

        // (g̃4): G̃(g(t)) <= g0 G(t), and the conjugate identity defect.
        let mut gt4 = Slack::new();
        let mut ident = Slack::new();
        for (ti, &t) in t_grid.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let conj = self.gtilde(g_t[ti])?;
            gt4.update(conj, g0 * big_g_t[ti], t, 0.0);
            let defect = conj + big_g_t[ti] - t * g_t[ti];
            let scale = (t * g_t[ti]).abs().max(f64::MIN_POSITIVE);
            ident.update_slack(-defect.abs() / scale, t, 0.0);
        }
        entries.push(gt4.entry("gt4"));
        entries.push(ident.entry("conjugate_identity"));

        // (G̃1) with the constants rederived from (g̃1)+(g̃2); checked on a
        // thinned product grid since each G̃(st) costs a quadrature over
        // root finds.
        let mut bgt1_lo = Slack::new();
        let mut bgt1_hi = Slack::new();
        for (ti, &t) in t_grid.iter().enumerate().step_by(4.max(t_grid.len() / 40)) {
            for &s in s_grid.iter().step_by(4.max(s_grid.len() / 14)) {
                let st = s * t;
                if !st.is_finite() {
                    continue;
                }
                let conj_st = self.gtilde(st)?;
                let lo = s.powf(1.0 + 1.0 / delta).min(s.powf(1.0 + 1.0 / g0));
                let hi = s.powf(1.0 + 1.0 / delta).max(s.powf(1.0 + 1.0 / g0));
                bgt1_lo.update(delta / (1.0 + delta) * lo * gtilde_t[ti], conj_st, t, s);
                bgt1_hi.update(conj_st, (1.0 + delta) / delta * hi * gtilde_t[ti], t, s);
            }
        }
        entries.push(bgt1_lo.entry("Gt1_lower"));
        entries.push(bgt1_hi.entry("Gt1_upper"));

        Ok(InequalityReport { entries })
    }

    /// Luxemburg norm of a discretized function: the infimum over `k > 0`
    /// of `Σ mᵢ G(|vᵢ|/k) <= 1`, located by monotone bracketing (the map
    /// `k ↦ Σ m G(|v|/k)` is strictly decreasing).
    pub fn luxemburg_norm(&self, samples: &[(f64, f64)]) -> Result<f64> {
        let mut vmax: f64 = 0.0;
        for &(v, m) in samples {
            if !v.is_finite() || !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidArgument(format!("bad sample (value {v}, measure {m})")));
            }
            if m > 0.0 {
                vmax = vmax.max(v.abs());
            }
        }
        if vmax == 0.0 {
            return Ok(0.0);
        }
        let modular = |k: f64| -> f64 {
            samples
                .iter()
                .filter(|&&(v, m)| m > 0.0 && v != 0.0)
                .map(|&(v, m)| m * self.big_g_unchecked(v.abs() / k).unwrap_or(f64::NAN))
                .sum()
        };
        // Decreasing in k: solve modular(k) = 1 on a grown bracket.
        let mut hi = vmax;
        let mut lo = vmax;
        let mut guard = 0;
        while modular(hi) > 1.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 2100 {
                return Err(Error::Numerical("luxemburg bracket growth failed (upper)".into()));
            }
        }
        while modular(lo) < 1.0 {
            lo *= 0.5;
            guard += 1;
            if lo < f64::MIN_POSITIVE || guard > 4200 {
                return Err(Error::Numerical("luxemburg bracket growth failed (lower)".into()));
            }
        }
        let dec = |k: f64| -modular(k);
        rootfind::solve_monotone(&dec, lo, hi, -1.0, INV_REL_TOL)
    }

    /// Upper bound for the Luxemburg norm in terms of the modular
    /// `I = ∫ G(|u|)`: the `k` used in the proof of the norm-modular
    /// estimate, `max{(2(1+g₀)I)^{1/(δ+1)}, (2(1+g₀)I)^{1/(g₀+1)}}`.
    pub fn luxemburg_bound(&self, g_integral: f64) -> f64 {
        let base = 2.0 * (1.0 + self.g0) * g_integral;
        base.powf(1.0 / (self.delta + 1.0)).max(base.powf(1.0 / (self.g0 + 1.0)))
    }
}

/// Result of sampling condition `δ ≤ t g'/g ≤ g₀`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ConditionCheck {
    pub delta_emp: f64,
    pub g0_emp: f64,
    /// Sample point achieving the minimum ratio.
    pub at_min: f64,
    /// Sample point achieving the maximum ratio.
    pub at_max: f64,
    /// Whether the certified bounds bracket the empirical range.
    pub bracketed: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct InequalityEntry {
    pub name: &'static str,
    /// Worst relative slack of `lhs <= rhs` over the sample grid;
    /// negative values are violations.
    pub min_slack: f64,
    /// Sample point (t, s) where the worst slack occurred.
    pub at: (f64, f64),
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct InequalityReport {
    pub entries: Vec<InequalityEntry>,
}

impl InequalityReport {
    pub fn min_slack(&self) -> f64 {
        self.entries.iter().map(|e| e.min_slack).fold(f64::INFINITY, f64::min)
    }

    pub fn entry(&self, name: &str) -> Option<&InequalityEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn all_hold(&self, tol: f64) -> bool {
        self.min_slack() >= -tol
    }
}

struct Slack {
    min: f64,
    at: (f64, f64),
}

impl Slack {
    fn new() -> Self {
        Slack { min: f64::INFINITY, at: (f64::NAN, f64::NAN) }
    }

    /// Record the relative slack of `lhs <= rhs`.
    fn update(&mut self, lhs: f64, rhs: f64, t: f64, s: f64) {
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        self.update_slack((rhs - lhs) / scale, t, s);
    }

    fn update_slack(&mut self, slack: f64, t: f64, s: f64) {
        if slack < self.min {
            self.min = slack;
            self.at = (t, s);
        }
    }

    fn entry(self, name: &'static str) -> InequalityEntry {
        InequalityEntry {
            name,
            min_slack: if self.min.is_finite() { self.min } else { 0.0 },
            at: self.at,
        }
    }
}

/// Log-spaced grid of `n` points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let llo = lo.ln();
    let lhi = hi.ln();
    (0..n).map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn powerlog111() -> GFunction {
        GFunction::power_log(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn eval_g_examples() {
        let p3 = GFunction::power(3.0).unwrap();
        assert!((p3.g(2.0).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(powerlog111().g(0.0).unwrap(), 0.0);
        let p2 = GFunction::power(2.0).unwrap();
        assert!((p2.g(1.5).unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn eval_g_domain_errors() {
        let p2 = GFunction::power(2.0).unwrap();
        assert!(p2.g(-1.0).is_err());
        assert!(p2.g(f64::NAN).is_err());
        assert!(p2.g(f64::INFINITY).is_err());
    }

    #[test]
    fn big_g_examples() {
        let p2 = GFunction::power(2.0).unwrap();
        assert!((p2.big_g(3.0).unwrap() - 4.5).abs() < 1e-12);
        assert_eq!(powerlog111().big_g(0.0).unwrap(), 0.0);
        // (g3) bracket at t = 1 for the power-log family.
        let pl = powerlog111();
        let v = pl.big_g(1.0).unwrap();
        let g1 = pl.g(1.0).unwrap(); // ln 2
        assert!(v >= g1 / (1.0 + pl.g0()) - 1e-12 && v <= g1 + 1e-12);
        // quadrature oracle
        let oracle = crate::quadrature::integrate_default(|t| t * (t + 1.0).ln(), 0.0, 1.0).unwrap();
        assert!((v - oracle).abs() < 1e-10);
    }

    #[test]
    fn condition_power_is_exact() {
        let p3 = GFunction::power(3.0).unwrap();
        let c = p3.check_condition(1e-6, 1e6, 1000).unwrap();
        assert!((c.delta_emp - 2.0).abs() < 1e-12 && (c.g0_emp - 2.0).abs() < 1e-12);
        assert!(c.bracketed);
    }

    #[test]
    fn condition_powerlog_within_certified() {
        let pl = powerlog111();
        let c = pl.check_condition(1e-6, 1e6, 1000).unwrap();
        assert!(c.delta_emp >= 1.0 - 1e-9 && c.g0_emp <= 2.0 + 1e-9, "{c:?}");
        assert!(c.bracketed);
    }

    #[test]
    fn condition_composites() {
        let sum = GFunction::sum(vec![
            (1.0, GFunction::power(2.0).unwrap()),
            (1.0, GFunction::power(3.0).unwrap()),
        ])
        .unwrap();
        assert_eq!(sum.delta(), 1.0);
        assert_eq!(sum.g0(), 2.0);
        let c = sum.check_condition(1e-6, 1e6, 500).unwrap();
        assert!(c.bracketed && c.delta_emp >= 1.0 - 1e-9 && c.g0_emp <= 2.0 + 1e-9);

        let prod = GFunction::product(GFunction::power(2.0).unwrap(), powerlog111()).unwrap();
        assert_eq!(prod.delta(), 2.0);
        assert_eq!(prod.g0(), 3.0);
        assert!(prod.check_condition(1e-5, 1e5, 300).unwrap().bracketed);

        let comp = GFunction::compose(GFunction::power(2.0).unwrap(), GFunction::power(3.0).unwrap()).unwrap();
        assert_eq!(comp.delta(), 2.0);
        assert_eq!(comp.g0(), 2.0);
        let c = comp.check_condition(1e-4, 1e4, 300).unwrap();
        assert!((c.delta_emp - 2.0).abs() < 1e-10 && (c.g0_emp - 2.0).abs() < 1e-10);
    }

    #[test]
    fn spliced_is_c1_and_bracketed() {
        let sp = GFunction::spliced(1.0, 2.0, 1.0, 1.0).unwrap();
        let below = sp.g(1.0 - 1e-9).unwrap();
        let above = sp.g(1.0 + 1e-9).unwrap();
        assert!((below - above).abs() < 1e-7);
        let d_below = sp.g_prime(1.0 - 1e-9).unwrap();
        let d_above = sp.g_prime(1.0 + 1e-9).unwrap();
        assert!((d_below - d_above).abs() < 1e-6);
        let c = sp.check_condition(1e-6, 1e6, 600).unwrap();
        assert!(c.bracketed, "{c:?}");
        assert!((c.delta_emp - 1.0).abs() < 1e-9 && c.g0_emp <= 2.0 + 1e-9);
    }

    #[test]
    fn g_inverse_round_trip() {
        let p3 = GFunction::power(3.0).unwrap();
        assert!((p3.g_inverse(4.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(p3.g_inverse(0.0).unwrap(), 0.0);
        let pl = powerlog111();
        let y = pl.g(5.0).unwrap();
        assert!((pl.g_inverse(y).unwrap() - 5.0).abs() < 5e-12);
        for &t in &[1e-6, 1e-3, 0.1, 1.0, 10.0, 1e3, 1e6] {
            let x = pl.g_inverse(pl.g(t).unwrap()).unwrap();
            assert!((x - t).abs() <= 1e-10 * t, "round trip at {t}: {x}");
        }
    }

    #[test]
    fn gtilde_examples() {
        let p2 = GFunction::power(2.0).unwrap();
        assert!((p2.gtilde(2.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(p2.gtilde(0.0).unwrap(), 0.0);
        let p3 = GFunction::power(3.0).unwrap();
        assert!((p3.gtilde(1.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        // quadrature oracle on the generic path
        let pl = powerlog111();
        let direct = crate::quadrature::integrate_default(|y| pl.g_inverse(y).unwrap(), 0.0, 1.0).unwrap();
        assert!((pl.gtilde(1.0).unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn conjugate_identity() {
        let p2 = GFunction::power(2.0).unwrap();
        assert!(p2.conjugate_identity_defect(1.0).unwrap().abs() < 1e-12);
        let p3 = GFunction::power(3.0).unwrap();
        assert!(p3.conjugate_identity_defect(2.0).unwrap().abs() < 1e-9);
        let pl = powerlog111();
        let t = 3.0;
        let defect = pl.conjugate_identity_defect(t).unwrap();
        assert!(defect.abs() < 1e-7 * t * pl.g(t).unwrap(), "defect {defect:e}");
    }

    #[test]
    fn lambda_star_closed_forms() {
        let p2 = GFunction::power(2.0).unwrap();
        assert!((p2.lambda_star(0.5).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(p2.lambda_star(0.0).unwrap(), 0.0);
        let p3 = GFunction::power(3.0).unwrap();
        assert!((p3.lambda_star(2.0 / 3.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_star_round_trip() {
        let pl = powerlog111();
        for &s in &[0.01, 0.5, 1.0, 3.0, 20.0] {
            let lam = pl.phi(s).unwrap();
            let back = pl.lambda_star(lam).unwrap();
            assert!((back - s).abs() < 1e-10 * s, "s = {s}, back = {back}");
        }
    }

    #[test]
    fn inequality_suite_powerlog() {
        let pl = powerlog111();
        let grid = log_grid(1e-6, 1e6, 50);
        let rep = pl.inequality_suite(&grid, &grid).unwrap();
        assert!(rep.all_hold(1e-7), "min slack {:e} at {:?}", rep.min_slack(), rep.entries);
    }

    #[test]
    fn inequality_g1_equality_at_s1() {
        let p2 = GFunction::power(2.0).unwrap();
        let rep = p2.inequality_suite(&[1.0, 2.0], &[1.0]).unwrap();
        let lo = rep.entry("g1_lower").unwrap();
        let hi = rep.entry("g1_upper").unwrap();
        assert!(lo.min_slack.abs() < 1e-12 && hi.min_slack.abs() < 1e-12);
    }

    #[test]
    fn luxemburg_constant_function() {
        let p2 = GFunction::power(2.0).unwrap();
        // G(1/k) = 1 with unit measure: k = 1/sqrt(2)
        let k = p2.luxemburg_norm(&[(1.0, 1.0)]).unwrap();
        assert!((k - 1.0 / 2f64.sqrt()).abs() < 1e-10);
        assert_eq!(p2.luxemburg_norm(&[(0.0, 1.0)]).unwrap(), 0.0);
        // homogeneity
        let samples: Vec<(f64, f64)> = vec![(0.3, 0.25), (1.7, 0.5), (0.9, 0.25)];
        let doubled: Vec<(f64, f64)> = samples.iter().map(|&(v, m)| (2.0 * v, m)).collect();
        let n1 = p2.luxemburg_norm(&samples).unwrap();
        let n2 = p2.luxemburg_norm(&doubled).unwrap();
        assert!((n2 - 2.0 * n1).abs() < 1e-9 * n1);
    }

    #[test]
    fn luxemburg_bound_holds() {
        let pl = powerlog111();
        let samples: Vec<(f64, f64)> = vec![(0.5, 0.2), (2.5, 0.3), (4.0, 0.5)];
        let norm = pl.luxemburg_norm(&samples).unwrap();
        let integral: f64 =
            samples.iter().map(|&(v, m)| m * pl.big_g(v).unwrap()).sum();
        assert!(norm <= pl.luxemburg_bound(integral) * (1.0 + 1e-12));
    }

    #[test]
    fn powerlog_c_below_one_rejected() {
        assert!(GFunction::power_log(1.0, 1.0, 0.5).is_err());
    }
}
