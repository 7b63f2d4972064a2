//! Odd power-type nonlinearities `f(t) = sum c_i |t|^(p_i - 2) t` and the
//! structural hypotheses the existence theory needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EXP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    PowerSum,
    CubicQuintic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coefficient: f64,
    pub exponent: f64,
}

impl PowerTerm {
    pub fn new(coefficient: f64, exponent: f64) -> Self {
        Self {
            coefficient,
            exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityModel {
    kind: NonlinearityKind,
    terms: Vec<PowerTerm>,
    dimension: usize,
}

/// `|t|^e`, using repeated multiplication when `e` is a small integer.
#[inline]
pub(crate) fn abs_pow(t: f64, e: f64) -> f64 {
    let a = t.abs();
    if e == 0.0 {
        return 1.0;
    }
    if e.fract() == 0.0 && e.abs() <= 32.0 {
        a.powi(e as i32)
    } else if a == 0.0 {
        0.0
    } else {
        a.powf(e)
    }
}

impl NonlinearityModel {
    /// Validates exponents (all in `(2, 2*]`, with `2* = 2N/(N-2)` when `N >= 3`),
    /// drops zero coefficients and merges repeated exponents.
    pub fn power_sum(terms: Vec<PowerTerm>, dimension: usize) -> Result<Self> {
        Self::build(NonlinearityKind::PowerSum, terms, dimension)
    }

    /// `f(t) = t^3 - t^5` in three dimensions.
    pub fn cubic_quintic() -> Self {
        Self::build(
            NonlinearityKind::CubicQuintic,
            vec![PowerTerm::new(1.0, 4.0), PowerTerm::new(-1.0, 6.0)],
            3,
        )
        .expect("cubic-quintic terms are valid in three dimensions")
    }

    pub fn with_dimension(self, dimension: usize) -> Result<Self> {
        Self::build(self.kind, self.terms, dimension)
    }

    fn build(kind: NonlinearityKind, terms: Vec<PowerTerm>, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        let mut merged: Vec<PowerTerm> = Vec::new();
        for t in terms {
            if !t.coefficient.is_finite() || !t.exponent.is_finite() {
                return Err(Error::InvalidModel(
                    "non-finite coefficient or exponent".into(),
                ));
            }
            if t.exponent <= 2.0 {
                return Err(Error::InvalidModel(format!(
                    "exponent {} is not above 2",
                    t.exponent
                )));
            }
            if let Some(crit) = critical_exponent(dimension) {
                if t.exponent > crit + EXP_EPS {
                    return Err(Error::InvalidModel(format!(
                        "exponent {} exceeds the critical exponent {crit}",
                        t.exponent
                    )));
                }
            }
            match merged
                .iter_mut()
                .find(|m| (m.exponent - t.exponent).abs() <= EXP_EPS)
            {
                Some(m) => m.coefficient += t.coefficient,
                None => merged.push(t),
            }
        }
        merged.retain(|t| t.coefficient != 0.0);
        if merged.is_empty() {
            return Err(Error::InvalidModel("no nonzero terms".into()));
        }
        merged.sort_by(|a, b| a.exponent.total_cmp(&b.exponent));
        Ok(Self {
            kind,
            terms: merged,
            dimension,
        })
    }

    pub fn kind(&self) -> NonlinearityKind {
        self.kind
    }

    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// `2 + 4/N`, the mass-critical exponent.
    pub fn mass_critical_exponent(&self) -> f64 {
        2.0 + 4.0 / self.dimension as f64
    }

    /// `2N/(N-2)` for `N >= 3`, `None` otherwise.
    pub fn critical_exponent(&self) -> Option<f64> {
        critical_exponent(self.dimension)
    }

    fn is_cubic_quintic(&self) -> bool {
        self.kind == NonlinearityKind::CubicQuintic
    }

    /// `f(t)`.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        if self.is_cubic_quintic() {
            let t2 = t * t;
            return t * t2 * (1.0 - t2);
        }
        self.terms
            .iter()
            .map(|term| term.coefficient * abs_pow(t, term.exponent - 2.0) * t)
            .sum()
    }

    /// `F(t) = int_0^t f`.
    #[inline]
    pub fn primitive(&self, t: f64) -> f64 {
        if self.is_cubic_quintic() {
            let t2 = t * t;
            let t4 = t2 * t2;
            return t4 * (0.25 - t2 / 6.0);
        }
        self.terms
            .iter()
            .map(|term| term.coefficient / term.exponent * abs_pow(t, term.exponent))
            .sum()
    }

    /// `f'(t)`.
    #[inline]
    pub fn derivative(&self, t: f64) -> f64 {
        if self.is_cubic_quintic() {
            let t2 = t * t;
            return t2 * (3.0 - 5.0 * t2);
        }
        self.terms
            .iter()
            .map(|term| term.coefficient * (term.exponent - 1.0) * abs_pow(t, term.exponent - 2.0))
            .sum()
    }

    /// `g(s)` with `f(z) = g(|z|^2) z` for complex `z`.
    #[inline]
    pub fn phase_rate(&self, s: f64) -> f64 {
        if self.is_cubic_quintic() {
            return s - s * s;
        }
        self.terms
            .iter()
            .map(|term| term.coefficient * abs_pow(s, 0.5 * (term.exponent - 2.0)))
            .sum()
    }

    /// Evaluates every structural hypothesis from the exponent/coefficient data.
    pub fn check_hypotheses(&self) -> HypothesisReport {
        check(self)
    }
}

fn critical_exponent(dimension: usize) -> Option<f64> {
    (dimension >= 3).then(|| 2.0 * dimension as f64 / (dimension as f64 - 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Undetermined,
}

impl Verdict {
    fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub dimension: usize,
    pub f1: Verdict,
    pub f2: Verdict,
    pub f3: Verdict,
    pub f4: Verdict,
    pub f5: Verdict,
    pub a1: Verdict,
    pub a2: Verdict,
    pub a3: Verdict,
    /// A point with `F(zeta) > 0` when (f3) holds.
    pub zeta: Option<f64>,
    /// Admissible exponent range for `theta F >= f t`, ends as computed.
    pub theta_interval: Option<(f64, f64)>,
    pub theta: Option<f64>,
}

impl HypothesisReport {
    /// Looks up a flag by its name (`f1`..`f5`, `a1`..`a3`).
    pub fn verdict(&self, name: &str) -> Option<Verdict> {
        Some(match name.to_ascii_lowercase().as_str() {
            "f1" => self.f1,
            "f2" => self.f2,
            "f3" => self.f3,
            "f4" => self.f4,
            "f5" => self.f5,
            "a1" => self.a1,
            "a2" => self.a2,
            "a3" => self.a3,
            _ => return None,
        })
    }

    pub fn flags(&self) -> [(&'static str, Verdict); 8] {
        [
            ("f1", self.f1),
            ("f2", self.f2),
            ("f3", self.f3),
            ("f4", self.f4),
            ("f5", self.f5),
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
        ]
    }
}

fn check(model: &NonlinearityModel) -> HypothesisReport {
    let terms = &model.terms;
    let low = terms[0];
    let top = *terms.last().unwrap();
    let mc = model.mass_critical_exponent();
    let crit = model.critical_exponent();

    let f1 = Verdict::Holds; // every exponent exceeds 2 by construction

    let top_ok = if top.exponent > mc + EXP_EPS {
        top.coefficient < 0.0
    } else if (top.exponent - mc).abs() <= EXP_EPS {
        top.coefficient <= 0.0
    } else {
        true
    };
    let f2 = Verdict::from_bool(top_ok);

    let (f3, zeta) = check_f3(model);

    // Behaviour at the origin is governed by the lowest exponent.
    let low_subcritical = low.exponent < mc - EXP_EPS;
    let f4_ok = low.exponent > mc + EXP_EPS || low.coefficient < 0.0;
    let f4 = Verdict::from_bool(f4_ok);
    let a1_ok = low_subcritical && low.coefficient > 0.0;
    let a1 = Verdict::from_bool(a1_ok);
    let a2 = Verdict::from_bool(!a1_ok);
    // f t - 2F has the coefficients c (1 - 2/p), which carry the sign of c.
    let a3 = f4;

    let (f5, theta_interval, theta) = check_f5(terms, crit);

    HypothesisReport {
        dimension: model.dimension,
        f1,
        f2,
        f3,
        f4,
        f5,
        a1,
        a2,
        a3,
        zeta,
        theta_interval,
        theta,
    }
}

fn check_f3(model: &NonlinearityModel) -> (Verdict, Option<f64>) {
    let terms = &model.terms;
    let low = terms[0];
    let top = *terms.last().unwrap();
    let big_f = |t: f64| model.primitive(t);

    if terms.iter().all(|t| t.coefficient < 0.0) {
        return (Verdict::Fails, None);
    }
    if terms.len() == 2 && low.coefficient > 0.0 && top.coefficient < 0.0 {
        // Explicit maximiser of a t^p/p - b t^q/q.
        let zeta = (low.coefficient / -top.coefficient).powf(1.0 / (top.exponent - low.exponent));
        return (Verdict::Holds, Some(zeta));
    }
    if low.coefficient > 0.0 {
        let mut z = 1.0;
        for _ in 0..2000 {
            if big_f(z) > 0.0 {
                return (Verdict::Holds, Some(z));
            }
            z *= 0.5;
        }
        return (Verdict::Holds, None);
    }
    if top.coefficient > 0.0 {
        let mut z = 1.0;
        for _ in 0..2000 {
            if big_f(z) > 0.0 {
                return (Verdict::Holds, Some(z));
            }
            z *= 2.0;
        }
        return (Verdict::Holds, None);
    }
    if terms.len() == 3 {
        // c3 t^r - ..., signs (-, +, -) with r < p < q.
        let (r, c) = (terms[0].exponent, -terms[0].coefficient);
        let (p, a) = (terms[1].exponent, terms[1].coefficient);
        let (q, b) = (terms[2].exponent, -terms[2].coefficient);
        let lhs = (q - r) * (a / (p * (q - r))).ln();
        let rhs = (p - r) * (b / (q * (p - r))).ln() + (q - p) * (c / (r * (q - p))).ln();
        let holds = lhs > rhs;
        let zeta = if holds {
            maximize_primitive(model).map(|(t, _)| t)
        } else {
            None
        };
        return (Verdict::from_bool(holds), zeta);
    }
    match maximize_primitive(model) {
        Some((t, v)) if v > 0.0 => (Verdict::Holds, Some(t)),
        _ => (Verdict::Undetermined, None),
    }
}

/// Maximises `F` over a logarithmic scan of `(1e-8, 1e8)` refined by golden section.
fn maximize_primitive(model: &NonlinearityModel) -> Option<(f64, f64)> {
    let n = 4000;
    let (lo, hi) = (
        -8.0f64 * std::f64::consts::LN_10,
        8.0f64 * std::f64::consts::LN_10,
    );
    let step = (hi - lo) / n as f64;
    let g = |s: f64| model.primitive(s.exp());
    let (mut best_s, mut best) = (lo, g(lo));
    for i in 1..=n {
        let s = lo + step * i as f64;
        let v = g(s);
        if v > best {
            best = v;
            best_s = s;
        }
    }
    let (mut a, mut b) = (best_s - step, best_s + step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if g(c) > g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let s = 0.5 * (a + b);
    let v = g(s);
    if v >= best {
        Some((s.exp(), v))
    } else {
        Some((best_s.exp(), best))
    }
}

/// `theta F(t) >= f(t) t` reads `sum c (theta/p - 1) |t|^p >= 0`; each positive
/// term needs `theta >= p`, each negative one `theta <= p`.
fn check_f5(terms: &[PowerTerm], crit: Option<f64>) -> (Verdict, Option<(f64, f64)>, Option<f64>) {
    let p_max = terms.last().unwrap().exponent;
    let cap = crit.unwrap_or(p_max + 10.0);
    let lo = terms
        .iter()
        .filter(|t| t.coefficient > 0.0)
        .map(|t| t.exponent)
        .fold(2.0, f64::max);
    let hi = terms
        .iter()
        .filter(|t| t.coefficient < 0.0)
        .map(|t| t.exponent)
        .fold(cap, f64::min);
    // Open at 2 and at 2*; closed at term exponents.
    let lo_open = lo <= 2.0;
    let hi_open = hi >= cap && crit.is_some();
    let nonempty = if lo_open || hi_open {
        lo < hi
    } else {
        lo <= hi
    };
    if nonempty {
        return (Verdict::Holds, Some((lo, hi)), Some(0.5 * (lo + hi)));
    }
    // Necessary conditions from t -> 0 and t -> infinity.
    let low = terms[0];
    let top = *terms.last().unwrap();
    let mut nlo: f64 = 2.0;
    let mut nhi: f64 = cap;
    for t in [low, top] {
        if t.coefficient > 0.0 {
            nlo = nlo.max(t.exponent);
        } else {
            nhi = nhi.min(t.exponent);
        }
    }
    let possible = nlo < nhi || (nlo == nhi && nlo > 2.0 && (crit.is_none() || nlo < cap));
    if possible {
        (Verdict::Undetermined, None, None)
    } else {
        (Verdict::Fails, None, None)
    }
}
