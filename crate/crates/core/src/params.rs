//! Dependence regimes, parameter validation, and critical exponents.
//!
//! The critical exponent `q(r, p)` is the smallest uniform moment order for
//! which `sup_n E(|X_n|^q f(|X_n|)) < ∞` forces the weighted tail series to
//! converge, and it depends on how much dependence the sequence is allowed:
//!
//! | range       | ICS | MDS             | arbitrary (r < 1) |
//! |-------------|-----|-----------------|-------------------|
//! | `p ≤ 1`     | p   | p               | p                 |
//! | `1 < p ≤ 2` | p   | p               | (p−r)/(1−r)       |
//! | `p > 2`     | p   | 2(p−r)/(2−r)    | (p−r)/(1−r)       |

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How much dependence the sequence `{X_n}` is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DependenceRegime {
    /// No structural assumption at all (forces `r < 1`).
    Arbitrary,
    /// Pairwise negatively quadrant dependent, centered.
    PairwiseNqd,
    /// Negatively associated, centered.
    NegativelyAssociated,
    /// Martingale difference sequence.
    Mds,
    /// Independent and centered.
    IndependentCentered,
}

impl DependenceRegime {
    pub fn label(self) -> &'static str {
        match self {
            DependenceRegime::Arbitrary => "Arbitrary",
            DependenceRegime::PairwiseNqd => "PairwiseNQD",
            DependenceRegime::NegativelyAssociated => "NA",
            DependenceRegime::Mds => "MDS",
            DependenceRegime::IndependentCentered => "ICS",
        }
    }
}

/// Which form of the weighted series a regime supports: the maximal-sum form
/// is stronger than the plain `|S_n|` form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesForm {
    /// `Σ n^{p/r−2} P(M_n > ε n^{1/r})`
    MaxPartialSum,
    /// `Σ n^{p/r−2} P(|S_n| > ε n^{1/r})`
    AbsoluteSum,
}

/// The triple `(r, p, ε)` driving weights `n^{p/r−2}` and thresholds `ε n^{1/r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentParams {
    pub r: f64,
    pub p: f64,
    pub eps: f64,
}

impl ExponentParams {
    /// Validates `0 < r < 2`, `p ≥ r`, `eps > 0`.
    pub fn new(r: f64, p: f64, eps: f64) -> Result<Self> {
        if !(r > 0.0 && r < 2.0) {
            return Err(Error::invalid(format!("r={r} must lie in (0, 2)")));
        }
        if !(p >= r) {
            return Err(Error::invalid(format!("p={p} must satisfy p >= r={r}")));
        }
        if !(eps > 0.0) {
            return Err(Error::invalid(format!("eps={eps} must be positive")));
        }
        Ok(ExponentParams { r, p, eps })
    }

    /// Validates the triple against a regime's admissible range.
    pub fn for_regime(regime: DependenceRegime, r: f64, p: f64, eps: f64) -> Result<Self> {
        let params = Self::new(r, p, eps)?;
        validate_regime(regime, r, p)?;
        Ok(params)
    }

    /// Series weight `n^{p/r−2}`.
    pub fn series_weight(&self, n: u64) -> f64 {
        (n as f64).powf(self.p / self.r - 2.0)
    }

    /// Threshold `ε n^{1/r}`.
    pub fn threshold(&self, n: u64) -> f64 {
        self.eps * (n as f64).powf(1.0 / self.r)
    }
}

fn validate_regime(regime: DependenceRegime, r: f64, p: f64) -> Result<()> {
    match regime {
        DependenceRegime::Arbitrary => {
            // The constant sequence X_n = 1 already diverges for r >= 1.
            if r >= 1.0 {
                return Err(Error::unsupported(format!(
                    "arbitrary sequences require r < 1 (got r={r}); nearest result covers 0 < r < 1 <= p"
                )));
            }
            Ok(())
        }
        DependenceRegime::PairwiseNqd => {
            if !(1.0..2.0).contains(&p) {
                return Err(Error::unsupported(format!(
                    "pairwise NQD is covered only for 1 <= p < 2 (got p={p})"
                )));
            }
            Ok(())
        }
        DependenceRegime::NegativelyAssociated => {
            if p < 2.0 {
                return Err(Error::unsupported(format!(
                    "negatively associated sequences are covered only for p >= 2 (got p={p}); \
                     for 1 <= p < 2 use the pairwise NQD regime"
                )));
            }
            Ok(())
        }
        DependenceRegime::Mds | DependenceRegime::IndependentCentered => Ok(()),
    }
}

/// Critical exponent `q(r, p)` for the given regime.
///
/// Errors on combinations outside the implemented results rather than
/// extrapolating into open territory.
pub fn critical_exponent(regime: DependenceRegime, r: f64, p: f64) -> Result<f64> {
    if !(r > 0.0 && r < 2.0 && p >= r) {
        return Err(Error::invalid(format!(
            "need 0 < r < 2 and p >= r (got r={r}, p={p})"
        )));
    }
    validate_regime(regime, r, p)?;
    Ok(match regime {
        DependenceRegime::Arbitrary => p.max((p - r) / (1.0 - r)),
        DependenceRegime::Mds => {
            if p <= 2.0 {
                p
            } else {
                2.0 * (p - r) / (2.0 - r)
            }
        }
        DependenceRegime::PairwiseNqd
        | DependenceRegime::NegativelyAssociated
        | DependenceRegime::IndependentCentered => p,
    })
}

/// Which series form the regime's strongest covered statement asserts.
///
/// Pairwise NQD at `r = p` only yields the `|S_n|` form; everywhere else the
/// maximal form holds.
pub fn series_form(regime: DependenceRegime, r: f64, p: f64) -> SeriesForm {
    match regime {
        DependenceRegime::PairwiseNqd if r == p => SeriesForm::AbsoluteSum,
        _ => SeriesForm::MaxPartialSum,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(regime: DependenceRegime, r: f64, p: f64) -> f64 {
        critical_exponent(regime, r, p).unwrap()
    }

    #[test]
    fn critical_exponent_table_values() {
        assert_eq!(q(DependenceRegime::Mds, 1.0, 3.0), 4.0);
        assert_eq!(q(DependenceRegime::Arbitrary, 0.5, 1.5), 2.0);
        assert_eq!(q(DependenceRegime::Arbitrary, 0.5, 0.5), 0.5);
        assert_eq!(q(DependenceRegime::Mds, 1.0, 2.0), 2.0);
        assert_eq!(q(DependenceRegime::IndependentCentered, 1.0, 3.0), 3.0);
        assert_eq!(q(DependenceRegime::NegativelyAssociated, 0.5, 2.5), 2.5);
        assert_eq!(q(DependenceRegime::PairwiseNqd, 1.0, 1.5), 1.5);
    }

    #[test]
    fn unsupported_combinations_error() {
        assert!(critical_exponent(DependenceRegime::Arbitrary, 1.0, 1.0).is_err());
        assert!(critical_exponent(DependenceRegime::Arbitrary, 1.5, 1.5).is_err());
        assert!(critical_exponent(DependenceRegime::PairwiseNqd, 0.5, 2.0).is_err());
        assert!(critical_exponent(DependenceRegime::PairwiseNqd, 0.5, 0.9).is_err());
        assert!(critical_exponent(DependenceRegime::NegativelyAssociated, 0.5, 1.5).is_err());
        assert!(critical_exponent(DependenceRegime::Mds, 2.0, 3.0).is_err());
        assert!(critical_exponent(DependenceRegime::Mds, 0.5, 0.4).is_err());
    }

    #[test]
    fn series_weight_values() {
        let p = ExponentParams::new(1.0, 2.0, 1.0).unwrap();
        assert_eq!(p.series_weight(4), 1.0); // exponent 0
        let p = ExponentParams::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(p.series_weight(100), 0.01);
        let p = ExponentParams::new(1.0, 3.0, 1.0).unwrap();
        assert_eq!(p.series_weight(2), 2.0);
    }

    #[test]
    fn threshold_values() {
        let p = ExponentParams::new(0.5, 0.5, 1.0).unwrap();
        assert_eq!(p.threshold(9), 81.0);
        let p = ExponentParams::new(1.0, 1.0, 2.0).unwrap();
        assert_eq!(p.threshold(5), 10.0);
        let p = ExponentParams::new(2.0 - 1e-12, 2.0, 1.0).unwrap();
        let t = p.threshold(16);
        assert!((t - 4.0).abs() < 1e-9);
    }

    #[test]
    fn params_invariants() {
        assert!(ExponentParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ExponentParams::new(2.0, 2.0, 1.0).is_err());
        assert!(ExponentParams::new(1.0, 0.5, 1.0).is_err());
        assert!(ExponentParams::new(1.0, 1.0, 0.0).is_err());
        assert!(ExponentParams::for_regime(DependenceRegime::Arbitrary, 1.2, 1.5, 1.0).is_err());
    }

    // q_MDS >= p with equality exactly on p <= 2, and the arbitrary column
    // dominates the MDS column for p >= 1, r < 1.
    #[test]
    fn exponent_ordering_on_grid() {
        for ri in 1..20 {
            let r = ri as f64 * 0.1; // r in (0, 2)
            for pi in 0..40 {
                let p = r + pi as f64 * 0.15;
                let q_mds = q(DependenceRegime::Mds, r, p);
                assert!(q_mds >= p - 1e-12, "q_mds={q_mds} < p={p}");
                if p <= 2.0 {
                    assert_eq!(q_mds, p);
                } else {
                    assert!(q_mds > p);
                }
                if r < 1.0 && p >= 1.0 {
                    let q_arb = q(DependenceRegime::Arbitrary, r, p);
                    assert!(
                        q_arb >= q_mds - 1e-12,
                        "arbitrary q {q_arb} below MDS q {q_mds} at r={r} p={p}"
                    );
                }
            }
        }
    }

    #[test]
    fn nqd_diagonal_only_gets_sum_form() {
        assert_eq!(
            series_form(DependenceRegime::PairwiseNqd, 1.0, 1.0),
            SeriesForm::AbsoluteSum
        );
        assert_eq!(
            series_form(DependenceRegime::PairwiseNqd, 0.7, 1.2),
            SeriesForm::MaxPartialSum
        );
        assert_eq!(
            series_form(DependenceRegime::Mds, 1.0, 1.0),
            SeriesForm::MaxPartialSum
        );
    }
}
