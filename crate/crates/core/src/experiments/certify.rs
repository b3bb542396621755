use serde::{Deserialize, Serialize};

use crate::embedded::{ec_bound, er_coefficient, pr_bound, SweepSup};
use crate::ergodicity::{dobrushin_coefficient, me_constant, ErgodicityCertificate, MeCertificate};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::search::SearchBudget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedCertificate {
    /// Supremum of the embedded-kernel contraction coefficient.
    pub er: SweepSup,
    /// Supremum of `E_x τ_R²` over `x ∈ R`.
    pub ec: SweepSup,
    /// Supremum of `E_x D_R` over all states.
    pub pr: SweepSup,
}

impl EmbeddedCertificate {
    pub fn holds(&self) -> bool {
        self.er.value < 1.0 && self.ec.value.is_finite() && self.pr.value.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub ue: ErgodicityCertificate,
    pub me: MeCertificate,
    pub embedded: Option<EmbeddedCertificate>,
}

impl CertificateReport {
    pub fn ue_holds(&self) -> bool {
        self.ue.holds()
    }

    pub fn me_holds(&self) -> bool {
        self.me.holds()
    }

    pub fn embedded_holds(&self) -> bool {
        self.embedded.as_ref().is_some_and(EmbeddedCertificate::holds)
    }

    /// Invariant measures are stable under either route.
    pub fn stability_holds(&self) -> bool {
        self.ue_holds() || self.embedded_holds()
    }

    /// Checks the assumptions needed by a problem of the suite.
    pub fn require(&self, problem: u8) -> Result<()> {
        let ue = || {
            if self.ue_holds() {
                Ok(())
            } else {
                Err(Error::CertificateFailure(format!(
                    "problem {problem} needs uniform ergodicity; delta = {}",
                    self.ue.delta
                )))
            }
        };
        let me = || {
            if self.me_holds() {
                Ok(())
            } else {
                Err(Error::CertificateFailure(format!(
                    "problem {problem} needs a finite minorization ratio; K is infinite"
                )))
            }
        };
        match problem {
            1 | 2 if self.stability_holds() => Ok(()),
            1 | 2 => Err(Error::CertificateFailure(format!(
                "problem {problem} needs uniform ergodicity (delta = {}) or the embedded-chain conditions{}",
                self.ue.delta,
                if self.embedded.is_none() { " (no balls in model)" } else { "" }
            ))),
            3..=6 => ue().and_then(|_| me()),
            other => Err(Error::InvalidArgument(format!("unknown problem {other}"))),
        }
    }
}

/// One-step certificates plus the embedded-chain conditions when balls are given.
pub fn certify(model: &Model, budget: &SearchBudget) -> Result<CertificateReport> {
    let ue = dobrushin_coefficient(&model.family, 1, budget)?;
    let me = me_constant(&model.family, 1, budget)?;
    let embedded = match &model.balls {
        Some(balls) => Some(EmbeddedCertificate {
            er: er_coefficient(&model.family, balls, budget)?,
            ec: ec_bound(&model.family, balls, budget)?,
            pr: pr_bound(&model.family, balls, budget)?,
        }),
        None => None,
    };
    Ok(CertificateReport { ue, me, embedded })
}
