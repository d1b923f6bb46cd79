use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Score at or above which a unit is called deceptive.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Binary ground truth. Deceptive is the positive class (encoded 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Truthful,
    Deceptive,
}

impl Label {
    pub const BOTH: [Label; 2] = [Label::Truthful, Label::Deceptive];

    pub fn from_score(score: f64) -> Label {
        if score >= DECISION_THRESHOLD {
            Label::Deceptive
        } else {
            Label::Truthful
        }
    }

    /// 1 for deceptive, 0 for truthful.
    pub fn as_index(self) -> usize {
        match self {
            Label::Truthful => 0,
            Label::Deceptive => 1,
        }
    }

    /// +1 for deceptive, -1 for truthful (SVM convention).
    pub fn as_sign(self) -> f64 {
        match self {
            Label::Truthful => -1.0,
            Label::Deceptive => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Truthful => "truthful",
            Label::Deceptive => "deceptive",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "truthful" => Ok(Label::Truthful),
            "deceptive" => Ok(Label::Deceptive),
            other => Err(Error::data(format!("unknown label `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_inclusive_toward_deceptive() {
        assert_eq!(Label::from_score(0.5), Label::Deceptive);
        assert_eq!(Label::from_score(0.4999999), Label::Truthful);
        assert_eq!(Label::Deceptive.as_index(), 1);
        assert_eq!(Label::Truthful.as_sign(), -1.0);
    }
}
