//! `--gate` thresholds on evaluation metrics.

use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Lt,
    Ge,
    Gt,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub metric: String,
    pub cmp: Cmp,
    pub bound: f64,
}

impl FromStr for Gate {
    type Err = String;

    /// `name<=value`, `name<value`, `name>=value` or `name>value`.
    fn from_str(s: &str) -> Result<Self, String> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        for (tok, cmp) in [("<=", Cmp::Le), (">=", Cmp::Ge), ("<", Cmp::Lt), (">", Cmp::Gt)] {
            if let Some(at) = s.find(tok) {
                let metric = &s[..at];
                let rhs = &s[at + tok.len()..];
                if metric.is_empty() {
                    return Err(format!("gate {s:?} has no metric name"));
                }
                let bound: f64 = rhs.parse().map_err(|_| format!("gate {s:?}: {rhs:?} is not a number"))?;
                return Ok(Gate {
                    metric: metric.to_string(),
                    cmp,
                    bound,
                });
            }
        }
        Err(format!("gate {s:?} needs one of <=, <, >=, >"))
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.cmp {
            Cmp::Le => "<=",
            Cmp::Lt => "<",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        };
        write!(f, "{}{op}{}", self.metric, self.bound)
    }
}

impl Gate {
    /// NaN never passes.
    pub fn passes(&self, value: f64) -> bool {
        match self.cmp {
            Cmp::Le => value <= self.bound,
            Cmp::Lt => value < self.bound,
            Cmp::Ge => value >= self.bound,
            Cmp::Gt => value > self.bound,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_checks() {
        let g: Gate = "psi_mre_median_t3<=0.25".parse().unwrap();
        assert_eq!(g.metric, "psi_mre_median_t3");
        assert_eq!(g.cmp, Cmp::Le);
        assert!(g.passes(0.25) && !g.passes(0.26) && !g.passes(f64::NAN));
        let g: Gate = "zeta_ppmcc_median >= 0.98".parse().unwrap();
        assert!(g.passes(0.99) && !g.passes(0.5));
        assert_eq!(g.to_string(), "zeta_ppmcc_median>=0.98");
        assert!("x=1".parse::<Gate>().is_err());
        assert!("<=1".parse::<Gate>().is_err());
        assert!("x<=abc".parse::<Gate>().is_err());
    }
}
