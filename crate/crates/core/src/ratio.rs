//! Exact rational arithmetic helpers. All capacities, weights, flows and
//! dual values in this crate are `BigRational`; there is no floating point
//! anywhere in the solver.

use crate::error::{AtspError, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rint(n: i64) -> Rat {
    Rat::from(BigInt::from(n))
}

pub fn rzero() -> Rat {
    Rat::zero()
}

pub fn rone() -> Rat {
    Rat::one()
}

/// Renders a rational as `p/q` (or just `p` when the denominator is 1).
pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p`, `p/q` or a plain integer string into a rational.
pub fn rat_from_string(s: &str) -> Result<Rat> {
    let s = s.trim();
    let parse_int = |t: &str| -> Result<BigInt> {
        t.parse::<BigInt>().map_err(|e| AtspError::Parse {
            line: 0,
            msg: format!("bad rational `{s}`: {e}"),
        })
    };
    match s.split_once('/') {
        Some((p, q)) => {
            let num = parse_int(p)?;
            let den = parse_int(q)?;
            if den.is_zero() {
                return Err(AtspError::Parse {
                    line: 0,
                    msg: format!("zero denominator in `{s}`"),
                });
            }
            Ok(Rat::new(num, den))
        }
        None => Ok(Rat::from(parse_int(s)?)),
    }
}

/// Decimal approximation for `--human` output only; never used in computation.
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn floor_int(r: &Rat) -> i64 {
    r.floor().to_integer().to_i64().expect("floor fits in i64")
}

pub fn ceil_int(r: &Rat) -> i64 {
    r.ceil().to_integer().to_i64().expect("ceil fits in i64")
}

pub fn is_integral(r: &Rat) -> bool {
    r.denom().is_one()
}

pub fn rabs(r: &Rat) -> Rat {
    r.abs()
}
