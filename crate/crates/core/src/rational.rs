//! Exact rational scalars and their text forms.
//!
//! Every value that reaches a solver is a [`Rat`]. On the wire (JSON, CSV)
//! rationals are `"p/q"` strings (plain `"p"` for integers); CSV additionally
//! carries a 12-significant-digit decimal rendering for human consumption.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;

pub fn rat_int(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

pub fn rat(num: i64, den: i64) -> Rat {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_u(n: u64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

/// Parse `"p/q"` or `"p"` (optionally signed, arbitrary precision).
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num = BigInt::from_str(num).map_err(|_| Error::parse(format!("bad rational `{s}`")))?;
    let den = BigInt::from_str(den).map_err(|_| Error::parse(format!("bad rational `{s}`")))?;
    if den.is_zero() {
        return Err(Error::parse(format!("zero denominator in `{s}`")));
    }
    Ok(BigRational::new(num, den))
}

/// Canonical `"p/q"` form; integers render without the denominator.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Decimal rendering with `sig` significant digits (round half away from zero).
pub fn format_decimal(r: &Rat, sig: usize) -> String {
    if r.is_zero() {
        return "0".to_string();
    }
    let neg = r.is_negative();
    let a = r.abs();
    // exponent e such that 10^e <= a < 10^(e+1)
    let mut e: i64 = 0;
    let ten = rat_int(10);
    let one = Rat::one();
    let mut scaled = a.clone();
    while scaled >= ten {
        scaled /= &ten;
        e += 1;
    }
    while scaled < one {
        scaled *= &ten;
        e -= 1;
    }
    // round a * 10^(sig-1-e) to an integer of `sig` digits
    let shift = sig as i64 - 1 - e;
    let mut scaled = a;
    if shift >= 0 {
        scaled *= ten.pow(shift as i32);
    } else {
        scaled /= ten.pow((-shift) as i32);
    }
    let mut digits: BigInt = (scaled.numer() * 2 + scaled.denom()) / (scaled.denom() * 2);
    // rounding may carry into one extra digit ("999.95" -> "1000")
    let mut e = e;
    if digits.to_string().len() > sig {
        digits /= 10;
        e += 1;
    }
    let ds = digits.to_string();
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if e >= 0 && (e as usize) < sig {
        let point = e as usize + 1;
        out.push_str(&ds[..point]);
        let frac = ds[point..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    } else if e < 0 && e >= -6 {
        out.push_str("0.");
        for _ in 0..(-e - 1) {
            out.push('0');
        }
        out.push_str(ds.trim_end_matches('0'));
    } else {
        out.push_str(&ds[..1]);
        let frac = ds[1..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
        out.push('e');
        out.push_str(&e.to_string());
    }
    out
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// serde adapter: a single `Rat` as a `"p/q"` string.
pub mod rat_serde {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(de::Error::custom)
    }
}

/// serde adapter: `Vec<Rat>` as a list of `"p/q"` strings.
pub mod rat_vec_serde {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(format_rat))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Rat>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| parse_rat(s).map_err(de::Error::custom)).collect()
    }
}

/// serde adapter: `Option<Rat>`.
pub mod rat_opt_serde {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Rat>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&format_rat(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<Rat>, D::Error> {
        let v = Option::<String>::deserialize(d)?;
        v.map(|s| parse_rat(&s).map_err(de::Error::custom)).transpose()
    }
}

/// A uniform dyadic rational in `[0, 1)` with 53 random bits.
pub fn uniform_unit<R: rand::Rng>(rng: &mut R) -> Rat {
    let bits: u64 = rng.gen_range(0..(1u64 << 53));
    Rat::new(BigInt::from(bits), BigInt::from(1u64 << 53))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["3/4", "-7/2", "5", "0", "123456789012345678901/7"] {
            let r = parse_rat(s).unwrap();
            assert_eq!(format_rat(&r), s);
        }
        assert_eq!(format_rat(&parse_rat("6/4").unwrap()), "3/2");
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("abc").is_err());
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(format_decimal(&rat(1, 3), 12), "0.333333333333");
        assert_eq!(format_decimal(&rat_int(42), 12), "42");
        assert_eq!(format_decimal(&rat(-1, 8), 12), "-0.125");
        assert_eq!(format_decimal(&rat(47, 46), 12), "1.02173913043");
        assert_eq!(format_decimal(&Rat::zero(), 12), "0");
        assert_eq!(format_decimal(&rat(1, 1000000), 12), "0.000001");
        assert_eq!(format_decimal(&rat(9999995, 10), 6), "1e6");
    }
}
