//! Fixed-precision JSON numbers.
//!
//! Reports are serialized with 12 significant digits so golden files and
//! replay comparisons do not depend on the last bits of a float.

use serde::Serializer;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to 12 significant digits. Non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Serializes a float rounded to 12 significant digits. Infinities become
/// the strings `"inf"` / `"-inf"` and NaN becomes `null`.
pub fn sig12<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_nan() {
        s.serialize_none()
    } else if x.is_infinite() {
        s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(round_sig(*x))
    }
}

pub fn sig12_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&Sig12(*x))?;
    }
    seq.end()
}

pub fn sig12_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => sig12(v, s),
        None => s.serialize_none(),
    }
}

/// Wrapper that serializes through [`sig12`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig12(pub f64);

impl serde::Serialize for Sig12 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        sig12(&self.0, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_twelve_digits() {
        assert_eq!(round_sig(0.123456789012345), 0.123456789012);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(-2.5e-7), -2.5e-7);
        assert_eq!(round_sig(0.0), 0.0);
    }

    #[test]
    fn json_encoding() {
        let v = serde_json::to_string(&[Sig12(2.0 / 3.0), Sig12(f64::INFINITY), Sig12(f64::NAN)]).unwrap();
        assert_eq!(v, r#"[0.666666666667,"inf",null]"#);
    }
}
