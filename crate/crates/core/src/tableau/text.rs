//! Plain-text tableau format: `s`, then the `s` rows of `A`, then `b`, then
//! `c`, all whitespace separated. Entries are integers, decimals (`-0.25`,
//! `1e-3`) or fractions (`3/16`). Text after `#` on a line is ignored. When
//! `c` is left out it defaults to the row sums of `A`.

use num::{BigInt, BigRational, One, Zero};

use super::{ButcherTableau, Coefficient, TableauError};

pub fn parse_tableau(text: &str) -> Result<ButcherTableau, TableauError> {
    let tokens: Vec<&str> = text
        .lines()
        .map(|line| line.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .collect();
    let (&first, rest) = tokens
        .split_first()
        .ok_or_else(|| TableauError::Parse("empty input".into()))?;
    let s: usize = first
        .parse()
        .map_err(|_| TableauError::Parse(format!("stage count `{first}` is not a positive integer")))?;
    if s == 0 {
        return Err(TableauError::Empty);
    }
    let values = rest
        .iter()
        .map(|tok| parse_coefficient(tok))
        .collect::<Result<Vec<_>, _>>()?;
    let with_c = s * s + 2 * s;
    let without_c = s * s + s;
    if values.len() != with_c && values.len() != without_c {
        return Err(TableauError::Dimension(format!(
            "expected {with_c} coefficients (or {without_c} without c) for s = {s}, found {}",
            values.len()
        )));
    }
    let a: Vec<Vec<Coefficient>> = values[..s * s].chunks(s).map(<[_]>::to_vec).collect();
    let b = values[s * s..without_c].to_vec();
    if values.len() == with_c {
        ButcherTableau::new(a, b, values[without_c..].to_vec())
    } else {
        ButcherTableau::with_row_sum_c(a, b)
    }
}

/// Parses an integer, decimal, scientific or `p/q` literal exactly.
pub fn parse_coefficient(tok: &str) -> Result<Coefficient, TableauError> {
    let bad = || TableauError::Parse(format!("invalid coefficient `{tok}`"));
    if let Some((num, den)) = tok.split_once('/') {
        let num = parse_decimal(num).ok_or_else(bad)?;
        let den = parse_decimal(den).ok_or_else(bad)?;
        if den.is_zero() {
            return Err(TableauError::Parse(format!("zero denominator in `{tok}`")));
        }
        return Ok(num / den);
    }
    parse_decimal(tok).ok_or_else(bad)
}

fn parse_decimal(tok: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match tok.find(['e', 'E']) {
        Some(pos) => (&tok[..pos], tok[pos + 1..].parse::<i32>().ok()?),
        None => (tok, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(all_digits.parse::<BigInt>().ok()?);
    let shift = exponent - i32::try_from(frac_part.len()).ok()?;
    let ten = BigRational::from_integer(BigInt::from(10));
    let mut scale = BigRational::one();
    for _ in 0..shift.unsigned_abs() {
        scale *= &ten;
    }
    if shift >= 0 {
        value *= scale;
    } else {
        value /= scale;
    }
    Some(if negative { -value } else { value })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Coefficient {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn literals() {
        assert_eq!(parse_coefficient("3/16").unwrap(), q(3, 16));
        assert_eq!(parse_coefficient("-3/8").unwrap(), q(-3, 8));
        assert_eq!(parse_coefficient("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_coefficient("-.5").unwrap(), q(-1, 2));
        assert_eq!(parse_coefficient("1e-3").unwrap(), q(1, 1000));
        assert_eq!(parse_coefficient("2.5E1").unwrap(), q(25, 1));
        assert_eq!(parse_coefficient("7").unwrap(), q(7, 1));
        assert!(parse_coefficient("1/0").is_err());
        assert!(parse_coefficient("abc").is_err());
        assert!(parse_coefficient(".").is_err());
        assert!(parse_coefficient("").is_err());
    }

    #[test]
    fn heun2_from_text() {
        let t = parse_tableau("2\n0 0\n1 0\n1/2 1/2\n0 1\n").unwrap();
        assert_eq!(t.stages(), 2);
        assert!(t.is_explicit());
        assert_eq!(t.c(), &[q(0, 1), q(1, 1)]);
    }

    #[test]
    fn omitted_c_defaults_to_row_sums() {
        let t = parse_tableau("# implicit midpoint\n1\n1/2\n1").unwrap();
        assert_eq!(t.c(), &[q(1, 2)]);
    }

    #[test]
    fn wrong_count() {
        assert!(matches!(
            parse_tableau("2\n0 0 1 0\n0.5").unwrap_err(),
            TableauError::Dimension(_)
        ));
        assert!(parse_tableau("").is_err());
        assert_eq!(parse_tableau("0").unwrap_err(), TableauError::Empty);
    }
}
