//! Cell normalization shared by indexing and querying.
//!
//! * text: trimmed, lowercased, inner whitespace collapsed to one space
//! * numbers: exact canonical decimal, so `77`, `77.0` and `7.70e1` coincide
//! * booleans: `true` / `false`
//! * missing: [`MISSING`]
//!
//! Numbers are compared by their decimal text, never through a tolerance.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use tabaudit_core::Cell;

/// Normalized form of a missing cell. Never indexed.
pub const MISSING: &str = "\u{0}missing";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizeOptions {
    /// Rewrite `m/d/yyyy` and `yyyy/m/d` text dates as ISO `yyyy-mm-dd`.
    pub fold_dates: bool,
}

pub fn normalize_cell(cell: &Cell, opts: &NormalizeOptions) -> String {
    match cell {
        Cell::Missing => MISSING.to_string(),
        Cell::Bool { value, .. } => value.to_string(),
        Cell::Number { raw, value } => {
            canonical_decimal(raw.trim()).unwrap_or_else(|| value.to_string())
        }
        Cell::Text(s) => {
            let collapsed = collapse_lower(s);
            if opts.fold_dates {
                if let Some(iso) = fold_date(&collapsed) {
                    return iso;
                }
            }
            collapsed
        }
    }
}

/// Parses and normalizes raw text in one step.
pub fn normalize_raw(raw: &str, opts: &NormalizeOptions) -> String {
    normalize_cell(&Cell::parse(raw), opts)
}

fn collapse_lower(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

fn fold_date(s: &str) -> Option<String> {
    const FORMATS: &[&str] = &["%m/%d/%Y", "%Y/%m/%d", "%Y-%m-%d"];
    FORMATS
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(s, f).ok())
        .map(|d| d.format("%Y-%m-%d").to_string())
}

/// Exact canonical text of a decimal literal: no exponent, no leading zeros,
/// no trailing fractional zeros, no `-0`. `None` if `s` is not a decimal
/// literal or its exponent is absurdly large.
pub fn canonical_decimal(s: &str) -> Option<String> {
    let (negative, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i64>().ok()?),
        None => (body, 0),
    };
    if exponent.abs() > 400 {
        return None;
    }
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: String = format!("{int_part}{frac_part}");
    // position of the decimal point within `digits`
    let point = int_part.len() as i64 + exponent;
    let (mut int_digits, mut frac_digits) = if point <= 0 {
        (String::new(), format!("{}{}", "0".repeat((-point) as usize), digits))
    } else if point as usize >= digits.len() {
        (format!("{}{}", digits, "0".repeat(point as usize - digits.len())), String::new())
    } else {
        (digits[..point as usize].to_string(), digits[point as usize..].to_string())
    };
    let trimmed_int = int_digits.trim_start_matches('0').len();
    int_digits = int_digits[int_digits.len() - trimmed_int..].to_string();
    frac_digits.truncate(frac_digits.trim_end_matches('0').len());
    if int_digits.is_empty() {
        int_digits.push('0');
    }
    let is_zero = int_digits == "0" && frac_digits.is_empty();
    let mut out = String::new();
    if negative && !is_zero {
        out.push('-');
    }
    out.push_str(&int_digits);
    if !frac_digits.is_empty() {
        out.push('.');
        out.push_str(&frac_digits);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn n(raw: &str) -> String {
        normalize_raw(raw, &NormalizeOptions::default())
    }

    #[test]
    fn examples() {
        assert_eq!(n(" 77.0 "), "77");
        assert_eq!(n("77.00"), "77");
        assert_eq!(n("77"), "77");
        assert_eq!(n("Tuesday"), n("tuesday"));
        assert_eq!(n("TRUE"), "true");
        assert_eq!(n("  Ally   Love "), "ally love");
        assert_eq!(n(""), MISSING);
    }

    #[test]
    fn decimals() {
        assert_eq!(canonical_decimal("0.0").as_deref(), Some("0"));
        assert_eq!(canonical_decimal("-0.000").as_deref(), Some("0"));
        assert_eq!(canonical_decimal("007.50").as_deref(), Some("7.5"));
        assert_eq!(canonical_decimal("1e3").as_deref(), Some("1000"));
        assert_eq!(canonical_decimal("1.5E-3").as_deref(), Some("0.0015"));
        assert_eq!(canonical_decimal("-12.5e1").as_deref(), Some("-125"));
        assert_eq!(canonical_decimal(".5").as_deref(), Some("0.5"));
        assert_eq!(canonical_decimal("5.").as_deref(), Some("5"));
        assert_eq!(canonical_decimal("8805.7783203125").as_deref(), Some("8805.7783203125"));
        assert_eq!(canonical_decimal("abc"), None);
        assert_eq!(canonical_decimal("1e999"), None);
        // distinct values stay distinct
        assert_ne!(n("8805.78"), n("8805.7783203125"));
    }

    #[test]
    fn date_folding_is_opt_in() {
        let fold = NormalizeOptions { fold_dates: true };
        assert_eq!(normalize_raw("11/30/2021", &fold), "2021-11-30");
        assert_eq!(normalize_raw("2021-11-30", &fold), "2021-11-30");
        assert_eq!(n("11/30/2021"), "11/30/2021");
        assert_eq!(normalize_raw("13/45/2021", &fold), "13/45/2021");
    }

    proptest! {
        #[test]
        fn canonical_matches_f64_value(int in 0u32..100_000, frac in 0u32..10_000, zeros in 0usize..4, neg: bool) {
            let raw = format!("{}{}.{:04}{}", if neg { "-" } else { "" }, int, frac, "0".repeat(zeros));
            let canon = canonical_decimal(&raw).unwrap();
            prop_assert_eq!(canon.parse::<f64>().unwrap(), raw.parse::<f64>().unwrap());
            prop_assert!(!canon.contains('.') || !canon.ends_with('0'));
            prop_assert_eq!(canonical_decimal(&canon).unwrap(), canon.clone());
        }
    }
}
