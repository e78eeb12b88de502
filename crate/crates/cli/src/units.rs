//! SI quantities written as text, e.g. `"921 MHz"`, `"154 ps"`, `"1 us"`.
//!
//! Parsing goes through decimal text so a value written by [`format`] reads
//! back bit-identical.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Hertz,
    Second,
    Volt,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Hertz => "Hz",
            Unit::Second => "s",
            Unit::Volt => "V",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

const PREFIXES: [(&str, i32); 11] = [
    ("T", 12),
    ("G", 9),
    ("M", 6),
    ("k", 3),
    ("", 0),
    ("m", -3),
    ("u", -6),
    ("µ", -6),
    ("n", -9),
    ("p", -12),
    ("f", -15),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot read {text:?} as a quantity in {unit}: {reason}")]
pub struct UnitError {
    pub text: String,
    pub unit: Unit,
    pub reason: &'static str,
}

/// Parses `"<number> <prefix><unit>"`. Whitespace between number and unit is
/// optional; a bare number is taken in the base unit.
pub fn parse(text: &str, unit: Unit) -> Result<f64, UnitError> {
    let err = |reason| UnitError { text: text.to_string(), unit, reason };
    let t = text.trim();
    let split = t.find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))).unwrap_or(t.len());
    let (number, suffix) = t.split_at(split);
    let suffix = suffix.trim();
    let exponent = if suffix.is_empty() {
        0
    } else {
        let prefix = suffix.strip_suffix(unit.symbol()).ok_or_else(|| err("unknown or missing unit"))?;
        PREFIXES.iter().find(|(p, _)| *p == prefix).map(|(_, e)| *e).ok_or_else(|| err("unknown SI prefix"))?
    };
    let (mantissa, exp) = match number.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = number[i + 1..].parse().map_err(|_| err("malformed exponent"))?;
            (&number[..i], e)
        }
        None => (number, 0),
    };
    if mantissa.is_empty() || mantissa.parse::<f64>().is_err() {
        return Err(err("malformed number"));
    }
    let value: f64 = format!("{mantissa}e{}", exp + exponent).parse().map_err(|_| err("malformed number"))?;
    if !value.is_finite() {
        return Err(err("value out of range"));
    }
    Ok(value)
}

/// Shortest text that [`parse`] maps back to exactly `value`, using an
/// engineering prefix.
pub fn format(value: f64, unit: Unit) -> String {
    if value == 0.0 {
        return format!("0 {unit}");
    }
    let sci = format!("{value:e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let eng = (exp.div_euclid(3) * 3).clamp(-15, 12);
    let prefix = PREFIXES.iter().find(|(p, e)| *e == eng && *p != "µ").map(|(p, _)| *p).unwrap_or("");
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let digits: String = digits.chars().filter(|c| *c != '.').collect();
    let point = 1 + (exp - eng);
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits)
    } else if point as usize >= digits.len() {
        format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
    } else {
        let (a, b) = digits.split_at(point as usize);
        format!("{a}.{b}")
    };
    format!("{sign}{body} {prefix}{unit}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        assert_eq!(parse("921 MHz", Unit::Hertz).unwrap(), 921e6);
        assert_eq!(parse("154ps", Unit::Second).unwrap(), 154e-12);
        assert_eq!(parse("10 ns", Unit::Second).unwrap(), 10e-9);
        assert_eq!(parse("1 us", Unit::Second).unwrap(), 1e-6);
        assert_eq!(parse("1 µs", Unit::Second).unwrap(), 1e-6);
        assert_eq!(parse("1.25 GHz", Unit::Hertz).unwrap(), 1.25e9);
        assert_eq!(parse("0.455 mV", Unit::Volt).unwrap(), 0.455e-3);
        assert_eq!(parse("1.5e3 kHz", Unit::Hertz).unwrap(), 1.5e6);
        assert_eq!(parse("-25 ps", Unit::Second).unwrap(), -25e-12);
        assert_eq!(parse("3", Unit::Volt).unwrap(), 3.0);
    }

    #[test]
    fn rejects_bad_text() {
        assert!(parse("921 MHZ", Unit::Hertz).is_err());
        assert!(parse("921 Ms", Unit::Hertz).is_err());
        assert!(parse("fast", Unit::Second).is_err());
        assert!(parse("", Unit::Second).is_err());
        assert!(parse("1e999 s", Unit::Second).is_err());
        assert!(parse("1 xs", Unit::Second).is_err());
    }

    #[test]
    fn formats_with_prefix() {
        assert_eq!(format(921e6, Unit::Hertz), "921 MHz");
        assert_eq!(format(154e-12, Unit::Second), "154 ps");
        assert_eq!(format(10e-9, Unit::Second), "10 ns");
        assert_eq!(format(1e-6, Unit::Second), "1 us");
        assert_eq!(format(0.0, Unit::Volt), "0 V");
        assert_eq!(format(-25e-12, Unit::Second), "-25 ps");
        assert_eq!(format(12.0, Unit::Volt), "12 V");
    }

    #[test]
    fn format_parse_round_trip_is_exact() {
        let mut x = 1.234567890123e-16;
        while x < 1e16 {
            for v in [x, -x, x * 1.0000001, 1.0 / 921e6] {
                let back = parse(&format(v, Unit::Second), Unit::Second).unwrap();
                assert_eq!(back.to_bits(), v.to_bits(), "{v} -> {}", format(v, Unit::Second));
            }
            x *= 3.7;
        }
    }
}
