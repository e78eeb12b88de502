use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimators::{afterpulse_per_ns, duty_cycle};
use crate::spad::dark_prob_per_gate;

/// Published comparison table shipped with the crate.
pub const TABLE1_CSV: &str = include_str!("../../data/table1.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table1Expect {
    Consistent,
    Inconsistent,
}

/// One column of the published table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub label: String,
    pub temperature_c: f64,
    pub f_g: f64,
    pub eta: f64,
    pub p_dc_ns: f64,
    pub delta_t: f64,
    pub p_ap: f64,
    pub r_de: f64,
    pub p_ap_ns_published: f64,
    pub deadtime: f64,
    pub tolerance: f64,
    pub expect: Table1Expect,
}

impl Table1Row {
    /// Parses the shipped CSV layout. `#` lines are comments.
    pub fn parse_all(text: &str) -> Result<Vec<Self>> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or(Error::Invalid { invariant: "table has a header" })?;
        if header
            != "label,temperature_c,f_g_hz,eta,p_dc_ns,delta_t_s,p_ap,r_de_hz,p_ap_ns_published,deadtime_s,tolerance,expect"
        {
            return Err(Error::Invalid { invariant: "table header matches the schema" });
        }
        lines.map(Self::parse_line).collect()
    }

    fn parse_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 12 {
            return Err(Error::Invalid { invariant: "table row has 12 fields" });
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse::<f64>().map_err(|_| Error::Invalid { invariant: "table fields are numbers" })
        };
        let expect = match f[11] {
            "consistent" => Table1Expect::Consistent,
            "inconsistent" => Table1Expect::Inconsistent,
            _ => return Err(Error::Invalid { invariant: "expect is consistent or inconsistent" }),
        };
        let row = Self {
            label: String::from(f[0]),
            temperature_c: num(1)?,
            f_g: num(2)?,
            eta: num(3)?,
            p_dc_ns: num(4)?,
            delta_t: num(5)?,
            p_ap: num(6)?,
            r_de: num(7)?,
            p_ap_ns_published: num(8)?,
            deadtime: num(9)?,
            tolerance: num(10)?,
            expect,
        };
        let positive =
            [row.f_g, row.eta, row.p_dc_ns, row.delta_t, row.p_ap, row.r_de, row.p_ap_ns_published, row.tolerance];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Invalid { invariant: "table parameters > 0" });
        }
        Ok(row)
    }

    /// Rows shipped with the crate.
    pub fn published() -> Vec<Self> {
        Self::parse_all(TABLE1_CSV).unwrap_or_default()
    }
}

/// Recomputed quantities for one row against the published value.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1Comparison {
    pub row: Table1Row,
    pub p_ap_ns: f64,
    pub p_dc_gate: f64,
    pub duty_cycle: f64,
    /// `(computed - published) / published`.
    pub deviation: f64,
    /// Whether the published value follows from the row's own parameters
    /// within its tolerance.
    pub consistent: bool,
}

impl Table1Comparison {
    /// The consistency verdict matches what the table row expects.
    pub fn passes(&self) -> bool {
        self.consistent == (self.row.expect == Table1Expect::Consistent)
    }
}

/// Recomputes afterpulse density, dark count probability per gate and duty
/// cycle for every row.
pub fn reproduce_table1(rows: &[Table1Row]) -> Result<Vec<Table1Comparison>> {
    rows.iter()
        .map(|row| {
            let p_ap_ns = afterpulse_per_ns(row.p_ap, row.f_g, row.delta_t, row.r_de)?;
            let deviation = (p_ap_ns - row.p_ap_ns_published) / row.p_ap_ns_published;
            Ok(Table1Comparison {
                row: row.clone(),
                p_ap_ns,
                p_dc_gate: dark_prob_per_gate(row.p_dc_ns, row.delta_t),
                duty_cycle: duty_cycle(row.f_g, row.delta_t),
                deviation,
                consistent: deviation.abs() <= row.tolerance,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_rows_parse() {
        let rows = Table1Row::published();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].label, "this-work");
        assert_eq!(rows[3].expect, Table1Expect::Inconsistent);
    }

    #[test]
    fn recomputed_values() {
        let out = reproduce_table1(&Table1Row::published()).unwrap();
        let by = |l: &str| out.iter().find(|c| c.row.label == l).unwrap().clone();
        let sd = by("self-differencing");
        assert!((sd.p_ap_ns - 6.2136e-5).abs() < 1e-8, "{}", sd.p_ap_ns);
        assert!(sd.deviation.abs() < 0.02);
        let sg = by("sine-gating");
        assert!((sg.p_ap_ns - 2.016e-5).abs() < 1e-8);
        let aq = by("active-quenching");
        assert!((aq.p_ap_ns - 1.8e-5).abs() < 1e-10);
        assert!(!aq.consistent);
        let me = by("this-work");
        assert!((me.duty_cycle - 0.141834).abs() < 1e-6);
        assert!((me.p_dc_gate - 4.312e-7).abs() < 1e-10);
        assert!(out.iter().all(Table1Comparison::passes));
    }

    #[test]
    fn bad_rows_rejected() {
        let header = "label,temperature_c,f_g_hz,eta,p_dc_ns,delta_t_s,p_ap,r_de_hz,p_ap_ns_published,deadtime_s,tolerance,expect";
        let text = alloc::format!("{header}\nx,0,-1,0.1,1e-6,1e-10,0.01,1e3,1e-5,0,0.1,consistent\n");
        assert!(Table1Row::parse_all(&text).is_err());
        let text = alloc::format!("{header}\nx,0,1e9,0.1\n");
        assert!(Table1Row::parse_all(&text).is_err());
        assert!(Table1Row::parse_all("a,b\n").is_err());
    }
}
