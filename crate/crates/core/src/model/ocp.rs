//! Open-circuit potential maps.
//!
//! A map is a table of `(stoichiometry, volts)` knots interpolated with a
//! shape-preserving piecewise cubic Hermite scheme (Fritsch-Carlson slopes).
//! The interpolant is C1, so the derivative is defined everywhere inside the
//! table; at the two ends only the inward one-sided derivative exists.
//!
//! The anode table stores the anode's signed contribution to the terminal
//! voltage, i.e. the negative of the graphite potential against lithium.

use std::path::Path;

use crate::error::{Error, Result};

const GRAPHITE_V1: &str = include_str!("../../data/ocp_anode_graphite_v1.csv");
const NMC_V1: &str = include_str!("../../data/ocp_cathode_nmc_v1.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct OcpMap {
    source: String,
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl OcpMap {
    pub fn new(source: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.len() < 2 {
            return Err(Error::config("OCP map needs at least two knots"));
        }
        if let Some(i) = x.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Config {
                line: Some(i + 3),
                msg: "OCP stoichiometry column must be strictly increasing".into(),
            });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::config("OCP map contains non-finite values"));
        }
        let slope = pchip_slopes(&x, &y);
        Ok(Self {
            source: source.into(),
            x,
            y,
            slope,
        })
    }

    /// Parses a two-column CSV with a header row.
    pub fn from_csv_str(source: impl Into<String>, text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Config {
                    line: Some(i + 2),
                    msg: format!("expected 2 columns, found {}", rec.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Config {
                    line: Some(i + 2),
                    msg: format!("bad number {s:?}: {e}"),
                })
            };
            x.push(parse(&rec[0])?);
            y.push(parse(&rec[1])?);
        }
        Self::new(source, x, y)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(path.display().to_string(), &text)
    }

    /// Resolves `builtin:<name>` or a path relative to `base`.
    pub fn resolve(spec: &str, base: Option<&Path>) -> Result<Self> {
        match spec.strip_prefix("builtin:") {
            Some(name) => Self::builtin(name),
            None => {
                let p = Path::new(spec);
                let full = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.to_path_buf(),
                };
                let mut map = Self::from_csv_path(&full)?;
                map.source = spec.to_string();
                Ok(map)
            }
        }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name {
            "graphite_v1" => GRAPHITE_V1,
            "nmc_v1" => NMC_V1,
            other => return Err(Error::config(format!("unknown builtin OCP map {other:?}"))),
        };
        Self::from_csv_str(format!("builtin:{name}"), text)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn contains(&self, s: f64) -> bool {
        let (lo, hi) = self.domain();
        s >= lo && s <= hi
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    fn segment(&self, s: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&k| k <= s) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    /// Value at `s`; callers check the domain.
    pub fn value(&self, s: f64) -> f64 {
        let k = self.segment(s);
        let h = self.x[k + 1] - self.x[k];
        let t = (s - self.x[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[k]
            + h10 * h * self.slope[k]
            + h01 * self.y[k + 1]
            + h11 * h * self.slope[k + 1]
    }

    /// Derivative at `s` and whether it is one-sided (table end points).
    pub fn derivative(&self, s: f64) -> (f64, bool) {
        let k = self.segment(s);
        let h = self.x[k + 1] - self.x[k];
        let t = (s - self.x[k]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        let d =
            d00 * self.y[k] + d10 * self.slope[k] + d01 * self.y[k + 1] + d11 * self.slope[k + 1];
        let (lo, hi) = self.domain();
        (d, s <= lo || s >= hi)
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![del[0], del[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if del[k - 1] * del[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
        }
    }
    d[0] = end_slope(h[0], h[1], del[0], del[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}
