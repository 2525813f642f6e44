use std::path::Path;

use num_complex::Complex64;

use crate::error::{LabError, Result};

/// Complex kernel samples on a tensor grid, evaluated as the bilinear
/// interpolant (the interpolant is the kernel, not an approximation of one).
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    s: Vec<f64>,
    t: Vec<f64>,
    /// Row-major, `values[i * t.len() + j] = T(s_i, t_j)`.
    values: Vec<Complex64>,
}

impl TabulatedKernel {
    pub fn new(s: Vec<f64>, t: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if s.len() < 2 || t.len() < 2 {
            return Err(LabError::InvalidParams(
                "tabulated kernel needs at least two nodes per axis".into(),
            ));
        }
        for axis in [&s, &t] {
            if axis.windows(2).any(|w| !(w[1] > w[0])) || axis.iter().any(|x| !x.is_finite()) {
                return Err(LabError::InvalidParams(
                    "tabulated grid nodes must be finite and strictly increasing".into(),
                ));
            }
        }
        if values.len() != s.len() * t.len() {
            return Err(LabError::LengthMismatch {
                expected: s.len() * t.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(LabError::InvalidParams("tabulated values must be finite".into()));
        }
        Ok(Self { s, t, values })
    }

    /// Reads CSV with header `s,t,re,im`, rows ordered with `t` varying fastest.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().map(str::trim).collect();
        if cols != ["s", "t", "re", "im"] {
            return Err(LabError::InvalidParams(format!(
                "tabulated kernel header must be `s,t,re,im`, found `{}`",
                cols.join(",")
            )));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let mut vals = [0.0; 4];
            for (k, v) in vals.iter_mut().enumerate() {
                *v = rec[k]
                    .trim()
                    .parse()
                    .map_err(|e| LabError::InvalidParams(format!("bad number `{}`: {e}", &rec[k])))?;
            }
            rows.push(vals);
        }
        let mut t_axis: Vec<f64> = Vec::new();
        for r in &rows {
            if r[0] != rows[0][0] {
                break;
            }
            t_axis.push(r[1]);
        }
        if t_axis.is_empty() || rows.len() % t_axis.len() != 0 {
            return Err(LabError::InvalidParams("tabulated CSV is not a full row-major grid".into()));
        }
        let ns = rows.len() / t_axis.len();
        let mut s_axis = Vec::with_capacity(ns);
        let mut values = Vec::with_capacity(rows.len());
        for (i, chunk) in rows.chunks(t_axis.len()).enumerate() {
            s_axis.push(chunk[0][0]);
            for (j, r) in chunk.iter().enumerate() {
                if r[0] != chunk[0][0] || r[1] != t_axis[j] {
                    return Err(LabError::InvalidParams(format!(
                        "tabulated CSV row {} breaks the grid layout",
                        i * t_axis.len() + j + 2
                    )));
                }
                values.push(Complex64::new(r[2], r[3]));
            }
        }
        Self::new(s_axis, t_axis, values)
    }

    pub fn s_nodes(&self) -> &[f64] {
        &self.s
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn hull(&self) -> ((f64, f64), (f64, f64)) {
        (
            (self.s[0], *self.s.last().unwrap()),
            (self.t[0], *self.t.last().unwrap()),
        )
    }

    pub fn node_value(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.t.len() + j]
    }

    pub fn eval(&self, s: f64, t: f64) -> Result<Complex64> {
        let (i, fs) = locate(&self.s, s).ok_or(LabError::OutOfDomain { s, t })?;
        let (j, ft) = locate(&self.t, t).ok_or(LabError::OutOfDomain { s, t })?;
        let v00 = self.node_value(i, j);
        let v01 = self.node_value(i, j + 1);
        let v10 = self.node_value(i + 1, j);
        let v11 = self.node_value(i + 1, j + 1);
        Ok(v00 * ((1.0 - fs) * (1.0 - ft))
            + v01 * ((1.0 - fs) * ft)
            + v10 * (fs * (1.0 - ft))
            + v11 * (fs * ft))
    }
}

/// Cell index and fractional offset of `x` in `axis`, `None` outside the hull.
fn locate(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    if !(x >= axis[0] && x <= axis[n - 1]) {
        return None;
    }
    let k = axis.partition_point(|&a| a <= x).clamp(1, n - 1) - 1;
    let f = (x - axis[k]) / (axis[k + 1] - axis[k]);
    Some((k, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn sample() -> TabulatedKernel {
        let s = vec![-1.0, 0.0, 2.0];
        let t = vec![0.0, 1.0];
        let values = (0..6).map(|k| Complex64::new(k as f64, -(k as f64))).collect();
        TabulatedKernel::new(s, t, values).unwrap()
    }

    #[test]
    fn interpolant_reproduces_nodes_and_is_bilinear() {
        let k = sample();
        assert_eq!(k.eval(0.0, 1.0).unwrap(), Complex64::new(3.0, -3.0));
        assert_eq!(k.eval(2.0, 0.0).unwrap(), Complex64::new(4.0, -4.0));
        // centre of the cell [0,2]x[0,1]: mean of the four corners
        let mid = k.eval(1.0, 0.5).unwrap();
        assert!((mid - Complex64::new(3.5, -3.5)).norm() < 1e-15);
    }

    #[test]
    fn outside_hull_is_an_error() {
        let k = sample();
        assert!(matches!(k.eval(2.5, 0.0), Err(LabError::OutOfDomain { .. })));
        assert!(matches!(k.eval(0.0, -0.1), Err(LabError::OutOfDomain { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "s,t,re,im").unwrap();
        for s in [-1.0, 0.0, 2.0] {
            for t in [0.0, 1.0] {
                writeln!(f, "{s},{t},{},{}", s + t, s * t).unwrap();
            }
        }
        let k = TabulatedKernel::from_csv(f.path()).unwrap();
        assert_eq!(k.s_nodes(), &[-1.0, 0.0, 2.0]);
        assert_eq!(k.t_nodes(), &[0.0, 1.0]);
        assert_eq!(k.eval(2.0, 1.0).unwrap(), Complex64::new(3.0, 2.0));
    }

    #[test]
    fn rejects_ragged_csv() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "s,t,re,im\n0,0,1,0\n0,1,1,0\n1,0,1,0").unwrap();
        assert!(TabulatedKernel::from_csv(f.path()).is_err());
    }
}
