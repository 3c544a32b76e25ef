use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareFit {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

impl ChiSquareFit {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

/// Pearson goodness of fit of `waits` against `Geometric(p)` on `{1, 2, …}`.
///
/// Cells `1, 2, …` are kept while both the cell and the remaining tail expect
/// at least 5 counts; everything beyond goes into one tail cell.
pub fn geometric_chi_square(waits: &[u64], p: f64) -> ChiSquareFit {
    let n = waits.len() as f64;
    if p >= 1.0 || waits.is_empty() {
        let ok = waits.iter().all(|&w| w == 1);
        return ChiSquareFit {
            statistic: if ok { 0.0 } else { f64::INFINITY },
            degrees_of_freedom: 0,
            p_value: if ok { 1.0 } else { 0.0 },
        };
    }
    let q = 1.0 - p;
    let mut expected = Vec::new();
    let mut k = 1u64;
    loop {
        let cell = n * p * q.powi(k as i32 - 1);
        let tail_after = n * q.powi(k as i32);
        if cell < 5.0 || tail_after < 5.0 {
            break;
        }
        expected.push(cell);
        k += 1;
    }
    let last = expected.len() as u64;
    expected.push(n * q.powi(last as i32));
    let mut observed = vec![0.0; expected.len()];
    for &w in waits {
        let cell = if w >= 1 && w <= last { (w - 1) as usize } else { last as usize };
        observed[cell] += 1.0;
    }
    let statistic: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = expected.len() - 1;
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("dof ≥ 1").cdf(statistic)
    };
    ChiSquareFit {
        statistic,
        degrees_of_freedom: dof,
        p_value,
    }
}
