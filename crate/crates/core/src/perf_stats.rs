//! Summary statistics of terminal wealth ratios `R_T = P^ℓ(T)/P^v(T)`.
//!
//! Quantiles use linear interpolation between order statistics
//! (`h = (n-1)q`, zero based). The Omega ratio is computed from the discrete
//! expectation form `E[max(R-L,0)] / E[max(L-R,0)]`, which is exact on
//! samples.

use std::io::Write;

use crate::error::{Error, Result};
use crate::par::compensated_sum;
use crate::payoff_analytics::format_f64;

/// Omega ratio with an explicit flag for a zero downside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Omega {
    /// `f64::INFINITY` when `unbounded` is set.
    pub value: f64,
    pub unbounded: bool,
}

pub fn omega(samples: &[f64], threshold: f64) -> Result<Omega> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let up = compensated_sum(samples.iter().map(|&x| (x - threshold).max(0.0)));
    let down = compensated_sum(samples.iter().map(|&x| (threshold - x).max(0.0)));
    if down == 0.0 {
        return Ok(Omega {
            value: f64::INFINITY,
            unbounded: true,
        });
    }
    // the 1/n factors cancel
    Ok(Omega {
        value: up / down,
        unbounded: false,
    })
}

fn sorted_copy(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

fn tail_count(level: f64, n: usize) -> usize {
    // guard against 0.05 * n landing a hair above an integer
    ((level * n as f64) - 1e-9).ceil().max(1.0) as usize
}

/// Mean of the worst `⌈level·n⌉` outcomes.
pub fn expected_shortfall(samples: &[f64], level: f64) -> Result<f64> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::param("level", "must lie in (0, 1]"));
    }
    let needed = (1.0 / level - 1e-9).ceil() as usize;
    if samples.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: samples.len(),
        });
    }
    Ok(expected_shortfall_sorted(&sorted_copy(samples), level))
}

fn expected_shortfall_sorted(sorted: &[f64], level: f64) -> f64 {
    let k = tail_count(level, sorted.len());
    compensated_sum(sorted[..k].iter().copied()) / k as f64
}

/// Sample mean and the 95% half-width `1.96 s/√n`.
pub fn mean_with_stderr(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    let ss = compensated_sum(samples.iter().map(|&x| (x - mean) * (x - mean)));
    let sd = (ss / (n - 1) as f64).sqrt();
    Ok((mean, 1.96 * sd / (n as f64).sqrt()))
}

/// Linear-interpolation sample quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn percentile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::param("q", "quantile must lie in [0, 1]"));
    }
    Ok(quantile_sorted(&sorted_copy(samples), q))
}

/// Right-continuous empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

pub fn empirical_cdf(samples: &[f64]) -> Result<EmpiricalCdf> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    Ok(EmpiricalCdf {
        sorted: sorted_copy(samples),
    })
}

impl EmpiricalCdf {
    /// `F(x) = #{X_i <= x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.sorted.partition_point(|&v| v <= x);
        k as f64 / self.sorted.len() as f64
    }

    /// Jump points as `(value, F(value))` with ties merged.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in self.sorted.iter().enumerate() {
            let p = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = p,
                _ => out.push((v, p)),
            }
        }
        out
    }

    /// Evaluates the CDF on a plotting grid.
    pub fn on_grid(&self, grid: &[f64]) -> Vec<(f64, f64)> {
        grid.iter().map(|&x| (x, self.eval(x))).collect()
    }

    pub fn write_csv<W: Write>(&self, grid: &[f64], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["R", "cdf"])?;
        for (x, p) in self.on_grid(grid) {
            w.write_record([format_f64(x), format_f64(p)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything reported per experiment cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsSummary {
    pub mean: f64,
    pub mean_stderr_95: f64,
    pub median: f64,
    pub pct5: f64,
    pub pct20: f64,
    pub pct80: f64,
    pub pct95: f64,
    pub es5: f64,
    pub omega_at_1: f64,
    pub omega_unbounded: bool,
    pub prob_gt_1: f64,
    pub n: usize,
}

impl StatsSummary {
    /// Column names of the StatsSummary CSV, after a leading `cell` column.
    pub const CSV_COLUMNS: [&'static str; 8] = [
        "E_RT",
        "Median_RT",
        "p5",
        "p95",
        "ES5",
        "Omega1",
        "Prob_gt_1",
        "stderr95",
    ];

    /// Computes the summary; a single sample gets a zero standard error and
    /// ES equal to that sample.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample {i} is not finite")));
        }
        let sorted = sorted_copy(samples);
        let (mean, se) = if n >= 2 {
            mean_with_stderr(samples)?
        } else {
            (samples[0], 0.0)
        };
        let om = omega(samples, 1.0)?;
        let gt1 = samples.iter().filter(|&&x| x > 1.0).count();
        Ok(Self {
            mean,
            mean_stderr_95: se,
            median: quantile_sorted(&sorted, 0.5),
            pct5: quantile_sorted(&sorted, 0.05),
            pct20: quantile_sorted(&sorted, 0.20),
            pct80: quantile_sorted(&sorted, 0.80),
            pct95: quantile_sorted(&sorted, 0.95),
            es5: expected_shortfall_sorted(&sorted, 0.05),
            omega_at_1: om.value,
            omega_unbounded: om.unbounded,
            prob_gt_1: gt1 as f64 / n as f64,
            n,
        })
    }

    pub fn csv_fields(&self) -> [String; 8] {
        [
            format_f64(self.mean),
            format_f64(self.median),
            format_f64(self.pct5),
            format_f64(self.pct95),
            format_f64(self.es5),
            format_f64(self.omega_at_1),
            format_f64(self.prob_gt_1),
            format_f64(self.mean_stderr_95),
        ]
    }
}

/// Writes `cell,E_RT,...` rows.
pub fn write_summary_csv<W: Write>(rows: &[(String, StatsSummary)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["cell"];
    header.extend(StatsSummary::CSV_COLUMNS);
    w.write_record(&header)?;
    for (cell, s) in rows {
        let mut rec = vec![cell.clone()];
        rec.extend(s.csv_fields());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Percentiles of a cross-section of paths at each recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileBands {
    pub times: Vec<f64>,
    pub quantiles: Vec<f64>,
    /// `values[t][q]`.
    pub values: Vec<Vec<f64>>,
}

pub const DEFAULT_BAND_QUANTILES: [f64; 5] = [0.05, 0.20, 0.50, 0.80, 0.95];

/// `paths[p][t]` holds the value of path `p` at `times[t]`.
pub fn percentile_bands(paths: &[Vec<f64>], quantiles: &[f64], times: &[f64]) -> Result<PercentileBands> {
    if paths.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if let Some(q) = quantiles.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(Error::param("quantiles", format!("{q} is not in (0, 1)")));
    }
    if paths.iter().any(|p| p.len() != times.len()) {
        return Err(Error::InvalidArgument(
            "every path needs one value per time".into(),
        ));
    }
    let mut column = vec![0.0; paths.len()];
    let values = (0..times.len())
        .map(|t| {
            for (c, p) in column.iter_mut().zip(paths) {
                *c = p[t];
            }
            column.sort_unstable_by(f64::total_cmp);
            quantiles.iter().map(|&q| quantile_sorted(&column, q)).collect()
        })
        .collect();
    Ok(PercentileBands {
        times: times.to_vec(),
        quantiles: quantiles.to_vec(),
        values,
    })
}

impl PercentileBands {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.quantiles.iter().map(|q| format!("p{}", (q * 100.0).round())));
        w.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.values) {
            let mut rec = vec![format_f64(*t)];
            rec.extend(row.iter().map(|&v| format_f64(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(
            "spearman needs two equal-length series, n >= 2".into(),
        ));
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = compensated_sum(rx.iter().copied()) / n;
    let my = compensated_sum(ry.iter().copied()) / n;
    let cov = compensated_sum(rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)));
    let vx = compensated_sum(rx.iter().map(|a| (a - mx) * (a - mx)));
    let vy = compensated_sum(ry.iter().map(|b| (b - my) * (b - my)));
    if vx == 0.0 || vy == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (vx * vy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_unstable_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn omega_examples() {
        let o = omega(&[2.0, 2.0, 2.0], 1.0).unwrap();
        assert!(o.unbounded && o.value.is_infinite());
        assert_relative_eq!(omega(&[0.5, 1.5], 1.0).unwrap().value, 1.0, epsilon = 1e-15);
        // (0.1 + 0.4) / (0.2 + 0.1)
        assert_relative_eq!(
            omega(&[0.8, 0.9, 1.1, 1.4], 1.0).unwrap().value,
            5.0 / 3.0,
            max_relative = 1e-14
        );
        assert!(omega(&[], 1.0).is_err());
    }

    #[test]
    fn omega_ties_at_threshold_are_neutral() {
        let a = omega(&[0.5, 1.5], 1.0).unwrap().value;
        let b = omega(&[0.5, 1.0, 1.0, 1.5], 1.0).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn es_examples() {
        let s: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        assert_relative_eq!(expected_shortfall(&s, 0.05).unwrap(), 0.03, max_relative = 1e-14);
        assert_eq!(expected_shortfall(&[0.7; 40], 0.05).unwrap(), 0.7);
        assert!(matches!(
            expected_shortfall(&[1.0; 19], 0.05),
            Err(Error::TooFewSamples { needed: 20, got: 19 })
        ));
    }

    #[test]
    fn stderr_examples() {
        assert_eq!(mean_with_stderr(&[1.0; 4]).unwrap(), (1.0, 0.0));
        let (m, h) = mean_with_stderr(&[0.0, 2.0]).unwrap();
        assert_eq!(m, 1.0);
        // s = sqrt(2), so 1.96 * sqrt(2) / sqrt(2)
        assert_relative_eq!(h, 1.96 * 2.0_f64.sqrt() / 2.0_f64.sqrt(), max_relative = 1e-15);
        assert!(mean_with_stderr(&[1.0]).is_err());
    }

    #[test]
    fn cdf_examples() {
        let c = empirical_cdf(&[1.0]).unwrap();
        assert_eq!(c.eval(0.999), 0.0);
        assert_eq!(c.eval(1.0), 1.0);
        let c = empirical_cdf(&[3.0, 1.0, 2.0]).unwrap();
        assert_relative_eq!(c.eval(2.0), 2.0 / 3.0);
        let steps = empirical_cdf(&[1.0, 1.0, 2.0]).unwrap().steps();
        assert_eq!(steps.len(), 2);
        assert_relative_eq!(steps[0].1, 2.0 / 3.0);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 2.5);
        assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 1.0).unwrap(), 4.0);
        let paths = vec![vec![1.3; 4]; 10];
        let bands = percentile_bands(&paths, &DEFAULT_BAND_QUANTILES, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(bands.values.iter().flatten().all(|&v| v == 1.3));
        assert!(percentile_bands(&paths, &[0.0], &[0.0, 1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn summary_single_sample() {
        let s = StatsSummary::from_samples(&[1.07]).unwrap();
        assert_eq!(s.mean, 1.07);
        assert_eq!(s.median, 1.07);
        assert_eq!(s.es5, 1.07);
        assert_eq!(s.prob_gt_1, 1.0);
        assert!(s.omega_unbounded);
    }

    #[test]
    fn spearman_basic() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_relative_eq!(spearman(&x, &[10.0, 20.0, 25.0, 100.0]).unwrap(), 1.0);
        assert_relative_eq!(spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_relative_eq!(
            spearman(&x, &[1.0, 1.0, 2.0, 2.0]).unwrap(),
            0.894_427_190_999_915_9,
            max_relative = 1e-12
        );
    }

    #[test]
    fn summary_csv_header() {
        let s = StatsSummary::from_samples(&[0.9, 1.1, 1.2, 0.95]).unwrap();
        let mut buf = Vec::new();
        write_summary_csv(&[("a0.45".into(), s)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("cell,E_RT,Median_RT,p5,p95,ES5,Omega1,Prob_gt_1,stderr95\n"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sample_vec() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.2f64..2.5, 20..200)
        }

        proptest! {
            #[test]
            fn omega_gt_one_iff_mean_gt_one(s in sample_vec()) {
                let o = omega(&s, 1.0).unwrap();
                let mean = s.iter().sum::<f64>() / s.len() as f64;
                if (mean - 1.0).abs() > 1e-12 {
                    prop_assert_eq!(o.value > 1.0, mean > 1.0);
                }
            }

            #[test]
            fn omega_decreasing_in_threshold(s in sample_vec(), a in 0.5f64..1.5, d in 0.01f64..0.3) {
                let lo = omega(&s, a).unwrap();
                let hi = omega(&s, a + d).unwrap();
                if !lo.unbounded && !hi.unbounded && hi.value > 0.0 {
                    prop_assert!(hi.value < lo.value);
                }
            }

            #[test]
            fn ordering_and_permutation(mut s in sample_vec(), seed in 0u64..1000) {
                let a = StatsSummary::from_samples(&s).unwrap();
                prop_assert!(a.es5 <= a.pct5 && a.pct5 <= a.median && a.median <= a.pct95);
                prop_assert!((0.0..=1.0).contains(&a.prob_gt_1));
                let cdf = empirical_cdf(&s).unwrap();
                if !s.contains(&1.0) {
                    prop_assert!((a.prob_gt_1 - (1.0 - cdf.eval(1.0))).abs() < 1e-12);
                }
                // deterministic shuffle
                let n = s.len();
                let mut k = seed as usize;
                for i in (1..n).rev() {
                    k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    s.swap(i, k % (i + 1));
                }
                let b = StatsSummary::from_samples(&s).unwrap();
                prop_assert_eq!(a.median, b.median);
                prop_assert_eq!(a.pct5, b.pct5);
                prop_assert_eq!(a.es5, b.es5);
                prop_assert!((a.mean - b.mean).abs() < 1e-14);
                prop_assert!((a.omega_at_1 - b.omega_at_1).abs() <= 1e-12 * a.omega_at_1.abs().max(1.0));
            }
        }
    }
}
