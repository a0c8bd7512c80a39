use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Month, ProxyReturns};
use crate::error::{Error, Result};

/// One period's simple returns of the three traded assets.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointReturn {
    pub letf: f64,
    pub vetf: f64,
    pub tbill: f64,
}

/// Gross returns accrued over one rebalancing interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalGross {
    pub letf: f64,
    pub vetf: f64,
    pub bond: f64,
}

/// Month-aligned real (LETF, VETF, T-bill) returns: the bootstrap source.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSeries {
    pub months: Vec<Month>,
    pub rows: Vec<JointReturn>,
}

impl JointSeries {
    pub fn new(months: Vec<Month>, rows: Vec<JointReturn>) -> Result<Self> {
        if months.len() != rows.len() {
            return Err(Error::Data("months and rows differ in length".into()));
        }
        if months.windows(2).any(|w| w[1] != w[0].next()) {
            return Err(Error::Data("joint series months must be consecutive".into()));
        }
        Ok(Self { months, rows })
    }

    pub fn from_proxy(p: &ProxyReturns) -> Result<Self> {
        if p.letf.periods != p.vetf.periods || p.letf.periods != p.tbill.periods {
            return Err(Error::Data("proxy series are not month-aligned".into()));
        }
        let rows = p
            .letf
            .returns
            .iter()
            .zip(&p.vetf.returns)
            .zip(&p.tbill.returns)
            .map(|((&letf, &vetf), &tbill)| JointReturn { letf, vetf, tbill })
            .collect();
        Self::new(p.letf.periods.clone(), rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// SHA-256 over the months and the little-endian bytes of every row.
    pub fn source_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for (m, r) in self.months.iter().zip(&self.rows) {
            h.update(m.yyyymm().to_le_bytes());
            h.update(r.letf.to_le_bytes());
            h.update(r.vetf.to_le_bytes());
            h.update(r.tbill.to_le_bytes());
        }
        h.finalize().into()
    }

    /// Single historical path of `n_months` starting at `start`.
    pub fn window(&self, start: Month, n_months: usize) -> Result<ScenarioSet> {
        let first = *self
            .months
            .first()
            .ok_or_else(|| Error::Data("empty joint series".into()))?;
        let offset = first.months_until(start);
        if offset < 0 || offset as usize + n_months > self.rows.len() {
            let last = self.months.last().expect("nonempty");
            return Err(Error::Data(format!(
                "window {start} + {n_months} months exceeds data coverage {first}..{last}"
            )));
        }
        let offset = offset as usize;
        ScenarioSet::new(
            1,
            n_months,
            1.0 / 12.0,
            self.rows[offset..offset + n_months].to_vec(),
            Provenance {
                source_hash: self.source_hash(),
                expected_block: 0.0,
                seed: 0,
            },
        )
    }
}

/// Anything that can produce per-period joint returns for a path index.
pub trait ScenarioProvider: Sync {
    fn n_paths(&self) -> usize;
    fn n_periods(&self) -> usize;
    /// Length of one period in years.
    fn period_years(&self) -> f64;
    /// Replaces `out` with the `n_periods` rows of path `path`.
    fn fill_path(&self, path: usize, out: &mut Vec<JointReturn>);
}

/// Compounds the periods of `path` into `n_steps` intervals of `dt` years.
pub fn interval_gross_returns<P: ScenarioProvider + ?Sized>(
    provider: &P,
    path: usize,
    dt: f64,
    n_steps: usize,
    scratch: &mut Vec<JointReturn>,
    out: &mut Vec<IntervalGross>,
) -> Result<()> {
    let per = dt / provider.period_years();
    let k = per.round();
    if k < 1.0 || (per - k).abs() > 1e-9 * k {
        return Err(Error::InvalidArgument(format!(
            "interval {dt} is not a whole number of {}-year scenario periods",
            provider.period_years()
        )));
    }
    let k = k as usize;
    let needed = k * n_steps;
    if provider.n_periods() < needed {
        return Err(Error::ScenarioTooShort {
            needed,
            available: provider.n_periods(),
        });
    }
    provider.fill_path(path, scratch);
    out.clear();
    for step in scratch[..needed].chunks_exact(k) {
        let mut g = IntervalGross {
            letf: 1.0,
            vetf: 1.0,
            bond: 1.0,
        };
        for r in step {
            g.letf *= 1.0 + r.letf;
            g.vetf *= 1.0 + r.vetf;
            g.bond *= 1.0 + r.tbill;
        }
        out.push(g);
    }
    Ok(())
}

/// Where a scenario set came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub source_hash: [u8; 32],
    pub expected_block: f64,
    pub seed: u64,
}

/// Materialised `n_paths × n_periods` joint returns, path major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    n_paths: usize,
    n_periods: usize,
    period_years: f64,
    data: Vec<JointReturn>,
    pub provenance: Provenance,
}

const MAGIC: &[u8; 8] = b"LETFSCN\0";
const FORMAT_VERSION: u32 = 1;

impl ScenarioSet {
    pub fn new(
        n_paths: usize,
        n_periods: usize,
        period_years: f64,
        data: Vec<JointReturn>,
        provenance: Provenance,
    ) -> Result<Self> {
        if data.len() != n_paths * n_periods {
            return Err(Error::InvalidArgument(format!(
                "expected {} rows, got {}",
                n_paths * n_periods,
                data.len()
            )));
        }
        if !(period_years > 0.0 && period_years.is_finite()) {
            return Err(Error::param("period_years", "must be > 0"));
        }
        Ok(Self {
            n_paths,
            n_periods,
            period_years,
            data,
            provenance,
        })
    }

    /// A set built from explicit per-path rows, mostly useful in tests.
    pub fn from_paths(paths: Vec<Vec<JointReturn>>, period_years: f64) -> Result<Self> {
        let n_paths = paths.len();
        let n_periods = paths.first().map_or(0, Vec::len);
        if paths.iter().any(|p| p.len() != n_periods) {
            return Err(Error::InvalidArgument("ragged scenario paths".into()));
        }
        Self::new(
            n_paths,
            n_periods,
            period_years,
            paths.into_iter().flatten().collect(),
            Provenance {
                source_hash: [0; 32],
                expected_block: 0.0,
                seed: 0,
            },
        )
    }

    pub fn path(&self, p: usize) -> &[JointReturn] {
        &self.data[p * self.n_periods..(p + 1) * self.n_periods]
    }

    pub fn rows(&self) -> &[JointReturn] {
        &self.data
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        w.write_all(&(self.n_paths as u64).to_le_bytes())?;
        w.write_all(&(self.n_periods as u64).to_le_bytes())?;
        w.write_all(&self.period_years.to_le_bytes())?;
        w.write_all(&self.provenance.seed.to_le_bytes())?;
        w.write_all(&self.provenance.expected_block.to_le_bytes())?;
        w.write_all(&self.provenance.source_hash)?;
        for r in &self.data {
            w.write_all(&r.letf.to_le_bytes())?;
            w.write_all(&r.vetf.to_le_bytes())?;
            w.write_all(&r.tbill.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a scenario set file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported scenario set version {version}"
            )));
        }
        let _reserved = read_u32(&mut r)?;
        let n_paths = read_u64(&mut r)? as usize;
        let n_periods = read_u64(&mut r)? as usize;
        let period_years = read_f64(&mut r)?;
        let seed = read_u64(&mut r)?;
        let expected_block = read_f64(&mut r)?;
        let mut source_hash = [0u8; 32];
        r.read_exact(&mut source_hash)?;
        let n = n_paths
            .checked_mul(n_periods)
            .ok_or_else(|| Error::Format("scenario dimensions overflow".into()))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(JointReturn {
                letf: read_f64(&mut r)?,
                vetf: read_f64(&mut r)?,
                tbill: read_f64(&mut r)?,
            });
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Format("trailing bytes after scenario data".into()));
        }
        Self::new(
            n_paths,
            n_periods,
            period_years,
            data,
            Provenance {
                source_hash,
                expected_block,
                seed,
            },
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(f))
    }
}

impl ScenarioProvider for ScenarioSet {
    fn n_paths(&self) -> usize {
        self.n_paths
    }

    fn n_periods(&self) -> usize {
        self.n_periods
    }

    fn period_years(&self) -> f64 {
        self.period_years
    }

    fn fill_path(&self, path: usize, out: &mut Vec<JointReturn>) {
        out.clear();
        out.extend_from_slice(self.path(path));
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(x: f64) -> JointReturn {
        JointReturn {
            letf: 2.0 * x,
            vetf: x,
            tbill: 0.001,
        }
    }

    #[test]
    fn compounding_to_quarters() {
        let set = ScenarioSet::from_paths(vec![(0..6).map(|i| row(0.01 * i as f64)).collect()], 1.0 / 12.0)
            .unwrap();
        let mut scratch = Vec::new();
        let mut out = Vec::new();
        interval_gross_returns(&set, 0, 0.25, 2, &mut scratch, &mut out).unwrap();
        assert_eq!(out.len(), 2);
        let q2 = 1.03 * 1.04 * 1.05;
        assert!((out[1].vetf - q2).abs() < 1e-15);
        assert!(matches!(
            interval_gross_returns(&set, 0, 0.25, 3, &mut scratch, &mut out),
            Err(Error::ScenarioTooShort {
                needed: 9,
                available: 6
            })
        ));
        assert!(interval_gross_returns(&set, 0, 0.1, 1, &mut scratch, &mut out).is_err());
    }

    #[test]
    fn window_bounds() {
        let months: Vec<Month> =
            std::iter::successors(Some(Month::new(2000, 1).unwrap()), |m| Some(m.next()))
                .take(24)
                .collect();
        let js = JointSeries::new(months, (0..24).map(|i| row(i as f64 * 1e-3)).collect()).unwrap();
        let w = js.window(Month::new(2000, 7).unwrap(), 12).unwrap();
        assert_eq!(w.path(0)[0], js.rows[6]);
        assert!(js.window(Month::new(2001, 7).unwrap(), 12).is_err());
        assert!(js.window(Month::new(1999, 12).unwrap(), 2).is_err());
    }

    #[test]
    fn rejects_corrupt_files() {
        let set = ScenarioSet::from_paths(vec![vec![row(0.01)]], 0.25).unwrap();
        let mut buf = Vec::new();
        set.write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(ScenarioSet::read_from(bad.as_slice()).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(ScenarioSet::read_from(long.as_slice()).is_err());
        assert!(ScenarioSet::read_from(&buf[..buf.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn binary_roundtrip_is_bit_exact(
            n_paths in 1usize..5,
            n_periods in 1usize..7,
            bits in proptest::collection::vec(any::<u64>(), 105),
            seed in any::<u64>(),
        ) {
            let data: Vec<JointReturn> = (0..n_paths * n_periods)
                .map(|i| JointReturn {
                    letf: f64::from_bits(bits[3 * i]),
                    vetf: f64::from_bits(bits[3 * i + 1]),
                    tbill: f64::from_bits(bits[3 * i + 2]),
                })
                .collect();
            let prov = Provenance { source_hash: [7; 32], expected_block: 6.0, seed };
            let set = ScenarioSet::new(n_paths, n_periods, 1.0 / 12.0, data, prov).unwrap();
            let mut buf = Vec::new();
            set.write_to(&mut buf).unwrap();
            let back = ScenarioSet::read_from(buf.as_slice()).unwrap();
            let mut buf2 = Vec::new();
            back.write_to(&mut buf2).unwrap();
            prop_assert_eq!(buf, buf2);
            for (a, b) in set.rows().iter().zip(back.rows()) {
                prop_assert_eq!(a.letf.to_bits(), b.letf.to_bits());
                prop_assert_eq!(a.vetf.to_bits(), b.vetf.to_bits());
                prop_assert_eq!(a.tbill.to_bits(), b.tbill.to_bits());
            }
            prop_assert_eq!(back.provenance.seed, seed);
        }
    }
}
