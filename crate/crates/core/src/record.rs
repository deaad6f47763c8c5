//! Time-stamped path records and their append-only text serialization.

use crate::measures::{Axis, BoundaryPoint, JumpMark};
use std::fmt::Write as _;
use std::io::{self, BufRead};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("record needs at least {0} samples")]
    TooFewSamples(usize),
    #[error("record carries no jump log")]
    MissingJumpLog,
    #[error("system size must be at least 3 for the time rescaling, got {0}")]
    SystemTooSmall(usize),
    #[error("malformed record line {0}: {1}")]
    Malformed(usize, String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// What a simulation writes down along the way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordMode {
    #[default]
    TotalsOnly,
    FullConfig,
    JumpLog,
}

/// One logged jump event: model time, site, the ν-mark and the applied
/// displacement of the site state.
#[derive(Debug, Clone, Copy)]
pub struct JumpEvent {
    pub time: f64,
    pub site: usize,
    pub mark: JumpMark,
    pub displacement: (f64, f64),
}

/// Time-stamped samples of total masses plus optional per-site snapshots
/// and jump events. Times are model time, strictly increasing.
#[derive(Debug, Clone, Default)]
pub struct PathRecord {
    pub replica: u64,
    pub n_sites: usize,
    pub times: Vec<f64>,
    pub totals: Vec<(f64, f64)>,
    pub sites: Option<Vec<Vec<BoundaryPoint>>>,
    pub jumps: Option<Vec<JumpEvent>>,
}

impl PathRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, time: f64, totals: (f64, f64)) {
        debug_assert!(
            self.times.last().is_none_or(|&t| time > t),
            "times must be strictly increasing"
        );
        self.times.push(time);
        self.totals.push(totals);
    }

    /// Final recorded totals.
    pub fn final_totals(&self) -> (f64, f64) {
        *self.totals.last().expect("non-empty record")
    }

    /// Time-rescaling factor `n / ln n`, defined for `n ≥ 3`.
    pub fn time_scale(n: usize) -> Result<f64, RecordError> {
        if n < 3 {
            return Err(RecordError::SystemTooSmall(n));
        }
        Ok(n as f64 / (n as f64).ln())
    }

    /// Reinterpret times `t ↦ t/β` with `β = n/ln n`, so the output carries
    /// the rescaled total-mass process. Pure re-indexing of the data.
    pub fn rescaled_view(&self, n: usize) -> Result<PathRecord, RecordError> {
        let beta = Self::time_scale(n)?;
        let mut out = self.clone();
        for t in &mut out.times {
            *t /= beta;
        }
        if let Some(jumps) = &mut out.jumps {
            for j in jumps {
                j.time /= beta;
            }
        }
        Ok(out)
    }

    /// Serialize to the line-oriented text format:
    /// a `#`-prefixed header (config hash, seed, version, columns), then one
    /// record per sample with fields
    /// `replica,time_model,time_rescaled,z1,z2[,site data]`.
    pub fn to_text(&self, config_hash: &str, seed: u64) -> String {
        let beta = Self::time_scale(self.n_sites).ok();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# mcb path record v{} config={} seed={} n_sites={}",
            env!("CARGO_PKG_VERSION"),
            config_hash,
            seed,
            self.n_sites
        );
        let _ = writeln!(out, "# columns: replica,time_model,time_rescaled,z1,z2{}",
            if self.sites.is_some() { ",sites" } else { "" });
        for (i, (&t, &(z1, z2))) in self.times.iter().zip(self.totals.iter()).enumerate() {
            let tr = beta.map_or(t, |b| t / b);
            let _ = write!(out, "{},{},{},{},{}", self.replica, t, tr, z1, z2);
            if let Some(sites) = &self.sites {
                for p in &sites[i] {
                    let (x1, x2) = p.coords();
                    let _ = write!(out, ",{x1};{x2}");
                }
            }
            let _ = writeln!(out);
        }
        if let Some(jumps) = &self.jumps {
            let _ = writeln!(out, "# jumps: replica,time_model,site,axis,value,dx1,dx2");
            for j in jumps {
                let axis = match j.mark.axis {
                    Axis::Axis1 => 1,
                    Axis::Axis2 => 2,
                };
                let _ = writeln!(
                    out,
                    "J,{},{},{},{},{},{},{}",
                    self.replica, j.time, j.site, axis, j.mark.value, j.displacement.0, j.displacement.1
                );
            }
        }
        out
    }

    /// Read back the total-mass samples of records written by [`to_text`]
    /// (possibly several replicas concatenated). Site data and jump logs
    /// are skipped; this is what plot regeneration needs.
    pub fn totals_from_reader<R: BufRead>(reader: R) -> Result<Vec<PathRecord>, RecordError> {
        let mut records: Vec<PathRecord> = Vec::new();
        let mut n_sites = 0usize;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(pos) = rest.find("n_sites=") {
                    n_sites = rest[pos + 8..]
                        .split_whitespace()
                        .next()
                        .and_then(|s| s.parse().ok())
                        .unwrap_or(0);
                }
                continue;
            }
            if line.starts_with("J,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 5 {
                return Err(RecordError::Malformed(lineno + 1, line.to_string()));
            }
            let parse = |s: &str| -> Result<f64, RecordError> {
                s.parse()
                    .map_err(|_| RecordError::Malformed(lineno + 1, line.to_string()))
            };
            let replica: u64 = fields[0]
                .parse()
                .map_err(|_| RecordError::Malformed(lineno + 1, line.to_string()))?;
            let t = parse(fields[1])?;
            let z1 = parse(fields[3])?;
            let z2 = parse(fields[4])?;
            match records.last_mut() {
                Some(r) if r.replica == replica => r.push(t, (z1, z2)),
                _ => {
                    let mut r = PathRecord {
                        replica,
                        n_sites,
                        ..Default::default()
                    };
                    r.push(t, (z1, z2));
                    records.push(r);
                }
            }
        }
        Ok(records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rescaling_divides_times() {
        let mut r = PathRecord {
            n_sites: 100,
            ..Default::default()
        };
        r.push(0.0, (1.0, 1.0));
        r.push(21.714_724_095_162_591, (1.0, 1.0));
        let v = r.rescaled_view(100).unwrap();
        assert_eq!(v.times[0], 0.0);
        assert_abs_diff_eq!(v.times[1], 1.0, epsilon = 1e-12);
        assert!(r.rescaled_view(2).is_err());
        assert_abs_diff_eq!(
            PathRecord::time_scale(3).unwrap(),
            2.730_717_679_880_512,
            epsilon = 1e-12
        );
    }

    #[test]
    fn text_round_trip_preserves_totals() {
        let mut r = PathRecord {
            replica: 7,
            n_sites: 10,
            ..Default::default()
        };
        r.push(0.0, (0.5, 0.5));
        r.push(0.25, (0.625, 0.375));
        let text = r.to_text("deadbeef", 42);
        let back = PathRecord::totals_from_reader(text.as_bytes()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].replica, 7);
        assert_eq!(back[0].n_sites, 10);
        assert_eq!(back[0].totals, r.totals);
        assert_eq!(back[0].times, r.times);
    }
}
