use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{load_alist, save_alist, DegreeDistribution, ParityCheckMatrix, PegBuilder};
use crate::error::{ReconError, Result};
use crate::metrics::{binary_entropy, inverse_binary_entropy};
use crate::rng::{self, Purpose};

pub const MANIFEST: &str = "manifest.toml";

/// A base code of a Blind code set.
#[derive(Debug, Clone, PartialEq)]
pub struct BlindCode {
    pub matrix: Arc<ParityCheckMatrix>,
    /// QBER the code was dimensioned for; the decoder's channel LLRs use it.
    pub design_qber: f64,
    /// Reserved column indices for puncturing and shortening, in the order
    /// they are filled with key bits.
    pub modulated: Vec<u32>,
}

impl BlindCode {
    pub fn rate(&self) -> f64 {
        self.matrix.rate()
    }

    /// Rate on the `N - d` key positions with every modulated bit punctured.
    pub fn key_rate(&self) -> f64 {
        let n = self.matrix.n() as f64;
        let d = self.modulated.len() as f64;
        (n - self.matrix.m() as f64) / (n - d)
    }
}

/// Base codes sharing one frame size and one `d`, ordered by strictly
/// decreasing rate, plus the table mapping QBER estimates to a code.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSet {
    codes: Vec<BlindCode>,
    /// `(lowest q_hat, code index)`, ascending in q_hat.
    selection: Vec<(f64, usize)>,
}

impl CodeSet {
    pub fn new(codes: Vec<BlindCode>, selection: Vec<(f64, usize)>) -> Result<Self> {
        let first = codes
            .first()
            .ok_or_else(|| ReconError::InvalidParameter("empty code set".into()))?;
        let (n, d) = (first.matrix.n(), first.modulated.len());
        for c in &codes {
            if c.matrix.n() != n || c.modulated.len() != d {
                return Err(ReconError::InvalidParameter(
                    "codes must share frame size and modulated count".into(),
                ));
            }
            if d >= n - c.matrix.m() {
                return Err(ReconError::InvalidParameter(format!(
                    "{d} modulated bits leave no key rate at m = {}",
                    c.matrix.m()
                )));
            }
            let mut seen = c.modulated.clone();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) || seen.last().is_some_and(|&p| p as usize >= n)
            {
                return Err(ReconError::InvalidParameter(
                    "modulated positions must be distinct columns".into(),
                ));
            }
        }
        if codes.windows(2).any(|w| w[0].rate() <= w[1].rate()) {
            return Err(ReconError::InvalidParameter(
                "code rates must be strictly decreasing".into(),
            ));
        }
        if selection.is_empty()
            || selection.windows(2).any(|w| w[0].0 >= w[1].0)
            || selection.iter().any(|&(_, i)| i >= codes.len())
        {
            return Err(ReconError::InvalidParameter(
                "selection table must be ascending and reference existing codes".into(),
            ));
        }
        Ok(CodeSet { codes, selection })
    }

    /// Selection table picking the code whose key rate `1 - f H(q_design)`
    /// is nearest to `1 - f H(q_hat)`: code `i` serves estimates up to the
    /// QBER whose entropy is midway between its design QBER's and the next.
    pub fn with_design_selection(codes: Vec<BlindCode>) -> Result<Self> {
        let mut selection = vec![(0.0, 0)];
        for (i, w) in codes.windows(2).enumerate() {
            let mid = 0.5 * (binary_entropy(w[0].design_qber)? + binary_entropy(w[1].design_qber)?);
            selection.push((inverse_binary_entropy(mid)?, i + 1));
        }
        CodeSet::new(codes, selection)
    }

    pub fn codes(&self) -> &[BlindCode] {
        &self.codes
    }

    pub fn selection(&self) -> &[(f64, usize)] {
        &self.selection
    }

    pub fn frame_size(&self) -> usize {
        self.codes[0].matrix.n()
    }

    pub fn modulated_count(&self) -> usize {
        self.codes[0].modulated.len()
    }

    /// Key length `n = N - d` every code in the set reconciles.
    pub fn key_len(&self) -> usize {
        self.frame_size() - self.modulated_count()
    }

    pub fn select_index(&self, q_hat: f64) -> usize {
        let at = self.selection.partition_point(|&(lo, _)| lo <= q_hat);
        self.selection[at.saturating_sub(1)].1
    }

    pub fn select(&self, q_hat: f64) -> &BlindCode {
        &self.codes[self.select_index(q_hat)]
    }

    /// Writes alists and a manifest into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, provenance: Option<&CodeSetSpec>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut manifest = Manifest {
            spec: provenance.cloned(),
            codes: Vec::new(),
            selection: self
                .selection
                .iter()
                .map(|&(from_qber, code)| SelectionEntry { from_qber, code })
                .collect(),
        };
        for (i, c) in self.codes.iter().enumerate() {
            let alist = format!("code-{i:02}.alist");
            save_alist(&c.matrix, dir.join(&alist))?;
            manifest.codes.push(ManifestCode {
                alist,
                design_qber: c.design_qber,
                modulated: c.modulated.clone(),
            });
        }
        let text = toml::to_string(&manifest).map_err(|e| ReconError::Io(e.to_string()))?;
        fs::write(dir.join(MANIFEST), text)?;
        Ok(())
    }

    /// Loads a set from its manifest; alist paths are relative to it.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = Manifest::read(&dir.join(MANIFEST))?;
        let codes = manifest
            .codes
            .iter()
            .map(|c| {
                Ok(BlindCode {
                    matrix: Arc::new(load_alist(dir.join(&c.alist))?),
                    design_qber: c.design_qber,
                    modulated: c.modulated.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let selection = manifest
            .selection
            .iter()
            .map(|e| (e.from_qber, e.code))
            .collect();
        CodeSet::new(codes, selection)
    }

    /// The spec recorded in `dir`'s manifest, if the set was generated.
    pub fn manifest_spec(dir: impl AsRef<Path>) -> Result<Option<CodeSetSpec>> {
        Ok(Manifest::read(&dir.as_ref().join(MANIFEST))?.spec)
    }

    /// Loads `dir` when its manifest was generated from `spec`, otherwise
    /// generates the set and caches it there.
    pub fn load_or_generate(dir: impl AsRef<Path>, spec: &CodeSetSpec) -> Result<Self> {
        let dir = dir.as_ref();
        if let Ok(m) = Manifest::read(&dir.join(MANIFEST)) {
            if m.spec.as_ref() == Some(spec) {
                return CodeSet::load(dir);
            }
        }
        let set = spec.generate()?;
        set.save(dir, Some(spec))?;
        Ok(set)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    spec: Option<CodeSetSpec>,
    codes: Vec<ManifestCode>,
    selection: Vec<SelectionEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestCode {
    alist: String,
    design_qber: f64,
    modulated: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SelectionEntry {
    from_qber: f64,
    code: usize,
}

impl Manifest {
    fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| ReconError::Io(format!("{}: {e}", path.display())))
    }
}

/// Recipe for a PEG-built code set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeSetSpec {
    pub frame_size: usize,
    /// `d = floor(d_fraction * N)`.
    pub d_fraction: f64,
    pub count: usize,
    pub q_min: f64,
    pub q_max: f64,
    /// Efficiency a code reaches with all modulated bits punctured at its
    /// design QBER.
    pub f_design: f64,
    pub seed: u64,
    pub peg_depth: usize,
}

impl Default for CodeSetSpec {
    fn default() -> Self {
        CodeSetSpec {
            frame_size: 1 << 16,
            d_fraction: 0.1,
            count: 10,
            q_min: 0.01,
            q_max: 0.11,
            f_design: 1.1,
            seed: 1,
            peg_depth: PegBuilder::default().max_depth,
        }
    }
}

impl CodeSetSpec {
    pub fn modulated_count(&self) -> usize {
        (self.d_fraction * self.frame_size as f64).floor() as usize
    }

    /// Design QBERs on a logarithmic grid from `q_min` to `q_max`.
    pub fn design_qbers(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.q_min];
        }
        let ratio = (self.q_max / self.q_min).ln() / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| self.q_min * (ratio * i as f64).exp())
            .collect()
    }

    /// Syndrome length giving key rate `1 - f_design H(q)` with every
    /// modulated bit punctured: `m = d + ceil((N - d) f_design H(q))`.
    pub fn syndrome_len(&self, q: f64) -> Result<usize> {
        let d = self.modulated_count();
        let n = self.frame_size - d;
        let h = binary_entropy(q)?;
        Ok(d + (n as f64 * self.f_design * h).ceil() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.frame_size >= 16
            && self.count >= 1
            && self.d_fraction >= 0.0
            && self.d_fraction < 0.5
            && 0.0 < self.q_min
            && self.q_min <= self.q_max
            && self.q_max < 0.5
            && self.f_design >= 1.0;
        if !ok {
            return Err(ReconError::InvalidParameter(format!(
                "unusable code-set spec {self:?}"
            )));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<CodeSet> {
        self.generate_with(&DistributionLibrary::builtin())
    }

    pub fn generate_with(&self, library: &DistributionLibrary) -> Result<CodeSet> {
        self.validate()?;
        let d = self.modulated_count();
        let builder = PegBuilder {
            max_depth: self.peg_depth,
        };
        let mut codes = Vec::with_capacity(self.count);
        for (i, q) in self.design_qbers().into_iter().enumerate() {
            let m = self.syndrome_len(q)?;
            if m >= self.frame_size {
                return Err(ReconError::InvalidParameter(format!(
                    "design QBER {q} needs {m} syndrome bits"
                )));
            }
            let rate = 1.0 - m as f64 / self.frame_size as f64;
            let dist = library.nearest(rate);
            let seed = rng::derive_seed(self.seed, i as u64);
            let matrix = builder.build(self.frame_size, dist, m, seed)?;
            let mut prng = rng::stream(self.seed, Purpose::Puncture, i as u64);
            let modulated = index::sample(&mut prng, self.frame_size, d)
                .into_iter()
                .map(|p| p as u32)
                .collect();
            codes.push(BlindCode {
                matrix: Arc::new(matrix),
                design_qber: q,
                modulated,
            });
        }
        CodeSet::with_design_selection(codes)
    }
}

/// Degree distributions keyed by the mother-code rate they were tuned for.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionLibrary {
    entries: Vec<(f64, DegreeDistribution)>,
}

const BUILTIN: &[(f64, &str)] = &[
    (0.4, include_str!("../../data/degree/rate-0.40.dist")),
    (0.5, include_str!("../../data/degree/rate-0.50.dist")),
    (0.6, include_str!("../../data/degree/rate-0.60.dist")),
    (0.7, include_str!("../../data/degree/rate-0.70.dist")),
    (0.8, include_str!("../../data/degree/rate-0.80.dist")),
];

impl DistributionLibrary {
    pub fn new(entries: Vec<(f64, DegreeDistribution)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(ReconError::InvalidParameter(
                "empty distribution library".into(),
            ));
        }
        Ok(DistributionLibrary { entries })
    }

    /// The distributions shipped in `data/degree`.
    pub fn builtin() -> Self {
        DistributionLibrary {
            entries: BUILTIN
                .iter()
                .map(|&(r, text)| (r, text.parse().expect("shipped distribution parses")))
                .collect(),
        }
    }

    /// Reads every `rate-<R>.dist` file in `dir`.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let mut entries = Vec::new();
        for entry in fs::read_dir(dir)? {
            let path: PathBuf = entry?.path();
            let Some(rate) = path
                .file_name()
                .and_then(|f| f.to_str())
                .and_then(|f| f.strip_prefix("rate-")?.strip_suffix(".dist"))
                .and_then(|r| r.parse::<f64>().ok())
            else {
                continue;
            };
            entries.push((rate, fs::read_to_string(&path)?.parse()?));
        }
        entries.sort_by(|a: &(f64, DegreeDistribution), b| a.0.total_cmp(&b.0));
        DistributionLibrary::new(entries)
    }

    pub fn nearest(&self, rate: f64) -> &DegreeDistribution {
        &self
            .entries
            .iter()
            .min_by(|a, b| (a.0 - rate).abs().total_cmp(&(b.0 - rate).abs()))
            .expect("library is non-empty")
            .1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> CodeSetSpec {
        CodeSetSpec {
            frame_size: 2000,
            count: 4,
            q_min: 0.02,
            q_max: 0.08,
            ..CodeSetSpec::default()
        }
    }

    #[test]
    fn design_grid_is_logarithmic() {
        let qs = CodeSetSpec::default().design_qbers();
        assert_eq!(qs.len(), 10);
        assert!((qs[0] - 0.01).abs() < 1e-15 && (qs[9] - 0.11).abs() < 1e-12);
        let r = qs[1] / qs[0];
        assert!(qs.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-12));
    }

    #[test]
    fn punctured_key_rate_hits_design_efficiency() {
        let spec = small_spec();
        let set = spec.generate().unwrap();
        let n = set.key_len() as f64;
        for c in set.codes() {
            let f = (1.0 - c.key_rate()) / binary_entropy(c.design_qber).unwrap();
            assert!(f >= spec.f_design && f < spec.f_design + 1.0 / (n * 0.1));
        }
        assert_eq!(set.modulated_count(), 200);
    }

    #[test]
    fn selection_picks_nearest_rate() {
        let set = small_spec().generate().unwrap();
        let h: Vec<f64> = set
            .codes()
            .iter()
            .map(|c| binary_entropy(c.design_qber).unwrap())
            .collect();
        let nearest = |q: f64| {
            let hq = binary_entropy(q).unwrap();
            (0..h.len())
                .min_by(|&a, &b| (h[a] - hq).abs().total_cmp(&(h[b] - hq).abs()))
                .unwrap()
        };
        for i in 1..200 {
            let q = f64::from(i) * 0.0005;
            assert_eq!(set.select_index(q), nearest(q), "q_hat {q}");
        }
        assert_eq!(set.select_index(0.001), 0);
        assert_eq!(set.select_index(0.4), 3);
        for (i, c) in set.codes().iter().enumerate() {
            assert_eq!(set.select_index(c.design_qber), i);
        }
    }

    #[test]
    fn manifest_round_trip_and_cache() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec();
        let set = CodeSet::load_or_generate(dir.path(), &spec).unwrap();
        assert_eq!(CodeSet::load(dir.path()).unwrap(), set);
        let again = CodeSet::load_or_generate(dir.path(), &spec).unwrap();
        assert_eq!(again, set);
        let other = CodeSetSpec { seed: 2, ..spec };
        assert_ne!(CodeSet::load_or_generate(dir.path(), &other).unwrap(), set);
    }

    #[test]
    fn rejects_unordered_sets() {
        let set = small_spec().generate().unwrap();
        let mut codes = set.codes().to_vec();
        codes.swap(0, 1);
        assert!(CodeSet::with_design_selection(codes).is_err());
        assert!(CodeSet::new(set.codes().to_vec(), vec![]).is_err());
    }

    #[test]
    fn builtin_library_covers_mother_rates() {
        let lib = DistributionLibrary::builtin();
        for r in [0.4, 0.55, 0.82] {
            assert!((lib.nearest(r).terms().iter().map(|t| t.1).sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}
